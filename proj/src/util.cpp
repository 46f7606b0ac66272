#include "nemb/util.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <stdexcept>

namespace nemb {

uint64_t Rng::uniform_below(uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
  if (n == 1) return 0;
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

uint64_t fnv1a64(const void* data, size_t n, uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t fnv1a64(const std::string& s, uint64_t h) {
  return fnv1a64(s.data(), s.size(), h);
}

uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file for hashing: " + path);
  uint64_t h = kFnvBasis;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h = fnv1a64(buf, static_cast<size_t>(in.gcount()), h);
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("NEMB_LOG");
    if (env == nullptr) return LogLevel::kWarn;
    const std::string v(env);
    if (v == "quiet") return LogLevel::kQuiet;
    if (v == "info") return LogLevel::kInfo;
    if (v == "debug") return LogLevel::kDebug;
    return LogLevel::kWarn;
  }();
  return level;
}

namespace {
void log_at(LogLevel at, const char* tag, const std::string& msg) {
  if (static_cast<int>(log_level()) >= static_cast<int>(at)) {
    std::cerr << "[nemb " << tag << "] " << msg << "\n";
  }
}
}  // namespace

void log_warn(const std::string& msg) { log_at(LogLevel::kWarn, "warn", msg); }
void log_info(const std::string& msg) { log_at(LogLevel::kInfo, "info", msg); }
void log_debug(const std::string& msg) { log_at(LogLevel::kDebug, "debug", msg); }

std::vector<std::string> split_string(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string trim(const std::string& s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace nemb
