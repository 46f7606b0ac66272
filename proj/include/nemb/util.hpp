#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace nemb {

// Deterministic RNG used everywhere randomness is needed. All draws go
// through explicit helpers so sequences are identical across platforms
// (std::uniform_int_distribution and friends are implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Unbiased integer in [0, n), n >= 1. Rejection sampling.
  uint64_t uniform_below(uint64_t n);

  // Uniform in [0, 1) with 53 bits of entropy.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// In-place Fisher-Yates shuffle driven by the given RNG.
template <typename T>
void fisher_yates_shuffle(std::vector<T>& v, Rng& rng) {
  if (v.size() < 2) return;
  for (size_t i = v.size() - 1; i > 0; --i) {
    const size_t j = static_cast<size_t>(rng.uniform_below(i + 1));
    std::swap(v[i], v[j]);
  }
}

// Dot product with four independent accumulators; the fixed association
// keeps results identical across optimization levels while still
// vectorizing.
inline double dot_product(const double* a, const double* b, size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; k < n; ++k) s += a[k] * b[k];
  return s;
}

inline constexpr uint64_t kFnvBasis = 0xcbf29ce484222325ULL;

uint64_t fnv1a64(const void* data, size_t n, uint64_t h = kFnvBasis);
uint64_t fnv1a64(const std::string& s, uint64_t h = kFnvBasis);
uint64_t fnv1a64_file(const std::string& path);  // throws if unreadable

std::string hex64(uint64_t v);

// Log levels from the NEMB_LOG environment variable:
// "quiet" < "warn" (default) < "info" < "debug".
enum class LogLevel : int { kQuiet = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

LogLevel log_level();
void log_warn(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

std::vector<std::string> split_string(const std::string& s, char sep);
std::string trim(const std::string& s);

}  // namespace nemb
