#include "nemb/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <type_traits>

#include <json.hpp>

#include "nemb/util.hpp"

namespace nemb {

namespace {

using nlohmann::json;

std::ifstream open_input(const std::string& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

void write_bytes(std::ofstream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::ifstream& in, void* p, size_t n, const std::string& path) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n) {
    throw std::runtime_error("unexpected end of file in " + path);
  }
}

// All integers and floats on disk are little-endian. The helpers go through
// byte swaps only on big-endian hosts.
template <typename T>
T to_little_endian(T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    T out;
    auto* src = reinterpret_cast<const unsigned char*>(&v);
    auto* dst = reinterpret_cast<unsigned char*>(&out);
    for (size_t i = 0; i < sizeof(T); ++i) dst[i] = src[sizeof(T) - 1 - i];
    return out;
  }
}

template <typename T>
void write_le(std::ofstream& out, T v) {
  const T le = to_little_endian(v);
  write_bytes(out, &le, sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in, const std::string& path) {
  T v;
  read_bytes(in, &v, sizeof(T), path);
  return to_little_endian(v);
}

void write_str(std::ofstream& out, const std::string& s) {
  write_le<uint32_t>(out, static_cast<uint32_t>(s.size()));
  write_bytes(out, s.data(), s.size());
}

std::string read_str(std::ifstream& in, const std::string& path, uint32_t max_len) {
  const uint32_t n = read_le<uint32_t>(in, path);
  if (n > max_len) throw std::runtime_error("corrupt string length in " + path);
  std::string s(n, '\0');
  if (n > 0) read_bytes(in, s.data(), n, path);
  return s;
}

void write_f32(std::ofstream& out, double v) {
  write_le<float>(out, static_cast<float>(v));
}

std::string line_tag(size_t line_no) { return "line " + std::to_string(line_no); }

}  // namespace

std::vector<DatasetItem> load_dataset(const std::string& path) {
  std::ifstream in = open_input(path, false);
  std::vector<DatasetItem> items;
  std::unordered_map<std::string, size_t> seen;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("dataset " + line_tag(line_no) + ": invalid JSON: " +
                               e.what());
    }
    if (!obj.is_object()) {
      throw std::runtime_error("dataset " + line_tag(line_no) + ": not a JSON object");
    }
    DatasetItem item;
    if (!obj.contains("id") || !obj["id"].is_string() ||
        obj["id"].get<std::string>().empty()) {
      throw std::runtime_error("dataset " + line_tag(line_no) +
                               ": missing or empty 'id'");
    }
    item.id = obj["id"].get<std::string>();
    if (!obj.contains("group") || !obj["group"].is_string() ||
        obj["group"].get<std::string>().empty()) {
      throw std::runtime_error("dataset " + line_tag(line_no) +
                               ": missing or empty 'group'");
    }
    item.group = obj["group"].get<std::string>();
    if (obj.contains("role")) {
      if (!obj["role"].is_string()) {
        throw std::runtime_error("dataset " + line_tag(line_no) + ": 'role' must be a string");
      }
      try {
        item.role = role_from_string(obj["role"].get<std::string>());
      } catch (const std::exception& e) {
        throw std::runtime_error("dataset " + line_tag(line_no) + ": " + e.what());
      }
    }
    if (obj.contains("text")) {
      if (!obj["text"].is_string()) {
        throw std::runtime_error("dataset " + line_tag(line_no) + ": 'text' must be a string");
      }
      item.text = obj["text"].get<std::string>();
    }
    auto [it, inserted] = seen.emplace(item.id, line_no);
    if (!inserted) {
      throw std::runtime_error("dataset " + line_tag(line_no) + ": duplicate id: " +
                               item.id);
    }
    items.push_back(std::move(item));
  }
  return items;
}

void save_dataset(const std::vector<DatasetItem>& items, const std::string& path) {
  std::ofstream out = open_output(path, false);
  for (const auto& item : items) {
    json obj;
    obj["id"] = item.id;
    obj["group"] = item.group;
    obj["role"] = role_to_string(item.role);
    if (!item.text.empty()) obj["text"] = item.text;
    out << obj.dump() << "\n";
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

void save_vocab(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out = open_output(path, false);
  for (const auto& token : vocab.id_to_token) out << token << "\n";
  if (!out) throw std::runtime_error("failed writing " + path);
}

Vocabulary load_vocab(const std::string& path) {
  std::ifstream in = open_input(path, false);
  Vocabulary vocab;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      throw std::runtime_error("vocabulary " + line_tag(line_no) + ": empty token");
    }
    if (!vocab.token_to_id.emplace(line, vocab.size()).second) {
      throw std::runtime_error("vocabulary " + line_tag(line_no) + ": duplicate token: " +
                               line);
    }
    vocab.id_to_token.push_back(line);
  }
  if (vocab.size() < kNumSpecialTokens + 1) {
    throw std::runtime_error("vocabulary too small in " + path);
  }
  for (int i = 0; i < kNumSpecialTokens; ++i) {
    if (vocab.id_to_token[static_cast<size_t>(i)] != kSpecialTokens[static_cast<size_t>(i)]) {
      throw std::runtime_error("vocabulary does not start with the special tokens: " +
                               path);
    }
  }
  return vocab;
}

namespace {

constexpr char kCheckpointMagic[4] = {'N', 'E', 'M', 'B'};
constexpr char kStoreMagic[4] = {'N', 'E', 'V', '1'};
constexpr uint32_t kCheckpointVersion = 1;
constexpr uint32_t kMaxStringLen = 1u << 20;

}  // namespace

void save_checkpoint(const ParameterStore& params, const std::string& vocab_path,
                     const std::string& path) {
  std::ofstream out = open_output(path, true);
  write_bytes(out, kCheckpointMagic, 4);
  write_le<uint32_t>(out, kCheckpointVersion);
  const ModelConfig& cfg = params.config();
  write_le<uint32_t>(out, static_cast<uint32_t>(cfg.vocab_size));
  write_le<uint32_t>(out, static_cast<uint32_t>(cfg.num_blocks));
  write_le<uint32_t>(out, static_cast<uint32_t>(cfg.hidden_dim));
  write_le<uint32_t>(out, static_cast<uint32_t>(cfg.num_heads));
  write_le<uint32_t>(out, static_cast<uint32_t>(cfg.ffn_dim));
  write_le<uint32_t>(out, static_cast<uint32_t>(cfg.max_input_len));
  write_str(out, vocab_path);
  write_le<uint64_t>(out, static_cast<uint64_t>(params.names().size()));
  for (const auto& name : params.names()) {
    const Tensor& t = params.tensor(name);
    write_str(out, name);
    out.put(static_cast<char>(1));  // f64
    write_le<uint32_t>(out, static_cast<uint32_t>(t.shape.size()));
    for (const size_t d : t.shape) write_le<uint64_t>(out, static_cast<uint64_t>(d));
    for (const double v : t.data) write_le<double>(out, v);
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in = open_input(path, true);
  char magic[4];
  read_bytes(in, magic, 4, path);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw std::runtime_error("not a model checkpoint: " + path);
  }
  const uint32_t version = read_le<uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                             " in " + path);
  }
  ModelConfig cfg;
  cfg.vocab_size = static_cast<int>(read_le<uint32_t>(in, path));
  cfg.num_blocks = static_cast<int>(read_le<uint32_t>(in, path));
  cfg.hidden_dim = static_cast<int>(read_le<uint32_t>(in, path));
  cfg.num_heads = static_cast<int>(read_le<uint32_t>(in, path));
  cfg.ffn_dim = static_cast<int>(read_le<uint32_t>(in, path));
  cfg.max_input_len = static_cast<int>(read_le<uint32_t>(in, path));
  cfg.validate();

  LoadedCheckpoint loaded;
  loaded.vocab_path = read_str(in, path, kMaxStringLen);
  loaded.params.set_config(cfg);

  const uint64_t count = read_le<uint64_t>(in, path);
  for (uint64_t i = 0; i < count; ++i) {
    const std::string name = read_str(in, path, kMaxStringLen);
    char dtype = 0;
    read_bytes(in, &dtype, 1, path);
    if (dtype != 0 && dtype != 1) {
      throw std::runtime_error("unknown tensor dtype in " + path);
    }
    const uint32_t ndim = read_le<uint32_t>(in, path);
    if (ndim > 8) throw std::runtime_error("corrupt tensor rank in " + path);
    std::vector<size_t> shape(ndim);
    size_t total = 1;
    for (auto& d : shape) {
      d = static_cast<size_t>(read_le<uint64_t>(in, path));
      if (d == 0 || d > (1u << 28) || total > (1u << 28)) {
        throw std::runtime_error("corrupt tensor shape in " + path);
      }
      total *= d;
    }
    Tensor t(shape);
    if (dtype == 1) {
      for (auto& v : t.data) v = read_le<double>(in, path);
    } else {
      for (auto& v : t.data) v = static_cast<double>(read_le<float>(in, path));
    }
    loaded.params.add(name, std::move(t));
  }
  return loaded;
}

void save_embeddings(const EmbeddingMatrix& embeddings, const std::string& path) {
  std::ofstream out = open_output(path, true);
  write_bytes(out, kStoreMagic, 4);
  write_le<uint32_t>(out, static_cast<uint32_t>(embeddings.dim()));
  write_le<uint64_t>(out, static_cast<uint64_t>(embeddings.count()));
  write_str(out, embeddings.fingerprint());
  for (size_t i = 0; i < embeddings.count(); ++i) {
    write_str(out, embeddings.ids()[i]);
    for (const double v : embeddings.row(i)) write_f32(out, v);
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

EmbeddingMatrix load_embeddings(const std::string& path) {
  std::ifstream in = open_input(path, true);
  char magic[4];
  read_bytes(in, magic, 4, path);
  if (std::memcmp(magic, kStoreMagic, 4) != 0) {
    throw std::runtime_error("not an embedding store: " + path);
  }
  const uint32_t dim = read_le<uint32_t>(in, path);
  if (dim > (1u << 24)) {
    throw std::runtime_error("corrupt dimension in " + path);
  }
  const uint64_t count = read_le<uint64_t>(in, path);
  EmbeddingMatrix out(dim);
  out.set_fingerprint(read_str(in, path, kMaxStringLen));
  std::vector<double> row(dim);
  for (uint64_t i = 0; i < count; ++i) {
    const std::string id = read_str(in, path, kMaxStringLen);
    for (auto& v : row) v = static_cast<double>(read_le<float>(in, path));
    out.add(id, row);
  }
  out.normalize_rows();
  return out;
}

void save_broken_set(const BrokenSet& set, const std::string& path) {
  std::ofstream out = open_output(path, false);
  for (const auto& t : set) {
    out << t.anchor << "\t" << t.same << "\t" << t.diff << "\n";
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

BrokenSet load_broken_set(const std::string& path) {
  std::ifstream in = open_input(path, false);
  BrokenSet set;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto parts = split_string(line, '\t');
    if (parts.size() != 3) {
      throw std::runtime_error("broken set " + line_tag(line_no) +
                               ": expected three tab-separated ids");
    }
    set.push_back({parts[0], parts[1], parts[2]});
  }
  std::sort(set.begin(), set.end());
  return set;
}

ImportReport import_external(const std::string& path, const std::string& format,
                             EmbeddingMatrix& out) {
  const bool jsonl = format == "jsonl-vectors";
  const bool csv = format == "csv-vectors";
  if (!jsonl && !csv) throw std::invalid_argument("unknown import format: " + format);

  std::ifstream in = open_input(path, false);
  ImportReport report;
  std::string line;
  size_t line_no = 0;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::string id;
    row.clear();
    try {
      if (jsonl) {
        const json obj = json::parse(line);
        if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() ||
            !obj.contains("vector") || !obj["vector"].is_array()) {
          throw std::runtime_error("expected {\"id\": ..., \"vector\": [...]}");
        }
        id = obj["id"].get<std::string>();
        for (const auto& v : obj["vector"]) {
          if (!v.is_number()) throw std::runtime_error("non-numeric vector entry");
          row.push_back(v.get<double>());
        }
      } else {
        const auto parts = split_string(line, ',');
        if (parts.size() < 2) throw std::runtime_error("expected id,v1,...,vd");
        id = trim(parts[0]);
        for (size_t i = 1; i < parts.size(); ++i) {
          size_t used = 0;
          const std::string field = trim(parts[i]);
          row.push_back(std::stod(field, &used));
          if (used != field.size()) throw std::runtime_error("bad number: " + field);
        }
      }
      if (id.empty()) throw std::runtime_error("empty id");
    } catch (const std::exception& e) {
      throw std::runtime_error("import " + line_tag(line_no) + ": " + e.what());
    }

    double sq = 0.0;
    bool finite = true;
    for (const double v : row) {
      if (!std::isfinite(v)) finite = false;
      sq += v * v;
    }
    if (!finite || sq <= 0.0) {
      report.rejected_ids.push_back(id);
      log_warn("import " + line_tag(line_no) + ": rejected '" + id + "' (" +
               (finite ? "zero vector" : "NaN/Inf component") + ")");
      continue;
    }
    out.add(id, row);  // ragged dimensions and duplicates throw here
    ++report.imported;
  }
  out.normalize_rows();
  return report;
}

}  // namespace nemb
