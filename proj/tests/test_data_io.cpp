#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unistd.h>
#include <vector>

#include "nemb/data_io.hpp"
#include "nemb/util.hpp"

using namespace nemb;
namespace fs = std::filesystem;

namespace {

// Per-process scratch directory, wiped lazily by the OS.
fs::path scratch() {
  static fs::path dir = [] {
    fs::path p = fs::temp_directory_path() /
                 ("nemb_dataio_" + std::to_string(static_cast<long>(::getpid())));
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string path_for(const std::string& name) { return (scratch() / name).string(); }

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

}  // namespace

TEST_CASE("datasets round-trip through JSON lines") {
  std::vector<DatasetItem> items = {
      {"d1", "g1", Role::kBoth, "some text here."},
      {"d2", "g1", Role::kAnchorOnly, ""},
      {"d3", "g2", Role::kCandidateOnly, "more text."},
  };
  const std::string path = path_for("roundtrip.jsonl");
  save_dataset(items, path);
  std::vector<DatasetItem> back = load_dataset(path);
  REQUIRE(back.size() == 3);
  for (size_t i = 0; i < items.size(); ++i) {
    CHECK(back[i].id == items[i].id);
    CHECK(back[i].group == items[i].group);
    CHECK(back[i].role == items[i].role);
    CHECK(back[i].text == items[i].text);
  }
}

TEST_CASE("dataset loader defaults role and skips blank lines") {
  const std::string path = path_for("minimal.jsonl");
  write_text(path,
             R"({"id": "a", "group": "g"})"
             "\n\n"
             R"({"id": "b", "group": "g", "role": "anchor_only", "text": "hi"})"
             "\n");
  std::vector<DatasetItem> items = load_dataset(path);
  REQUIRE(items.size() == 2);
  CHECK(items[0].role == Role::kBoth);
  CHECK(items[0].text.empty());
  CHECK(items[1].role == Role::kAnchorOnly);
  CHECK(items[1].text == "hi");
}

TEST_CASE("dataset loader names the offending line") {
  const std::string bad_json = path_for("bad_json.jsonl");
  write_text(bad_json, "{\"id\": \"a\", \"group\": \"g\"}\nnot json\n");
  CHECK_THROWS_WITH_AS(load_dataset(bad_json), doctest::Contains("dataset line 2: invalid JSON"),
                       std::runtime_error);

  const std::string no_id = path_for("no_id.jsonl");
  write_text(no_id, "{\"group\": \"g\"}\n");
  CHECK_THROWS_WITH_AS(load_dataset(no_id), "dataset line 1: missing or empty 'id'",
                       std::runtime_error);

  const std::string no_group = path_for("no_group.jsonl");
  write_text(no_group, "{\"id\": \"a\"}\n");
  CHECK_THROWS_WITH_AS(load_dataset(no_group),
                       "dataset line 1: missing or empty 'group'", std::runtime_error);

  const std::string dup = path_for("dup.jsonl");
  write_text(dup,
             "{\"id\": \"a\", \"group\": \"g\"}\n{\"id\": \"a\", \"group\": \"h\"}\n");
  CHECK_THROWS_WITH_AS(load_dataset(dup), "dataset line 2: duplicate id: a",
                       std::runtime_error);

  CHECK_THROWS_AS(load_dataset(path_for("missing.jsonl")), std::runtime_error);
}

TEST_CASE("vocabulary files round-trip") {
  Vocabulary vocab = build_vocab({"alpha beta gamma. alpha!"}, 12);
  const std::string path = path_for("vocab.txt");
  save_vocab(vocab, path);
  Vocabulary back = load_vocab(path);
  CHECK(back.id_to_token == vocab.id_to_token);
  CHECK(back.size() == vocab.size());
  CHECK(back.lookup("alpha") == vocab.lookup("alpha"));
}

TEST_CASE("vocabulary loader insists on the special-token header") {
  const std::string path = path_for("bad_vocab.txt");
  write_text(path, "[PAD]\n[MASK]\n[UNK]\n[SEP]\n[CLS]\nword\n");  // swapped
  CHECK_THROWS_WITH_AS(load_vocab(path),
                       doctest::Contains("vocabulary does not start with the special tokens"),
                       std::runtime_error);

  const std::string tiny = path_for("tiny_vocab.txt");
  write_text(tiny, "[PAD]\n[MASK]\n");
  CHECK_THROWS_WITH_AS(load_vocab(tiny), doctest::Contains("vocabulary too small"),
                       std::runtime_error);

  const std::string dup = path_for("dup_vocab.txt");
  write_text(dup, "[PAD]\n[MASK]\n[UNK]\n[CLS]\n[SEP]\nword\nword\n");
  CHECK_THROWS_WITH_AS(load_vocab(dup), doctest::Contains("vocabulary line 7: duplicate token"),
                       std::runtime_error);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  ModelConfig cfg;
  cfg.vocab_size = 40;
  cfg.num_blocks = 1;
  cfg.hidden_dim = 16;
  cfg.num_heads = 2;
  cfg.ffn_dim = 32;
  cfg.max_input_len = 16;
  ParameterStore params = ParameterStore::initialized(cfg, 1234);
  const std::string path = path_for("model.ckpt");
  save_checkpoint(params, "vocab.txt", path);

  LoadedCheckpoint loaded = load_checkpoint(path);
  CHECK(loaded.vocab_path == "vocab.txt");
  CHECK(loaded.params == params);
  CHECK(loaded.params.config().vocab_size == 40);
  CHECK(loaded.params.config().max_input_len == 16);
}

TEST_CASE("checkpoint loader rejects foreign and truncated files") {
  const std::string not_ckpt = path_for("not_ckpt.bin");
  write_text(not_ckpt, "PNG!garbage");
  CHECK_THROWS_WITH_AS(load_checkpoint(not_ckpt),
                       doctest::Contains("not a model checkpoint"),
                       std::runtime_error);

  ModelConfig cfg;
  cfg.vocab_size = 10;
  cfg.num_blocks = 1;
  cfg.hidden_dim = 8;
  cfg.num_heads = 2;
  cfg.ffn_dim = 16;
  cfg.max_input_len = 8;
  ParameterStore params = ParameterStore::initialized(cfg, 5);
  const std::string full = path_for("full.ckpt");
  save_checkpoint(params, "v.txt", full);
  std::ifstream in(full, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  const std::string truncated = path_for("trunc.ckpt");
  write_text(truncated, bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(truncated), std::runtime_error);
}

TEST_CASE("embedding stores round-trip through 32-bit rows") {
  EmbeddingMatrix m(3);
  Rng rng(8);
  for (int i = 0; i < 5; ++i) {
    std::vector<double> row(3);
    double norm = 0.0;
    for (double& x : row) {
      x = rng.normal();
      norm += x * x;
    }
    for (double& x : row) x /= std::sqrt(norm);
    m.add("id" + std::to_string(i), row);
  }
  m.set_fingerprint("test-fingerprint");
  const std::string path = path_for("store.nev");
  save_embeddings(m, path);

  EmbeddingMatrix back = load_embeddings(path);
  CHECK(back.dim() == 3);
  CHECK(back.count() == 5);
  CHECK(back.fingerprint() == "test-fingerprint");
  for (size_t i = 0; i < m.count(); ++i) {
    auto found = back.find(m.ids()[i]);
    REQUIRE(found.has_value());
    auto want = m.row(i);
    auto got = back.row(*found);
    double norm = 0.0;
    for (size_t j = 0; j < 3; ++j) {
      CHECK(got[j] == doctest::Approx(want[j]).epsilon(1e-6));
      norm += got[j] * got[j];
    }
    // renormalized on load despite the f32 quantization
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("embedding store loader rejects foreign files and empty stores work") {
  const std::string path = path_for("not_store.bin");
  write_text(path, "JUNKJUNKJUNK");
  CHECK_THROWS_WITH_AS(load_embeddings(path),
                       doctest::Contains("not an embedding store"),
                       std::runtime_error);

  EmbeddingMatrix empty;
  const std::string empty_path = path_for("empty.nev");
  save_embeddings(empty, empty_path);
  EmbeddingMatrix back = load_embeddings(empty_path);
  CHECK(back.count() == 0);
}

TEST_CASE("broken sets round-trip sorted") {
  BrokenSet set = {{"a", "b", "c"}, {"a", "b", "d"}, {"x", "y", "z"}};
  const std::string path = path_for("broken.tsv");
  save_broken_set(set, path);
  BrokenSet back = load_broken_set(path);
  CHECK(back == set);

  const std::string bad = path_for("bad_broken.tsv");
  write_text(bad, "a\tb\n");
  CHECK_THROWS_WITH_AS(load_broken_set(bad),
                       "broken set line 1: expected three tab-separated ids",
                       std::runtime_error);
}

TEST_CASE("jsonl vector import normalizes and rejects zero vectors") {
  const std::string path = path_for("import.jsonl");
  write_text(path,
             R"({"id": "ok", "vector": [3.0, 4.0]})"
             "\n"
             R"({"id": "zero", "vector": [0.0, 0.0]})"
             "\n"
             R"({"id": "ok2", "vector": [0.0, 2.0]})"
             "\n");
  EmbeddingMatrix out;
  ImportReport report = import_external(path, "jsonl-vectors", out);
  CHECK(report.imported == 2);
  CHECK(report.rejected_ids == std::vector<std::string>{"zero"});
  REQUIRE(out.count() == 2);
  auto ok = out.row(*out.find("ok"));
  CHECK(ok[0] == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(ok[1] == doctest::Approx(0.8).epsilon(1e-9));
  auto ok2 = out.row(*out.find("ok2"));
  CHECK(ok2[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("csv vector import parses ids and rejects non-finite rows") {
  const std::string path = path_for("import.csv");
  write_text(path, "v1,1.0,0.0,0.0\nv2,0.0,3.0,4.0\nv3,nan,0.0,1.0\nv4,inf,0.0,0.0\n");
  EmbeddingMatrix out;
  ImportReport report = import_external(path, "csv-vectors", out);
  CHECK(report.imported == 2);
  CHECK(report.rejected_ids == std::vector<std::string>{"v3", "v4"});
  auto v2 = out.row(*out.find("v2"));
  CHECK(v2[1] == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(v2[2] == doctest::Approx(0.8).epsilon(1e-9));
}

TEST_CASE("vector import rejects structural damage outright") {
  const std::string ragged = path_for("ragged.jsonl");
  write_text(ragged,
             R"({"id": "a", "vector": [1.0, 0.0]})"
             "\n"
             R"({"id": "b", "vector": [1.0, 0.0, 0.0]})"
             "\n");
  EmbeddingMatrix out;
  CHECK_THROWS_AS(import_external(ragged, "jsonl-vectors", out), std::runtime_error);

  const std::string dup = path_for("dup_import.csv");
  write_text(dup, "a,1.0,2.0\na,3.0,4.0\n");
  EmbeddingMatrix out2;
  CHECK_THROWS_AS(import_external(dup, "csv-vectors", out2), std::runtime_error);

  const std::string malformed = path_for("malformed.jsonl");
  write_text(malformed, "not json at all\n");
  EmbeddingMatrix out3;
  CHECK_THROWS_AS(import_external(malformed, "jsonl-vectors", out3),
                  std::runtime_error);

  const std::string fine = path_for("fine.csv");
  write_text(fine, "a,1.0,2.0\n");
  EmbeddingMatrix out4;
  CHECK_THROWS_AS(import_external(fine, "tsv", out4), std::invalid_argument);
}

TEST_CASE("saving and loading an imported store is stable") {
  const std::string src = path_for("stable.csv");
  write_text(src, "s1,0.5,0.5\ns2,-1.0,1.0\n");
  EmbeddingMatrix first;
  import_external(src, "csv-vectors", first);
  const std::string store1 = path_for("stable1.nev");
  save_embeddings(first, store1);
  EmbeddingMatrix second = load_embeddings(store1);
  const std::string store2 = path_for("stable2.nev");
  save_embeddings(second, store2);
  CHECK(fnv1a64_file(store1) == fnv1a64_file(store2));
}
