// nemb: micro-tuning weight-delta embeddings toolkit.
//
// Subcommands: pretrain (toy MLM from a corpus), embed (texts -> embedding
// store), eval (triplet error report, optionally comparing two stores),
// count (triplet combinatorics only), bench (epochs-grid timing/error table),
// synth (topic-structured synthetic dataset + corpus).
//
// Every file-producing command writes <out>.manifest.json with the full
// configuration, input/output hashes and timing, sufficient to rerun it.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nemb/data_io.hpp"
#include "nemb/embedder.hpp"
#include "nemb/evaluation.hpp"
#include "nemb/model.hpp"
#include "nemb/synth.hpp"
#include "nemb/tokenizer.hpp"
#include "nemb/util.hpp"

namespace {

using nemb::EmbeddingMatrix;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitInvalid = 2;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

// The checkpoint records the vocabulary path as given at save time; when that
// is relative it is also tried next to the checkpoint file.
std::string resolve_vocab_path(const std::string& checkpoint_path,
                               const std::string& recorded) {
  namespace fs = std::filesystem;
  if (fs::exists(recorded)) return recorded;
  const fs::path sibling = fs::path(checkpoint_path).parent_path() / recorded;
  if (fs::exists(sibling)) return sibling.string();
  throw std::runtime_error("cannot open vocabulary " + recorded + " (checkpoint " +
                           checkpoint_path + ")");
}

struct Manifest {
  json j;

  explicit Manifest(const std::string& command) {
    j["tool"] = "nemb";
    j["version"] = kVersion;
    j["command"] = command;
    j["config"] = json::object();
    j["inputs"] = json::object();
    j["outputs"] = json::object();
    j["timing"] = json::object();
  }

  void input(const std::string& key, const std::string& path) {
    j["inputs"][key] = {{"path", path},
                        {"fnv1a64", nemb::hex64(nemb::fnv1a64_file(path))}};
  }
  void output(const std::string& key, const std::string& path) {
    j["outputs"][key] = {{"path", path},
                         {"fnv1a64", nemb::hex64(nemb::fnv1a64_file(path))}};
  }
  void save(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("failed writing " + path);
  }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// pretrain

struct PretrainArgs {
  std::string corpus;
  std::string out;
  int vocab_size = 2000;
  int steps = 300;
  int batch_size = 30;
  double lr = 1e-3;
  double weight_decay = 0.01;
  double mask_prob = 0.15;
  uint64_t seed = 0;
  int heldout_every = 10;
  int blocks = 2;
  int hidden = 64;
  int heads = 4;
  int ffn = 256;
  int max_len = 128;
};

int cmd_pretrain(const PretrainArgs& a) {
  const auto start = std::chrono::steady_clock::now();
  const auto lines = read_lines(a.corpus);
  nemb::Vocabulary vocab = nemb::build_vocab(lines, static_cast<size_t>(a.vocab_size));

  nemb::ModelConfig config;
  config.vocab_size = vocab.size();
  config.num_blocks = a.blocks;
  config.hidden_dim = a.hidden;
  config.num_heads = a.heads;
  config.ffn_dim = a.ffn;
  config.max_input_len = a.max_len;

  nemb::PretrainOptions opts;
  opts.steps = a.steps;
  opts.batch_size = a.batch_size;
  opts.lr = a.lr;
  opts.weight_decay = a.weight_decay;
  opts.mask_prob = a.mask_prob;
  opts.seed = a.seed;
  opts.heldout_every = a.heldout_every;

  const nemb::PretrainResult result = nemb::pretrain(lines, vocab, config, opts);

  const std::string vocab_path = a.out + ".vocab";
  nemb::save_vocab(vocab, vocab_path);
  nemb::save_checkpoint(result.params, vocab_path, a.out);

  std::cout << "train_chunks " << result.train_chunks << "\n"
            << "heldout_chunks " << result.heldout_chunks << "\n"
            << "init_heldout_loss " << fmt(result.init_heldout_loss) << "\n"
            << "final_heldout_loss " << fmt(result.final_heldout_loss) << "\n"
            << "final_train_loss " << fmt(result.final_train_loss) << "\n";

  Manifest m("pretrain");
  m.j["config"] = {{"vocab_size", a.vocab_size}, {"steps", a.steps},
                   {"batch_size", a.batch_size}, {"lr", a.lr},
                   {"weight_decay", a.weight_decay}, {"mask_prob", a.mask_prob},
                   {"heldout_every", a.heldout_every}, {"blocks", a.blocks},
                   {"hidden", a.hidden}, {"heads", a.heads}, {"ffn", a.ffn},
                   {"max_len", a.max_len}};
  m.j["seeds"] = {{"seed", a.seed}};
  m.j["results"] = {{"train_chunks", result.train_chunks},
                    {"heldout_chunks", result.heldout_chunks},
                    {"init_heldout_loss", result.init_heldout_loss},
                    {"final_heldout_loss", result.final_heldout_loss},
                    {"final_train_loss", result.final_train_loss}};
  m.input("corpus", a.corpus);
  m.output("checkpoint", a.out);
  m.output("vocab", vocab_path);
  m.j["timing"]["total_seconds"] = seconds_since(start);
  m.save(a.out + ".manifest.json");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// embed

struct TuneArgs {
  std::string blueprints = "2:1,1:1,1:2,1:3";
  int epochs = 20;
  double lr = 5e-5;
  int batch_size = 30;
  double weight_decay = 0.01;
  uint64_t seed = 0;
  std::string layers;  // comma-separated parameter names; empty = default
};

nemb::MicroTuneConfig tune_config(const TuneArgs& a, const std::string& checkpoint_path) {
  nemb::MicroTuneConfig config;
  config.blueprints = nemb::BlueprintSet::parse(a.blueprints);
  config.epochs = a.epochs;
  config.learning_rate = a.lr;
  config.batch_size = a.batch_size;
  config.weight_decay = a.weight_decay;
  config.shuffle_seed = a.seed;
  if (!a.layers.empty()) {
    for (const auto& part : nemb::split_string(a.layers, ',')) {
      const std::string name = nemb::trim(part);
      if (name.empty()) throw std::runtime_error("empty name in --layers");
      config.layer_selection.push_back(name);
    }
  }
  config.base_checkpoint_hash = nemb::hex64(nemb::fnv1a64_file(checkpoint_path));
  return config;
}

json tune_config_json(const TuneArgs& a) {
  return {{"blueprints", a.blueprints}, {"epochs", a.epochs},     {"lr", a.lr},
          {"batch_size", a.batch_size}, {"weight_decay", a.weight_decay},
          {"layers", a.layers}};
}

struct EmbedArgs {
  std::string checkpoint;
  std::string dataset;
  std::string out;
  TuneArgs tune;
  int workers = 1;
};

std::vector<nemb::CorpusText> dataset_texts(const std::vector<nemb::DatasetItem>& items) {
  std::vector<nemb::CorpusText> texts;
  texts.reserve(items.size());
  for (const auto& item : items) texts.push_back({item.id, item.text});
  return texts;
}

int cmd_embed(const EmbedArgs& a) {
  const nemb::LoadedCheckpoint ckpt = nemb::load_checkpoint(a.checkpoint);
  const nemb::Vocabulary vocab =
      nemb::load_vocab(resolve_vocab_path(a.checkpoint, ckpt.vocab_path));
  const auto items = nemb::load_dataset(a.dataset);
  const nemb::MicroTuneConfig config = tune_config(a.tune, a.checkpoint);

  const auto start = std::chrono::steady_clock::now();
  const nemb::CorpusEmbeddings result =
      nemb::embed_corpus(ckpt.params, vocab, dataset_texts(items), config, a.workers);
  const double total_seconds = seconds_since(start);
  const double per_sample =
      items.empty() ? 0.0 : total_seconds / static_cast<double>(items.size());

  EmbeddingMatrix matrix;
  matrix.set_fingerprint(config.fingerprint());
  for (const auto& item : result.items) {
    matrix.add(item.id, item.embedding.values);
  }
  nemb::save_embeddings(matrix, a.out);

  std::cout << "embedded " << result.items.size() << "/" << items.size() << "\n"
            << "per_sample_seconds " << fmt(per_sample) << "\n";
  for (const auto& err : result.errors) {
    std::cerr << "error: " << err.id << ": " << err.message << "\n";
  }

  Manifest m("embed");
  m.j["config"] = tune_config_json(a.tune);
  m.j["config"]["workers"] = a.workers;
  m.j["seeds"] = {{"seed", a.tune.seed}};
  m.input("checkpoint", a.checkpoint);
  m.input("dataset", a.dataset);
  m.output("store", a.out);
  m.j["timing"]["total_seconds"] = total_seconds;
  m.j["timing"]["per_sample_seconds"] = per_sample;
  m.j["results"] = {{"embedded", result.items.size()}, {"failed", result.errors.size()}};
  json errors = json::array();
  for (const auto& err : result.errors) {
    errors.push_back({{"id", err.id}, {"message", err.message}});
  }
  m.j["errors"] = errors;
  m.save(a.out + ".manifest.json");

  return result.errors.empty() ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::vector<std::string> stores;  // 1 or 2
  std::string dataset;
  std::string out;
  std::string json_out;
  std::string broken_out;
  uint64_t broken_cap = nemb::kDefaultBrokenCap;
};

struct StoreEval {
  std::string label;  // "", "first", "second", "concat"
  std::string path;   // empty for the concat ensemble
  nemb::TripletReport report;
  nemb::BrokenSet broken;
  double intersection_with_first = 1.0;
  std::string fingerprint;
};

void write_store_rows(std::ostream& out, const StoreEval& e, bool with_intersection) {
  const std::string p = e.label.empty() ? "" : e.label + ".";
  if (!e.path.empty()) out << p << "store " << e.path << "\n";
  out << p << "fingerprint " << e.fingerprint << "\n";
  out << p << "triplets " << e.report.total << "\n";
  out << p << "broken " << e.report.broken << "\n";
  out << p << "ties " << e.report.ties << "\n";
  out << p << "error_global " << fmt(e.report.error_global) << "\n";
  out << p << "error_per_anchor_avg " << fmt(e.report.error_per_anchor_avg) << "\n";
  out << p << "same_avg " << fmt(e.report.same_avg) << "\n";
  out << p << "diff_avg " << fmt(e.report.diff_avg) << "\n";
  if (with_intersection) out << p << "I " << fmt(e.intersection_with_first) << "\n";
}

json report_json(const StoreEval& e) {
  return {{"store", e.path},
          {"fingerprint", e.fingerprint},
          {"triplets", e.report.total},
          {"broken", e.report.broken},
          {"ties", e.report.ties},
          {"error_global", e.report.error_global},
          {"error_per_anchor_avg", e.report.error_per_anchor_avg},
          {"same_avg", e.report.same_avg},
          {"diff_avg", e.report.diff_avg},
          {"anchors_with_triplets", e.report.anchors_with_triplets},
          {"items_evaluated", e.report.items_evaluated},
          {"I", e.intersection_with_first}};
}

int cmd_eval(const EvalArgs& a) {
  if (a.stores.empty() || a.stores.size() > 2) {
    throw std::runtime_error("eval takes one or two stores");
  }
  const auto start = std::chrono::steady_clock::now();
  auto items = nemb::load_dataset(a.dataset);

  std::vector<EmbeddingMatrix> matrices;
  for (const auto& path : a.stores) matrices.push_back(nemb::load_embeddings(path));

  // Items must be resolvable in every store under comparison; mismatches are
  // named, dropped, and reflected in the exit code.
  std::vector<std::string> dropped;
  for (const auto& matrix : matrices) {
    for (auto& id : nemb::missing_ids(items, matrix)) dropped.push_back(std::move(id));
  }
  if (!dropped.empty()) {
    std::sort(dropped.begin(), dropped.end());
    dropped.erase(std::unique(dropped.begin(), dropped.end()), dropped.end());
    for (const auto& id : dropped) {
      std::cerr << "warning: no embedding for '" << id << "', item dropped\n";
    }
    std::erase_if(items, [&](const nemb::DatasetItem& item) {
      return std::binary_search(dropped.begin(), dropped.end(), item.id);
    });
  }
  if (items.empty()) throw std::runtime_error("no dataset items left to evaluate");

  const bool compare = matrices.size() == 2;
  std::vector<StoreEval> evals;
  for (size_t i = 0; i < matrices.size(); ++i) {
    StoreEval e;
    e.label = compare ? (i == 0 ? "first" : "second") : "";
    e.path = a.stores[i];
    e.fingerprint = matrices[i].fingerprint();
    e.report = nemb::evaluate(items, matrices[i]);
    e.broken = nemb::broken_set(items, matrices[i], a.broken_cap);
    evals.push_back(std::move(e));
  }
  if (compare) {
    EmbeddingMatrix ensemble = nemb::concat_ensemble(matrices[0], matrices[1]);
    StoreEval e;
    e.label = "concat";
    e.fingerprint = ensemble.fingerprint();
    e.report = nemb::evaluate(items, ensemble);
    e.broken = nemb::broken_set(items, ensemble, a.broken_cap);
    evals.push_back(std::move(e));
    for (auto& ev : evals) {
      ev.intersection_with_first = nemb::intersection(ev.broken, evals[0].broken);
    }
  }

  std::ofstream out(a.out);
  if (!out) throw std::runtime_error("cannot open " + a.out + " for writing");
  out << "dataset " << a.dataset << "\n";
  out << "items " << items.size() << "\n";
  for (const auto& e : evals) {
    write_store_rows(out, e, compare);
  }
  if (!out) throw std::runtime_error("failed writing " + a.out);
  out.close();
  std::cout << read_lines(a.out).size() << " report lines -> " << a.out << "\n";

  Manifest m("eval");
  m.j["config"] = {{"broken_cap", a.broken_cap}};
  m.input("dataset", a.dataset);
  for (size_t i = 0; i < a.stores.size(); ++i) {
    m.input(i == 0 ? "store" : "store2", a.stores[i]);
  }
  m.output("report", a.out);

  if (!a.json_out.empty()) {
    json doc;
    doc["dataset"] = a.dataset;
    doc["items"] = items.size();
    doc["dropped_ids"] = dropped;
    if (compare) {
      doc["first"] = report_json(evals[0]);
      doc["second"] = report_json(evals[1]);
      doc["concat"] = report_json(evals[2]);
    } else {
      doc.update(report_json(evals[0]));
    }
    std::ofstream jout(a.json_out);
    if (!jout) throw std::runtime_error("cannot open " + a.json_out + " for writing");
    jout << doc.dump(2) << "\n";
    if (!jout) throw std::runtime_error("failed writing " + a.json_out);
    jout.close();
    m.output("json", a.json_out);
  }

  if (!a.broken_out.empty()) {
    if (compare) {
      nemb::save_broken_set(evals[0].broken, a.broken_out + ".first");
      nemb::save_broken_set(evals[1].broken, a.broken_out + ".second");
      nemb::save_broken_set(evals[2].broken, a.broken_out + ".concat");
      m.output("broken_first", a.broken_out + ".first");
      m.output("broken_second", a.broken_out + ".second");
      m.output("broken_concat", a.broken_out + ".concat");
    } else {
      nemb::save_broken_set(evals[0].broken, a.broken_out);
      m.output("broken", a.broken_out);
    }
  }

  m.j["results"] = json::array();
  for (const auto& e : evals) {
    json r = report_json(e);
    r["label"] = e.label;
    m.j["results"].push_back(r);
  }
  m.j["dropped_ids"] = dropped;
  m.j["timing"]["total_seconds"] = seconds_since(start);
  m.save(a.out + ".manifest.json");

  return dropped.empty() ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------------------
// count

int cmd_count(const std::string& dataset, const std::string& out) {
  const auto items = nemb::load_dataset(dataset);
  const uint64_t count = nemb::count_triplets(items);
  std::cout << "triplets " << count << "\n";
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot open " + out + " for writing");
    f << "triplets " << count << "\n";
    if (!f) throw std::runtime_error("failed writing " + out);
    f.close();
    Manifest m("count");
    m.input("dataset", dataset);
    m.output("count", out);
    m.j["results"] = {{"triplets", count}};
    m.save(out + ".manifest.json");
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  std::string checkpoint;
  std::string dataset;
  std::string out;
  std::string epochs_grid = "20,10,5,3,1";
  TuneArgs tune;
  int workers = 1;
  uint64_t broken_cap = nemb::kDefaultBrokenCap;
};

int cmd_bench(const BenchArgs& a) {
  std::vector<int> grid;
  for (const auto& part : nemb::split_string(a.epochs_grid, ',')) {
    const int e = std::stoi(nemb::trim(part));
    if (e < 1) throw std::runtime_error("epochs grid entries must be positive");
    grid.push_back(e);
  }
  if (grid.empty()) throw std::runtime_error("empty epochs grid");

  const nemb::LoadedCheckpoint ckpt = nemb::load_checkpoint(a.checkpoint);
  const nemb::Vocabulary vocab =
      nemb::load_vocab(resolve_vocab_path(a.checkpoint, ckpt.vocab_path));
  const auto items = nemb::load_dataset(a.dataset);
  const auto texts = dataset_texts(items);

  const auto start = std::chrono::steady_clock::now();
  struct Row {
    int epochs;
    double per_sample;
    nemb::TripletReport report;
    double intersection_with_reference;
  };
  std::vector<Row> rows;
  nemb::BrokenSet reference_broken;
  size_t failures = 0;

  for (size_t gi = 0; gi < grid.size(); ++gi) {
    TuneArgs tune = a.tune;
    tune.epochs = grid[gi];
    const nemb::MicroTuneConfig config = tune_config(tune, a.checkpoint);

    const auto t0 = std::chrono::steady_clock::now();
    const nemb::CorpusEmbeddings result =
        nemb::embed_corpus(ckpt.params, vocab, texts, config, a.workers);
    const double seconds = seconds_since(t0);
    failures += result.errors.size();

    EmbeddingMatrix matrix;
    matrix.set_fingerprint(config.fingerprint());
    for (const auto& item : result.items) matrix.add(item.id, item.embedding.values);

    const std::string store_path = a.out + ".e" + std::to_string(grid[gi]) + ".nev";
    nemb::save_embeddings(matrix, store_path);

    auto eval_items = items;
    std::erase_if(eval_items, [&](const nemb::DatasetItem& item) {
      return !matrix.find(item.id).has_value();
    });

    Row row;
    row.epochs = grid[gi];
    row.per_sample = items.empty() ? 0.0 : seconds / static_cast<double>(items.size());
    row.report = nemb::evaluate(eval_items, matrix);
    nemb::BrokenSet broken = nemb::broken_set(eval_items, matrix, a.broken_cap);
    if (gi == 0) reference_broken = broken;
    row.intersection_with_reference = nemb::intersection(broken, reference_broken);
    rows.push_back(std::move(row));
    nemb::log_info("bench: epochs " + std::to_string(grid[gi]) + " done");
  }

  std::ofstream out(a.out);
  if (!out) throw std::runtime_error("cannot open " + a.out + " for writing");
  out << "epochs seconds_per_sample error_global I same_avg diff_avg\n";
  for (const auto& r : rows) {
    out << r.epochs << " " << fmt(r.per_sample) << " " << fmt(r.report.error_global)
        << " " << fmt(r.intersection_with_reference) << " " << fmt(r.report.same_avg)
        << " " << fmt(r.report.diff_avg) << "\n";
  }
  if (!out) throw std::runtime_error("failed writing " + a.out);
  out.close();
  std::cout << rows.size() << " rows -> " << a.out << "\n";

  Manifest m("bench");
  m.j["config"] = tune_config_json(a.tune);
  m.j["config"].erase("epochs");
  m.j["config"]["epochs_grid"] = a.epochs_grid;
  m.j["config"]["workers"] = a.workers;
  m.j["config"]["broken_cap"] = a.broken_cap;
  m.j["seeds"] = {{"seed", a.tune.seed}};
  m.input("checkpoint", a.checkpoint);
  m.input("dataset", a.dataset);
  m.output("table", a.out);
  for (const auto& r : rows) {
    m.j["results"].push_back({{"epochs", r.epochs},
                              {"seconds_per_sample", r.per_sample},
                              {"error_global", r.report.error_global},
                              {"I", r.intersection_with_reference},
                              {"same_avg", r.report.same_avg},
                              {"diff_avg", r.report.diff_avg}});
  }
  m.j["timing"]["total_seconds"] = seconds_since(start);
  m.save(a.out + ".manifest.json");

  return failures == 0 ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string out;
  nemb::SyntheticTopicSpec spec;
};

int cmd_synth(const SynthArgs& a) {
  const auto start = std::chrono::steady_clock::now();
  const nemb::SyntheticData data = nemb::generate_topics(a.spec);

  const std::string dataset_path = a.out + ".jsonl";
  const std::string corpus_path = a.out + ".corpus.txt";
  nemb::save_dataset(data.items, dataset_path);
  std::ofstream corpus(corpus_path);
  if (!corpus) throw std::runtime_error("cannot open " + corpus_path + " for writing");
  for (const auto& line : data.corpus_lines) corpus << line << "\n";
  if (!corpus) throw std::runtime_error("failed writing " + corpus_path);
  corpus.close();

  std::cout << "items " << data.items.size() << " -> " << dataset_path << "\n"
            << "corpus_lines " << data.corpus_lines.size() << " -> " << corpus_path
            << "\n";

  Manifest m("synth");
  m.j["config"] = {{"topics", a.spec.topics},
                   {"vocab_per_topic", a.spec.vocab_per_topic},
                   {"texts_per_topic", a.spec.texts_per_topic},
                   {"sentence_len_min", a.spec.sentence_len_min},
                   {"sentence_len_max", a.spec.sentence_len_max},
                   {"sentences_min", a.spec.sentences_min},
                   {"sentences_max", a.spec.sentences_max},
                   {"function_word_prob", a.spec.function_word_prob}};
  m.j["seeds"] = {{"seed", a.spec.seed}};
  m.output("dataset", dataset_path);
  m.output("corpus", corpus_path);
  m.j["timing"]["total_seconds"] = seconds_since(start);
  m.save(a.out + ".manifest.json");
  return kExitOk;
}

void add_tune_flags(CLI::App* cmd, TuneArgs& tune) {
  cmd->add_option("--blueprints", tune.blueprints,
                  "masking blueprints \"k:m,k:m,...\" or \"identity\"");
  cmd->add_option("--epochs", tune.epochs, "micro-tuning epochs per text");
  cmd->add_option("--lr", tune.lr, "micro-tuning learning rate");
  cmd->add_option("--batch-size", tune.batch_size, "micro-tuning batch size");
  cmd->add_option("--weight-decay", tune.weight_decay, "AdamW weight decay");
  cmd->add_option("--seed", tune.seed, "training-set shuffle seed");
  cmd->add_option("--layers", tune.layers,
                  "comma-separated parameter names to tune (default: last block's "
                  "output dense bias + LayerNorm)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"micro-tuning weight-delta embeddings toolkit"};
  app.set_version_flag("--version", std::string("nemb ") + kVersion);
  app.require_subcommand(1);

  PretrainArgs pretrain_args;
  auto* pre = app.add_subcommand("pretrain", "train the toy masked LM on a corpus");
  pre->add_option("--corpus", pretrain_args.corpus, "text corpus, one text per line")
      ->required();
  pre->add_option("--out", pretrain_args.out, "output checkpoint path")->required();
  pre->add_option("--vocab-size", pretrain_args.vocab_size, "max vocabulary size");
  pre->add_option("--steps", pretrain_args.steps, "optimizer steps");
  pre->add_option("--batch-size", pretrain_args.batch_size, "minibatch size");
  pre->add_option("--lr", pretrain_args.lr, "learning rate");
  pre->add_option("--weight-decay", pretrain_args.weight_decay, "AdamW weight decay");
  pre->add_option("--mask-prob", pretrain_args.mask_prob, "masking probability");
  pre->add_option("--seed", pretrain_args.seed, "init + data order seed");
  pre->add_option("--heldout-every", pretrain_args.heldout_every,
                  "hold out every n-th chunk (0 disables)");
  pre->add_option("--blocks", pretrain_args.blocks, "transformer blocks");
  pre->add_option("--hidden", pretrain_args.hidden, "hidden dimension");
  pre->add_option("--heads", pretrain_args.heads, "attention heads");
  pre->add_option("--ffn", pretrain_args.ffn, "feed-forward dimension");
  pre->add_option("--max-len", pretrain_args.max_len, "max input length");

  EmbedArgs embed_args;
  auto* emb = app.add_subcommand("embed", "embed dataset texts into a store");
  emb->add_option("--checkpoint", embed_args.checkpoint, "model checkpoint")->required();
  emb->add_option("--dataset", embed_args.dataset, "JSON-lines dataset with texts")
      ->required();
  emb->add_option("--out", embed_args.out, "output embedding store")->required();
  emb->add_option("--workers", embed_args.workers, "parallel workers");
  add_tune_flags(emb, embed_args.tune);

  EvalArgs eval_args;
  auto* ev = app.add_subcommand("eval", "triplet evaluation of one or two stores");
  ev->add_option("stores", eval_args.stores, "embedding store(s), 1 or 2")
      ->required()
      ->expected(1, 2);
  ev->add_option("--dataset", eval_args.dataset, "JSON-lines dataset")->required();
  ev->add_option("--out", eval_args.out, "output report path")->required();
  ev->add_option("--json", eval_args.json_out, "also write a JSON report here");
  ev->add_option("--broken-out", eval_args.broken_out, "write broken triplet set(s) here");
  ev->add_option("--broken-cap", eval_args.broken_cap, "broken-set size cap");

  std::string count_dataset;
  std::string count_out;
  auto* cnt = app.add_subcommand("count", "count available triplets in a dataset");
  cnt->add_option("--dataset", count_dataset, "JSON-lines dataset")->required();
  cnt->add_option("--out", count_out, "also write the count (and a manifest) here");

  BenchArgs bench_args;
  auto* ben = app.add_subcommand("bench", "epochs-grid timing and error table");
  ben->add_option("--checkpoint", bench_args.checkpoint, "model checkpoint")->required();
  ben->add_option("--dataset", bench_args.dataset, "JSON-lines dataset with texts")
      ->required();
  ben->add_option("--out", bench_args.out, "output table path")->required();
  ben->add_option("--epochs-grid", bench_args.epochs_grid,
                  "comma-separated epochs settings; first entry is the reference row");
  ben->add_option("--workers", bench_args.workers, "parallel workers");
  ben->add_option("--broken-cap", bench_args.broken_cap, "broken-set size cap");
  add_tune_flags(ben, bench_args.tune);
  ben->get_option("--epochs")->description("ignored; use --epochs-grid");

  SynthArgs synth_args;
  auto* syn = app.add_subcommand("synth", "generate a synthetic topic dataset + corpus");
  syn->add_option("--out", synth_args.out, "output prefix")->required();
  syn->add_option("--topics", synth_args.spec.topics, "number of topics");
  syn->add_option("--vocab-per-topic", synth_args.spec.vocab_per_topic,
                  "content words per topic");
  syn->add_option("--texts-per-topic", synth_args.spec.texts_per_topic, "texts per topic");
  syn->add_option("--sentence-len-min", synth_args.spec.sentence_len_min,
                  "min words per sentence");
  syn->add_option("--sentence-len-max", synth_args.spec.sentence_len_max,
                  "max words per sentence");
  syn->add_option("--sentences-min", synth_args.spec.sentences_min,
                  "min sentences per text");
  syn->add_option("--sentences-max", synth_args.spec.sentences_max,
                  "max sentences per text");
  syn->add_option("--function-word-prob", synth_args.spec.function_word_prob,
                  "probability of a shared function word");
  syn->add_option("--seed", synth_args.spec.seed, "generation seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (pre->parsed()) return cmd_pretrain(pretrain_args);
    if (emb->parsed()) return cmd_embed(embed_args);
    if (ev->parsed()) return cmd_eval(eval_args);
    if (cnt->parsed()) return cmd_count(count_dataset, count_out);
    if (ben->parsed()) return cmd_bench(bench_args);
    if (syn->parsed()) return cmd_synth(synth_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}
