#include "nemb/embedder.hpp"

#include <cmath>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <thread>

#include "nemb/util.hpp"

namespace nemb {

namespace {

constexpr double kDegenerateNorm = 1e-12;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void MicroTuneConfig::validate() const {
  blueprints.validate();
  if (epochs < 1) throw std::invalid_argument("micro-tune: epochs must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("micro-tune: batch_size must be at least 1");
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("micro-tune: learning_rate must be positive");
  }
  if (weight_decay < 0.0) {
    throw std::invalid_argument("micro-tune: weight_decay must be non-negative");
  }
}

std::string MicroTuneConfig::fingerprint() const {
  std::string s = "blueprints=" + blueprints.to_string();
  s += ";epochs=" + std::to_string(epochs);
  s += ";lr=" + format_double(learning_rate);
  s += ";batch=" + std::to_string(batch_size);
  s += ";wd=" + format_double(weight_decay);
  s += ";seed=" + std::to_string(shuffle_seed);
  s += ";layers=";
  for (size_t i = 0; i < layer_selection.size(); ++i) {
    if (i > 0) s += ",";
    s += layer_selection[i];
  }
  if (layer_selection.empty()) s += "<default>";
  s += ";base=" + (base_checkpoint_hash.empty() ? "<none>" : base_checkpoint_hash);
  return s;
}

NeuralEmbedding delta_embedding(const std::vector<Tensor>& before,
                                const ParameterStore& after,
                                const LayerSelection& selection) {
  validate_selection(after, selection);
  if (before.size() != selection.size()) {
    throw std::runtime_error("delta: snapshot/selection size mismatch");
  }

  NeuralEmbedding out;
  size_t total = 0;
  for (const auto& t : before) total += t.size();
  out.values.reserve(total);

  for (size_t i = 0; i < selection.size(); ++i) {
    const Tensor& now = after.tensor(selection[i]);
    const Tensor& base = before[i];
    if (!now.same_shape(base)) {
      throw std::runtime_error("delta: shape mismatch for " + selection[i]);
    }
    double sq = 0.0;
    const size_t offset = out.values.size();
    for (size_t k = 0; k < base.size(); ++k) {
      const double d = now.data[k] - base.data[k];
      sq += d * d;
      out.values.push_back(d);
    }
    const double norm = std::sqrt(sq);
    if (norm < kDegenerateNorm) {
      throw std::runtime_error("degenerate delta for " + selection[i]);
    }
    for (size_t k = offset; k < out.values.size(); ++k) out.values[k] /= norm;
    out.segments.push_back({selection[i], offset, base.size()});
  }

  double sq = 0.0;
  for (const double v : out.values) sq += v * v;
  const double norm = std::sqrt(sq);  // = sqrt(#segments) up to rounding
  for (double& v : out.values) v /= norm;
  return out;
}

NeuralEmbedding embed_text(ParameterStore& params, const Vocabulary& vocab,
                           const std::string& text, const MicroTuneConfig& config) {
  config.validate();
  const LayerSelection selection = config.layer_selection.empty()
                                       ? default_layer_selection(params.config())
                                       : config.layer_selection;
  validate_selection(params, selection);

  const auto chunks =
      chunk_text(text, vocab, static_cast<size_t>(params.config().max_input_len));
  if (chunks.empty()) throw std::runtime_error("empty text");

  const std::vector<Tensor> base = snapshot(params, selection);
  // The tuned weights are temporary state; whatever happens below, the store
  // the caller handed in goes back to its exact prior bytes.
  struct RestoreGuard {
    ParameterStore& params;
    const LayerSelection& selection;
    const std::vector<Tensor>& base;
    ~RestoreGuard() { restore(params, selection, base); }
  } guard{params, selection, base};

  const auto training_set =
      build_training_set(chunks, config.blueprints, vocab.mask_id, config.shuffle_seed);

  AdamWHyper hyper;
  hyper.lr = config.learning_rate;
  hyper.weight_decay = config.weight_decay;
  OptimizerState state = OptimizerState::init(hyper, selection, params);

  const size_t bs = static_cast<size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (size_t start = 0; start < training_set.size(); start += bs) {
      const size_t n = std::min(bs, training_set.size() - start);
      const std::span<const MaskedInput> batch(training_set.data() + start, n);
      size_t labeled = 0;
      for (const auto& in : batch) {
        for (const int l : in.labels) {
          if (l != kIgnoreLabel) ++labeled;
        }
      }
      if (labeled == 0) continue;  // nothing to predict in this slice
      BatchResult r = batch_gradients(params, batch, selection);
      adamw_step(params, r.grads, state);
    }
  }

  NeuralEmbedding out = delta_embedding(base, params, selection);
  out.fingerprint = config.fingerprint();
  return out;
}

CorpusEmbeddings embed_corpus(const ParameterStore& params, const Vocabulary& vocab,
                              const std::vector<CorpusText>& corpus,
                              const MicroTuneConfig& config, int workers) {
  config.validate();
  if (workers < 1) throw std::invalid_argument("embed_corpus: workers must be at least 1");

  struct Slot {
    bool ok = false;
    NeuralEmbedding embedding;
    std::string error;
  };
  std::vector<Slot> slots(corpus.size());

  const size_t worker_count =
      std::min<size_t>(static_cast<size_t>(workers), std::max<size_t>(corpus.size(), 1));

  auto run_range = [&](ParameterStore& local, size_t begin, size_t stride) {
    for (size_t i = begin; i < corpus.size(); i += stride) {
      try {
        slots[i].embedding = embed_text(local, vocab, corpus[i].text, config);
        slots[i].ok = true;
      } catch (const std::exception& e) {
        slots[i].error = e.what();
      }
    }
  };

  if (worker_count <= 1) {
    ParameterStore local = params;
    run_range(local, 0, 1);
  } else {
    std::vector<ParameterStore> stores(worker_count, params);
    std::vector<std::thread> threads;
    threads.reserve(worker_count);
    for (size_t w = 0; w < worker_count; ++w) {
      threads.emplace_back([&, w] { run_range(stores[w], w, worker_count); });
    }
    for (auto& t : threads) t.join();
  }

  CorpusEmbeddings out;
  for (size_t i = 0; i < corpus.size(); ++i) {
    if (slots[i].ok) {
      out.items.push_back({corpus[i].id, std::move(slots[i].embedding)});
    } else {
      out.errors.push_back({corpus[i].id, slots[i].error});
      log_warn("embed failed for '" + corpus[i].id + "': " + slots[i].error);
    }
  }
  return out;
}

}  // namespace nemb
