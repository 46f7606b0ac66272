#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nemb/masking.hpp"
#include "nemb/model.hpp"
#include "nemb/tokenizer.hpp"

namespace nemb {

// Everything that determines an embedding besides the base weights and the
// text itself.
struct MicroTuneConfig {
  BlueprintSet blueprints = BlueprintSet::defaults();
  int epochs = 20;
  double learning_rate = 5e-5;
  int batch_size = 30;
  double weight_decay = 0.01;
  uint64_t shuffle_seed = 0;
  LayerSelection layer_selection;  // empty means the model default
  std::string base_checkpoint_hash;

  void validate() const;

  // Canonical one-line description; stored alongside embeddings so stores
  // produced under different settings can be told apart.
  std::string fingerprint() const;
};

struct EmbeddingSegment {
  std::string name;  // parameter the segment came from
  size_t offset = 0;
  size_t length = 0;
};

// Concatenation of per-layer normalized weight deltas, renormalized to unit
// length, so each of the m segments carries norm 1/sqrt(m).
struct NeuralEmbedding {
  std::vector<double> values;
  std::vector<EmbeddingSegment> segments;
  std::string fingerprint;

  size_t dim() const { return values.size(); }
};

// (after - before) per selected layer, each segment scaled to unit norm,
// concatenated, then globally renormalized. `before` must be a snapshot taken
// with the same selection. Throws "degenerate delta" when any layer moved by
// less than 1e-12.
NeuralEmbedding delta_embedding(const std::vector<Tensor>& before,
                                const ParameterStore& after,
                                const LayerSelection& selection);

// Micro-tunes the selected layers on one text and returns the weight-delta
// embedding. The selected weights are restored bit-exactly before returning,
// also when an error is thrown mid-tune.
NeuralEmbedding embed_text(ParameterStore& params, const Vocabulary& vocab,
                           const std::string& text, const MicroTuneConfig& config);

struct CorpusText {
  std::string id;
  std::string text;
};

struct CorpusEmbedding {
  std::string id;
  NeuralEmbedding embedding;
};

struct CorpusItemError {
  std::string id;
  std::string message;
};

struct CorpusEmbeddings {
  std::vector<CorpusEmbedding> items;   // input order, failures skipped
  std::vector<CorpusItemError> errors;  // input order
};

// Embeds each item independently. With workers > 1 each worker runs on its
// own copy of the parameter store, so results do not depend on the worker
// count. Per-item failures are collected, not thrown.
CorpusEmbeddings embed_corpus(const ParameterStore& params, const Vocabulary& vocab,
                              const std::vector<CorpusText>& corpus,
                              const MicroTuneConfig& config, int workers = 1);

}  // namespace nemb
