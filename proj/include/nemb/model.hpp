#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "nemb/masking.hpp"
#include "nemb/tensor.hpp"
#include "nemb/tokenizer.hpp"

namespace nemb {

struct ModelConfig {
  int vocab_size = 0;
  int num_blocks = 2;
  int hidden_dim = 64;
  int num_heads = 4;
  int ffn_dim = 256;
  int max_input_len = 128;

  void validate() const;  // throws on inconsistent dimensions
};

// Named model parameters in a fixed, documented order: embedding tables and
// their LayerNorm first, then per block the attention, intermediate and
// output sublayers, then the MLM decoder. Names follow the
// "encoder.layer.<i>.<sublayer>.<kind>" scheme, e.g.
// "encoder.layer.1.output.dense.bias".
class ParameterStore {
 public:
  ParameterStore() = default;

  // Seeded random init: N(0, 0.02^2) for weights and embeddings, ones for
  // LayerNorm weights, zeros for biases.
  static ParameterStore initialized(const ModelConfig& config, uint64_t seed);

  const ModelConfig& config() const { return config_; }
  void set_config(const ModelConfig& c) { config_ = c; }

  const std::vector<std::string>& names() const { return names_; }
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  Tensor& tensor(const std::string& name);
  const Tensor& tensor(const std::string& name) const;

  void add(const std::string& name, Tensor t);

  size_t parameter_count() const;  // total scalar count

  bool operator==(const ParameterStore& other) const;

 private:
  ModelConfig config_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, size_t> index_;
  std::vector<Tensor> tensors_;
};

using LayerSelection = std::vector<std::string>;

// {last block}.output.dense.bias + output.LayerNorm.{weight,bias}.
LayerSelection default_layer_selection(const ModelConfig& config);

// Throws unless the selection is non-empty, duplicate-free and fully
// resolvable in the store.
void validate_selection(const ParameterStore& params, const LayerSelection& selection);

using GradMap = std::map<std::string, Tensor>;

struct AdamWHyper {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct OptimizerState {
  AdamWHyper hyper;
  int64_t step = 0;
  std::vector<std::string> names;  // selection order
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  static OptimizerState init(const AdamWHyper& hyper, const LayerSelection& selection,
                             const ParameterStore& params);
};

// Masked-LM logits, shape [len(input_ids), vocab_size].
Tensor forward_mlm(const ParameterStore& params, std::span<const int> input_ids);

// Mean cross-entropy over positions whose label is not kIgnoreLabel.
double mlm_loss(const Tensor& logits, std::span<const int> labels);

// Gradients of mlm_loss(forward_mlm(...)) w.r.t. the selected parameters
// only. Non-selected parameters receive no gradient entry.
GradMap backward(const ParameterStore& params, std::span<const int> input_ids,
                 std::span<const int> labels, const LayerSelection& selection);

struct BatchResult {
  double loss = 0.0;            // mean CE over all labeled positions in the batch
  size_t labeled_positions = 0;
  GradMap grads;
};

// Pooled loss and gradients over a minibatch: every labeled position across
// the batch carries equal weight. Sequences are processed independently at
// their own lengths, so no padding enters attention or the loss.
BatchResult batch_gradients(const ParameterStore& params,
                            std::span<const MaskedInput> batch,
                            const LayerSelection& selection);

// Decoupled-decay AdamW with bias correction:
//   w' = w * (1 - lr * wd) - lr * mhat / (sqrt(vhat) + eps).
// Gradient keys must match the optimizer's selection exactly.
void adamw_step(ParameterStore& params, const GradMap& grads, OptimizerState& state);

std::vector<Tensor> snapshot(const ParameterStore& params, const LayerSelection& selection);
void restore(ParameterStore& params, const LayerSelection& selection,
             const std::vector<Tensor>& weights);

struct PretrainOptions {
  int steps = 300;
  int batch_size = 30;
  double lr = 1e-3;
  double weight_decay = 0.01;
  double mask_prob = 0.15;
  uint64_t seed = 0;
  int heldout_every = 10;  // every n-th chunk is held out; 0 disables
};

struct PretrainResult {
  ParameterStore params;
  double init_heldout_loss = 0.0;
  double final_heldout_loss = 0.0;
  double final_train_loss = 0.0;
  size_t train_chunks = 0;
  size_t heldout_chunks = 0;
};

// Trains all parameters from seeded init with random 15% masking (80/10/10
// mask/random/keep split per selected position). Deterministic given seed.
PretrainResult pretrain(const std::vector<std::string>& corpus_lines,
                        const Vocabulary& vocab, const ModelConfig& config,
                        const PretrainOptions& opts);

}  // namespace nemb
