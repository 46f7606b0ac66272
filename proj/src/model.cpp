#include "nemb/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <unordered_set>

#include "nemb/util.hpp"

namespace nemb {

namespace {

constexpr double kLayerNormEps = 1e-12;

std::string layer_name(int block, const char* suffix) {
  return "encoder.layer." + std::to_string(block) + "." + suffix;
}

void axpy(double* y, double a, const double* x, size_t n) {
  for (size_t k = 0; k < n; ++k) y[k] += a * x[k];
}

// y = x W^T + b with x [n,in], W [out,in], b [out].
void linear_forward(const Tensor& x, const Tensor& W, const Tensor& b, Tensor& y) {
  const size_t n = x.rows(), in = x.cols(), out = W.rows();
  y = Tensor({n, out});
  for (size_t i = 0; i < n; ++i) {
    const double* xi = x.data.data() + i * in;
    double* yi = y.data.data() + i * out;
    for (size_t o = 0; o < out; ++o) {
      yi[o] = b[o] + dot_product(xi, W.data.data() + o * in, in);
    }
  }
}

// Accumulates dx += dy W, dW += dy^T x, db += column sums of dy.
// Null sinks are skipped.
void linear_backward(const Tensor& x, const Tensor& W, const Tensor& dy, Tensor* dx,
                     Tensor* dW, Tensor* db) {
  const size_t n = x.rows(), in = x.cols(), out = W.rows();
  for (size_t i = 0; i < n; ++i) {
    const double* dyi = dy.data.data() + i * out;
    const double* xi = x.data.data() + i * in;
    if (dx != nullptr) {
      double* dxi = dx->data.data() + i * in;
      for (size_t o = 0; o < out; ++o) {
        if (dyi[o] != 0.0) axpy(dxi, dyi[o], W.data.data() + o * in, in);
      }
    }
    if (dW != nullptr) {
      for (size_t o = 0; o < out; ++o) {
        if (dyi[o] != 0.0) axpy(dW->data.data() + o * in, dyi[o], xi, in);
      }
    }
    if (db != nullptr) {
      for (size_t o = 0; o < out; ++o) db->data[o] += dyi[o];
    }
  }
}

struct LnCache {
  std::vector<double> inv_sigma;  // per row
  Tensor xhat;                    // [n,d]
};

void layernorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       Tensor& y, LnCache& cache) {
  const size_t n = x.rows(), d = x.cols();
  y = Tensor({n, d});
  cache.inv_sigma.assign(n, 0.0);
  cache.xhat = Tensor({n, d});
  for (size_t i = 0; i < n; ++i) {
    const double* xi = x.data.data() + i * d;
    double mean = 0.0;
    for (size_t k = 0; k < d; ++k) mean += xi[k];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (size_t k = 0; k < d; ++k) {
      const double c = xi[k] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv_sigma = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_sigma[i] = inv_sigma;
    double* xh = cache.xhat.data.data() + i * d;
    double* yi = y.data.data() + i * d;
    for (size_t k = 0; k < d; ++k) {
      xh[k] = (xi[k] - mean) * inv_sigma;
      yi[k] = gamma[k] * xh[k] + beta[k];
    }
  }
}

// Accumulates dx += dL/dx, dgamma += dy * xhat, dbeta += dy.
void layernorm_backward(const LnCache& cache, const Tensor& gamma, const Tensor& dy,
                        Tensor& dx, Tensor* dgamma, Tensor* dbeta) {
  const size_t n = dy.rows(), d = dy.cols();
  for (size_t i = 0; i < n; ++i) {
    const double* dyi = dy.data.data() + i * d;
    const double* xh = cache.xhat.data.data() + i * d;
    double* dxi = dx.data.data() + i * d;
    double m1 = 0.0, m2 = 0.0;
    for (size_t k = 0; k < d; ++k) {
      const double g = dyi[k] * gamma[k];
      m1 += g;
      m2 += g * xh[k];
    }
    m1 /= static_cast<double>(d);
    m2 /= static_cast<double>(d);
    const double inv_sigma = cache.inv_sigma[i];
    for (size_t k = 0; k < d; ++k) {
      const double g = dyi[k] * gamma[k];
      dxi[k] += inv_sigma * (g - m1 - xh[k] * m2);
    }
    if (dgamma != nullptr) {
      for (size_t k = 0; k < d; ++k) dgamma->data[k] += dyi[k] * xh[k];
    }
    if (dbeta != nullptr) {
      for (size_t k = 0; k < d; ++k) dbeta->data[k] += dyi[k];
    }
  }
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}

struct BlockCache {
  Tensor q, k, v;       // [n,d]
  Tensor probs;         // [heads*n*n], softmaxed attention rows
  Tensor ctx;           // [n,d]
  Tensor attn_dense;    // [n,d]
  Tensor s1;            // h_in + attn_dense
  LnCache ln1;
  Tensor h1;            // [n,d]
  Tensor z1;            // [n,ffn] pre-activation
  Tensor act;           // gelu(z1)
  Tensor z2;            // [n,d]
  Tensor s2;            // h1 + z2
  LnCache ln2;
  Tensor h2;            // [n,d]
};

struct ForwardCache {
  Tensor emb_sum;  // [n,d]
  LnCache emb_ln;
  Tensor h0;       // [n,d]
  std::vector<BlockCache> blocks;
};

void check_input(const ModelConfig& cfg, std::span<const int> ids) {
  if (ids.empty()) throw std::invalid_argument("empty input");
  if (ids.size() > static_cast<size_t>(cfg.max_input_len)) {
    throw std::runtime_error("input exceeds max length");
  }
  for (const int id : ids) {
    if (id < 0 || id >= cfg.vocab_size) {
      throw std::runtime_error("token id out of range: " + std::to_string(id));
    }
  }
}

Tensor run_forward(const ParameterStore& params, std::span<const int> ids,
                   ForwardCache* cache) {
  const ModelConfig& cfg = params.config();
  check_input(cfg, ids);
  const size_t n = ids.size();
  const size_t d = static_cast<size_t>(cfg.hidden_dim);
  const size_t heads = static_cast<size_t>(cfg.num_heads);
  const size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  ForwardCache local;
  ForwardCache& fc = cache != nullptr ? *cache : local;
  fc.blocks.assign(static_cast<size_t>(cfg.num_blocks), BlockCache{});

  const Tensor& word = params.tensor("embeddings.word_embeddings.weight");
  const Tensor& pos = params.tensor("embeddings.position_embeddings.weight");
  fc.emb_sum = Tensor({n, d});
  for (size_t i = 0; i < n; ++i) {
    const double* w = word.data.data() + static_cast<size_t>(ids[i]) * d;
    const double* p = pos.data.data() + i * d;
    double* out = fc.emb_sum.data.data() + i * d;
    for (size_t k = 0; k < d; ++k) out[k] = w[k] + p[k];
  }
  layernorm_forward(fc.emb_sum, params.tensor("embeddings.LayerNorm.weight"),
                    params.tensor("embeddings.LayerNorm.bias"), fc.h0, fc.emb_ln);

  const Tensor* h = &fc.h0;
  for (int b = 0; b < cfg.num_blocks; ++b) {
    BlockCache& bc = fc.blocks[static_cast<size_t>(b)];
    linear_forward(*h, params.tensor(layer_name(b, "attention.self.query.weight")),
                   params.tensor(layer_name(b, "attention.self.query.bias")), bc.q);
    linear_forward(*h, params.tensor(layer_name(b, "attention.self.key.weight")),
                   params.tensor(layer_name(b, "attention.self.key.bias")), bc.k);
    linear_forward(*h, params.tensor(layer_name(b, "attention.self.value.weight")),
                   params.tensor(layer_name(b, "attention.self.value.bias")), bc.v);

    bc.probs = Tensor({heads, n, n});
    bc.ctx = Tensor({n, d});
    std::vector<double> row(n);
    for (size_t t = 0; t < heads; ++t) {
      const size_t col = t * dh;
      double* probs_t = bc.probs.data.data() + t * n * n;
      for (size_t i = 0; i < n; ++i) {
        const double* qi = bc.q.data.data() + i * d + col;
        double row_max = -1e300;
        for (size_t j = 0; j < n; ++j) {
          row[j] = scale * dot_product(qi, bc.k.data.data() + j * d + col, dh);
          row_max = std::max(row_max, row[j]);
        }
        double denom = 0.0;
        for (size_t j = 0; j < n; ++j) {
          row[j] = std::exp(row[j] - row_max);
          denom += row[j];
        }
        double* pr = probs_t + i * n;
        for (size_t j = 0; j < n; ++j) pr[j] = row[j] / denom;
        double* ctx_i = bc.ctx.data.data() + i * d + col;
        for (size_t j = 0; j < n; ++j) {
          axpy(ctx_i, pr[j], bc.v.data.data() + j * d + col, dh);
        }
      }
    }

    linear_forward(bc.ctx, params.tensor(layer_name(b, "attention.output.dense.weight")),
                   params.tensor(layer_name(b, "attention.output.dense.bias")),
                   bc.attn_dense);
    bc.s1 = Tensor({n, d});
    for (size_t i = 0; i < n * d; ++i) bc.s1.data[i] = h->data[i] + bc.attn_dense.data[i];
    layernorm_forward(bc.s1, params.tensor(layer_name(b, "attention.output.LayerNorm.weight")),
                      params.tensor(layer_name(b, "attention.output.LayerNorm.bias")),
                      bc.h1, bc.ln1);

    linear_forward(bc.h1, params.tensor(layer_name(b, "intermediate.dense.weight")),
                   params.tensor(layer_name(b, "intermediate.dense.bias")), bc.z1);
    bc.act = Tensor(bc.z1.shape);
    for (size_t i = 0; i < bc.z1.size(); ++i) bc.act.data[i] = gelu(bc.z1.data[i]);
    linear_forward(bc.act, params.tensor(layer_name(b, "output.dense.weight")),
                   params.tensor(layer_name(b, "output.dense.bias")), bc.z2);
    bc.s2 = Tensor({n, d});
    for (size_t i = 0; i < n * d; ++i) bc.s2.data[i] = bc.h1.data[i] + bc.z2.data[i];
    layernorm_forward(bc.s2, params.tensor(layer_name(b, "output.LayerNorm.weight")),
                      params.tensor(layer_name(b, "output.LayerNorm.bias")), bc.h2,
                      bc.ln2);
    h = &bc.h2;
  }

  Tensor logits;
  linear_forward(*h, params.tensor("mlm.decoder.weight"), params.tensor("mlm.decoder.bias"),
                 logits);
  return logits;
}

// Cross-entropy over labeled rows. When dlogits is non-null it receives
// scale * (softmax - onehot) at labeled rows and zero elsewhere.
double cross_entropy(const Tensor& logits, std::span<const int> labels, double scale,
                     Tensor* dlogits, size_t* labeled_out) {
  const size_t n = logits.rows(), v = logits.cols();
  if (labels.size() != n) throw std::invalid_argument("labels/logits length mismatch");
  if (dlogits != nullptr) *dlogits = Tensor({n, v});
  double loss = 0.0;
  size_t labeled = 0;
  for (size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y == kIgnoreLabel) continue;
    if (y < 0 || static_cast<size_t>(y) >= v) {
      throw std::runtime_error("label id out of range: " + std::to_string(y));
    }
    ++labeled;
    const double* li = logits.data.data() + i * v;
    double row_max = li[0];
    for (size_t k = 1; k < v; ++k) row_max = std::max(row_max, li[k]);
    double denom = 0.0;
    for (size_t k = 0; k < v; ++k) denom += std::exp(li[k] - row_max);
    const double lse = row_max + std::log(denom);
    loss += lse - li[static_cast<size_t>(y)];
    if (dlogits != nullptr) {
      double* g = dlogits->data.data() + i * v;
      for (size_t k = 0; k < v; ++k) g[k] = scale * (std::exp(li[k] - row_max) / denom);
      g[static_cast<size_t>(y)] -= scale;
    }
  }
  if (labeled_out != nullptr) *labeled_out = labeled;
  return loss;
}

class GradSink {
 public:
  GradSink(const ParameterStore& params, const LayerSelection& selection) {
    for (const auto& name : selection) {
      grads_.emplace(name, Tensor(params.tensor(name).shape));
    }
  }

  Tensor* find(const std::string& name) {
    auto it = grads_.find(name);
    return it == grads_.end() ? nullptr : &it->second;
  }

  const GradMap& grads() const { return grads_; }

  GradMap take() { return std::move(grads_); }

 private:
  GradMap grads_;
};

// How deep the backward pass has to run for a given selection: stage 0 is
// the embedding level, stage 1+b is encoder block b, and anything at or
// above the decoder never forces extra depth. Blocks below the minimum
// stage, and attention sublayers nobody selected, are skipped entirely.
struct BackwardDepth {
  int min_stage;                      // lowest stage holding a selected param
  std::vector<char> attention_in_block;  // block -> any attention.* selected

  BackwardDepth(const GradMap& wanted, int num_blocks)
      : min_stage(1 + num_blocks + 1),
        attention_in_block(static_cast<size_t>(num_blocks), 0) {
    for (const auto& [name, g] : wanted) {
      int stage = 1 + num_blocks + 1;
      if (name.rfind("embeddings.", 0) == 0) {
        stage = 0;
      } else if (name.rfind("encoder.layer.", 0) == 0) {
        const size_t start = std::string("encoder.layer.").size();
        const size_t dot = name.find('.', start);
        const int block = std::stoi(name.substr(start, dot - start));
        stage = 1 + block;
        if (name.compare(dot + 1, 10, "attention.") == 0) {
          attention_in_block[static_cast<size_t>(block)] = 1;
        }
      }
      min_stage = std::min(min_stage, stage);
    }
  }
};

void run_backward(const ParameterStore& params, std::span<const int> ids,
                  const ForwardCache& fc, const Tensor& dlogits, GradSink& sink) {
  const ModelConfig& cfg = params.config();
  const size_t n = ids.size();
  const size_t d = static_cast<size_t>(cfg.hidden_dim);
  const size_t heads = static_cast<size_t>(cfg.num_heads);
  const size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const BackwardDepth depth(sink.grads(), cfg.num_blocks);

  const Tensor& h_final =
      cfg.num_blocks > 0 ? fc.blocks.back().h2 : fc.h0;
  Tensor dh_cur({n, d});
  linear_backward(h_final, params.tensor("mlm.decoder.weight"), dlogits, &dh_cur,
                  sink.find("mlm.decoder.weight"), sink.find("mlm.decoder.bias"));
  if (depth.min_stage > cfg.num_blocks) return;  // only decoder params selected

  std::vector<double> drow(n);
  for (int b = cfg.num_blocks - 1; b >= 0; --b) {
    const BlockCache& bc = fc.blocks[static_cast<size_t>(b)];
    const Tensor& h_in = b == 0 ? fc.h0 : fc.blocks[static_cast<size_t>(b) - 1].h2;

    // output LayerNorm
    Tensor ds2({n, d});
    layernorm_backward(bc.ln2, params.tensor(layer_name(b, "output.LayerNorm.weight")),
                       dh_cur, ds2, sink.find(layer_name(b, "output.LayerNorm.weight")),
                       sink.find(layer_name(b, "output.LayerNorm.bias")));

    Tensor dh1 = ds2;  // residual branch
    // FFN output dense
    Tensor dact({n, static_cast<size_t>(cfg.ffn_dim)});
    linear_backward(bc.act, params.tensor(layer_name(b, "output.dense.weight")), ds2,
                    &dact, sink.find(layer_name(b, "output.dense.weight")),
                    sink.find(layer_name(b, "output.dense.bias")));
    Tensor dz1(dact.shape);
    for (size_t i = 0; i < dz1.size(); ++i) {
      dz1.data[i] = dact.data[i] * gelu_grad(bc.z1.data[i]);
    }
    linear_backward(bc.h1, params.tensor(layer_name(b, "intermediate.dense.weight")), dz1,
                    &dh1, sink.find(layer_name(b, "intermediate.dense.weight")),
                    sink.find(layer_name(b, "intermediate.dense.bias")));

    const bool need_below = depth.min_stage <= b;  // a lower block or the embeddings
    if (!need_below && !depth.attention_in_block[static_cast<size_t>(b)]) return;

    // attention LayerNorm
    Tensor ds1({n, d});
    layernorm_backward(bc.ln1,
                       params.tensor(layer_name(b, "attention.output.LayerNorm.weight")),
                       dh1, ds1,
                       sink.find(layer_name(b, "attention.output.LayerNorm.weight")),
                       sink.find(layer_name(b, "attention.output.LayerNorm.bias")));

    Tensor dh_in = ds1;  // residual branch
    Tensor dctx({n, d});
    linear_backward(bc.ctx, params.tensor(layer_name(b, "attention.output.dense.weight")),
                    ds1, &dctx, sink.find(layer_name(b, "attention.output.dense.weight")),
                    sink.find(layer_name(b, "attention.output.dense.bias")));

    Tensor dq({n, d}), dk({n, d}), dv({n, d});
    for (size_t t = 0; t < heads; ++t) {
      const size_t col = t * dh;
      const double* probs_t = bc.probs.data.data() + t * n * n;
      for (size_t i = 0; i < n; ++i) {
        const double* dctx_i = dctx.data.data() + i * d + col;
        const double* pr = probs_t + i * n;
        // dprobs then softmax jacobian within the row
        double inner = 0.0;
        for (size_t j = 0; j < n; ++j) {
          drow[j] = dot_product(dctx_i, bc.v.data.data() + j * d + col, dh);
          inner += drow[j] * pr[j];
        }
        for (size_t j = 0; j < n; ++j) {
          const double dscore = pr[j] * (drow[j] - inner);
          if (dscore != 0.0) {
            axpy(dq.data.data() + i * d + col, dscore * scale,
                 bc.k.data.data() + j * d + col, dh);
            axpy(dk.data.data() + j * d + col, dscore * scale,
                 bc.q.data.data() + i * d + col, dh);
          }
          axpy(dv.data.data() + j * d + col, pr[j], dctx_i, dh);
        }
      }
    }
    linear_backward(h_in, params.tensor(layer_name(b, "attention.self.query.weight")), dq,
                    &dh_in, sink.find(layer_name(b, "attention.self.query.weight")),
                    sink.find(layer_name(b, "attention.self.query.bias")));
    linear_backward(h_in, params.tensor(layer_name(b, "attention.self.key.weight")), dk,
                    &dh_in, sink.find(layer_name(b, "attention.self.key.weight")),
                    sink.find(layer_name(b, "attention.self.key.bias")));
    linear_backward(h_in, params.tensor(layer_name(b, "attention.self.value.weight")), dv,
                    &dh_in, sink.find(layer_name(b, "attention.self.value.weight")),
                    sink.find(layer_name(b, "attention.self.value.bias")));
    if (!need_below) return;
    dh_cur = std::move(dh_in);
  }

  Tensor ds0({n, d});
  layernorm_backward(fc.emb_ln, params.tensor("embeddings.LayerNorm.weight"), dh_cur, ds0,
                     sink.find("embeddings.LayerNorm.weight"),
                     sink.find("embeddings.LayerNorm.bias"));
  if (Tensor* dword = sink.find("embeddings.word_embeddings.weight")) {
    for (size_t i = 0; i < n; ++i) {
      axpy(dword->data.data() + static_cast<size_t>(ids[i]) * d,
           1.0, ds0.data.data() + i * d, d);
    }
  }
  if (Tensor* dpos = sink.find("embeddings.position_embeddings.weight")) {
    for (size_t i = 0; i < n; ++i) {
      axpy(dpos->data.data() + i * d, 1.0, ds0.data.data() + i * d, d);
    }
  }
}

size_t count_labeled(const MaskedInput& in) {
  size_t c = 0;
  for (const int l : in.labels) {
    if (l != kIgnoreLabel) ++c;
  }
  return c;
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size < kNumSpecialTokens + 1) {
    throw std::invalid_argument("model config: vocab_size too small");
  }
  if (num_blocks < 1 || hidden_dim < 1 || num_heads < 1 || ffn_dim < 1) {
    throw std::invalid_argument("model config: dimensions must be positive");
  }
  if (hidden_dim % num_heads != 0) {
    throw std::invalid_argument("model config: hidden_dim must divide evenly by num_heads");
  }
  if (max_input_len < 2) {
    throw std::invalid_argument("model config: max_input_len must be at least 2");
  }
}

Tensor& ParameterStore::tensor(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::runtime_error("unknown parameter: " + name);
  return tensors_[it->second];
}

const Tensor& ParameterStore::tensor(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::runtime_error("unknown parameter: " + name);
  return tensors_[it->second];
}

void ParameterStore::add(const std::string& name, Tensor t) {
  if (index_.count(name) > 0) throw std::invalid_argument("duplicate parameter: " + name);
  index_.emplace(name, tensors_.size());
  names_.push_back(name);
  tensors_.push_back(std::move(t));
}

size_t ParameterStore::parameter_count() const {
  size_t total = 0;
  for (const auto& t : tensors_) total += t.size();
  return total;
}

bool ParameterStore::operator==(const ParameterStore& other) const {
  if (names_ != other.names_) return false;
  for (size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].shape != other.tensors_[i].shape) return false;
    if (std::memcmp(tensors_[i].data.data(), other.tensors_[i].data.data(),
                    tensors_[i].size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

ParameterStore ParameterStore::initialized(const ModelConfig& config, uint64_t seed) {
  config.validate();
  ParameterStore store;
  store.set_config(config);
  Rng rng(seed);

  const auto v = static_cast<size_t>(config.vocab_size);
  const auto d = static_cast<size_t>(config.hidden_dim);
  const auto f = static_cast<size_t>(config.ffn_dim);
  const auto max_len = static_cast<size_t>(config.max_input_len);

  auto randn = [&rng](std::vector<size_t> shape) {
    Tensor t(std::move(shape));
    for (auto& x : t.data) x = rng.normal(0.0, 0.02);
    return t;
  };
  auto zeros = [](std::vector<size_t> shape) { return Tensor(std::move(shape)); };
  auto ones = [](std::vector<size_t> shape) {
    Tensor t(std::move(shape));
    t.fill(1.0);
    return t;
  };

  store.add("embeddings.word_embeddings.weight", randn({v, d}));
  store.add("embeddings.position_embeddings.weight", randn({max_len, d}));
  store.add("embeddings.LayerNorm.weight", ones({d}));
  store.add("embeddings.LayerNorm.bias", zeros({d}));
  for (int b = 0; b < config.num_blocks; ++b) {
    store.add(layer_name(b, "attention.self.query.weight"), randn({d, d}));
    store.add(layer_name(b, "attention.self.query.bias"), zeros({d}));
    store.add(layer_name(b, "attention.self.key.weight"), randn({d, d}));
    store.add(layer_name(b, "attention.self.key.bias"), zeros({d}));
    store.add(layer_name(b, "attention.self.value.weight"), randn({d, d}));
    store.add(layer_name(b, "attention.self.value.bias"), zeros({d}));
    store.add(layer_name(b, "attention.output.dense.weight"), randn({d, d}));
    store.add(layer_name(b, "attention.output.dense.bias"), zeros({d}));
    store.add(layer_name(b, "attention.output.LayerNorm.weight"), ones({d}));
    store.add(layer_name(b, "attention.output.LayerNorm.bias"), zeros({d}));
    store.add(layer_name(b, "intermediate.dense.weight"), randn({f, d}));
    store.add(layer_name(b, "intermediate.dense.bias"), zeros({f}));
    store.add(layer_name(b, "output.dense.weight"), randn({d, f}));
    store.add(layer_name(b, "output.dense.bias"), zeros({d}));
    store.add(layer_name(b, "output.LayerNorm.weight"), ones({d}));
    store.add(layer_name(b, "output.LayerNorm.bias"), zeros({d}));
  }
  store.add("mlm.decoder.weight", randn({v, d}));
  store.add("mlm.decoder.bias", zeros({v}));
  return store;
}

LayerSelection default_layer_selection(const ModelConfig& config) {
  const int last = config.num_blocks - 1;
  return {layer_name(last, "output.dense.bias"),
          layer_name(last, "output.LayerNorm.weight"),
          layer_name(last, "output.LayerNorm.bias")};
}

void validate_selection(const ParameterStore& params, const LayerSelection& selection) {
  if (selection.empty()) throw std::invalid_argument("layer selection must be non-empty");
  std::unordered_set<std::string> seen;
  for (const auto& name : selection) {
    if (!params.has(name)) throw std::invalid_argument("unknown parameter: " + name);
    if (!seen.insert(name).second) {
      throw std::invalid_argument("duplicate layer in selection: " + name);
    }
  }
}

OptimizerState OptimizerState::init(const AdamWHyper& hyper, const LayerSelection& selection,
                                    const ParameterStore& params) {
  validate_selection(params, selection);
  OptimizerState state;
  state.hyper = hyper;
  state.names = selection;
  for (const auto& name : selection) {
    state.first_moment.emplace_back(params.tensor(name).shape);
    state.second_moment.emplace_back(params.tensor(name).shape);
  }
  return state;
}

Tensor forward_mlm(const ParameterStore& params, std::span<const int> input_ids) {
  return run_forward(params, input_ids, nullptr);
}

double mlm_loss(const Tensor& logits, std::span<const int> labels) {
  size_t labeled = 0;
  const double total = cross_entropy(logits, labels, 0.0, nullptr, &labeled);
  if (labeled == 0) throw std::runtime_error("no labeled positions");
  return total / static_cast<double>(labeled);
}

GradMap backward(const ParameterStore& params, std::span<const int> input_ids,
                 std::span<const int> labels, const LayerSelection& selection) {
  validate_selection(params, selection);
  ForwardCache fc;
  const Tensor logits = run_forward(params, input_ids, &fc);
  size_t labeled = 0;
  cross_entropy(logits, labels, 0.0, nullptr, &labeled);
  if (labeled == 0) throw std::runtime_error("no labeled positions");
  Tensor dlogits;
  cross_entropy(logits, labels, 1.0 / static_cast<double>(labeled), &dlogits, nullptr);
  GradSink sink(params, selection);
  run_backward(params, input_ids, fc, dlogits, sink);
  return sink.take();
}

BatchResult batch_gradients(const ParameterStore& params,
                            std::span<const MaskedInput> batch,
                            const LayerSelection& selection) {
  validate_selection(params, selection);
  size_t total_labeled = 0;
  for (const auto& in : batch) total_labeled += count_labeled(in);
  if (total_labeled == 0) throw std::runtime_error("no labeled positions");

  const double scale = 1.0 / static_cast<double>(total_labeled);
  GradSink sink(params, selection);
  double loss = 0.0;
  for (const auto& in : batch) {
    if (count_labeled(in) == 0) continue;
    ForwardCache fc;
    const Tensor logits = run_forward(params, in.input_ids, &fc);
    Tensor dlogits;
    loss += cross_entropy(logits, in.labels, scale, &dlogits, nullptr);
    run_backward(params, in.input_ids, fc, dlogits, sink);
  }

  BatchResult result;
  result.loss = loss * scale;
  result.labeled_positions = total_labeled;
  result.grads = sink.take();
  return result;
}

void adamw_step(ParameterStore& params, const GradMap& grads, OptimizerState& state) {
  if (grads.size() != state.names.size()) {
    throw std::runtime_error("selection/gradient mismatch");
  }
  for (const auto& name : state.names) {
    auto it = grads.find(name);
    if (it == grads.end() || !it->second.same_shape(params.tensor(name))) {
      throw std::runtime_error("selection/gradient mismatch");
    }
  }

  const AdamWHyper& h = state.hyper;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (size_t p = 0; p < state.names.size(); ++p) {
    const Tensor& g = grads.at(state.names[p]);
    Tensor& w = params.tensor(state.names[p]);
    Tensor& m = state.first_moment[p];
    Tensor& v = state.second_moment[p];
    for (size_t i = 0; i < w.size(); ++i) {
      m.data[i] = h.beta1 * m.data[i] + (1.0 - h.beta1) * g.data[i];
      v.data[i] = h.beta2 * v.data[i] + (1.0 - h.beta2) * g.data[i] * g.data[i];
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      w.data[i] = w.data[i] * (1.0 - h.lr * h.weight_decay) -
                  h.lr * mhat / (std::sqrt(vhat) + h.eps);
    }
  }
}

std::vector<Tensor> snapshot(const ParameterStore& params, const LayerSelection& selection) {
  validate_selection(params, selection);
  std::vector<Tensor> out;
  out.reserve(selection.size());
  for (const auto& name : selection) out.push_back(params.tensor(name));
  return out;
}

void restore(ParameterStore& params, const LayerSelection& selection,
             const std::vector<Tensor>& weights) {
  validate_selection(params, selection);
  if (weights.size() != selection.size()) {
    throw std::runtime_error("restore: snapshot/selection size mismatch");
  }
  for (size_t i = 0; i < selection.size(); ++i) {
    Tensor& dst = params.tensor(selection[i]);
    if (!dst.same_shape(weights[i])) {
      throw std::runtime_error("restore: shape mismatch for " + selection[i]);
    }
  }
  for (size_t i = 0; i < selection.size(); ++i) {
    params.tensor(selection[i]) = weights[i];
  }
}

namespace {

MaskedInput random_mask(const Chunk& chunk, const Vocabulary& vocab, double mask_prob,
                        Rng& rng) {
  MaskedInput in;
  in.input_ids = chunk.ids;
  in.labels.assign(chunk.size(), kIgnoreLabel);
  const int v = vocab.size();
  const int first_regular = kNumSpecialTokens;
  std::vector<size_t> selected;
  for (size_t j = 0; j < chunk.size(); ++j) {
    if (rng.uniform01() < mask_prob) selected.push_back(j);
  }
  if (selected.empty()) {
    selected.push_back(static_cast<size_t>(rng.uniform_below(chunk.size())));
  }
  for (const size_t j : selected) {
    in.labels[j] = chunk.ids[j];
    const double r = rng.uniform01();
    if (r < 0.8) {
      in.input_ids[j] = vocab.mask_id;
    } else if (r < 0.9 && v > first_regular) {
      in.input_ids[j] =
          first_regular + static_cast<int>(rng.uniform_below(
                              static_cast<uint64_t>(v - first_regular)));
    }  // else keep the original token
  }
  return in;
}

double pooled_loss(const ParameterStore& params, const std::vector<MaskedInput>& inputs) {
  double total = 0.0;
  size_t labeled = 0;
  for (const auto& in : inputs) {
    const Tensor logits = forward_mlm(params, in.input_ids);
    size_t l = 0;
    total += cross_entropy(logits, in.labels, 0.0, nullptr, &l);
    labeled += l;
  }
  return labeled == 0 ? 0.0 : total / static_cast<double>(labeled);
}

}  // namespace

PretrainResult pretrain(const std::vector<std::string>& corpus_lines,
                        const Vocabulary& vocab, const ModelConfig& config,
                        const PretrainOptions& opts) {
  config.validate();
  if (config.vocab_size != vocab.size()) {
    throw std::invalid_argument("pretrain: config vocab_size differs from vocabulary");
  }

  std::vector<Chunk> chunks;
  for (const auto& line : corpus_lines) {
    auto line_chunks = chunk_text(line, vocab, static_cast<size_t>(config.max_input_len));
    std::move(line_chunks.begin(), line_chunks.end(), std::back_inserter(chunks));
  }
  if (chunks.empty()) throw std::runtime_error("empty corpus");

  std::vector<Chunk> train;
  std::vector<Chunk> heldout;
  for (size_t i = 0; i < chunks.size(); ++i) {
    if (opts.heldout_every > 0 &&
        (i + 1) % static_cast<size_t>(opts.heldout_every) == 0) {
      heldout.push_back(std::move(chunks[i]));
    } else {
      train.push_back(std::move(chunks[i]));
    }
  }
  if (train.empty()) {
    train = std::move(heldout);
    heldout.clear();
  }

  PretrainResult result;
  result.train_chunks = train.size();
  result.heldout_chunks = heldout.size();
  result.params = ParameterStore::initialized(config, opts.seed);

  // Fixed masked version of the held-out slice, reused for the before and
  // after measurements. Falls back to a train slice when nothing is held out.
  Rng heldout_rng(fnv1a64("heldout", opts.seed));
  std::vector<MaskedInput> heldout_inputs;
  const std::vector<Chunk>& eval_chunks = heldout.empty() ? train : heldout;
  const size_t eval_count = std::min<size_t>(eval_chunks.size(), 64);
  for (size_t i = 0; i < eval_count; ++i) {
    heldout_inputs.push_back(random_mask(eval_chunks[i], vocab, opts.mask_prob, heldout_rng));
  }
  result.init_heldout_loss = pooled_loss(result.params, heldout_inputs);

  AdamWHyper hyper;
  hyper.lr = opts.lr;
  hyper.weight_decay = opts.weight_decay;
  OptimizerState state = OptimizerState::init(hyper, result.params.names(), result.params);

  Rng rng(fnv1a64("pretrain", opts.seed));
  std::vector<MaskedInput> batch;
  for (int step = 0; step < opts.steps; ++step) {
    batch.clear();
    for (int b = 0; b < opts.batch_size; ++b) {
      const size_t idx = static_cast<size_t>(rng.uniform_below(train.size()));
      batch.push_back(random_mask(train[idx], vocab, opts.mask_prob, rng));
    }
    BatchResult r = batch_gradients(result.params, batch, result.params.names());
    adamw_step(result.params, r.grads, state);
    result.final_train_loss = r.loss;
    if ((step + 1) % 50 == 0) {
      log_info("pretrain step " + std::to_string(step + 1) + "/" +
               std::to_string(opts.steps) + " loss " + std::to_string(r.loss));
    }
  }

  result.final_heldout_loss = pooled_loss(result.params, heldout_inputs);
  return result;
}

}  // namespace nemb
