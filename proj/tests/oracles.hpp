#pragma once

// Independent reference implementations used only by tests. Each oracle is a
// deliberately naive, straight-line version of the algorithm under test and
// shares no code with the library implementation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nemb/evaluation.hpp"
#include "nemb/model.hpp"

namespace oracles {

// ---------------------------------------------------------------------------
// Periodic masking reference: literal transcription of the published
// pseudocode. For each blueprint (k, m) with period P = k + m, shifts s run
// over range(min(P, len(T))); position j is masked iff ((j - s) mod P) >= k
// with the non-negative modulo.
// ---------------------------------------------------------------------------

struct MaskPair {
  std::vector<int> input;
  std::vector<int> labels;  // original token at masked positions, -1 elsewhere
};

inline std::vector<MaskPair> periodic_mask_reference(
    const std::vector<int>& T, const std::vector<std::pair<int, int>>& blueprints,
    int mask) {
  std::vector<MaskPair> inputs_and_labels;
  for (const auto& [k, m] : blueprints) {
    const int P = k + m;
    const int S_max = std::min<int>(P, static_cast<int>(T.size()));
    for (int s = 0; s < S_max; ++s) {
      MaskPair pair;
      pair.input = T;
      pair.labels.assign(T.size(), -1);
      for (int j = 0; j < static_cast<int>(T.size()); ++j) {
        int R = (j - s) % P;
        if (R < 0) R += P;
        if (R >= k) {
          pair.labels[j] = pair.input[j];
          pair.input[j] = mask;
        }
      }
      inputs_and_labels.push_back(std::move(pair));
    }
  }
  return inputs_and_labels;
}

// ---------------------------------------------------------------------------
// Brute-force triplet scoring: enumerate every (anchor, same, diff) triplet
// with three nested loops and score it directly. O(n^3), fine for <= 60 items.
// ---------------------------------------------------------------------------

struct BruteForceResult {
  uint64_t total = 0;
  uint64_t broken = 0;
  uint64_t ties = 0;
  double same_avg = 0.0;
  double diff_avg = 0.0;
  double error_global = 0.0;
  double error_per_anchor_avg = 0.0;
  size_t anchors_with_triplets = 0;
  nemb::BrokenSet broken_triplets;  // sorted lexicographically
};

inline double naive_dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

inline BruteForceResult brute_force_evaluate(const std::vector<nemb::DatasetItem>& items,
                                             const nemb::EmbeddingMatrix& emb) {
  BruteForceResult res;
  const size_t n = items.size();
  std::vector<size_t> rows(n);
  for (size_t i = 0; i < n; ++i) {
    auto found = emb.find(items[i].id);
    if (!found) throw std::runtime_error("oracle: missing embedding for " + items[i].id);
    rows[i] = *found;
  }
  auto can_anchor = [&](size_t i) {
    return items[i].role == nemb::Role::kBoth || items[i].role == nemb::Role::kAnchorOnly;
  };
  auto can_candidate = [&](size_t i) {
    return items[i].role == nemb::Role::kBoth || items[i].role == nemb::Role::kCandidateOnly;
  };

  double same_sum = 0.0;
  double diff_sum = 0.0;
  for (size_t a = 0; a < n; ++a) {
    if (!can_anchor(a)) continue;
    uint64_t anchor_total = 0;
    uint64_t anchor_broken = 0;
    for (size_t s = 0; s < n; ++s) {
      if (s == a || !can_candidate(s) || items[s].group != items[a].group) continue;
      const double sim_same = naive_dot(emb.row(rows[a]), emb.row(rows[s]));
      for (size_t d = 0; d < n; ++d) {
        if (!can_candidate(d) || items[d].group == items[a].group) continue;
        const double sim_diff = naive_dot(emb.row(rows[a]), emb.row(rows[d]));
        ++anchor_total;
        same_sum += sim_same;
        diff_sum += sim_diff;
        if (sim_same <= sim_diff) {
          ++anchor_broken;
          if (sim_same == sim_diff) ++res.ties;
          res.broken_triplets.push_back({items[a].id, items[s].id, items[d].id});
        }
      }
    }
    res.total += anchor_total;
    res.broken += anchor_broken;
    if (anchor_total > 0) {
      ++res.anchors_with_triplets;
      res.error_per_anchor_avg +=
          static_cast<double>(anchor_broken) / static_cast<double>(anchor_total);
    }
  }
  if (res.total > 0) {
    res.same_avg = same_sum / static_cast<double>(res.total);
    res.diff_avg = diff_sum / static_cast<double>(res.total);
    res.error_global = static_cast<double>(res.broken) / static_cast<double>(res.total);
  }
  if (res.anchors_with_triplets > 0)
    res.error_per_anchor_avg /= static_cast<double>(res.anchors_with_triplets);
  else
    res.error_per_anchor_avg = 0.0;
  std::sort(res.broken_triplets.begin(), res.broken_triplets.end());
  return res;
}

// ---------------------------------------------------------------------------
// Central finite differences on the masked-LM loss with respect to one
// parameter coordinate.
// ---------------------------------------------------------------------------

inline double numeric_gradient(nemb::ParameterStore& params, const std::vector<int>& input,
                               const std::vector<int>& labels, const std::string& name,
                               size_t flat_index, double h = 1e-5) {
  nemb::Tensor& t = params.tensor(name);
  const double original = t.data.at(flat_index);
  t.data[flat_index] = original + h;
  const double loss_plus = nemb::mlm_loss(nemb::forward_mlm(params, input), labels);
  t.data[flat_index] = original - h;
  const double loss_minus = nemb::mlm_loss(nemb::forward_mlm(params, input), labels);
  t.data[flat_index] = original;
  return (loss_plus - loss_minus) / (2.0 * h);
}

inline double gradient_relative_error(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-6});
  return std::fabs(analytic - numeric) / denom;
}

}  // namespace oracles
