#include "nemb/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nemb/util.hpp"

namespace nemb {

Role role_from_string(const std::string& s) {
  if (s == "both") return Role::kBoth;
  if (s == "anchor_only") return Role::kAnchorOnly;
  if (s == "candidate_only") return Role::kCandidateOnly;
  throw std::invalid_argument("unknown role: " + s);
}

std::string role_to_string(Role role) {
  switch (role) {
    case Role::kBoth: return "both";
    case Role::kAnchorOnly: return "anchor_only";
    case Role::kCandidateOnly: return "candidate_only";
  }
  throw std::logic_error("unreachable role");
}

void EmbeddingMatrix::add(const std::string& id, std::span<const double> values) {
  if (values.empty()) throw std::runtime_error("empty embedding row for '" + id + "'");
  if (dim_ == 0) dim_ = values.size();
  if (values.size() != dim_) {
    throw std::runtime_error("inconsistent dimension for '" + id + "'");
  }
  if (index_.count(id) > 0) throw std::runtime_error("duplicate id: " + id);
  index_.emplace(id, ids_.size());
  ids_.push_back(id);
  data_.insert(data_.end(), values.begin(), values.end());
}

std::span<const double> EmbeddingMatrix::row(size_t i) const {
  if (i >= ids_.size()) throw std::out_of_range("embedding row out of range");
  return {data_.data() + i * dim_, dim_};
}

std::optional<size_t> EmbeddingMatrix::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingMatrix::normalize_rows() {
  for (size_t i = 0; i < ids_.size(); ++i) {
    double* r = data_.data() + i * dim_;
    double sq = 0.0;
    for (size_t k = 0; k < dim_; ++k) sq += r[k] * r[k];
    if (sq <= 0.0) continue;
    const double inv = 1.0 / std::sqrt(sq);
    for (size_t k = 0; k < dim_; ++k) r[k] *= inv;
  }
}

namespace {

bool is_anchor(Role r) { return r == Role::kBoth || r == Role::kAnchorOnly; }
bool is_candidate(Role r) { return r == Role::kBoth || r == Role::kCandidateOnly; }

void check_unique_ids(const std::vector<DatasetItem>& items) {
  std::unordered_map<std::string, int> seen;
  for (const auto& item : items) {
    if (++seen[item.id] > 1) throw std::runtime_error("duplicate id: " + item.id);
  }
}

// Dataset items resolved to matrix rows; every id must resolve.
struct PresentItems {
  std::vector<size_t> rows;          // row in the matrix
  std::vector<std::string> ids;
  std::vector<std::string> groups;
  std::vector<Role> roles;
};

PresentItems collect_present(const std::vector<DatasetItem>& items,
                             const EmbeddingMatrix& embeddings) {
  check_unique_ids(items);
  PresentItems out;
  for (const auto& item : items) {
    const auto row = embeddings.find(item.id);
    if (!row.has_value()) {
      throw std::runtime_error("missing embedding for id: " + item.id);
    }
    out.rows.push_back(*row);
    out.ids.push_back(item.id);
    out.groups.push_back(item.group);
    out.roles.push_back(item.role);
  }
  return out;
}

}  // namespace

std::vector<std::string> missing_ids(const std::vector<DatasetItem>& items,
                                     const EmbeddingMatrix& embeddings) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    if (!embeddings.find(item.id).has_value()) out.push_back(item.id);
  }
  return out;
}

uint64_t count_triplets(const std::vector<DatasetItem>& items) {
  check_unique_ids(items);
  std::unordered_map<std::string, uint64_t> group_candidates;
  uint64_t total_candidates = 0;
  for (const auto& item : items) {
    if (is_candidate(item.role)) {
      ++group_candidates[item.group];
      ++total_candidates;
    }
  }
  uint64_t total = 0;
  for (const auto& item : items) {
    if (!is_anchor(item.role)) continue;
    const auto it = group_candidates.find(item.group);
    const uint64_t in_group = it == group_candidates.end() ? 0 : it->second;
    const uint64_t same = in_group - (is_candidate(item.role) ? 1 : 0);
    const uint64_t diff = total_candidates - in_group;
    total += same * diff;
  }
  return total;
}

TripletReport evaluate(const std::vector<DatasetItem>& items,
                       const EmbeddingMatrix& embeddings) {
  const PresentItems present = collect_present(items, embeddings);
  const size_t n = present.rows.size();

  TripletReport report;
  report.items_evaluated = n;

  double same_sum = 0.0;  // each same-group sim weighted by the anchor's |D|
  double diff_sum = 0.0;  // each cross-group sim weighted by the anchor's |S|
  double per_anchor_err_sum = 0.0;

  std::vector<double> same_sims, diff_sims;
  for (size_t a = 0; a < n; ++a) {
    if (!is_anchor(present.roles[a])) continue;
    const auto anchor_row = embeddings.row(present.rows[a]);

    same_sims.clear();
    diff_sims.clear();
    for (size_t c = 0; c < n; ++c) {
      if (!is_candidate(present.roles[c]) || c == a) continue;
      const double sim =
          dot_product(anchor_row.data(), embeddings.row(present.rows[c]).data(),
                      embeddings.dim());
      if (present.groups[c] == present.groups[a]) {
        same_sims.push_back(sim);
      } else {
        diff_sims.push_back(sim);
      }
    }
    const uint64_t t = static_cast<uint64_t>(same_sims.size()) *
                       static_cast<uint64_t>(diff_sims.size());
    if (t == 0) continue;

    std::sort(diff_sims.begin(), diff_sims.end());
    uint64_t broken = 0;
    uint64_t ties = 0;
    for (const double s : same_sims) {
      const auto lb = std::lower_bound(diff_sims.begin(), diff_sims.end(), s);
      broken += static_cast<uint64_t>(diff_sims.end() - lb);  // every d >= s
      const auto ub = std::upper_bound(lb, diff_sims.end(), s);
      ties += static_cast<uint64_t>(ub - lb);
      same_sum += s * static_cast<double>(diff_sims.size());
    }
    for (const double d : diff_sims) diff_sum += d * static_cast<double>(same_sims.size());

    report.total += t;
    report.broken += broken;
    report.ties += ties;
    per_anchor_err_sum += static_cast<double>(broken) / static_cast<double>(t);
    ++report.anchors_with_triplets;
  }

  if (report.total > 0) {
    report.error_global =
        static_cast<double>(report.broken) / static_cast<double>(report.total);
    report.same_avg = same_sum / static_cast<double>(report.total);
    report.diff_avg = diff_sum / static_cast<double>(report.total);
  }
  if (report.anchors_with_triplets > 0) {
    report.error_per_anchor_avg =
        per_anchor_err_sum / static_cast<double>(report.anchors_with_triplets);
  }
  return report;
}

BrokenSet broken_set(const std::vector<DatasetItem>& items,
                     const EmbeddingMatrix& embeddings, uint64_t cap) {
  const PresentItems present = collect_present(items, embeddings);
  const size_t n = present.rows.size();

  BrokenSet out;
  std::vector<std::pair<double, size_t>> diff_sims;  // (sim, present index)
  for (size_t a = 0; a < n; ++a) {
    if (!is_anchor(present.roles[a])) continue;
    const auto anchor_row = embeddings.row(present.rows[a]);

    diff_sims.clear();
    std::vector<std::pair<double, size_t>> same_sims;
    for (size_t c = 0; c < n; ++c) {
      if (!is_candidate(present.roles[c]) || c == a) continue;
      const double sim =
          dot_product(anchor_row.data(), embeddings.row(present.rows[c]).data(),
                      embeddings.dim());
      if (present.groups[c] == present.groups[a]) {
        same_sims.emplace_back(sim, c);
      } else {
        diff_sims.emplace_back(sim, c);
      }
    }
    if (same_sims.empty() || diff_sims.empty()) continue;
    std::sort(diff_sims.begin(), diff_sims.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    for (const auto& [s, b] : same_sims) {
      auto it = std::lower_bound(
          diff_sims.begin(), diff_sims.end(), s,
          [](const auto& d, double v) { return d.first < v; });
      for (; it != diff_sims.end(); ++it) {
        if (out.size() >= cap) throw std::runtime_error("broken set exceeds cap");
        out.push_back({present.ids[a], present.ids[b], present.ids[it->second]});
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

double intersection(const BrokenSet& a, const BrokenSet& b) {
  if (a.empty() || b.empty()) return 0.0;
  uint64_t common = 0;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  return static_cast<double>(common) /
         static_cast<double>(std::min(a.size(), b.size()));
}

EmbeddingMatrix concat_ensemble(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  EmbeddingMatrix out(a.dim() + b.dim());
  std::vector<double> row(a.dim() + b.dim());
  size_t skipped = 0;
  for (size_t i = 0; i < a.count(); ++i) {
    const auto j = b.find(a.ids()[i]);
    if (!j.has_value()) {
      ++skipped;
      continue;
    }
    const auto ra = a.row(i);
    const auto rb = b.row(*j);
    std::copy(ra.begin(), ra.end(), row.begin());
    std::copy(rb.begin(), rb.end(), row.begin() + static_cast<ptrdiff_t>(a.dim()));
    out.add(a.ids()[i], row);
  }
  if (skipped > 0) {
    log_warn("concat: " + std::to_string(skipped) +
             " id(s) present in only one store were skipped");
  }
  if (out.count() == 0) throw std::runtime_error("no common ids between stores");
  out.normalize_rows();
  out.set_fingerprint("concat(" + a.fingerprint() + " | " + b.fingerprint() + ")");
  return out;
}

}  // namespace nemb
