#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace nemb {

// Which sides of a triplet an item may appear on.
enum class Role { kBoth, kAnchorOnly, kCandidateOnly };

Role role_from_string(const std::string& s);  // "both" | "anchor_only" | "candidate_only"
std::string role_to_string(Role role);

struct DatasetItem {
  std::string id;
  std::string group;
  Role role = Role::kBoth;
  std::string text;  // may be empty for pre-embedded datasets
};

// Unit-norm embedding rows addressed by item id. Rows are stored row-major;
// all rows share one dimension.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  explicit EmbeddingMatrix(size_t dim) : dim_(dim) {}

  size_t dim() const { return dim_; }
  size_t count() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& fingerprint() const { return fingerprint_; }
  void set_fingerprint(std::string fp) { fingerprint_ = std::move(fp); }

  // Throws on duplicate id or on a row of the wrong dimension.
  void add(const std::string& id, std::span<const double> values);

  std::span<const double> row(size_t i) const;
  std::optional<size_t> find(const std::string& id) const;

  // Scales every row to unit length; zero rows are left untouched.
  void normalize_rows();

 private:
  size_t dim_ = 0;
  std::string fingerprint_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, size_t> index_;
  std::vector<double> data_;
};

// Number of (anchor, same-group, different-group) triplets the dataset
// defines: for every eligible anchor, every same-group candidate other than
// itself paired with every candidate outside the group.
uint64_t count_triplets(const std::vector<DatasetItem>& items);

struct TripletReport {
  uint64_t total = 0;
  uint64_t broken = 0;            // sim(anchor, same) <= sim(anchor, diff)
  uint64_t ties = 0;              // exact similarity ties, counted as broken
  double error_global = 0.0;      // broken / total
  double error_per_anchor_avg = 0.0;  // mean per-anchor error, anchors with triplets
  double same_avg = 0.0;          // mean same-group similarity, triplet-weighted
  double diff_avg = 0.0;          // mean cross-group similarity, triplet-weighted
  size_t anchors_with_triplets = 0;
  size_t items_evaluated = 0;
};

// Items without a row in the matrix, in dataset order.
std::vector<std::string> missing_ids(const std::vector<DatasetItem>& items,
                                     const EmbeddingMatrix& embeddings);

// Scores every triplet without enumerating them: per anchor the cross-group
// similarities are sorted once and each same-group similarity is located by
// binary search. Every item must have an embedding row; a missing id is an
// error naming the id.
TripletReport evaluate(const std::vector<DatasetItem>& items,
                       const EmbeddingMatrix& embeddings);

struct TripletId {
  std::string anchor;
  std::string same;
  std::string diff;

  bool operator==(const TripletId&) const = default;
  bool operator<(const TripletId& o) const {
    if (anchor != o.anchor) return anchor < o.anchor;
    if (same != o.same) return same < o.same;
    return diff < o.diff;
  }
};

// Lexicographically sorted list of broken triplets.
using BrokenSet = std::vector<TripletId>;

inline constexpr uint64_t kDefaultBrokenCap = 10000000;

// Enumerates the broken triplets; throws once more than `cap` would be
// collected.
BrokenSet broken_set(const std::vector<DatasetItem>& items,
                     const EmbeddingMatrix& embeddings,
                     uint64_t cap = kDefaultBrokenCap);

// |a intersect b| / min(|a|, |b|); zero when either set is empty.
double intersection(const BrokenSet& a, const BrokenSet& b);

// Rows are the ids present in both stores: each row is the concatenation of
// the two unit rows, renormalized. Similarities under the result equal the
// mean of the two component similarities.
EmbeddingMatrix concat_ensemble(const EmbeddingMatrix& a, const EmbeddingMatrix& b);

}  // namespace nemb
