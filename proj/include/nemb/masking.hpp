#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nemb/tokenizer.hpp"

namespace nemb {

// Label value for positions that do not contribute to the loss.
inline constexpr int kIgnoreLabel = -1;

// Periodic masking pattern: keep `keep` tokens, mask the next `masked`,
// repeat. Period = keep + masked.
struct MaskingBlueprint {
  int keep = 1;
  int masked = 1;

  int period() const { return keep + masked; }
};

struct BlueprintSet {
  std::vector<MaskingBlueprint> blueprints;
  bool identity_mode = false;  // no masking, predict every token

  // [(2,1),(1,1),(1,2),(1,3)]
  static BlueprintSet defaults();

  // "2:1,1:1,1:2,1:3" or "identity".
  static BlueprintSet parse(const std::string& text);
  std::string to_string() const;

  void validate() const;  // throws on k<1, m<1, or empty non-identity set
};

struct MaskedInput {
  std::vector<int> input_ids;
  std::vector<int> labels;  // original id at masked positions, kIgnoreLabel elsewhere

  size_t size() const { return input_ids.size(); }
};

// One input per (blueprint, shift): shift s in 0..min(period, len)-1, and
// position j is masked iff ((j - s) mod period) >= keep, with the
// non-negative modulo. Identity mode emits a single unmasked input whose
// labels are all set.
std::vector<MaskedInput> generate_inputs(const Chunk& chunk, const BlueprintSet& bset,
                                         int mask_id);

// Concatenation of generate_inputs over all chunks, then one seeded
// Fisher-Yates shuffle. Empty chunks are skipped; all-empty is an error.
std::vector<MaskedInput> build_training_set(const std::vector<Chunk>& chunks,
                                            const BlueprintSet& bset, int mask_id,
                                            uint64_t seed);

}  // namespace nemb
