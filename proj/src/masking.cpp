#include "nemb/masking.hpp"

#include <algorithm>
#include <stdexcept>

#include "nemb/util.hpp"

namespace nemb {

BlueprintSet BlueprintSet::defaults() {
  BlueprintSet s;
  s.blueprints = {{2, 1}, {1, 1}, {1, 2}, {1, 3}};
  return s;
}

BlueprintSet BlueprintSet::parse(const std::string& text) {
  BlueprintSet s;
  const std::string spec = trim(text);
  if (spec == "identity") {
    s.identity_mode = true;
    return s;
  }
  for (const auto& part : split_string(spec, ',')) {
    const auto kv = split_string(trim(part), ':');
    if (kv.size() != 2) {
      throw std::invalid_argument("bad blueprint '" + part + "': expected k:m");
    }
    MaskingBlueprint bp;
    try {
      bp.keep = std::stoi(kv[0]);
      bp.masked = std::stoi(kv[1]);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad blueprint '" + part + "': expected k:m");
    }
    s.blueprints.push_back(bp);
  }
  s.validate();
  return s;
}

std::string BlueprintSet::to_string() const {
  if (identity_mode) return "identity";
  std::string out;
  for (size_t i = 0; i < blueprints.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(blueprints[i].keep) + ':' + std::to_string(blueprints[i].masked);
  }
  return out;
}

void BlueprintSet::validate() const {
  if (identity_mode) return;
  if (blueprints.empty()) {
    throw std::invalid_argument("blueprint set must be non-empty unless identity");
  }
  for (const auto& bp : blueprints) {
    if (bp.keep < 1 || bp.masked < 1) {
      throw std::invalid_argument("blueprint requires k >= 1 and m >= 1");
    }
  }
}

std::vector<MaskedInput> generate_inputs(const Chunk& chunk, const BlueprintSet& bset,
                                         int mask_id) {
  if (chunk.empty()) throw std::runtime_error("empty chunk");
  bset.validate();

  const int len = static_cast<int>(chunk.size());
  std::vector<MaskedInput> out;

  if (bset.identity_mode) {
    MaskedInput in;
    in.input_ids = chunk.ids;
    in.labels = chunk.ids;
    out.push_back(std::move(in));
    return out;
  }

  for (const auto& bp : bset.blueprints) {
    const int period = bp.period();
    const int max_shift = std::min(period, len);
    for (int s = 0; s < max_shift; ++s) {
      MaskedInput in;
      in.input_ids = chunk.ids;
      in.labels.assign(chunk.size(), kIgnoreLabel);
      for (int j = 0; j < len; ++j) {
        const int offset = ((j - s) % period + period) % period;
        if (offset >= bp.keep) {
          in.labels[j] = chunk.ids[j];
          in.input_ids[j] = mask_id;
        }
      }
      out.push_back(std::move(in));
    }
  }
  return out;
}

std::vector<MaskedInput> build_training_set(const std::vector<Chunk>& chunks,
                                            const BlueprintSet& bset, int mask_id,
                                            uint64_t seed) {
  std::vector<MaskedInput> all;
  for (const auto& chunk : chunks) {
    if (chunk.empty()) continue;
    auto inputs = generate_inputs(chunk, bset, mask_id);
    std::move(inputs.begin(), inputs.end(), std::back_inserter(all));
  }
  if (all.empty()) throw std::runtime_error("no trainable content");
  Rng rng(seed);
  fisher_yates_shuffle(all, rng);
  return all;
}

}  // namespace nemb
