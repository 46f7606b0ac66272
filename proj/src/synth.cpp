#include "nemb/synth.hpp"

#include <array>
#include <stdexcept>

#include "nemb/util.hpp"

namespace nemb {

namespace {

constexpr std::array<const char*, 8> kFunctionWords = {"the", "a",  "of", "to",
                                                       "and", "in", "is", "on"};

}  // namespace

void SyntheticTopicSpec::validate() const {
  if (topics < 1) throw std::invalid_argument("degenerate synthetic spec: topics < 1");
  if (vocab_per_topic < 1) {
    throw std::invalid_argument("degenerate synthetic spec: vocab_per_topic < 1");
  }
  if (texts_per_topic < 1) {
    throw std::invalid_argument("degenerate synthetic spec: texts_per_topic < 1");
  }
  if (sentence_len_min < 1 || sentence_len_max < sentence_len_min) {
    throw std::invalid_argument("degenerate synthetic spec: bad sentence length range");
  }
  if (sentences_min < 1 || sentences_max < sentences_min) {
    throw std::invalid_argument("degenerate synthetic spec: bad sentence count range");
  }
  if (function_word_prob < 0.0 || function_word_prob >= 1.0) {
    throw std::invalid_argument(
        "degenerate synthetic spec: function_word_prob outside [0, 1)");
  }
}

SyntheticData generate_topics(const SyntheticTopicSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticData out;

  auto draw_in_range = [&rng](int lo, int hi) {
    return lo + static_cast<int>(rng.uniform_below(static_cast<uint64_t>(hi - lo + 1)));
  };

  for (int t = 0; t < spec.topics; ++t) {
    const std::string topic_prefix = "t" + std::to_string(t) + "w";
    for (int i = 0; i < spec.texts_per_topic; ++i) {
      std::string text;
      const int sentences = draw_in_range(spec.sentences_min, spec.sentences_max);
      for (int s = 0; s < sentences; ++s) {
        const int words = draw_in_range(spec.sentence_len_min, spec.sentence_len_max);
        for (int w = 0; w < words; ++w) {
          if (!text.empty()) text += " ";
          if (rng.uniform01() < spec.function_word_prob) {
            text += kFunctionWords[rng.uniform_below(kFunctionWords.size())];
          } else {
            text += topic_prefix +
                    std::to_string(rng.uniform_below(
                        static_cast<uint64_t>(spec.vocab_per_topic)));
          }
        }
        text += ".";
      }
      DatasetItem item;
      item.id = "t" + std::to_string(t) + "_" + std::to_string(i);
      item.group = "topic" + std::to_string(t);
      item.role = Role::kBoth;
      item.text = text;
      out.corpus_lines.push_back(text);
      out.items.push_back(std::move(item));
    }
  }
  return out;
}

}  // namespace nemb
