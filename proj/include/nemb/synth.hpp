#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nemb/evaluation.hpp"

namespace nemb {

// Topic-structured synthetic data: each topic draws from its own content
// vocabulary ("t<topic>w<word>"), plus a small pool of function words shared
// by every topic. Groups are topics, so same-group texts overlap in
// vocabulary and cross-group texts share only function words.
struct SyntheticTopicSpec {
  int topics = 2;
  int vocab_per_topic = 30;
  int texts_per_topic = 100;
  int sentence_len_min = 4;  // words per sentence
  int sentence_len_max = 8;
  int sentences_min = 3;  // sentences per text
  int sentences_max = 5;
  double function_word_prob = 0.25;
  uint64_t seed = 0;

  void validate() const;  // throws on a degenerate spec
};

struct SyntheticData {
  std::vector<DatasetItem> items;         // id "t<topic>_<i>", group "topic<topic>"
  std::vector<std::string> corpus_lines;  // the item texts, one per line
};

SyntheticData generate_topics(const SyntheticTopicSpec& spec);

}  // namespace nemb
