#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

namespace nemb {

inline constexpr int kNumSpecialTokens = 5;

// Fixed special tokens; their ids are always 0..4 in this order.
inline constexpr std::array<const char*, kNumSpecialTokens> kSpecialTokens = {
    "[PAD]", "[MASK]", "[UNK]", "[CLS]", "[SEP]"};

struct Vocabulary {
  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, int> token_to_id;

  int pad_id = 0;
  int mask_id = 1;
  int unk_id = 2;
  int cls_id = 3;
  int sep_id = 4;

  int size() const { return static_cast<int>(id_to_token.size()); }

  // Id of a normalized token; unk_id when absent.
  int lookup(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? unk_id : it->second;
  }
};

// Lowercase, split on whitespace; ASCII punctuation marks become their own
// tokens. Bytes outside ASCII are kept as part of word tokens.
std::vector<std::string> normalize_tokens(const std::string& text);

// Vocabulary of the max_size-5 most frequent tokens plus the specials.
// Ties in frequency break by lexicographic token order.
Vocabulary build_vocab(const std::vector<std::string>& corpus_lines, size_t max_size);

std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab);

// Sentence boundaries: after '.', '!', '?', and after a newline that is
// followed by whitespace or end of text. Terminators stay attached;
// whitespace-only fragments are dropped.
std::vector<std::string> split_sentences(const std::string& text);

struct Chunk {
  std::vector<int> ids;

  bool empty() const { return ids.empty(); }
  size_t size() const { return ids.size(); }
};

// Greedy sentence-bounded packing: each chunk takes the maximal prefix of
// remaining sentences whose token count fits max_len. A single sentence
// longer than max_len is hard-split into max_len-sized pieces. The
// concatenation of all chunks equals tokenize(text).
std::vector<Chunk> chunk_text(const std::string& text, const Vocabulary& vocab,
                              size_t max_len);

}  // namespace nemb
