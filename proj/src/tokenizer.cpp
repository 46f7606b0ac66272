#include "nemb/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <stdexcept>

namespace nemb {

namespace {

bool is_word_punct(unsigned char c) { return std::ispunct(c) != 0; }
bool is_space(unsigned char c) { return std::isspace(c) != 0; }

}  // namespace

std::vector<std::string> normalize_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_space(c)) {
      if (!cur.empty()) {
        tokens.push_back(cur);
        cur.clear();
      }
    } else if (is_word_punct(c)) {
      if (!cur.empty()) {
        tokens.push_back(cur);
        cur.clear();
      }
      tokens.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

Vocabulary build_vocab(const std::vector<std::string>& corpus_lines, size_t max_size) {
  if (max_size < kNumSpecialTokens + 1) {
    throw std::invalid_argument("build_vocab: max_size must be at least 6");
  }
  std::map<std::string, size_t> counts;
  for (const auto& line : corpus_lines) {
    for (auto& tok : normalize_tokens(line)) ++counts[tok];
  }
  if (counts.empty()) throw std::runtime_error("empty corpus");

  // Sort by descending count, then lexicographic token order.
  std::vector<std::pair<std::string, size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  for (const char* special : kSpecialTokens) {
    vocab.token_to_id.emplace(special, vocab.size());
    vocab.id_to_token.emplace_back(special);
  }
  const size_t keep = std::min(ranked.size(), max_size - kNumSpecialTokens);
  for (size_t i = 0; i < keep; ++i) {
    vocab.token_to_id.emplace(ranked[i].first, vocab.size());
    vocab.id_to_token.push_back(ranked[i].first);
  }
  return vocab;
}

std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab) {
  std::vector<int> ids;
  for (const auto& tok : normalize_tokens(text)) ids.push_back(vocab.lookup(tok));
  return ids;
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> sentences;
  std::string cur;
  const size_t n = text.size();
  auto flush = [&] {
    std::string trimmed;
    size_t b = 0, e = cur.size();
    while (b < e && is_space(static_cast<unsigned char>(cur[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(cur[e - 1]))) --e;
    trimmed = cur.substr(b, e - b);
    if (!trimmed.empty()) sentences.push_back(std::move(trimmed));
    cur.clear();
  };
  for (size_t i = 0; i < n; ++i) {
    const char ch = text[i];
    cur.push_back(ch);
    const bool terminator = ch == '.' || ch == '!' || ch == '?';
    const bool newline_break =
        ch == '\n' && (i + 1 == n || is_space(static_cast<unsigned char>(text[i + 1])));
    if (terminator || newline_break) flush();
  }
  flush();
  return sentences;
}

std::vector<Chunk> chunk_text(const std::string& text, const Vocabulary& vocab,
                              size_t max_len) {
  if (max_len < 1) throw std::invalid_argument("chunk_text: max_len must be positive");
  std::vector<Chunk> chunks;
  std::vector<int> cur;
  auto flush = [&] {
    if (!cur.empty()) {
      chunks.push_back(Chunk{std::move(cur)});
      cur.clear();
    }
  };
  for (const auto& sentence : split_sentences(text)) {
    std::vector<int> ids = tokenize(sentence, vocab);
    if (ids.empty()) continue;
    if (cur.size() + ids.size() <= max_len) {
      cur.insert(cur.end(), ids.begin(), ids.end());
      continue;
    }
    flush();
    if (ids.size() <= max_len) {
      cur = std::move(ids);
      continue;
    }
    // Hard truncation: a lone over-long sentence becomes max_len-sized pieces.
    for (size_t off = 0; off < ids.size(); off += max_len) {
      const size_t len = std::min(max_len, ids.size() - off);
      chunks.push_back(Chunk{std::vector<int>(ids.begin() + static_cast<long>(off),
                                              ids.begin() + static_cast<long>(off + len))});
    }
  }
  flush();
  return chunks;
}

}  // namespace nemb
