#pragma once

#include <string>
#include <vector>

#include "nemb/evaluation.hpp"
#include "nemb/model.hpp"
#include "nemb/tokenizer.hpp"

namespace nemb {

// Datasets are JSON lines: {"id": ..., "group": ..., "role": ..., "text": ...}
// with role defaulting to "both" and text optional. Malformed lines are
// reported with their line number.
std::vector<DatasetItem> load_dataset(const std::string& path);
void save_dataset(const std::vector<DatasetItem>& items, const std::string& path);

// Plain text, one token per line; the five special tokens come first.
void save_vocab(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocab(const std::string& path);

/* Model checkpoint (little-endian):
 *   magic "NEMB" | u32 version=1
 *   u32 x6: vocab_size, num_blocks, hidden_dim, num_heads, ffn_dim, max_input_len
 *   u32 vocab-path length | bytes
 *   u64 tensor count
 *   per tensor: u32 name length | name | u8 dtype (0=f32, 1=f64)
 *               u32 ndim | u64 x ndim dims | values
 */
void save_checkpoint(const ParameterStore& params, const std::string& vocab_path,
                     const std::string& path);

struct LoadedCheckpoint {
  ParameterStore params;
  std::string vocab_path;  // as recorded at save time
};

LoadedCheckpoint load_checkpoint(const std::string& path);

/* Embedding store (little-endian):
 *   magic "NEV1" | u32 dim | u64 row count
 *   u32 fingerprint length | bytes
 *   per row: u32 id length | id | dim x f32
 */
void save_embeddings(const EmbeddingMatrix& embeddings, const std::string& path);

// Rows are renormalized after reading, so the f32 round-trip cannot leave
// them slightly off unit length.
EmbeddingMatrix load_embeddings(const std::string& path);

// One "anchor<TAB>same<TAB>diff" line per triplet, sorted.
void save_broken_set(const BrokenSet& set, const std::string& path);
BrokenSet load_broken_set(const std::string& path);

struct ImportReport {
  size_t imported = 0;
  std::vector<std::string> rejected_ids;  // zero vectors and NaN/Inf components
};

// Imports externally produced vectors into a store. Formats: "jsonl-vectors"
// ({"id": ..., "vector": [...]} per line) and "csv-vectors" (id,v1,...,vd).
// Zero vectors and vectors with NaN/Inf components are rejected and listed;
// malformed lines, ragged dimensions and duplicate ids are errors. Rows are
// renormalized to unit length at the end.
ImportReport import_external(const std::string& path, const std::string& format,
                             EmbeddingMatrix& out);

}  // namespace nemb
