#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lmdpp/error.hpp"

namespace lmdpp {

struct CandidateItem {
  std::string id;
  std::string text;
  std::optional<std::string> label;  // carried through, never consulted by selection
  std::optional<std::vector<double>> token_logprobs;
  std::optional<double> score_r;
};

// Embeddings live in one contiguous N x D row-major block so the hot paths
// (similarity rows, lazy kernel rows, k-means) can run straight through
// memory. Items may lack an embedding (scoring-only pools, query metadata);
// their rows are zero and flagged absent.
class CandidatePool {
 public:
  std::vector<CandidateItem> items;
  std::size_t dim = 0;
  bool normalized = false;

  std::size_t size() const { return items.size(); }

  std::span<const double> embedding(std::size_t i) const {
    return {embeddings_.data() + i * dim, dim};
  }
  std::span<double> embedding_mut(std::size_t i) {
    return {embeddings_.data() + i * dim, dim};
  }
  const double* embedding_data() const { return embeddings_.data(); }

  bool has_embedding(std::size_t i) const { return has_embedding_[i] != 0; }
  bool all_embeddings() const;

  // index of id, or throws UnknownId
  std::size_t index_of(const std::string& id) const;

  // Appends an item; embedding may be empty (absent). Enforces unique ids
  // and consistent dimensionality.
  void add(CandidateItem item, std::span<const double> embedding);

 private:
  std::vector<double> embeddings_;
  std::vector<std::uint8_t> has_embedding_;
  std::unordered_map<std::string, std::size_t> id_index_;
};

enum class PoolFormat { jsonl, binary_sidecar };

// Sidecar path for binary embeddings: "<pool path>.dppe".
std::string sidecar_path(const std::string& pool_path);

// JSONL records, one per line:
//   {"id": str, "text": str, "label": str?, "embedding": [float]?,
//    "token_logprobs": [float]?, "score_r": float?}
// binary_sidecar format holds embeddings in "<path>.dppe" instead:
//   magic "DPPE", u32 N, u32 D, then N x D little-endian float32.
CandidatePool load_pool(const std::string& path, PoolFormat format);

// Auto-detect: binary_sidecar when the sidecar file exists, else jsonl.
CandidatePool load_pool(const std::string& path);

void save_pool(const CandidatePool& pool, const std::string& path,
               PoolFormat format);

// Scales every embedding to unit Euclidean norm. Idempotent. Every item
// must carry an embedding; zero vectors are a hard error.
CandidatePool normalize_pool(CandidatePool pool);

// Deterministic stand-in encoder: hashed byte-trigram counts over the
// padded text, folded into dim buckets, L2-normalized.
std::vector<double> toy_embed(const std::string& text, std::size_t dim);

enum class Method { lm_dpp, vanilla_dpp, perplexity_topk, random, kmeans };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

struct SelectionManifest {
  Method method = Method::lm_dpp;
  std::size_t budget = 0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> selected_ids;
  std::vector<double> gains;  // one per step; -inf marks fallback fills
  std::size_t fallback_count = 0;
  std::string created_at;  // ISO 8601 UTC
};

// UTC timestamp for manifests; honors SOURCE_DATE_EPOCH for reproducible
// outputs.
std::string manifest_timestamp();

void save_manifest(const SelectionManifest& manifest, const std::string& path);
SelectionManifest load_manifest(const std::string& path);

}  // namespace lmdpp
