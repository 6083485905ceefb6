#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lmdpp/pool.hpp"
#include "lmdpp/prompt.hpp"

namespace lmdpp {

// The annotated subset as a retrieval source: rows aligned to manifest
// order, embeddings unit-norm, demonstration strings pre-rendered.
struct RetrievalIndex {
  std::vector<std::string> ids;       // manifest order
  std::vector<std::size_t> pool_indices;
  std::vector<double> embeddings;     // |L| x D row-major
  std::vector<std::string> demo_texts;
  std::size_t dim = 0;

  std::size_t size() const { return ids.size(); }
  std::span<const double> embedding(std::size_t i) const {
    return {embeddings.data() + i * dim, dim};
  }
};

struct RetrievedDemo {
  std::string id;
  double similarity;
  std::size_t index_pos;  // position within the RetrievalIndex
};

struct PromptAssembly {
  std::string query_id;
  struct Demo {
    std::string id;
    double similarity;
    std::size_t token_count;
  };
  std::vector<Demo> demos;  // prompt order: ascending similarity
  std::string rendered;
  std::size_t total_tokens = 0;
  bool truncated = false;
};

RetrievalIndex build_index(const CandidatePool& pool,
                           const SelectionManifest& manifest,
                           const PromptTemplate& tmpl);

// k highest-cosine items, descending, ties by lowest pool index. k larger
// than the index returns everything.
std::vector<RetrievedDemo> topk(const RetrievalIndex& index,
                                std::span<const double> query_embedding,
                                std::size_t k);

// Packs the top-k matches in ascending-similarity order (most similar item
// last, adjacent to the query) and drops least-similar demos from the
// front until the prompt fits max_tokens. Token accounting sums the
// counter over each rendered piece.
PromptAssembly assemble_prompt(const RetrievalIndex& index,
                               const CandidateItem& query,
                               std::span<const double> query_embedding,
                               std::size_t k, const PromptTemplate& tmpl,
                               std::size_t max_tokens,
                               const TokenCounter& counter);

}  // namespace lmdpp
