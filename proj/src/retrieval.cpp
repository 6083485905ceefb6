#include "lmdpp/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lmdpp/error.hpp"
#include "lmdpp/simd.hpp"

namespace lmdpp {

RetrievalIndex build_index(const CandidatePool& pool,
                           const SelectionManifest& manifest,
                           const PromptTemplate& tmpl) {
  if (!pool.normalized) {
    throw Error(ErrorCode::NotNormalized, "build_index needs unit embeddings");
  }
  RetrievalIndex index;
  index.dim = pool.dim;
  index.ids = manifest.selected_ids;
  index.pool_indices.reserve(manifest.selected_ids.size());
  index.embeddings.reserve(manifest.selected_ids.size() * pool.dim);
  for (const std::string& id : manifest.selected_ids) {
    const std::size_t i = pool.index_of(id);  // UnknownId on a miss
    index.pool_indices.push_back(i);
    auto row = pool.embedding(i);
    index.embeddings.insert(index.embeddings.end(), row.begin(), row.end());
    index.demo_texts.push_back(tmpl.render_demo(pool.items[i]));
  }
  return index;
}

std::vector<RetrievedDemo> topk(const RetrievalIndex& index,
                                std::span<const double> query_embedding,
                                std::size_t k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "topk needs k >= 1");
  if (query_embedding.size() != index.dim) {
    throw Error(ErrorCode::DimMismatch,
                "query dimension " + std::to_string(query_embedding.size()) +
                    " != index dimension " + std::to_string(index.dim));
  }
  const auto& kn = simd::active();
  const double norm =
      kn.dot(query_embedding.data(), query_embedding.data(), index.dim);
  if (std::fabs(norm - 1.0) > 1e-6) {
    throw Error(ErrorCode::NotNormalized, "query embedding must be unit-norm");
  }
  const std::size_t n = index.size();
  std::vector<double> sims(n);
  kn.matvec_rows(index.embeddings.data(), index.dim, n, query_embedding.data(),
                 index.dim, sims.data());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (sims[a] != sims[b]) return sims[a] > sims[b];
                     return index.pool_indices[a] < index.pool_indices[b];
                   });
  const std::size_t take = std::min(k, n);
  std::vector<RetrievedDemo> out;
  out.reserve(take);
  for (std::size_t t = 0; t < take; ++t) {
    out.push_back({index.ids[order[t]], sims[order[t]], order[t]});
  }
  return out;
}

PromptAssembly assemble_prompt(const RetrievalIndex& index,
                               const CandidateItem& query,
                               std::span<const double> query_embedding,
                               std::size_t k, const PromptTemplate& tmpl,
                               std::size_t max_tokens,
                               const TokenCounter& counter) {
  PromptAssembly out;
  out.query_id = query.id;
  const std::string query_rendered = tmpl.render_query(query);
  const std::size_t query_tokens = counter(query_rendered);
  if (query_tokens > max_tokens) {
    throw Error(ErrorCode::QueryTooLong,
                query.id + ": " + std::to_string(query_tokens) + " tokens > " +
                    std::to_string(max_tokens));
  }

  std::vector<RetrievedDemo> picked = topk(index, query_embedding, k);
  std::reverse(picked.begin(), picked.end());  // ascending similarity

  std::vector<std::size_t> tokens(picked.size());
  std::size_t total = query_tokens;
  for (std::size_t i = 0; i < picked.size(); ++i) {
    tokens[i] = counter(index.demo_texts[picked[i].index_pos]);
    total += tokens[i];
  }
  std::size_t first = 0;  // drop least-similar demos from the front
  while (total > max_tokens && first < picked.size()) {
    total -= tokens[first];
    ++first;
    out.truncated = true;
  }

  for (std::size_t i = first; i < picked.size(); ++i) {
    out.demos.push_back({picked[i].id, picked[i].similarity, tokens[i]});
    out.rendered += index.demo_texts[picked[i].index_pos];
  }
  out.rendered += query_rendered;
  out.total_tokens = total;
  return out;
}

}  // namespace lmdpp
