#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lmdpp/pool.hpp"
#include "lmdpp/rng.hpp"
#include "lmdpp/scoring.hpp"

namespace lmdpp {

struct KMeansState {
  std::vector<double> centroids;  // k x D row-major
  std::vector<std::size_t> assignments;
  std::size_t iterations_run = 0;
  std::uint64_t seed = 0;
  std::vector<double> objective_trace;  // post-assignment objective per iteration
};

// Uniform sample without replacement of min(budget, N) items.
SelectionManifest select_random(const CandidatePool& pool, std::size_t budget,
                                std::uint64_t seed);

// Highest-score-first (low perplexity = high r), ties by lowest index.
SelectionManifest select_perplexity_topk(const CandidatePool& pool,
                                         const ScoreVector& scores,
                                         std::size_t budget);

// Lloyd's algorithm with k-means++ seeding on the unit embeddings; one
// representative per cluster (nearest to centroid), index order on ties.
SelectionManifest select_kmeans(const CandidatePool& pool, std::size_t budget,
                                std::uint64_t seed,
                                std::size_t max_iters = 100);

// Building blocks, exposed so properties (objective monotonicity,
// permutation invariance under fixed seeding) can be tested directly.
std::vector<double> kmeanspp_centroids(const CandidatePool& pool,
                                       std::size_t k, Rng& rng);
KMeansState lloyd(const CandidatePool& pool, std::vector<double> centroids,
                  std::size_t k, std::size_t max_iters);
std::vector<std::size_t> nearest_to_centroids(const CandidatePool& pool,
                                              const KMeansState& state,
                                              std::size_t k);

}  // namespace lmdpp
