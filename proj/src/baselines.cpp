#include "lmdpp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lmdpp/error.hpp"
#include "lmdpp/parallel.hpp"
#include "lmdpp/simd.hpp"

namespace lmdpp {

namespace {

SelectionManifest base_manifest(const CandidatePool& pool, Method method,
                                std::size_t budget, std::uint64_t seed,
                                const std::vector<std::size_t>& indices,
                                std::vector<double> gains) {
  SelectionManifest m;
  m.method = method;
  m.budget = budget;
  m.lambda = method == Method::perplexity_topk ? 1.0 : 0.0;
  m.seed = seed;
  for (std::size_t i : indices) m.selected_ids.push_back(pool.items[i].id);
  m.gains = std::move(gains);
  m.created_at = manifest_timestamp();
  return m;
}

}  // namespace

SelectionManifest select_random(const CandidatePool& pool, std::size_t budget,
                                std::uint64_t seed) {
  if (budget < 1) throw Error(ErrorCode::BadBudget, "budget must be >= 1");
  if (pool.items.empty()) throw Error(ErrorCode::EmptyPool, "select_random");
  const std::size_t n = pool.size();
  const std::size_t m = std::min(budget, n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(m);
  return base_manifest(pool, Method::random, budget, seed, idx,
                       std::vector<double>(m, 0.0));
}

SelectionManifest select_perplexity_topk(const CandidatePool& pool,
                                         const ScoreVector& scores,
                                         std::size_t budget) {
  if (budget < 1) throw Error(ErrorCode::BadBudget, "budget must be >= 1");
  if (pool.items.empty()) {
    throw Error(ErrorCode::EmptyPool, "select_perplexity_topk");
  }
  if (scores.r.size() != pool.size()) {
    throw Error(ErrorCode::DimMismatch, "scores length != pool size");
  }
  const std::size_t m = std::min(budget, pool.size());
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores.r[a] != scores.r[b]) return scores.r[a] > scores.r[b];
    return a < b;
  });
  idx.resize(m);
  std::vector<double> gains;
  gains.reserve(m);
  for (std::size_t i : idx) gains.push_back(scores.r[i]);
  return base_manifest(pool, Method::perplexity_topk, budget, 0, idx,
                       std::move(gains));
}

std::vector<double> kmeanspp_centroids(const CandidatePool& pool,
                                       std::size_t k, Rng& rng) {
  const std::size_t n = pool.size();
  const std::size_t d = pool.dim;
  const double* emb = pool.embedding_data();
  const auto& kn = simd::active();
  std::vector<double> centroids(k * d);
  std::vector<double> dist2(n);

  const std::size_t first = rng.below(n);
  std::copy(emb + first * d, emb + (first + 1) * d, centroids.begin());
  for (std::size_t i = 0; i < n; ++i) {
    dist2[i] = kn.sqdist(emb + i * d, centroids.data(), d);
  }
  for (std::size_t t = 1; t < k; ++t) {
    double total = 0.0;
    for (double v : dist2) total += v;
    std::size_t chosen;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double cum = 0.0;
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        cum += dist2[i];
        if (cum > u) {
          chosen = i;
          break;
        }
      }
    } else {
      // all points coincide with existing centroids; take the first index
      chosen = 0;
    }
    double* c = centroids.data() + t * d;
    std::copy(emb + chosen * d, emb + (chosen + 1) * d, c);
    for (std::size_t i = 0; i < n; ++i) {
      dist2[i] = std::min(dist2[i], kn.sqdist(emb + i * d, c, d));
    }
  }
  return centroids;
}

KMeansState lloyd(const CandidatePool& pool, std::vector<double> centroids,
                  std::size_t k, std::size_t max_iters) {
  const std::size_t n = pool.size();
  const std::size_t d = pool.dim;
  const double* emb = pool.embedding_data();
  const auto& kn = simd::active();

  KMeansState state;
  state.centroids = std::move(centroids);
  state.assignments.assign(n, 0);
  std::vector<std::size_t> prev(n, k);  // k = "unassigned" sentinel
  std::vector<double> min_dist(n, 0.0);

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    parallel_for(n, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
          const double dist = kn.sqdist(emb + i * d, state.centroids.data() + c * d, d);
          if (dist < best_d) {
            best_d = dist;
            best = c;
          }
        }
        state.assignments[i] = best;
        min_dist[i] = best_d;
      }
    });
    double objective = 0.0;
    for (double v : min_dist) objective += v;
    state.objective_trace.push_back(objective);
    state.iterations_run = iter + 1;
    if (state.assignments == prev) break;
    prev = state.assignments;

    // centroid update: sequential accumulation in index order
    std::fill(state.centroids.begin(), state.centroids.end(), 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = state.assignments[i];
      kn.axpy(state.centroids.data() + c * d, emb + i * d, 1.0, d);
      ++counts[c];
    }
    std::vector<double> claimed = min_dist;  // consumed by empty-cluster reseeds
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        kn.scale(state.centroids.data() + c * d,
                 1.0 / static_cast<double>(counts[c]), d);
        continue;
      }
      // empty cluster: restart it at the point farthest from its centroid
      std::size_t far = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (claimed[i] > claimed[far]) far = i;
      }
      claimed[far] = -1.0;
      std::copy(emb + far * d, emb + (far + 1) * d,
                state.centroids.begin() + c * d);
    }
  }
  return state;
}

std::vector<std::size_t> nearest_to_centroids(const CandidatePool& pool,
                                              const KMeansState& state,
                                              std::size_t k) {
  const std::size_t n = pool.size();
  const std::size_t d = pool.dim;
  const double* emb = pool.embedding_data();
  const auto& kn = simd::active();
  std::vector<std::size_t> reps;
  std::vector<std::uint8_t> taken(n, 0);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t best = simd::npos;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (state.assignments[i] != c) continue;
      const double dist = kn.sqdist(emb + i * d, state.centroids.data() + c * d, d);
      if (dist < best_d) {
        best_d = dist;
        best = i;
      }
    }
    if (best != simd::npos) {
      reps.push_back(best);
      taken[best] = 1;
    }
  }
  // duplicate-heavy pools can leave clusters empty; pad by index order
  for (std::size_t i = 0; i < n && reps.size() < k; ++i) {
    if (!taken[i]) reps.push_back(i);
  }
  return reps;
}

SelectionManifest select_kmeans(const CandidatePool& pool, std::size_t budget,
                                std::uint64_t seed, std::size_t max_iters) {
  if (budget < 1) throw Error(ErrorCode::BadBudget, "budget must be >= 1");
  if (pool.items.empty()) throw Error(ErrorCode::EmptyPool, "select_kmeans");
  if (!pool.normalized) {
    throw Error(ErrorCode::NotNormalized, "select_kmeans needs unit embeddings");
  }
  const std::size_t m = std::min(budget, pool.size());
  Rng rng(seed);
  KMeansState state = lloyd(pool, kmeanspp_centroids(pool, m, rng), m, max_iters);
  state.seed = seed;
  auto reps = nearest_to_centroids(pool, state, m);
  auto manifest = base_manifest(pool, Method::kmeans, budget, seed, reps,
                                std::vector<double>(reps.size(), 0.0));
  return manifest;
}

}  // namespace lmdpp
