#include "lmdpp/map_greedy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lmdpp/baselines.hpp"
#include "lmdpp/error.hpp"
#include "lmdpp/parallel.hpp"
#include "lmdpp/simd.hpp"

namespace lmdpp {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

GreedySelector::GreedySelector(const ConditionalKernel& kernel,
                               std::size_t budget, double rank_tol)
    : kernel_(&kernel),
      n_(kernel.size()),
      budget_(std::min(budget, kernel.size())),
      rank_tol_(rank_tol) {
  if (budget < 1) throw Error(ErrorCode::BadBudget, "budget must be >= 1");
  d2_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    const double di = kernel.diag(i);
    if (!(di > 0.0)) {
      throw Error(ErrorCode::BadKernel,
                  "non-positive diagonal at index " + std::to_string(i));
    }
    d2_[i] = di;
  }
  active_.assign(n_, 1);
  c_.assign(budget_ * n_, 0.0);
  row_.resize(n_);
  acc_.resize(n_);
}

bool GreedySelector::step() {
  if (stopped_) return false;
  if (trace_.steps.size() >= budget_) {
    trace_.stop_reason = StopReason::budget_reached;
    stopped_ = true;
    return false;
  }
  const auto& k = simd::active();
  const std::size_t j = k.argmax_masked(d2_.data(), active_.data(), n_);
  if (j == simd::npos) {
    trace_.stop_reason = StopReason::pool_exhausted;
    stopped_ = true;
    return false;
  }
  if (!(d2_[j] > rank_tol_)) {
    trace_.stop_reason = StopReason::rank_exhausted;
    stopped_ = true;
    return false;
  }
  const double gain = std::log(d2_[j]);
  cumulative_ += gain;
  const std::size_t m = trace_.steps.size();  // this step's factor slot
  trace_.steps.push_back({j, gain, cumulative_, false});
  active_[j] = 0;

  kernel_->fill_row(j, row_);
  const double inv_d = 1.0 / std::sqrt(d2_[j]);
  double* crow = c_.data() + m * n_;
  parallel_for(n_, [&](std::size_t b, std::size_t e) {
    // acc[i] = <c_j, c_i> over the m previous steps, blocked per slice so
    // every item's arithmetic is identical under any partitioning
    double* acc = acc_.data();
    std::fill(acc + b, acc + e, 0.0);
    for (std::size_t s = 0; s < m; ++s) {
      k.axpy(acc + b, c_.data() + s * n_ + b, c_[s * n_ + j], e - b);
    }
    k.residual_update(row_.data() + b, acc + b, inv_d, crow + b,
                      d2_.data() + b, e - b);
  });

  if (trace_.steps.size() >= budget_) {
    trace_.stop_reason = StopReason::budget_reached;
    stopped_ = true;
  }
  return true;
}

SelectionTrace greedy_map(const ConditionalKernel& kernel, std::size_t budget,
                          double rank_tol) {
  GreedySelector sel(kernel, budget, rank_tol);
  while (sel.step()) {
  }
  return sel.trace();
}

double dense_logdet(std::vector<double> a, std::size_t k) {
  if (k == 0) return 0.0;
  double logdet = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    double pivot = a[c * k + c];
    for (std::size_t t = 0; t < c; ++t) pivot -= a[c * k + t] * a[c * k + t];
    if (!(pivot > 0.0)) return kNegInf;
    const double l = std::sqrt(pivot);
    a[c * k + c] = l;
    logdet += 2.0 * std::log(l);
    for (std::size_t r = c + 1; r < k; ++r) {
      double v = a[r * k + c];
      for (std::size_t t = 0; t < c; ++t) v -= a[r * k + t] * a[c * k + t];
      a[r * k + c] = v / l;
    }
  }
  return logdet;
}

double brute_force_logdet(const ConditionalKernel& kernel,
                          std::span<const std::size_t> subset) {
  if (subset.size() > 12) {
    throw Error(ErrorCode::InvalidArgument,
                "brute_force_logdet subsets are capped at 12");
  }
  const std::size_t k = subset.size();
  if (k == 0) return 0.0;
  std::vector<double> sub(k * k);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      sub[a * k + b] = kernel.entry(subset[a], subset[b]);
    }
  }
  return dense_logdet(std::move(sub), k);
}

std::pair<std::size_t, double> brute_force_greedy_step(
    const ConditionalKernel& kernel, std::span<const std::size_t> current) {
  if (current.size() > 11) {
    throw Error(ErrorCode::InvalidArgument,
                "brute_force_greedy_step supports at most 11 selected items");
  }
  const double base = brute_force_logdet(kernel, current);
  if (base == kNegInf) {
    throw Error(ErrorCode::InvalidArgument, "current subset is singular");
  }
  std::vector<std::size_t> trial(current.begin(), current.end());
  trial.push_back(0);
  std::size_t best = simd::npos;
  double best_gain = kNegInf;
  for (std::size_t j = 0; j < kernel.size(); ++j) {
    if (std::find(current.begin(), current.end(), j) != current.end()) continue;
    trial.back() = j;
    const double gain = brute_force_logdet(kernel, trial) - base;
    if (gain == kNegInf) continue;
    if (best == simd::npos || gain > best_gain + 1e-12) {
      best = j;
      best_gain = gain;
    }
  }
  if (best == simd::npos) {
    throw Error(ErrorCode::RankExhausted, "all remaining gains are -inf");
  }
  return {best, best_gain};
}

SelectionTrace fill_by_score(SelectionTrace trace, const ScoreVector& scores,
                             std::size_t budget) {
  if (trace.stop_reason != StopReason::rank_exhausted) return trace;
  const std::size_t n = scores.r.size();
  const std::size_t target = std::min(budget, n);
  if (trace.steps.size() >= target) return trace;
  std::vector<std::uint8_t> taken(n, 0);
  for (const GreedyStep& s : trace.steps) taken[s.index] = 1;
  std::vector<std::size_t> rest;
  rest.reserve(n - trace.steps.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!taken[i]) rest.push_back(i);
  }
  std::stable_sort(rest.begin(), rest.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (scores.r[a] != scores.r[b]) return scores.r[a] > scores.r[b];
                     return a < b;
                   });
  for (std::size_t i = 0; trace.steps.size() < target; ++i) {
    trace.steps.push_back({rest[i], kNegInf, kNegInf, true});
  }
  return trace;
}

namespace {

SelectionManifest manifest_from_indices(const CandidatePool& pool,
                                        const std::vector<std::size_t>& indices,
                                        const std::vector<double>& gains,
                                        Method effective,
                                        const SelectOptions& opt, double lambda,
                                        std::size_t fallback_count) {
  SelectionManifest m;
  m.method = effective;
  m.budget = opt.budget;
  m.lambda = lambda;
  m.seed = opt.seed;
  m.selected_ids.reserve(indices.size());
  for (std::size_t i : indices) m.selected_ids.push_back(pool.items[i].id);
  m.gains = gains;
  m.fallback_count = fallback_count;
  m.created_at = manifest_timestamp();
  return m;
}

std::vector<std::size_t> topk_by_score(const ScoreVector& scores,
                                       std::size_t m) {
  std::vector<std::size_t> idx(scores.r.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores.r[a] != scores.r[b]) return scores.r[a] > scores.r[b];
    return a < b;
  });
  idx.resize(m);
  return idx;
}

}  // namespace

SelectionManifest select(const CandidatePool& pool, const ScoreVector* scores,
                         const SelectOptions& opt) {
  if (pool.items.empty()) throw Error(ErrorCode::EmptyPool, "select");
  if (opt.budget < 1) throw Error(ErrorCode::BadBudget, "budget must be >= 1");
  const std::size_t n = pool.size();
  const std::size_t m = std::min(opt.budget, n);

  Method effective = opt.method;
  double lambda = opt.lambda;
  if (effective == Method::lm_dpp) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
      throw Error(ErrorCode::LambdaRange, "lambda must lie in [0,1]");
    }
    if (lambda == 1.0) effective = Method::perplexity_topk;
    if (lambda == 0.0) effective = Method::vanilla_dpp;
  }
  if (effective == Method::vanilla_dpp) lambda = 0.0;
  if (effective == Method::perplexity_topk) lambda = 1.0;

  switch (effective) {
    case Method::random: {
      auto manifest = select_random(pool, opt.budget, opt.seed);
      manifest.lambda = opt.lambda;
      return manifest;
    }
    case Method::kmeans: {
      auto manifest =
          select_kmeans(pool, opt.budget, opt.seed, opt.kmeans_max_iters);
      manifest.lambda = opt.lambda;
      return manifest;
    }
    case Method::perplexity_topk: {
      if (!scores) {
        throw Error(ErrorCode::MissingScores,
                    "perplexity_topk needs uncertainty scores");
      }
      if (scores->r.size() != n) {
        throw Error(ErrorCode::DimMismatch, "scores length != pool size");
      }
      auto manifest = select_perplexity_topk(pool, *scores, opt.budget);
      manifest.method = Method::perplexity_topk;
      manifest.lambda = lambda;
      manifest.seed = opt.seed;
      return manifest;
    }
    case Method::lm_dpp:
    case Method::vanilla_dpp:
      break;
  }

  // DPP path
  if (effective == Method::lm_dpp && !scores) {
    throw Error(ErrorCode::MissingScores, "lm_dpp needs uncertainty scores");
  }
  ScoreVector zeros;
  if (!scores) zeros.r.assign(n, 0.0);
  const ScoreVector& sv = scores ? *scores : zeros;
  if (sv.r.size() != n) {
    throw Error(ErrorCode::DimMismatch, "scores length != pool size");
  }
  const bool lazy =
      opt.kernel_mode == KernelMode::lazy ||
      (opt.kernel_mode == KernelMode::automatic && n > opt.lazy_threshold);
  SelectionTrace trace;
  if (lazy) {
    ConditionalKernel kernel(pool, sv, lambda, opt.epsilon_reg);
    trace = greedy_map(kernel, m, opt.rank_tol);
  } else {
    SimilarityMatrix sim = build_similarity(pool, opt.epsilon_reg);
    ConditionalKernel kernel(sim, sv, lambda);
    trace = greedy_map(kernel, m, opt.rank_tol);
  }
  trace = fill_by_score(std::move(trace), sv, m);

  std::vector<std::size_t> indices;
  std::vector<double> gains;
  std::size_t fallback_count = 0;
  indices.reserve(trace.steps.size());
  gains.reserve(trace.steps.size());
  for (const GreedyStep& s : trace.steps) {
    indices.push_back(s.index);
    gains.push_back(s.gain);
    fallback_count += s.fallback ? 1 : 0;
  }
  return manifest_from_indices(pool, indices, gains, effective, opt, lambda,
                               fallback_count);
}

}  // namespace lmdpp
