#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lmdpp/kernel.hpp"
#include "lmdpp/pool.hpp"
#include "lmdpp/scoring.hpp"

namespace lmdpp {

enum class StopReason { budget_reached, rank_exhausted, pool_exhausted };

struct GreedyStep {
  std::size_t index;
  double gain;        // log of the squared Cholesky residual; -inf on fallback
  double cumulative;  // running sum of gains
  bool fallback = false;
};

struct SelectionTrace {
  std::vector<GreedyStep> steps;
  StopReason stop_reason = StopReason::budget_reached;
};

// One greedy MAP run with incremental Cholesky state. Each step picks the
// active item with the largest squared residual d2 (ties: lowest index),
// then updates every item's factor entry and residual against the chosen
// row, so a full run costs O(N M^2 + N M D_row) where D_row is the row
// materialization cost. State is exposed read-only for invariant checks.
class GreedySelector {
 public:
  GreedySelector(const ConditionalKernel& kernel, std::size_t budget,
                 double rank_tol = 1e-10);

  // One selection plus the eager factor update. Returns false without
  // selecting when the budget is met, the kernel rank is numerically
  // exhausted, or no active items remain.
  bool step();

  const SelectionTrace& trace() const { return trace_; }
  std::size_t steps_done() const { return trace_.steps.size(); }

  const std::vector<double>& d2() const { return d2_; }
  const std::vector<std::uint8_t>& active() const { return active_; }
  // factor entries written at step m, one per item (step-major layout)
  std::span<const double> factor_row(std::size_t m) const {
    return {c_.data() + m * n_, n_};
  }

 private:
  const ConditionalKernel* kernel_;
  std::size_t n_;
  std::size_t budget_;
  double rank_tol_;
  std::vector<double> d2_;
  std::vector<std::uint8_t> active_;
  std::vector<double> c_;    // budget x n, step-major
  std::vector<double> row_;  // materialized kernel row of the chosen item
  std::vector<double> acc_;  // per-item <c_chosen, c_i> accumulator
  SelectionTrace trace_;
  double cumulative_ = 0.0;
  bool stopped_ = false;
};

SelectionTrace greedy_map(const ConditionalKernel& kernel, std::size_t budget,
                          double rank_tol = 1e-10);

// log det of a dense symmetric k x k matrix by fresh Cholesky; -inf when
// the matrix is not numerically positive definite. Consumes its input.
double dense_logdet(std::vector<double> matrix, std::size_t k);

// log det of the principal submatrix, computed with no incremental state.
// |subset| is capped at 12 to keep oracle runs fast.
double brute_force_logdet(const ConditionalKernel& kernel,
                          std::span<const std::size_t> subset);

// Literal evaluation of one greedy step: the item (lowest index on ties
// within 1e-12) maximizing the log-determinant gain over the current set.
// Throws RankExhausted when every remaining gain is -inf.
std::pair<std::size_t, double> brute_force_greedy_step(
    const ConditionalKernel& kernel, std::span<const std::size_t> current);

// Rank-exhaustion fallback: pads the selection to min(budget, N) with the
// highest-scoring unselected items (ties: lowest index), gains marked -inf
// and flagged. No-op unless the trace stopped on rank_exhausted.
SelectionTrace fill_by_score(SelectionTrace trace, const ScoreVector& scores,
                             std::size_t budget);

enum class KernelMode { automatic, dense, lazy };

struct SelectOptions {
  Method method = Method::lm_dpp;
  std::size_t budget = 1;
  double lambda = 0.5;
  std::uint64_t seed = 0;
  double epsilon_reg = 1e-6;
  double rank_tol = 1e-10;
  KernelMode kernel_mode = KernelMode::automatic;
  std::size_t kmeans_max_iters = 100;
  // automatic mode goes lazy above this N (dense needs N^2 doubles)
  std::size_t lazy_threshold = 20000;
};

// Method dispatch. lambda = 1 routes lm_dpp to perplexity_topk, lambda = 0
// to vanilla_dpp; the manifest's method field records the effective method.
// scores may be null for methods that do not need them (vanilla_dpp,
// random, kmeans).
SelectionManifest select(const CandidatePool& pool, const ScoreVector* scores,
                         const SelectOptions& opt);

}  // namespace lmdpp
