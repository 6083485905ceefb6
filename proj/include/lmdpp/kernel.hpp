#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "lmdpp/pool.hpp"
#include "lmdpp/scoring.hpp"

namespace lmdpp {

// Cosine Gram matrix of the pool embeddings with epsilon_reg added to the
// diagonal. Unit rows make the diagonal exactly 1 + epsilon_reg.
struct SimilarityMatrix {
  std::size_t n = 0;
  double epsilon_reg = 0.0;
  std::vector<double> m;  // n x n row-major, symmetric

  double at(std::size_t i, std::size_t j) const { return m[i * n + j]; }
};

SimilarityMatrix build_similarity(const CandidatePool& pool,
                                  double epsilon_reg = 1e-6);

// Trade-off mapping: alpha = lambda / (2 (1 - lambda)). lambda = 1 is the
// pure top-score route and never reaches the kernel.
double lambda_to_alpha(double lambda);

// The score-weighted kernel: entry(i,j) = w_i * sim(i,j) * w_j with
// w_i = exp(alpha * r_i). Dense mode materializes all N^2 entries; lazy
// mode holds embeddings and weights and computes rows on demand, for pools
// where N^2 doubles will not fit (default crossover N > 20000).
class ConditionalKernel {
 public:
  // dense, from a prebuilt similarity matrix
  ConditionalKernel(const SimilarityMatrix& sim, const ScoreVector& scores,
                    double lambda);
  // lazy, rows computed from embeddings on demand
  ConditionalKernel(const CandidatePool& pool, const ScoreVector& scores,
                    double lambda, double epsilon_reg);
  // dense, from an explicit symmetric matrix (oracles and tests)
  static ConditionalKernel from_matrix(std::vector<double> matrix,
                                       std::size_t n);

  std::size_t size() const { return n_; }
  double lambda() const { return lambda_; }
  double alpha() const { return alpha_; }
  double epsilon_reg() const { return epsilon_reg_; }
  bool is_lazy() const { return lazy_; }
  // (N, D); D is 0 when the kernel was not built from embeddings
  std::pair<std::size_t, std::size_t> source_dims() const { return {n_, d_}; }

  double diag(std::size_t i) const { return diag_[i]; }
  double entry(std::size_t i, std::size_t j) const;
  // writes entry(j, 0..n) into out (out.size() >= n)
  void fill_row(std::size_t j, std::span<double> out) const;

 private:
  ConditionalKernel() = default;

  std::size_t n_ = 0;
  std::size_t d_ = 0;
  double lambda_ = 0.0;
  double alpha_ = 0.0;
  double epsilon_reg_ = 0.0;
  bool lazy_ = false;
  std::vector<double> mat_;      // dense mode
  const double* embeddings_ = nullptr;  // lazy mode, borrowed from the pool
  std::vector<double> weights_;  // exp(alpha * r_i)
  std::vector<double> diag_;
};

}  // namespace lmdpp
