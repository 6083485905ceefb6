#include "lmdpp/kernel.hpp"

#include <cmath>

#include "lmdpp/error.hpp"
#include "lmdpp/parallel.hpp"
#include "lmdpp/simd.hpp"

namespace lmdpp {

SimilarityMatrix build_similarity(const CandidatePool& pool,
                                  double epsilon_reg) {
  if (!pool.normalized) {
    throw Error(ErrorCode::NotNormalized, "build_similarity needs unit embeddings");
  }
  if (!(epsilon_reg >= 0.0) || !std::isfinite(epsilon_reg)) {
    throw Error(ErrorCode::InvalidArgument, "epsilon_reg must be >= 0");
  }
  const std::size_t n = pool.size();
  const std::size_t d = pool.dim;
  SimilarityMatrix sim;
  sim.n = n;
  sim.epsilon_reg = epsilon_reg;
  sim.m.assign(n * n, 0.0);
  const double* emb = pool.embedding_data();
  const auto& k = simd::active();
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      // upper triangle from row i rightward; unit rows pin the diagonal
      k.matvec_rows(emb + i * d, d, n - i, emb + i * d, d, sim.m.data() + i * n + i);
      sim.m[i * n + i] = 1.0 + epsilon_reg;
    }
  });
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) sim.m[i * n + j] = sim.m[j * n + i];
  }
  return sim;
}

double lambda_to_alpha(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorCode::LambdaRange, "lambda must lie in [0,1]");
  }
  if (lambda == 1.0) {
    throw Error(ErrorCode::LambdaSingular,
                "lambda = 1 has no kernel form; use the top-score route");
  }
  return lambda / (2.0 * (1.0 - lambda));
}

namespace {

std::vector<double> make_weights(const ScoreVector& scores, double alpha) {
  std::vector<double> w(scores.r.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(alpha * scores.r[i]);
  return w;
}

}  // namespace

ConditionalKernel::ConditionalKernel(const SimilarityMatrix& sim,
                                     const ScoreVector& scores, double lambda) {
  if (scores.r.size() != sim.n) {
    throw Error(ErrorCode::DimMismatch,
                "scores length " + std::to_string(scores.r.size()) +
                    " != kernel size " + std::to_string(sim.n));
  }
  n_ = sim.n;
  lambda_ = lambda;
  alpha_ = lambda_to_alpha(lambda);
  epsilon_reg_ = sim.epsilon_reg;
  weights_ = make_weights(scores, alpha_);
  mat_ = sim.m;
  const auto& k = simd::active();
  parallel_for(n_, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      k.scale_mul(mat_.data() + i * n_, weights_.data(), weights_[i], n_);
    }
  });
  diag_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) diag_[i] = mat_[i * n_ + i];
}

ConditionalKernel::ConditionalKernel(const CandidatePool& pool,
                                     const ScoreVector& scores, double lambda,
                                     double epsilon_reg) {
  if (!pool.normalized) {
    throw Error(ErrorCode::NotNormalized, "lazy kernel needs unit embeddings");
  }
  if (scores.r.size() != pool.size()) {
    throw Error(ErrorCode::DimMismatch,
                "scores length " + std::to_string(scores.r.size()) +
                    " != pool size " + std::to_string(pool.size()));
  }
  if (!(epsilon_reg >= 0.0) || !std::isfinite(epsilon_reg)) {
    throw Error(ErrorCode::InvalidArgument, "epsilon_reg must be >= 0");
  }
  n_ = pool.size();
  d_ = pool.dim;
  lambda_ = lambda;
  alpha_ = lambda_to_alpha(lambda);
  epsilon_reg_ = epsilon_reg;
  lazy_ = true;
  embeddings_ = pool.embedding_data();
  weights_ = make_weights(scores, alpha_);
  diag_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    diag_[i] = weights_[i] * weights_[i] * (1.0 + epsilon_reg);
  }
}

ConditionalKernel ConditionalKernel::from_matrix(std::vector<double> matrix,
                                                 std::size_t n) {
  if (n == 0 || matrix.size() != n * n) {
    throw Error(ErrorCode::InvalidArgument, "from_matrix needs an n x n matrix");
  }
  ConditionalKernel k;
  k.n_ = n;
  k.mat_ = std::move(matrix);
  k.weights_.assign(n, 1.0);
  k.diag_.resize(n);
  for (std::size_t i = 0; i < n; ++i) k.diag_[i] = k.mat_[i * n + i];
  return k;
}

double ConditionalKernel::entry(std::size_t i, std::size_t j) const {
  if (!lazy_) return mat_[i * n_ + j];
  if (i == j) return diag_[i];
  const double s = simd::active().dot(embeddings_ + i * d_, embeddings_ + j * d_, d_);
  // same grouping as the scale_mul row path, so entry and fill_row agree
  // to the bit
  return s * (weights_[i] * weights_[j]);
}

void ConditionalKernel::fill_row(std::size_t j, std::span<double> out) const {
  if (!lazy_) {
    const double* row = mat_.data() + j * n_;
    std::copy(row, row + n_, out.begin());
    return;
  }
  const auto& k = simd::active();
  parallel_for(n_, [&](std::size_t begin, std::size_t end) {
    k.matvec_rows(embeddings_ + begin * d_, d_, end - begin,
                  embeddings_ + j * d_, d_, out.data() + begin);
    k.scale_mul(out.data() + begin, weights_.data() + begin, weights_[j],
                end - begin);
  });
  out[j] = diag_[j];
}

}  // namespace lmdpp
