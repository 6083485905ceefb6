#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "lmdpp/error.hpp"
#include "lmdpp/kernel.hpp"
#include "lmdpp/map_greedy.hpp"
#include "lmdpp/rng.hpp"

using namespace lmdpp;

namespace {

SimilarityMatrix manual_sim(std::vector<double> m, std::size_t n, double eps) {
  SimilarityMatrix s;
  s.n = n;
  s.epsilon_reg = eps;
  s.m = std::move(m);
  return s;
}

// Independent eigenvalue route for PSD checks.
double smallest_eigenvalue(const ConditionalKernel& kernel) {
  const std::size_t n = kernel.size();
  Eigen::MatrixXd m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m(i, j) = kernel.entry(i, j);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  return solver.eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("lambda to alpha mapping") {
  CHECK(lambda_to_alpha(0.0) == 0.0);
  CHECK(lambda_to_alpha(0.5) == 0.5);
  CHECK(lambda_to_alpha(0.6) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(lambda_to_alpha(0.9) == doctest::Approx(4.5).epsilon(1e-15));

  try {
    lambda_to_alpha(1.0);
    FAIL("expected LambdaSingular");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LambdaSingular);
  }
  try {
    lambda_to_alpha(-0.1);
    FAIL("expected LambdaRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LambdaRange);
  }
  CHECK_THROWS_AS(lambda_to_alpha(1.5), Error);
}

TEST_CASE("similarity of hand-built pools") {
  {
    // identical unit embeddings
    CandidatePool pool;
    for (int i = 0; i < 2; ++i) {
      CandidateItem item;
      item.id = "i" + std::to_string(i);
      item.text = "t";
      pool.add(std::move(item), std::vector<double>{1.0, 0.0});
    }
    pool.normalized = true;
    const SimilarityMatrix sim = build_similarity(pool, 0.0);
    CHECK(sim.at(0, 0) == 1.0);
    CHECK(sim.at(0, 1) == 1.0);
    CHECK(sim.at(1, 0) == 1.0);
    CHECK(sim.at(1, 1) == 1.0);
  }
  {
    // orthogonal
    CandidatePool pool;
    CandidateItem a, b;
    a.id = "a";
    a.text = "t";
    b.id = "b";
    b.text = "t";
    pool.add(std::move(a), std::vector<double>{1.0, 0.0});
    pool.add(std::move(b), std::vector<double>{0.0, 1.0});
    pool.normalized = true;
    const SimilarityMatrix sim = build_similarity(pool, 0.0);
    CHECK(sim.at(0, 0) == 1.0);
    CHECK(sim.at(1, 1) == 1.0);
    CHECK(sim.at(0, 1) == 0.0);
    CHECK(sim.at(1, 0) == 0.0);
  }
  {
    // (1,0) against (0.6,0.8)
    CandidatePool pool;
    CandidateItem a, b;
    a.id = "a";
    a.text = "t";
    b.id = "b";
    b.text = "t";
    pool.add(std::move(a), std::vector<double>{1.0, 0.0});
    pool.add(std::move(b), std::vector<double>{0.6, 0.8});
    pool.normalized = true;
    const SimilarityMatrix sim = build_similarity(pool, 0.0);
    CHECK(sim.at(0, 1) == 0.6);
    CHECK(sim.at(1, 0) == 0.6);
  }
}

TEST_CASE("similarity structure on random pools") {
  const CandidatePool pool = testing::random_unit_pool(60, 16, 31);
  const double eps = 1e-6;
  const SimilarityMatrix sim = build_similarity(pool, eps);
  for (std::size_t i = 0; i < sim.n; ++i) {
    CHECK(sim.at(i, i) == 1.0 + eps);
    for (std::size_t j = 0; j < sim.n; ++j) {
      CHECK(std::fabs(sim.at(i, j) - sim.at(j, i)) <= 1e-12);
      if (i != j) {
        CHECK(sim.at(i, j) >= -1.0 - 1e-9);
        CHECK(sim.at(i, j) <= 1.0 + 1e-9);
      }
    }
  }
}

TEST_CASE("similarity rejects unnormalized pools and bad eps") {
  CandidatePool pool;
  CandidateItem a;
  a.id = "a";
  a.text = "t";
  pool.add(std::move(a), std::vector<double>{3.0, 4.0});
  try {
    build_similarity(pool, 0.0);
    FAIL("expected NotNormalized");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotNormalized);
  }
  const CandidatePool ok = testing::random_unit_pool(4, 4, 1);
  CHECK_THROWS_AS(build_similarity(ok, -1.0), Error);
}

TEST_CASE("conditional kernel at lambda 0 equals the similarity matrix") {
  const CandidatePool pool = testing::random_unit_pool(40, 8, 32);
  const ScoreVector scores = testing::random_scores(40, 33);
  const SimilarityMatrix sim = build_similarity(pool, 1e-6);
  const ConditionalKernel kernel(sim, scores, 0.0);
  CHECK(kernel.alpha() == 0.0);
  for (std::size_t i = 0; i < 40; ++i) {
    for (std::size_t j = 0; j < 40; ++j) {
      CHECK(kernel.entry(i, j) == sim.at(i, j));
    }
  }
}

TEST_CASE("diagonal weighting on an identity similarity") {
  ScoreVector scores;
  scores.r = {0.0, 1.0};
  const SimilarityMatrix sim = manual_sim({1, 0, 0, 1}, 2, 0.0);
  const ConditionalKernel kernel(sim, scores, 0.5);
  CHECK(kernel.entry(0, 0) == 1.0);
  CHECK(kernel.entry(1, 1) == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
  CHECK(kernel.entry(0, 1) == 0.0);
  CHECK(kernel.diag(0) == 1.0);
}

TEST_CASE("log-det identity between weighted and plain kernels") {
  Rng rng(34);
  int pairs = 0;
  while (pairs < 100) {
    const std::size_t n = 3 + rng.below(8);  // N <= 10
    const CandidatePool pool = testing::random_unit_pool(n, 4, rng.below(1000));
    const ScoreVector scores = testing::random_scores(n, rng.below(1000));
    const double lambda = 0.95 * rng.uniform();
    const double alpha = lambda_to_alpha(lambda);
    const SimilarityMatrix sim = build_similarity(pool, 1e-6);
    const ConditionalKernel weighted(sim, scores, lambda);
    const ConditionalKernel plain(sim, scores, 0.0);

    std::vector<std::size_t> subset;
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.below(2)) subset.push_back(i);
    }
    if (subset.empty()) continue;
    const double lhs = brute_force_logdet(weighted, subset) -
                       brute_force_logdet(plain, subset);
    double rsum = 0;
    for (std::size_t i : subset) rsum += scores.r[i];
    CHECK(std::fabs(lhs - 2.0 * alpha * rsum) <= 1e-9);
    ++pairs;
  }
}

TEST_CASE("kernel stays positive semidefinite") {
  Rng rng(35);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 5 + rng.below(20);
    const CandidatePool pool = testing::random_unit_pool(n, 6, rng.below(1000));
    const ScoreVector scores = testing::random_scores(n, rng.below(1000));
    const double lambda = 0.9 * rng.uniform();
    const double eps = 1e-6;
    const SimilarityMatrix sim = build_similarity(pool, eps);
    const ConditionalKernel kernel(sim, scores, lambda);

    double min_w2 = std::numeric_limits<double>::infinity();
    for (double r : scores.r) {
      min_w2 = std::min(min_w2, std::exp(2.0 * kernel.alpha() * r));
    }
    CHECK(smallest_eigenvalue(kernel) >= eps * min_w2 - 1e-9);

    // symmetry of the weighted kernel
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        CHECK(std::fabs(kernel.entry(i, j) - kernel.entry(j, i)) <= 1e-12);
      }
    }
  }
}

TEST_CASE("greedy choice is invariant to additive score shifts") {
  Rng rng(36);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 4 + rng.below(7);
    const CandidatePool pool = testing::random_unit_pool(n, 4, rng.below(1000));
    ScoreVector scores = testing::random_scores(n, rng.below(1000));
    const double lambda = 0.2 + 0.6 * rng.uniform();
    const SimilarityMatrix sim = build_similarity(pool, 1e-6);
    const ConditionalKernel base(sim, scores, lambda);

    const double shift = rng.uniform() * 2 - 1;
    for (double& r : scores.r) r += shift;
    const ConditionalKernel shifted(sim, scores, lambda);

    const std::size_t m = std::min<std::size_t>(4, n);
    const SelectionTrace t1 = greedy_map(base, m);
    const SelectionTrace t2 = greedy_map(shifted, m);
    REQUIRE(t1.steps.size() == t2.steps.size());
    for (std::size_t s = 0; s < t1.steps.size(); ++s) {
      CHECK(t1.steps[s].index == t2.steps[s].index);
    }
  }
}

TEST_CASE("lazy and dense kernels agree") {
  const std::size_t n = 50, d = 12;
  const CandidatePool pool = testing::random_unit_pool(n, d, 37);
  const ScoreVector scores = testing::random_scores(n, 38);
  const double lambda = 0.5, eps = 1e-6;
  const SimilarityMatrix sim = build_similarity(pool, eps);
  const ConditionalKernel dense(sim, scores, lambda);
  const ConditionalKernel lazy(pool, scores, lambda, eps);
  CHECK_FALSE(dense.is_lazy());
  CHECK(lazy.is_lazy());

  std::vector<double> row_d(n), row_l(n);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(std::fabs(dense.diag(i) - lazy.diag(i)) <= 1e-12);
    dense.fill_row(i, row_d);
    lazy.fill_row(i, row_l);
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(std::fabs(row_d[j] - row_l[j]) <= 1e-12);
      CHECK(std::fabs(dense.entry(i, j) - lazy.entry(i, j)) <= 1e-12);
      CHECK(row_l[j] == lazy.entry(i, j));
    }
    CHECK(row_d[i] == dense.diag(i));
    CHECK(row_l[i] == lazy.diag(i));
  }

  // the two storage modes drive greedy selection to the same subset
  const SelectionTrace td = greedy_map(dense, 8);
  const SelectionTrace tl = greedy_map(lazy, 8);
  REQUIRE(td.steps.size() == tl.steps.size());
  for (std::size_t s = 0; s < td.steps.size(); ++s) {
    CHECK(td.steps[s].index == tl.steps[s].index);
    CHECK(std::fabs(td.steps[s].gain - tl.steps[s].gain) <= 1e-9);
  }
}

TEST_CASE("kernel construction argument validation") {
  const CandidatePool pool = testing::random_unit_pool(5, 4, 39);
  const SimilarityMatrix sim = build_similarity(pool, 1e-6);
  ScoreVector wrong;
  wrong.r = {0.1, 0.2};
  try {
    ConditionalKernel kernel(sim, wrong, 0.5);
    FAIL("expected DimMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimMismatch);
  }
  const ScoreVector scores = testing::random_scores(5, 40);
  CHECK_THROWS_AS(ConditionalKernel(sim, scores, 1.0), Error);
  CHECK_THROWS_AS(ConditionalKernel(sim, scores, -0.5), Error);

  CHECK_THROWS_AS(ConditionalKernel::from_matrix({1.0, 0.0, 0.0}, 2), Error);
  CHECK_THROWS_AS(ConditionalKernel::from_matrix({}, 0), Error);
  const ConditionalKernel ok = ConditionalKernel::from_matrix({2.0}, 1);
  CHECK(ok.entry(0, 0) == 2.0);
}
