#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "lmdpp/error.hpp"
#include "lmdpp/prompt.hpp"
#include "lmdpp/retrieval.hpp"
#include "lmdpp/rng.hpp"
#include "lmdpp/simd.hpp"

using namespace lmdpp;

namespace {

// Pool on the unit circle: embedding (cos t, sin t) per requested angle.
CandidatePool circle_pool(const std::vector<double>& angles) {
  CandidatePool pool;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    CandidateItem item;
    item.id = "c" + std::to_string(i);
    item.text = "demo " + std::to_string(i);
    item.label = "L" + std::to_string(i);
    pool.add(std::move(item),
             std::vector<double>{std::cos(angles[i]), std::sin(angles[i])});
  }
  pool.normalized = true;
  return pool;
}

SelectionManifest manifest_of(const CandidatePool& pool,
                              std::vector<std::string> ids) {
  SelectionManifest m;
  m.method = Method::random;
  m.budget = ids.size();
  m.lambda = 0.0;
  m.selected_ids = std::move(ids);
  m.gains.assign(m.selected_ids.size(), 0.0);
  m.created_at = "2024-01-02T03:04:05Z";
  for (const auto& id : m.selected_ids) pool.index_of(id);
  return m;
}

CandidateItem query_item(const std::string& text) {
  CandidateItem q;
  q.id = "q";
  q.text = text;
  return q;
}

const std::vector<double> kEast = {1.0, 0.0};

}  // namespace

TEST_CASE("index construction follows manifest order") {
  const CandidatePool pool = circle_pool({0.0, 0.5, 1.0, 1.5});
  const SelectionManifest m = manifest_of(pool, {"c2", "c0", "c3"});
  const RetrievalIndex index = build_index(pool, m, get_template("plain"));
  REQUIRE(index.size() == 3);
  CHECK(index.ids == std::vector<std::string>{"c2", "c0", "c3"});
  CHECK(index.pool_indices == std::vector<std::size_t>{2, 0, 3});
  CHECK(index.dim == 2);
  CHECK(index.demo_texts[1] == "demo 0\nL0\n\n");

  SelectionManifest missing = m;
  missing.selected_ids[1] = "nope";
  try {
    build_index(pool, missing, get_template("plain"));
    FAIL("expected UnknownId");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownId);
  }
}

TEST_CASE("build_index requires a normalized pool") {
  CandidatePool pool;
  CandidateItem item;
  item.id = "a";
  item.text = "t";
  pool.add(std::move(item), std::vector<double>{1.0, 0.0});
  const SelectionManifest m = manifest_of(pool, {"a"});
  try {
    build_index(pool, m, get_template("plain"));
    FAIL("expected NotNormalized");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotNormalized);
  }
}

TEST_CASE("topk self-similarity and exhaustiveness") {
  const CandidatePool pool = circle_pool({0.0, 0.7, 1.4, 2.1, 2.8});
  const SelectionManifest m =
      manifest_of(pool, {"c0", "c1", "c2", "c3", "c4"});
  const RetrievalIndex index = build_index(pool, m, get_template("plain"));

  const auto hits = topk(index, pool.embedding(2), 5);
  REQUIRE(hits.size() == 5);
  CHECK(hits[0].id == "c2");
  CHECK(hits[0].similarity == doctest::Approx(1.0).epsilon(1e-9));
  std::set<std::string> seen;
  for (const auto& h : hits) seen.insert(h.id);
  CHECK(seen.size() == 5);  // a permutation of the index
  for (std::size_t i = 1; i < hits.size(); ++i) {
    CHECK(hits[i - 1].similarity >= hits[i].similarity);
  }
}

TEST_CASE("topk matches an exhaustive sort oracle") {
  Rng rng(81);
  const CandidatePool pool = testing::random_unit_pool(40, 8, 82);
  std::vector<std::string> all_ids;
  for (const auto& item : pool.items) all_ids.push_back(item.id);
  const SelectionManifest m = manifest_of(pool, all_ids);
  const RetrievalIndex index = build_index(pool, m, get_template("plain"));

  std::vector<double> q(8);
  for (int rep = 0; rep < 50; ++rep) {
    double norm2 = 0;
    for (double& v : q) {
      v = rng.normal();
      norm2 += v * v;
    }
    for (double& v : q) v /= std::sqrt(norm2);

    const std::size_t k = 1 + rng.below(12);
    const auto hits = topk(index, q, k);

    // oracle: full similarity sort, stable on (similarity desc, pool index);
    // shares the dot primitive so equality below can be exact
    std::vector<std::pair<double, std::size_t>> sims;
    for (std::size_t i = 0; i < index.size(); ++i) {
      const double s =
          simd::active().dot(index.embedding(i).data(), q.data(), 8);
      sims.push_back({s, index.pool_indices[i]});
    }
    std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    REQUIRE(hits.size() == std::min<std::size_t>(k, index.size()));
    for (std::size_t i = 0; i < hits.size(); ++i) {
      CHECK(hits[i].similarity == sims[i].first);
      CHECK(pool.index_of(hits[i].id) == sims[i].second);
    }
  }
}

TEST_CASE("topk tie-break prefers the lower pool index") {
  // two identical embeddings at different pool positions
  const CandidatePool pool = circle_pool({0.3, 1.0, 0.3});
  const SelectionManifest m = manifest_of(pool, {"c2", "c1", "c0"});
  const RetrievalIndex index = build_index(pool, m, get_template("plain"));
  const auto hits = topk(index, pool.embedding(0), 3);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].similarity == hits[1].similarity);
  CHECK(hits[0].id == "c0");
  CHECK(hits[1].id == "c2");
}

TEST_CASE("topk argument validation") {
  const CandidatePool pool = circle_pool({0.0, 1.0});
  const SelectionManifest m = manifest_of(pool, {"c0", "c1"});
  const RetrievalIndex index = build_index(pool, m, get_template("plain"));
  CHECK_THROWS_AS(topk(index, kEast, 0), Error);
  try {
    topk(index, std::vector<double>{2.0, 0.0}, 1);
    FAIL("expected NotNormalized");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotNormalized);
  }
  CHECK_THROWS_AS(topk(index, std::vector<double>{1.0, 0.0, 0.0}, 1), Error);
  CHECK(topk(index, kEast, 10).size() == 2);  // k beyond |index|
}

TEST_CASE("prompt assembly orders ascending and packs the budget") {
  // query (1,0); similarities by construction: c0=0.9, c1=0.5, c2=0.7
  CandidatePool pool;
  const std::vector<std::vector<double>> embs = {
      {0.9, std::sqrt(1 - 0.81)}, {0.5, std::sqrt(1 - 0.25)},
      {0.7, std::sqrt(1 - 0.49)}};
  for (std::size_t i = 0; i < embs.size(); ++i) {
    CandidateItem item;
    item.id = "c" + std::to_string(i);
    item.text = "demo number " + std::to_string(i);  // 3 tokens
    pool.add(std::move(item), embs[i]);
  }
  pool.normalized = true;
  const SelectionManifest m = manifest_of(pool, {"c0", "c1", "c2"});
  const RetrievalIndex index = build_index(pool, m, get_template("plain"));
  const CandidateItem query = query_item("the query");  // 2 tokens

  SUBCASE("ample budget keeps all demos, least similar first") {
    const PromptAssembly a = assemble_prompt(index, query, kEast, 3,
                                             get_template("plain"), 100,
                                             count_tokens_whitespace);
    REQUIRE(a.demos.size() == 3);
    CHECK(a.demos[0].id == "c1");
    CHECK(a.demos[1].id == "c2");
    CHECK(a.demos[2].id == "c0");
    CHECK(a.demos[0].similarity == 0.5);
    CHECK(a.demos[1].similarity == 0.7);
    CHECK(a.demos[2].similarity == 0.9);
    CHECK_FALSE(a.truncated);
    CHECK(a.total_tokens == 11);  // 3 demos x 3 tokens + 2 query tokens
    CHECK(a.rendered ==
          "demo number 1\n\ndemo number 2\n\ndemo number 0\n\nthe query");
  }

  SUBCASE("tight budget drops the least similar demo first") {
    const PromptAssembly a = assemble_prompt(index, query, kEast, 3,
                                             get_template("plain"), 8,
                                             count_tokens_whitespace);
    REQUIRE(a.demos.size() == 2);
    CHECK(a.demos[0].id == "c2");
    CHECK(a.demos[1].id == "c0");
    CHECK(a.truncated);
    CHECK(a.total_tokens == 8);
    CHECK(a.total_tokens <= 8);
  }

  SUBCASE("k=1 keeps only the most similar demo") {
    const PromptAssembly a = assemble_prompt(index, query, kEast, 1,
                                             get_template("plain"), 100,
                                             count_tokens_whitespace);
    REQUIRE(a.demos.size() == 1);
    CHECK(a.demos[0].id == "c0");
    CHECK(a.rendered == "demo number 0\n\nthe query");
    CHECK_FALSE(a.truncated);
  }

  SUBCASE("query alone over budget is an error") {
    try {
      assemble_prompt(index, query, kEast, 3, get_template("plain"), 1,
                      count_tokens_whitespace);
      FAIL("expected QueryTooLong");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::QueryTooLong);
      CHECK(std::string(e.what()).find("q") != std::string::npos);
    }
  }

  SUBCASE("budget exactly the query length keeps zero demos") {
    const PromptAssembly a = assemble_prompt(index, query, kEast, 3,
                                             get_template("plain"), 2,
                                             count_tokens_whitespace);
    CHECK(a.demos.empty());
    CHECK(a.truncated);
    CHECK(a.rendered == "the query");
    CHECK(a.total_tokens == 2);
  }
}

TEST_CASE("dropping demos never reorders the survivors") {
  Rng rng(83);
  const CandidatePool pool = testing::random_unit_pool(20, 6, 84);
  std::vector<std::string> all_ids;
  for (const auto& item : pool.items) all_ids.push_back(item.id);
  const RetrievalIndex index =
      build_index(pool, manifest_of(pool, all_ids), get_template("plain"));

  std::vector<double> q(6);
  for (int rep = 0; rep < 40; ++rep) {
    double norm2 = 0;
    for (double& v : q) {
      v = rng.normal();
      norm2 += v * v;
    }
    for (double& v : q) v /= std::sqrt(norm2);
    const CandidateItem query = query_item("q text");

    const PromptAssembly full = assemble_prompt(index, query, q, 8,
                                                get_template("plain"), 10000,
                                                count_tokens_whitespace);
    const std::size_t budget = 2 + rng.below(30);
    const PromptAssembly tight = assemble_prompt(index, query, q, 8,
                                                 get_template("plain"), budget,
                                                 count_tokens_whitespace);
    CHECK(tight.total_tokens <= budget);
    CHECK(tight.demos.size() <= full.demos.size());
    // survivors are exactly the tail of the untruncated ordering
    const std::size_t drop = full.demos.size() - tight.demos.size();
    CHECK(tight.truncated == (drop > 0));
    for (std::size_t i = 0; i < tight.demos.size(); ++i) {
      CHECK(tight.demos[i].id == full.demos[drop + i].id);
    }
    for (std::size_t i = 1; i < tight.demos.size(); ++i) {
      CHECK(tight.demos[i - 1].similarity <= tight.demos[i].similarity);
    }
  }
}

TEST_CASE("assembly is deterministic") {
  const CandidatePool pool = testing::random_unit_pool(10, 4, 85);
  std::vector<std::string> all_ids;
  for (const auto& item : pool.items) all_ids.push_back(item.id);
  const RetrievalIndex index =
      build_index(pool, manifest_of(pool, all_ids), get_template("io"));
  const CandidateItem query = query_item("which one");
  const auto e0 = pool.embedding(0);
  const std::vector<double> q(e0.begin(), e0.end());
  const PromptAssembly a = assemble_prompt(index, query, q, 5,
                                           get_template("io"), 64,
                                           count_tokens_whitespace);
  const PromptAssembly b = assemble_prompt(index, query, q, 5,
                                           get_template("io"), 64,
                                           count_tokens_whitespace);
  CHECK(a.rendered == b.rendered);
  CHECK(a.total_tokens == b.total_tokens);
  CHECK(a.truncated == b.truncated);
  REQUIRE(a.demos.size() == b.demos.size());
  for (std::size_t i = 0; i < a.demos.size(); ++i) {
    CHECK(a.demos[i].id == b.demos[i].id);
    CHECK(a.demos[i].similarity == b.demos[i].similarity);
  }
}
