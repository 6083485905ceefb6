#include "lmdpp/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <unordered_map>

#include <json.hpp>

#include "lmdpp/baselines.hpp"
#include "lmdpp/error.hpp"
#include "lmdpp/kernel.hpp"
#include "lmdpp/map_greedy.hpp"
#include "lmdpp/pool.hpp"
#include "lmdpp/prompt.hpp"
#include "lmdpp/retrieval.hpp"
#include "lmdpp/rng.hpp"
#include "lmdpp/scoring.hpp"
#include "lmdpp/simd.hpp"

namespace lmdpp {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

// Shortest round-trip decimal form, the same one the JSON writer emits, so
// CSV and JSONL artifacts are byte-stable.
std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return json(v).dump();
}

// Timings make outputs irreproducible, so the reproducible-output mode
// keyed by SOURCE_DATE_EPOCH reports them as 0.
bool reproducible_mode() {
  const char* env = std::getenv("SOURCE_DATE_EPOCH");
  return env && *env;
}

std::string fmt_wall_ms(double ms) {
  if (reproducible_mode()) ms = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", ms);
  return buf;
}

class WallTimer {
 public:
  WallTimer() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

CandidatePool load_pool_cli(const std::string& path, const std::string& format) {
  if (format == "auto") return load_pool(path);
  if (format == "jsonl") return load_pool(path, PoolFormat::jsonl);
  if (format == "binary") return load_pool(path, PoolFormat::binary_sidecar);
  throw Error(ErrorCode::InvalidArgument, "unknown format '" + format + "'");
}

ScoreMode parse_mode(const std::string& s) {
  if (s == "raw") return ScoreMode::raw;
  if (s == "minmax") return ScoreMode::minmax;
  throw Error(ErrorCode::InvalidArgument, "unknown normalize mode '" + s + "'");
}

ScoreDirection parse_direction(const std::string& s) {
  if (s == "low") return ScoreDirection::low_uncertainty;
  if (s == "high") return ScoreDirection::high_uncertainty;
  throw Error(ErrorCode::InvalidArgument, "unknown direction '" + s + "'");
}

KernelMode parse_kernel_mode(const std::string& s) {
  if (s == "auto") return KernelMode::automatic;
  if (s == "dense") return KernelMode::dense;
  if (s == "lazy") return KernelMode::lazy;
  throw Error(ErrorCode::InvalidArgument, "unknown kernel mode '" + s + "'");
}

// Scores JSONL: {"id": str, "score_r": finite real}. Every pool item must
// be covered; ids outside the pool are rejected.
ScoreVector load_scores_file(const std::string& path,
                             const CandidatePool& pool) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::unordered_map<std::string, double> by_id;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() ||
        !j.contains("score_r") || !j["score_r"].is_number()) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(lineno) +
                      ": expected {\"id\", \"score_r\"}");
    }
    const std::string id = j["id"].get<std::string>();
    const double r = j["score_r"].get<double>();
    if (!std::isfinite(r)) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(lineno) + ": score_r must be finite");
    }
    pool.index_of(id);  // UnknownId when the pool lacks it
    if (!by_id.emplace(id, r).second) {
      throw Error(ErrorCode::DuplicateId, id);
    }
  }
  ScoreVector scores;
  scores.r.reserve(pool.size());
  for (const CandidateItem& item : pool.items) {
    auto it = by_id.find(item.id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::MissingScores, "no score for id " + item.id);
    }
    scores.r.push_back(it->second);
  }
  return scores;
}

// Score precedence when no scores file is given: score_r on every item
// (used as-is), else token_logprobs on every item (scored and transformed
// per the flags), else none.
std::optional<ScoreVector> derive_pool_scores(const CandidatePool& pool,
                                              ScoreMode mode,
                                              ScoreDirection direction) {
  bool all_r = true;
  bool all_lp = true;
  for (const CandidateItem& item : pool.items) {
    all_r = all_r && item.score_r.has_value();
    all_lp = all_lp && item.token_logprobs.has_value();
  }
  if (all_r) {
    ScoreVector s;
    for (const CandidateItem& item : pool.items) s.r.push_back(*item.score_r);
    return s;
  }
  if (all_lp) {
    ScoreVector s;
    for (const CandidateItem& item : pool.items) {
      s.r.push_back(spell_score(*item.token_logprobs));
    }
    return transform_scores(std::move(s), mode, direction);
  }
  return std::nullopt;
}

std::vector<std::string> read_corpus_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  return out;
}

}  // namespace

int cmd_score(const ScoreConfig& cfg) {
  const CandidatePool pool = load_pool_cli(cfg.pool_path, cfg.format);
  const PromptTemplate& tmpl = get_template(cfg.template_name);
  const ScoreMode mode = parse_mode(cfg.normalize);
  const ScoreDirection direction = parse_direction(cfg.direction);

  ScoreVector scores;
  if (cfg.scorer == "ngram") {
    std::vector<std::string> corpus;
    if (!cfg.corpus_path.empty()) {
      corpus = read_corpus_lines(cfg.corpus_path);
    } else {
      for (const CandidateItem& item : pool.items) {
        corpus.push_back(tmpl.render_query(item));
      }
    }
    const NGramScorer scorer = fit_ngram(corpus, cfg.ngram_order, cfg.alpha);
    scores = score_pool(pool, scorer, tmpl);
  } else if (cfg.scorer == "file") {
    for (const CandidateItem& item : pool.items) {
      if (item.score_r) {
        scores.r.push_back(*item.score_r);
      } else if (item.token_logprobs) {
        scores.r.push_back(spell_score(*item.token_logprobs));
      } else {
        throw Error(ErrorCode::ScorerError,
                    item.id + ": no score_r or token_logprobs in the pool");
      }
    }
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown scorer '" + cfg.scorer + "'");
  }
  scores = transform_scores(std::move(scores), mode, direction);

  std::ofstream out = open_out(cfg.out_path);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    ojson j;
    j["id"] = pool.items[i].id;
    j["score_r"] = scores.r[i];
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + cfg.out_path);
  std::cout << "scored " << pool.size() << " items -> " << cfg.out_path << "\n";
  return 0;
}

int cmd_select(const SelectConfig& cfg) {
  WallTimer timer;
  CandidatePool pool = load_pool_cli(cfg.pool_path, cfg.format);
  const Method method = method_from_name(cfg.method);
  const bool needs_embeddings = method == Method::lm_dpp ||
                                method == Method::vanilla_dpp ||
                                method == Method::kmeans;
  if (needs_embeddings) pool = normalize_pool(std::move(pool));

  std::optional<ScoreVector> scores;
  if (!cfg.scores_path.empty()) {
    scores = load_scores_file(cfg.scores_path, pool);
  } else {
    scores = derive_pool_scores(pool, parse_mode(cfg.normalize),
                                parse_direction(cfg.direction));
  }

  SelectOptions opt;
  opt.method = method;
  opt.budget = cfg.budget;
  opt.lambda = cfg.lambda;
  opt.seed = cfg.seed;
  opt.epsilon_reg = cfg.epsilon_reg;
  opt.rank_tol = cfg.rank_tol;
  opt.kernel_mode = parse_kernel_mode(cfg.kernel);
  opt.kmeans_max_iters = cfg.kmeans_max_iters;

  const SelectionManifest manifest =
      select(pool, scores ? &*scores : nullptr, opt);
  save_manifest(manifest, cfg.out_path);

  double logdet = std::numeric_limits<double>::quiet_NaN();
  if (manifest.method == Method::lm_dpp ||
      manifest.method == Method::vanilla_dpp) {
    logdet = 0.0;
    for (double g : manifest.gains) {
      if (std::isfinite(g)) logdet += g;
    }
  }
  std::cout << "method=" << method_name(manifest.method)
            << " budget=" << manifest.selected_ids.size()
            << " lambda=" << fmt_double(manifest.lambda)
            << " logdet=" << fmt_double(logdet)
            << " fallback=" << manifest.fallback_count
            << " wall_ms=" << fmt_wall_ms(timer.ms()) << "\n";
  return 0;
}

int cmd_retrieve(const RetrieveConfig& cfg) {
  const SelectionManifest manifest = load_manifest(cfg.index_path);
  CandidatePool pool = load_pool_cli(cfg.pool_path, cfg.format);
  pool = normalize_pool(std::move(pool));
  const PromptTemplate& tmpl = get_template(cfg.template_name);
  const RetrievalIndex index = build_index(pool, manifest, tmpl);

  CandidatePool queries = load_pool_cli(cfg.queries_path, cfg.format);
  const std::size_t k = cfg.k == 0 ? index.size() : cfg.k;
  const auto& kn = simd::active();

  std::ofstream out = open_out(cfg.out_path);
  std::vector<double> qemb;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const CandidateItem& item = queries.items[q];
    if (!queries.has_embedding(q) || queries.dim == 0) {
      throw Error(ErrorCode::MissingEmbedding, item.id);
    }
    auto row = queries.embedding(q);
    qemb.assign(row.begin(), row.end());
    const double norm = std::sqrt(kn.dot(qemb.data(), qemb.data(), qemb.size()));
    if (norm == 0.0) throw Error(ErrorCode::ZeroEmbedding, item.id);
    kn.scale(qemb.data(), 1.0 / norm, qemb.size());

    const PromptAssembly assembly = assemble_prompt(
        index, item, qemb, k, tmpl, cfg.max_tokens, count_tokens_whitespace);
    for (std::size_t i = 1; i < assembly.demos.size(); ++i) {
      if (assembly.demos[i - 1].similarity > assembly.demos[i].similarity) {
        throw Error(ErrorCode::InvalidArgument,
                    "internal: prompt ordering invariant violated");
      }
    }
    ojson j;
    j["query_id"] = assembly.query_id;
    ojson ids = ojson::array();
    ojson sims = ojson::array();
    for (const auto& demo : assembly.demos) {
      ids.push_back(demo.id);
      sims.push_back(demo.similarity);
    }
    j["demo_ids"] = std::move(ids);
    j["similarities"] = std::move(sims);
    j["prompt"] = assembly.rendered;
    j["truncated"] = assembly.truncated;
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + cfg.out_path);
  std::cout << "assembled " << queries.size() << " prompts -> " << cfg.out_path
            << "\n";
  return 0;
}

int cmd_sweep(const SweepConfig& cfg) {
  CandidatePool pool = load_pool_cli(cfg.pool_path, cfg.format);
  pool = normalize_pool(std::move(pool));
  std::optional<ScoreVector> scores;
  if (!cfg.scores_path.empty()) {
    scores = load_scores_file(cfg.scores_path, pool);
  } else {
    scores = derive_pool_scores(pool, parse_mode(cfg.normalize),
                                parse_direction(cfg.direction));
  }
  if (!scores) {
    throw Error(ErrorCode::MissingScores, "sweep needs uncertainty scores");
  }
  const auto& kn = simd::active();
  const std::size_t d = pool.dim;
  const double* emb = pool.embedding_data();

  std::ofstream out = open_out(cfg.out_path);
  out << "lambda,method,mean_selected_r,mean_pairwise_similarity,"
         "cumulative_logdet,wall_time_ms\n";
  for (double lambda : cfg.lambdas) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
      throw Error(ErrorCode::LambdaRange, "lambda must lie in [0,1]");
    }
    WallTimer timer;
    SelectOptions opt;
    opt.method = Method::lm_dpp;
    opt.budget = cfg.budget;
    opt.lambda = lambda;
    opt.seed = cfg.seed;
    opt.epsilon_reg = cfg.epsilon_reg;
    opt.rank_tol = cfg.rank_tol;
    opt.kernel_mode = parse_kernel_mode(cfg.kernel);
    const SelectionManifest manifest = select(pool, &*scores, opt);
    const double wall = timer.ms();

    std::vector<std::size_t> idx;
    idx.reserve(manifest.selected_ids.size());
    for (const std::string& id : manifest.selected_ids) {
      idx.push_back(pool.index_of(id));
    }
    const std::size_t m = idx.size();
    double mean_r = 0.0;
    for (std::size_t i : idx) mean_r += scores->r[i];
    mean_r /= static_cast<double>(m);
    double mean_sim = 0.0;
    if (m > 1) {
      for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
          mean_sim += kn.dot(emb + idx[a] * d, emb + idx[b] * d, d);
        }
      }
      mean_sim /= static_cast<double>(m * (m - 1) / 2);
    }
    // diversity statistic comparable across rows: log det of the selected
    // similarity submatrix, independent of the lambda weighting
    std::vector<double> gram(m * m);
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        gram[a * m + b] = a == b
                              ? 1.0 + cfg.epsilon_reg
                              : kn.dot(emb + idx[a] * d, emb + idx[b] * d, d);
      }
    }
    const double logdet = dense_logdet(std::move(gram), m);

    out << fmt_double(lambda) << ',' << method_name(manifest.method) << ','
        << fmt_double(mean_r) << ',' << fmt_double(mean_sim) << ','
        << fmt_double(logdet) << ',' << fmt_wall_ms(wall) << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + cfg.out_path);
  std::cout << "swept " << cfg.lambdas.size() << " lambda values -> "
            << cfg.out_path << "\n";
  return 0;
}

int cmd_oracle_check(const OracleCheckConfig& cfg) {
  if (cfg.n < 1 || cfg.n > 10 || cfg.m < 1 || cfg.m > 5) {
    throw Error(ErrorCode::InvalidArgument,
                "oracle-check requires 1 <= n <= 10 and 1 <= m <= 5");
  }
  if (cfg.inject_fault != "none" && cfg.inject_fault != "skip_update") {
    throw Error(ErrorCode::InvalidArgument,
                "unknown fault '" + cfg.inject_fault + "'");
  }
  if (cfg.trials == 0) {
    std::cout << "warning: 0 trials requested, vacuous pass\n"
              << "trials=0 result=PASS\n";
    return 0;
  }
  Rng rng(cfg.seed);
  const std::size_t d = 4;
  double max_dev = 0.0;
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    // random unit embeddings, uniform scores, lambda clear of the top-score
    // route
    std::vector<double> embs(cfg.n * d);
    for (double& v : embs) v = rng.normal();
    ScoreVector scores;
    CandidatePool pool;
    for (std::size_t i = 0; i < cfg.n; ++i) {
      CandidateItem item;
      item.id = "t" + std::to_string(i);
      item.text = item.id;
      pool.add(std::move(item), {embs.data() + i * d, d});
      scores.r.push_back(rng.uniform());
    }
    pool = normalize_pool(std::move(pool));
    const double lambda = 0.9 * rng.uniform();
    const SimilarityMatrix sim = build_similarity(pool, 1e-6);
    const ConditionalKernel kernel(sim, scores, lambda);

    SelectionTrace fast;
    if (cfg.inject_fault == "skip_update") {
      // deliberately broken fast path: repeats the argmax over the original
      // diagonal without ever updating the factor
      std::vector<std::size_t> order(cfg.n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) {
                         if (kernel.diag(a) != kernel.diag(b)) {
                           return kernel.diag(a) > kernel.diag(b);
                         }
                         return a < b;
                       });
      double cum = 0.0;
      for (std::size_t s = 0; s < cfg.m; ++s) {
        const double g = std::log(kernel.diag(order[s]));
        cum += g;
        fast.steps.push_back({order[s], g, cum, false});
      }
    } else {
      fast = greedy_map(kernel, cfg.m);
    }

    std::vector<std::size_t> current;
    for (std::size_t s = 0; s < fast.steps.size(); ++s) {
      const auto [want_idx, want_gain] = brute_force_greedy_step(kernel, current);
      const GreedyStep& got = fast.steps[s];
      const double dev = std::fabs(got.gain - want_gain);
      max_dev = std::max(max_dev, dev);
      if (got.index != want_idx || dev > 1e-8) {
        ojson ce;
        ce["trial"] = trial;
        ce["step"] = s;
        ce["lambda"] = lambda;
        ce["n"] = cfg.n;
        ce["m"] = cfg.m;
        ce["expected_index"] = want_idx;
        ce["expected_gain"] = want_gain;
        ce["got_index"] = got.index;
        ce["got_gain"] = got.gain;
        ce["scores"] = scores.r;
        ojson mat = ojson::array();
        for (std::size_t a = 0; a < cfg.n; ++a) {
          ojson row = ojson::array();
          for (std::size_t b = 0; b < cfg.n; ++b) {
            row.push_back(kernel.entry(a, b));
          }
          mat.push_back(std::move(row));
        }
        ce["kernel"] = std::move(mat);
        std::cout << "counterexample: " << ce.dump() << "\n";
        std::cout << "trials=" << cfg.trials << " n=" << cfg.n << " m=" << cfg.m
                  << " result=FAIL\n";
        return 1;
      }
      current.push_back(got.index);
    }
  }
  std::cout << "trials=" << cfg.trials << " n=" << cfg.n << " m=" << cfg.m
            << " max_gain_deviation=" << fmt_double(max_dev)
            << " result=PASS\n";
  return 0;
}

}  // namespace lmdpp
