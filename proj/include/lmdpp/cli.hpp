#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace lmdpp {

// Subcommand drivers. Each returns a process exit code (0 success,
// 1 verification failure, 2 is produced by the caller mapping thrown
// lmdpp::Error to input/config failures).

struct ScoreConfig {
  std::string pool_path;
  std::string format = "auto";  // auto|jsonl|binary
  std::string scorer = "ngram";  // ngram|file
  std::string corpus_path;       // ngram fit corpus, one document per line
  std::size_t ngram_order = 3;
  double alpha = 1.0;
  std::string normalize = "minmax";  // raw|minmax
  std::string direction = "low";     // low|high
  std::string template_name = "plain";
  std::string out_path;
};
int cmd_score(const ScoreConfig& cfg);

struct SelectConfig {
  std::string pool_path;
  std::string format = "auto";
  std::string scores_path;  // optional JSONL of {"id", "score_r"}
  std::string method = "lm_dpp";
  std::size_t budget = 16;
  double lambda = 0.5;
  std::uint64_t seed = 0;
  double epsilon_reg = 1e-6;
  double rank_tol = 1e-10;
  std::string kernel = "auto";  // auto|dense|lazy
  std::string normalize = "minmax";
  std::string direction = "low";
  std::size_t kmeans_max_iters = 100;
  std::string out_path;
};
int cmd_select(const SelectConfig& cfg);

struct RetrieveConfig {
  std::string index_path;  // selection manifest
  std::string pool_path;
  std::string format = "auto";
  std::string queries_path;
  std::size_t k = 0;  // 0: retrieve from the whole index
  std::size_t max_tokens = 2048;
  std::string template_name = "plain";
  std::string out_path;
};
int cmd_retrieve(const RetrieveConfig& cfg);

struct SweepConfig {
  std::string pool_path;
  std::string format = "auto";
  std::string scores_path;
  std::size_t budget = 16;
  std::uint64_t seed = 0;
  double epsilon_reg = 1e-6;
  double rank_tol = 1e-10;
  std::string kernel = "auto";
  std::string normalize = "minmax";
  std::string direction = "low";
  std::vector<double> lambdas = {0.0, 0.2, 0.4, 0.5, 0.6, 0.8, 0.9, 1.0};
  std::string out_path;
};
int cmd_sweep(const SweepConfig& cfg);

struct OracleCheckConfig {
  std::size_t n = 8;
  std::size_t m = 4;
  std::size_t trials = 200;
  std::uint64_t seed = 1;
  // test hook: "skip_update" swaps in a fast path that never updates the
  // factor, to prove the checker catches real faults
  std::string inject_fault = "none";
};
int cmd_oracle_check(const OracleCheckConfig& cfg);

}  // namespace lmdpp
