#include <algorithm>
#include <cstddef>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lmdpp/cli.hpp"
#include "lmdpp/error.hpp"

namespace {

void add_config_flag(CLI::App* cmd, std::string& path) {
  cmd->add_option("--config", path,
                  "flat key=value file; command-line flags take precedence");
}

// Injects "--key value..." tokens for config entries whose flag is absent
// from the command line, right after the subcommand name. Precedence is
// then flags > config file > built-in defaults.
int splice_config(const CLI::App* sub, std::vector<std::string>& args) {
  std::string cfg_path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      cfg_path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      cfg_path = args[i].substr(9);
    }
  }
  if (cfg_path.empty()) return 0;

  std::vector<std::string> spliced;
  for (const CLI::ConfigItem& item :
       sub->get_config_formatter()->from_file(cfg_path)) {
    if (!item.parents.empty() || item.name == "config") {
      std::cerr << "error: config key " << item.name
                << " is not a flat option of " << sub->get_name() << "\n";
      return 2;
    }
    const std::string flag = "--" + item.name;
    if (sub->get_option_no_throw(flag) == nullptr) {
      std::cerr << "error: unknown config key " << item.name << " for "
                << sub->get_name() << "\n";
      return 2;
    }
    bool on_cli = false;
    for (std::size_t i = 1; i < args.size() && !on_cli; ++i) {
      on_cli = args[i] == flag || args[i].rfind(flag + "=", 0) == 0;
    }
    if (on_cli) continue;
    spliced.push_back(flag);
    spliced.insert(spliced.end(), item.inputs.begin(), item.inputs.end());
  }
  args.insert(args.begin() + 1, spliced.begin(), spliced.end());
  return 0;
}

void add_format_flag(CLI::App* cmd, std::string& format) {
  cmd->add_option("--format", format, "pool format: auto, jsonl, binary")
      ->check(CLI::IsMember({"auto", "jsonl", "binary"}));
}

void add_normalize_flags(CLI::App* cmd, std::string& normalize,
                         std::string& direction) {
  cmd->add_option("--normalize", normalize, "score normalization: raw, minmax")
      ->check(CLI::IsMember({"raw", "minmax"}));
  cmd->add_option("--direction", direction,
                  "score direction: low (confident items score high), high")
      ->check(CLI::IsMember({"low", "high"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lmdpp: uncertainty-weighted diverse subset selection and "
               "demonstration retrieval"};
  app.name("lmdpp");
  app.require_subcommand(1);
  std::string config_path;

  lmdpp::ScoreConfig score_cfg;
  CLI::App* score = app.add_subcommand(
      "score", "score a candidate pool and write per-item scores");
  add_config_flag(score, config_path);
  score->add_option("--pool", score_cfg.pool_path, "candidate pool path")
      ->required();
  add_format_flag(score, score_cfg.format);
  score->add_option("--scorer", score_cfg.scorer,
                    "ngram (fit and score) or file (use pool fields)")
      ->check(CLI::IsMember({"ngram", "file"}));
  score->add_option("--corpus", score_cfg.corpus_path,
                    "fit corpus, one text per line (default: the pool texts)");
  score->add_option("--ngram-order", score_cfg.ngram_order, "n-gram order")
      ->check(CLI::PositiveNumber);
  score->add_option("--alpha", score_cfg.alpha, "add-alpha smoothing")
      ->check(CLI::PositiveNumber);
  add_normalize_flags(score, score_cfg.normalize, score_cfg.direction);
  score->add_option("--template", score_cfg.template_name,
                    "prompt template: plain, io")
      ->check(CLI::IsMember({"plain", "io"}));
  score->add_option("--out", score_cfg.out_path, "output scores path")
      ->required();

  lmdpp::SelectConfig select_cfg;
  CLI::App* select = app.add_subcommand(
      "select", "select a subset for annotation and write a manifest");
  add_config_flag(select, config_path);
  select->add_option("--pool", select_cfg.pool_path, "candidate pool path")
      ->required();
  add_format_flag(select, select_cfg.format);
  select->add_option("--scores", select_cfg.scores_path,
                     "scores path (default: derive from pool fields)");
  select->add_option(
      "--method", select_cfg.method,
      "lm_dpp, vanilla_dpp, perplexity, random, kmeans");
  select->add_option("--budget", select_cfg.budget, "subset size")
      ->check(CLI::PositiveNumber);
  select->add_option("--lambda", select_cfg.lambda,
                     "uncertainty weight in [0,1]");
  select->add_option("--seed", select_cfg.seed, "RNG seed");
  select->add_option("--epsilon-reg", select_cfg.epsilon_reg,
                     "similarity diagonal regularizer");
  select->add_option("--rank-tol", select_cfg.rank_tol,
                     "residual threshold for rank exhaustion");
  select->add_option("--kernel", select_cfg.kernel,
                     "kernel storage: auto, dense, lazy")
      ->check(CLI::IsMember({"auto", "dense", "lazy"}));
  add_normalize_flags(select, select_cfg.normalize, select_cfg.direction);
  select->add_option("--kmeans-max-iters", select_cfg.kmeans_max_iters,
                     "Lloyd iteration cap")
      ->check(CLI::PositiveNumber);
  select->add_option("--out", select_cfg.out_path, "output manifest path")
      ->required();

  lmdpp::RetrieveConfig retrieve_cfg;
  CLI::App* retrieve = app.add_subcommand(
      "retrieve", "assemble prompts from a selection manifest");
  add_config_flag(retrieve, config_path);
  retrieve->add_option("--index", retrieve_cfg.index_path,
                       "selection manifest path")
      ->required();
  retrieve->add_option("--pool", retrieve_cfg.pool_path,
                       "pool the manifest selects from")
      ->required();
  add_format_flag(retrieve, retrieve_cfg.format);
  retrieve->add_option("--queries", retrieve_cfg.queries_path,
                       "query pool path")
      ->required();
  retrieve->add_option("--k", retrieve_cfg.k,
                       "demonstrations per query (0: all selected)");
  retrieve->add_option("--max-tokens", retrieve_cfg.max_tokens,
                       "prompt token budget")
      ->check(CLI::PositiveNumber);
  retrieve->add_option("--template", retrieve_cfg.template_name,
                       "prompt template: plain, io")
      ->check(CLI::IsMember({"plain", "io"}));
  retrieve->add_option("--out", retrieve_cfg.out_path, "output prompts path")
      ->required();

  lmdpp::SweepConfig sweep_cfg;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "run selection across lambda values and write a stats CSV");
  add_config_flag(sweep, config_path);
  sweep->add_option("--pool", sweep_cfg.pool_path, "candidate pool path")
      ->required();
  add_format_flag(sweep, sweep_cfg.format);
  sweep->add_option("--scores", sweep_cfg.scores_path,
                    "scores path (default: derive from pool fields)");
  sweep->add_option("--budget", sweep_cfg.budget, "subset size")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--seed", sweep_cfg.seed, "RNG seed");
  sweep->add_option("--epsilon-reg", sweep_cfg.epsilon_reg,
                    "similarity diagonal regularizer");
  sweep->add_option("--rank-tol", sweep_cfg.rank_tol,
                    "residual threshold for rank exhaustion");
  sweep->add_option("--kernel", sweep_cfg.kernel,
                    "kernel storage: auto, dense, lazy")
      ->check(CLI::IsMember({"auto", "dense", "lazy"}));
  add_normalize_flags(sweep, sweep_cfg.normalize, sweep_cfg.direction);
  sweep->add_option("--lambdas", sweep_cfg.lambdas,
                    "comma-separated lambda values")
      ->delimiter(',');
  sweep->add_option("--out", sweep_cfg.out_path, "output CSV path")
      ->required();

  lmdpp::OracleCheckConfig oracle_cfg;
  CLI::App* oracle = app.add_subcommand(
      "oracle-check",
      "verify fast greedy selection against literal log-det evaluation");
  add_config_flag(oracle, config_path);
  oracle->add_option("--n", oracle_cfg.n, "pool size per trial (max 10)");
  oracle->add_option("--m", oracle_cfg.m, "budget per trial (max 5)");
  oracle->add_option("--trials", oracle_cfg.trials, "number of random trials");
  oracle->add_option("--seed", oracle_cfg.seed, "RNG seed");
  oracle
      ->add_option("--inject-fault", oracle_cfg.inject_fault,
                   "deliberately break the fast path (for testing the check)")
      ->group("");  // hidden

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    if (!args.empty()) {
      for (CLI::App* sub : {score, select, retrieve, sweep, oracle}) {
        if (args[0] == sub->get_name()) {
          if (const int rc = splice_config(sub, args); rc != 0) return rc;
          break;
        }
      }
    }
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (score->parsed()) return lmdpp::cmd_score(score_cfg);
    if (select->parsed()) return lmdpp::cmd_select(select_cfg);
    if (retrieve->parsed()) return lmdpp::cmd_retrieve(retrieve_cfg);
    if (sweep->parsed()) return lmdpp::cmd_sweep(sweep_cfg);
    if (oracle->parsed()) return lmdpp::cmd_oracle_check(oracle_cfg);
  } catch (const lmdpp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
