#pragma once

// Shared fixtures for the test binaries: synthetic pools, scratch files,
// and a subprocess runner for CLI-level tests.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lmdpp/pool.hpp"
#include "lmdpp/rng.hpp"
#include "lmdpp/scoring.hpp"

namespace testing {

// Pool of n random unit embeddings, ids "itemNNNN" in index order.
inline lmdpp::CandidatePool random_unit_pool(std::size_t n, std::size_t d,
                                             std::uint64_t seed) {
  lmdpp::Rng rng(seed);
  lmdpp::CandidatePool pool;
  std::vector<double> emb(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : emb) v = rng.normal();
    lmdpp::CandidateItem item;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "item%04zu", i);
    item.id = buf;
    item.text = "text " + std::to_string(i);
    pool.add(std::move(item), emb);
  }
  return lmdpp::normalize_pool(std::move(pool));
}

inline lmdpp::ScoreVector random_scores(std::size_t n, std::uint64_t seed) {
  lmdpp::Rng rng(seed);
  lmdpp::ScoreVector s;
  s.r.reserve(n);
  for (std::size_t i = 0; i < n; ++i) s.r.push_back(rng.uniform());
  return s;
}

// Unique scratch directory per test binary run, removed eagerly on reuse.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("lmdpp_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path,
                       const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Runs the installed CLI binary with the given arguments and environment
// prefix (e.g. "DPP_THREADS=2 SOURCE_DATE_EPOCH=1700000000").
inline CliResult run_cli(const std::string& binary, const std::string& args,
                         const std::filesystem::path& workdir,
                         const std::string& env = "") {
  const auto out_path = workdir / ".stdout";
  const auto err_path = workdir / ".stderr";
  std::string cmd = "cd '" + workdir.string() + "' && env " + env + " '" +
                    binary + "' " + args + " > '" + out_path.string() +
                    "' 2> '" + err_path.string() + "'";
  const int status = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = read_file(out_path);
  result.err = read_file(err_path);
  return result;
}

}  // namespace testing
