#pragma once

#include <stdexcept>
#include <string>

namespace lmdpp {

// Stable error taxonomy. The CLI maps every Error to exit code 2
// (input/config); verification mismatches use exit code 1.
enum class ErrorCode {
  // pool_io
  DuplicateId,
  DimMismatch,
  NonFiniteEmbedding,
  ZeroEmbedding,
  IoError,
  ParseError,
  InvalidManifest,
  EmptyText,
  EmptyPool,
  // scoring
  EmptySequence,
  InvalidLogProb,
  EmptyCorpus,
  ScorerError,
  // kernel
  LambdaSingular,
  LambdaRange,
  NotNormalized,
  // map_greedy
  BadBudget,
  BadKernel,
  RankExhausted,
  MissingScores,
  // retrieval
  UnknownId,
  QueryTooLong,
  MissingEmbedding,
  // generic precondition violation
  InvalidArgument,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " +
                           std::move(message)),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lmdpp
