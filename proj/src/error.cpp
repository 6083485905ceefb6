#include "lmdpp/error.hpp"

namespace lmdpp {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::NonFiniteEmbedding: return "NonFiniteEmbedding";
    case ErrorCode::ZeroEmbedding: return "ZeroEmbedding";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidManifest: return "InvalidManifest";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::InvalidLogProb: return "InvalidLogProb";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::ScorerError: return "ScorerError";
    case ErrorCode::LambdaSingular: return "LambdaSingular";
    case ErrorCode::LambdaRange: return "LambdaRange";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::BadBudget: return "BadBudget";
    case ErrorCode::BadKernel: return "BadKernel";
    case ErrorCode::RankExhausted: return "RankExhausted";
    case ErrorCode::MissingScores: return "MissingScores";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::QueryTooLong: return "QueryTooLong";
    case ErrorCode::MissingEmbedding: return "MissingEmbedding";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "UnknownError";
}

}  // namespace lmdpp
