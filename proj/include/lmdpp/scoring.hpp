#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lmdpp/pool.hpp"
#include "lmdpp/prompt.hpp"

namespace lmdpp {

enum class ScoreMode { raw, minmax };
enum class ScoreDirection { low_uncertainty, high_uncertainty };

// Per-item uncertainty scores, aligned to pool order.
struct ScoreVector {
  std::vector<double> r;
  ScoreMode mode = ScoreMode::raw;
  ScoreDirection direction = ScoreDirection::low_uncertainty;
};

// Reciprocal perplexity of one token sequence: exp(mean of the per-token
// natural-log probabilities). Always in (0, 1] for true probabilities.
double spell_score(std::span<const double> token_logprobs);

// Pluggable language-model interface: per-token natural-log probabilities
// of the given text. Implementations must be safe for concurrent reads
// once constructed.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::vector<double> score_logprobs(std::string_view text) const = 0;
};

// Offline byte-level n-gram model with add-alpha smoothing. Vocabulary is
// the corpus byte set plus an unknown symbol; conditionals over it sum to 1
// exactly, and unseen contexts fall back to the uniform 1/|V|.
class NGramScorer : public Scorer {
 public:
  NGramScorer(std::size_t order, double alpha);

  std::vector<double> score_logprobs(std::string_view text) const override;

  std::size_t order() const { return order_; }
  double alpha() const { return alpha_; }
  std::size_t vocab_size() const { return vocab_size_; }

  // probability of next byte given the (order-1)-symbol context; exposed
  // for normalization checks
  double prob(std::string_view context_key, unsigned char next) const;
  std::string context_key(std::string_view text, std::size_t pos) const;

 private:
  friend NGramScorer fit_ngram(const std::vector<std::string>& corpus,
                               std::size_t order, double alpha);
  struct ContextCounts {
    std::unordered_map<unsigned char, std::uint64_t> by_byte;
    std::uint64_t total = 0;
  };
  std::size_t order_;
  double alpha_;
  std::size_t vocab_size_ = 1;  // bytes seen in corpus + unknown symbol
  std::vector<bool> in_vocab_ = std::vector<bool>(256, false);
  std::unordered_map<std::string, ContextCounts> counts_;
};

NGramScorer fit_ngram(const std::vector<std::string>& corpus,
                      std::size_t order, double alpha);

// r_i = spell_score(scorer(template.render_query(item_i))), pool order.
ScoreVector score_pool(const CandidatePool& pool, const Scorer& scorer,
                       const PromptTemplate& tmpl);

// minmax maps affinely onto [0,1] (constant vectors map to all 0.5);
// high_uncertainty negates first so the most-uncertain item scores highest.
ScoreVector transform_scores(ScoreVector scores, ScoreMode mode,
                             ScoreDirection direction);

}  // namespace lmdpp
