#include "lmdpp/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "lmdpp/error.hpp"
#include "lmdpp/parallel.hpp"

namespace lmdpp {

double spell_score(std::span<const double> token_logprobs) {
  if (token_logprobs.empty()) {
    throw Error(ErrorCode::EmptySequence, "spell_score");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < token_logprobs.size(); ++i) {
    const double lp = token_logprobs[i];
    if (!std::isfinite(lp) || lp > 0.0) {
      throw Error(ErrorCode::InvalidLogProb, "index " + std::to_string(i));
    }
    sum += lp;
  }
  return std::exp(sum / static_cast<double>(token_logprobs.size()));
}

namespace {

constexpr unsigned BOS_SYMBOL = 256;  // outside the byte range

void append_symbol(std::string& key, unsigned sym) {
  key.push_back(static_cast<char>(sym & 0xff));
  key.push_back(static_cast<char>((sym >> 8) & 0xff));
}

}  // namespace

NGramScorer::NGramScorer(std::size_t order, double alpha)
    : order_(order), alpha_(alpha) {
  if (order < 1) throw Error(ErrorCode::InvalidArgument, "ngram order must be >= 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::InvalidArgument, "smoothing alpha must be > 0");
  }
}

std::string NGramScorer::context_key(std::string_view text,
                                     std::size_t pos) const {
  std::string key;
  key.reserve(2 * (order_ - 1));
  for (std::size_t back = order_ - 1; back >= 1; --back) {
    if (pos >= back) {
      append_symbol(key, static_cast<unsigned char>(text[pos - back]));
    } else {
      append_symbol(key, BOS_SYMBOL);
    }
  }
  return key;
}

double NGramScorer::prob(std::string_view context_key, unsigned char next) const {
  std::uint64_t count = 0;
  std::uint64_t total = 0;
  auto it = counts_.find(std::string(context_key));
  if (it != counts_.end()) {
    total = it->second.total;
    if (in_vocab_[next]) {
      auto bit = it->second.by_byte.find(next);
      if (bit != it->second.by_byte.end()) count = bit->second;
    }
    // bytes outside the vocabulary score as the unknown symbol: count 0
  }
  return (static_cast<double>(count) + alpha_) /
         (static_cast<double>(total) +
          alpha_ * static_cast<double>(vocab_size_));
}

std::vector<double> NGramScorer::score_logprobs(std::string_view text) const {
  std::vector<double> out;
  out.reserve(text.size());
  for (std::size_t pos = 0; pos < text.size(); ++pos) {
    const double p = prob(context_key(text, pos),
                          static_cast<unsigned char>(text[pos]));
    out.push_back(std::min(0.0, std::log(p)));
  }
  return out;
}

NGramScorer fit_ngram(const std::vector<std::string>& corpus,
                      std::size_t order, double alpha) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "fit_ngram");
  NGramScorer scorer(order, alpha);
  std::size_t vocab = 0;
  for (const std::string& doc : corpus) {
    for (std::size_t pos = 0; pos < doc.size(); ++pos) {
      const auto b = static_cast<unsigned char>(doc[pos]);
      if (!scorer.in_vocab_[b]) {
        scorer.in_vocab_[b] = true;
        ++vocab;
      }
      auto& ctx = scorer.counts_[scorer.context_key(doc, pos)];
      ++ctx.by_byte[b];
      ++ctx.total;
    }
  }
  scorer.vocab_size_ = vocab + 1;  // plus the unknown symbol
  return scorer;
}

ScoreVector score_pool(const CandidatePool& pool, const Scorer& scorer,
                       const PromptTemplate& tmpl) {
  const std::size_t n = pool.size();
  if (n == 0) throw Error(ErrorCode::EmptyPool, "score_pool");
  ScoreVector out;
  out.r.assign(n, 0.0);
  std::vector<std::exception_ptr> errors(n);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        const std::string rendered = tmpl.render_query(pool.items[i]);
        out.r[i] = spell_score(scorer.score_logprobs(rendered));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::ScorerError, pool.items[i].id + ": " + e.what());
    }
  }
  return out;
}

ScoreVector transform_scores(ScoreVector scores, ScoreMode mode,
                             ScoreDirection direction) {
  if (scores.r.empty()) {
    throw Error(ErrorCode::InvalidArgument, "transform_scores: empty input");
  }
  if (direction == ScoreDirection::high_uncertainty) {
    for (double& v : scores.r) v = -v;
  }
  if (mode == ScoreMode::minmax) {
    const auto [lo_it, hi_it] = std::minmax_element(scores.r.begin(), scores.r.end());
    const double lo = *lo_it, hi = *hi_it;
    if (hi == lo) {
      std::fill(scores.r.begin(), scores.r.end(), 0.5);
    } else {
      // plain division so the extremes land on exactly 0 and 1
      const double span = hi - lo;
      for (double& v : scores.r) v = (v - lo) / span;
    }
  }
  scores.mode = mode;
  scores.direction = direction;
  return scores;
}

}  // namespace lmdpp
