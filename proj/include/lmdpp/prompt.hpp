#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>

#include "lmdpp/pool.hpp"

namespace lmdpp {

// Task templates render an item two ways: as an in-context demonstration
// (text plus label, trailing separator) and as the query form (input only,
// since labels do not exist before annotation). Scoring uses the query
// form; retrieval packs demo forms and finishes with the query form.
struct PromptTemplate {
  std::string name;
  std::function<std::string(const CandidateItem&)> render_demo;
  std::function<std::string(const CandidateItem&)> render_query;
};

// Registered templates: "plain" and "io". Unknown name -> InvalidArgument.
const PromptTemplate& get_template(const std::string& name);

using TokenCounter = std::function<std::size_t(std::string_view)>;

// Default counter: number of whitespace-separated tokens.
std::size_t count_tokens_whitespace(std::string_view text);

}  // namespace lmdpp
