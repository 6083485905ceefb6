#include "lmdpp/prompt.hpp"

#include <cctype>

#include "lmdpp/error.hpp"

namespace lmdpp {

namespace {

std::string plain_demo(const CandidateItem& item) {
  std::string s = item.text;
  if (item.label) {
    s += '\n';
    s += *item.label;
  }
  s += "\n\n";
  return s;
}

std::string plain_query(const CandidateItem& item) { return item.text; }

std::string io_demo(const CandidateItem& item) {
  std::string s = "Input: " + item.text + "\nOutput: ";
  if (item.label) s += *item.label;
  s += "\n\n";
  return s;
}

std::string io_query(const CandidateItem& item) {
  return "Input: " + item.text + "\nOutput:";
}

}  // namespace

const PromptTemplate& get_template(const std::string& name) {
  static const PromptTemplate plain{"plain", plain_demo, plain_query};
  static const PromptTemplate io{"io", io_demo, io_query};
  if (name == "plain") return plain;
  if (name == "io") return io;
  throw Error(ErrorCode::InvalidArgument, "unknown template '" + name + "'");
}

std::size_t count_tokens_whitespace(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    const bool ws = std::isspace(c) != 0;
    if (!ws && !in_token) ++count;
    in_token = !ws;
  }
  return count;
}

}  // namespace lmdpp
