#pragma once

#include <string>
#include <string_view>

#include "quadsim/stl/ast.hpp"

namespace quadsim::stl {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, int line, int col)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) + ": " + msg),
        line(line),
        col(col) {}
  int line;
  int col;
};

// Parse a specification: `name = expression` definitions separated by
// newlines or semicolons ('#' starts a comment). Later definitions may
// reference earlier ones by name; unknown identifiers denote trace signals.
Specification parse_spec(std::string_view text);

// Single-expression entry points (sharing the given builder).
FormulaPtr parse_formula(Builder& builder, std::string_view text);
TermPtr parse_term(Builder& builder, std::string_view text);

}  // namespace quadsim::stl
