#pragma once

// Surface syntax: programs (.imp), spec files (.spec), and standalone
// predicates. Spans point into the given source; predicates come back
// unlinked (resolve names with link()).

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lazytime/ast.hpp"
#include "lazytime/predicate.hpp"

namespace lazytime {

struct ParseResult {
    StmtPtr program;
    Universe universe;
    std::vector<std::string> warnings;
};

// Parses a program. A missing final `stop` is appended with a warning;
// `stop` anywhere but the end is an error. The time variable t, `print`,
// and keywords cannot be used as variable names.
ParseResult parse_program(std::string_view src, std::size_t array_bound = 8);

// Parses a sequence of `name = predicate` definitions.
std::map<std::string, PredPtr> parse_spec(std::string_view src);

// Parses a single predicate (the --claim form).
PredPtr parse_predicate(std::string_view src);

// Canonical program rendering; parse_program(pretty_print(s)) reproduces s.
std::string pretty_print(const Stmt& program);

}  // namespace lazytime