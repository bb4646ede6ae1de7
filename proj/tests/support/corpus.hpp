#pragma once

#include <string>
#include <vector>

namespace starcube::testing {

// Grammar-valid queries; they need not bind.
const std::vector<std::string>& valid_query_corpus();

struct InvalidQuery {
  std::string text;
  int line;
  int column;
};

// Each fails with SyntaxError at (line, column).
const std::vector<InvalidQuery>& invalid_query_corpus();

}  // namespace starcube::testing
