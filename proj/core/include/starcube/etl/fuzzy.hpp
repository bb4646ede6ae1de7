#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace starcube::etl {

// Trim, ASCII case-fold and collapse internal whitespace runs to one space.
std::string normalize_for_match(std::string_view s);

// Edit distance over Unicode code points (UTF-8 input).
std::size_t levenshtein(std::string_view a, std::string_view b);

// 1 - levenshtein(norm(a), norm(b)) / max(|norm(a)|, |norm(b)|), lengths in
// code points. Two empty strings are identical (1.0).
double similarity(std::string_view a, std::string_view b);

struct FuzzyMatch {
  std::string value;
  double similarity = 0.0;
};

// Best reference for `value`: highest similarity, ties broken by the
// lexicographically smallest reference. nullopt (a miss) when the best
// similarity is below `threshold`. Throws EmptyReferenceSet when
// `references` is empty and InvalidArgument when threshold is outside [0,1].
std::optional<FuzzyMatch> fuzzy_match(std::string_view value,
                                      std::span<const std::string> references,
                                      double threshold);

}  // namespace starcube::etl
