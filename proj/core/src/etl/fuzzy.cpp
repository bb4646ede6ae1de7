#include "starcube/etl/fuzzy.hpp"

#include <algorithm>
#include <vector>

#include "starcube/error.hpp"
#include "starcube/value.hpp"

namespace starcube::etl {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Lenient decoder: invalid bytes become one code point each, so distances stay
// defined on malformed input.
std::vector<char32_t> code_points(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    int extra = c < 0x80 ? 0 : (c & 0xE0) == 0xC0 ? 1 : (c & 0xF0) == 0xE0 ? 2
                             : (c & 0xF8) == 0xF0 ? 3 : -1;
    if (extra < 0 || (extra > 0 && i + static_cast<std::size_t>(extra) >= s.size())) {
      out.push_back(c);
      ++i;
      continue;
    }
    char32_t cp = extra == 0 ? c : (c & (0x3F >> extra));
    bool ok = true;
    for (int k = 1; k <= extra; ++k) {
      auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) {
      out.push_back(c);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

std::size_t distance(const std::vector<char32_t>& a, const std::vector<char32_t>& b) {
  const auto& shorter = a.size() < b.size() ? a : b;
  const auto& longer = a.size() < b.size() ? b : a;
  std::vector<std::size_t> prev(shorter.size() + 1), cur(shorter.size() + 1);
  for (std::size_t j = 0; j <= shorter.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= longer.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= shorter.size(); ++j) {
      std::size_t subst = prev[j - 1] + (longer[i - 1] == shorter[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
    }
    std::swap(prev, cur);
  }
  return prev[shorter.size()];
}

}  // namespace

std::string normalize_for_match(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += c;
  }
  return casefold(out);
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  return distance(code_points(a), code_points(b));
}

double similarity(std::string_view a, std::string_view b) {
  auto na = code_points(normalize_for_match(a));
  auto nb = code_points(normalize_for_match(b));
  std::size_t longest = std::max(na.size(), nb.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(distance(na, nb)) / static_cast<double>(longest);
}

std::optional<FuzzyMatch> fuzzy_match(std::string_view value,
                                      std::span<const std::string> references,
                                      double threshold) {
  if (references.empty()) {
    throw Error(ErrorCode::EmptyReferenceSet, "fuzzy lookup needs at least one reference");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "fuzzy threshold must be within [0,1]");
  }
  const std::string* best = nullptr;
  double best_sim = -1.0;
  for (const auto& ref : references) {
    double sim = similarity(value, ref);
    if (sim > best_sim || (sim == best_sim && ref < *best)) {
      best = &ref;
      best_sim = sim;
    }
  }
  if (best_sim < threshold) return std::nullopt;
  return FuzzyMatch{*best, best_sim};
}

}  // namespace starcube::etl
