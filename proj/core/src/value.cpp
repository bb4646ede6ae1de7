#include "starcube/value.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>

namespace starcube {

std::string_view to_string(ValueKind kind) {
  switch (kind) {
    case ValueKind::String: return "string";
    case ValueKind::Integer: return "integer";
    case ValueKind::Decimal: return "decimal";
    case ValueKind::Date: return "date";
    case ValueKind::Boolean: return "boolean";
  }
  return "string";
}

std::optional<ValueKind> parse_value_kind(std::string_view text) {
  auto t = casefold(text);
  if (t == "string") return ValueKind::String;
  if (t == "integer") return ValueKind::Integer;
  if (t == "decimal") return ValueKind::Decimal;
  if (t == "date") return ValueKind::Date;
  if (t == "boolean") return ValueKind::Boolean;
  return std::nullopt;
}

// ---------------------------------------------------------------- Decimal

std::optional<Decimal> Decimal::parse(std::string_view text) {
  if (text.empty()) return std::nullopt;
  bool negative = false;
  std::size_t i = 0;
  if (text[0] == '+' || text[0] == '-') {
    negative = text[0] == '-';
    ++i;
  }
  std::int64_t whole = 0;
  std::size_t int_digits = 0;
  for (; i < text.size() && text[i] != '.'; ++i) {
    char c = text[i];
    if (c < '0' || c > '9') return std::nullopt;
    if (whole > (INT64_MAX / kScale) / 10) return std::nullopt;
    whole = whole * 10 + (c - '0');
    ++int_digits;
  }
  std::int64_t frac = 0;
  int frac_digits = 0;
  if (i < text.size()) {
    ++i;  // '.'
    for (; i < text.size(); ++i) {
      char c = text[i];
      if (c < '0' || c > '9') return std::nullopt;
      if (frac_digits == kDigits) return std::nullopt;
      frac = frac * 10 + (c - '0');
      ++frac_digits;
    }
    if (frac_digits == 0 && int_digits == 0) return std::nullopt;
  } else if (int_digits == 0) {
    return std::nullopt;
  }
  for (int k = frac_digits; k < kDigits; ++k) frac *= 10;
  std::int64_t raw = whole * kScale + frac;
  return from_raw(negative ? -raw : raw);
}

std::string Decimal::to_string() const {
  std::int64_t v = raw_;
  bool negative = v < 0;
  std::uint64_t mag = negative ? static_cast<std::uint64_t>(-(v + 1)) + 1
                               : static_cast<std::uint64_t>(v);
  std::uint64_t whole = mag / kScale;
  std::uint64_t frac = mag % kScale;
  std::string out = negative ? "-" : "";
  out += std::to_string(whole);
  if (frac != 0) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%04llu", static_cast<unsigned long long>(frac));
    std::string f(buf);
    while (!f.empty() && f.back() == '0') f.pop_back();
    out += '.';
    out += f;
  }
  return out;
}

// ---------------------------------------------------------------- Date

namespace {
namespace chr = std::chrono;

chr::year_month_day ymd_of(std::int32_t days) {
  return chr::year_month_day{chr::sys_days{chr::days{days}}};
}
}  // namespace

Date Date::from_ymd(int y, unsigned m, unsigned d) {
  chr::year_month_day ymd{chr::year{y}, chr::month{m}, chr::day{d}};
  return from_days(
      static_cast<std::int32_t>(chr::sys_days{ymd}.time_since_epoch().count()));
}

std::optional<Date> Date::parse(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto num = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    int v = 0;
    auto r = std::from_chars(text.data() + pos, text.data() + pos + len, v);
    if (r.ec != std::errc{} || r.ptr != text.data() + pos + len) return std::nullopt;
    return v;
  };
  auto y = num(0, 4), m = num(5, 2), d = num(8, 2);
  if (!y || !m || !d) return std::nullopt;
  chr::year_month_day ymd{chr::year{*y}, chr::month{static_cast<unsigned>(*m)},
                          chr::day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;
  return from_ymd(*y, static_cast<unsigned>(*m), static_cast<unsigned>(*d));
}

int Date::year() const { return static_cast<int>(ymd_of(days_).year()); }
unsigned Date::month() const { return static_cast<unsigned>(ymd_of(days_).month()); }
unsigned Date::day() const { return static_cast<unsigned>(ymd_of(days_).day()); }

std::int64_t Date::yyyymmdd() const {
  auto ymd = ymd_of(days_);
  return static_cast<int>(ymd.year()) * 10000LL +
         static_cast<unsigned>(ymd.month()) * 100LL +
         static_cast<unsigned>(ymd.day());
}

std::string Date::to_string() const {
  auto ymd = ymd_of(days_);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

// ---------------------------------------------------------------- Value

std::optional<ValueKind> Value::kind() const {
  switch (v_.index()) {
    case 1: return ValueKind::String;
    case 2: return ValueKind::Integer;
    case 3: return ValueKind::Decimal;
    case 4: return ValueKind::Date;
    case 5: return ValueKind::Boolean;
    default: return std::nullopt;
  }
}

std::string Value::to_string() const {
  struct Visitor {
    std::string operator()(std::monostate) const { return {}; }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(Decimal d) const { return d.to_string(); }
    std::string operator()(Date d) const { return d.to_string(); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
  };
  return std::visit(Visitor{}, v_);
}

std::optional<Value> Value::parse(ValueKind kind, std::string_view text) {
  if (text.empty()) return Value{};
  switch (kind) {
    case ValueKind::String:
      return Value{std::string(text)};
    case ValueKind::Integer: {
      std::int64_t v = 0;
      std::string_view t = text;
      if (!t.empty() && t[0] == '+') t.remove_prefix(1);
      auto r = std::from_chars(t.data(), t.data() + t.size(), v);
      if (r.ec != std::errc{} || r.ptr != t.data() + t.size()) return std::nullopt;
      return Value{v};
    }
    case ValueKind::Decimal: {
      auto d = Decimal::parse(text);
      if (!d) return std::nullopt;
      return Value{*d};
    }
    case ValueKind::Date: {
      auto d = Date::parse(text);
      if (!d) return std::nullopt;
      return Value{*d};
    }
    case ValueKind::Boolean: {
      auto t = casefold(text);
      if (t == "true" || t == "1" || t == "yes") return Value{true};
      if (t == "false" || t == "0" || t == "no") return Value{false};
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::weak_ordering compare_values(const Value& a, const Value& b) {
  if (a.is_null() || b.is_null()) {
    if (a.is_null() && b.is_null()) return std::weak_ordering::equivalent;
    return a.is_null() ? std::weak_ordering::greater : std::weak_ordering::less;
  }
  const auto& sa = a.storage();
  const auto& sb = b.storage();
  if (sa.index() != sb.index()) {
    // Mixed kinds only happen for corrupt data; order by kind for totality.
    return sa.index() <=> sb.index();
  }
  if (auto s = a.get_if<std::string>()) {
    const auto& t = *b.get_if<std::string>();
    auto fa = casefold(*s), fb = casefold(t);
    if (auto c = fa <=> fb; c != 0) return c;
    return *s <=> t;
  }
  if (auto i = a.get_if<std::int64_t>()) return *i <=> *b.get_if<std::int64_t>();
  if (auto d = a.get_if<Decimal>()) return *d <=> *b.get_if<Decimal>();
  if (auto d = a.get_if<Date>()) return *d <=> *b.get_if<Date>();
  if (auto x = a.get_if<bool>()) return *x <=> *b.get_if<bool>();
  return std::weak_ordering::equivalent;
}

std::string casefold(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a')
                                  : static_cast<char>(c);
  });
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    unsigned char x = static_cast<unsigned char>(a[i]);
    unsigned char y = static_cast<unsigned char>(b[i]);
    if (x >= 'A' && x <= 'Z') x = static_cast<unsigned char>(x - 'A' + 'a');
    if (y >= 'A' && y <= 'Z') y = static_cast<unsigned char>(y - 'A' + 'a');
    if (x != y) return false;
  }
  return true;
}

}  // namespace starcube
