#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace starcube {

enum class ValueKind { String, Integer, Decimal, Date, Boolean };

std::string_view to_string(ValueKind kind);
std::optional<ValueKind> parse_value_kind(std::string_view text);

// Exact fixed-point number with four fractional digits. Currency measures are
// stored this way so sums are associative and roll-ups compare exactly.
class Decimal {
 public:
  static constexpr int kDigits = 4;
  static constexpr std::int64_t kScale = 10000;

  constexpr Decimal() = default;
  static constexpr Decimal from_raw(std::int64_t raw) {
    Decimal d;
    d.raw_ = raw;
    return d;
  }
  static constexpr Decimal from_integer(std::int64_t v) {
    return from_raw(v * kScale);
  }

  // Accepts [+-]digits[.digits] with at most four fractional digits.
  static std::optional<Decimal> parse(std::string_view text);

  constexpr std::int64_t raw() const { return raw_; }
  double to_double() const { return static_cast<double>(raw_) / kScale; }

  // Shortest exact rendering: trailing fractional zeros are dropped.
  std::string to_string() const;

  Decimal& operator+=(Decimal o) {
    raw_ += o.raw_;
    return *this;
  }
  friend Decimal operator+(Decimal a, Decimal b) { return a += b; }
  friend constexpr auto operator<=>(Decimal, Decimal) = default;

 private:
  std::int64_t raw_ = 0;
};

// Calendar date as days since 1970-01-01 (proleptic Gregorian).
class Date {
 public:
  constexpr Date() = default;
  static Date from_ymd(int year, unsigned month, unsigned day);
  static constexpr Date from_days(std::int32_t days) {
    Date d;
    d.days_ = days;
    return d;
  }
  // Strict YYYY-MM-DD.
  static std::optional<Date> parse(std::string_view text);

  constexpr std::int32_t days() const { return days_; }
  int year() const;
  unsigned month() const;
  unsigned day() const;
  unsigned quarter() const { return (month() - 1) / 3 + 1; }
  std::int64_t yyyymmdd() const;
  std::string to_string() const;

  friend constexpr auto operator<=>(Date, Date) = default;

 private:
  std::int32_t days_ = 0;
};

// A typed scalar; monostate is SQL-style null.
class Value {
 public:
  using Storage =
      std::variant<std::monostate, std::string, std::int64_t, Decimal, Date, bool>;

  Value() = default;
  Value(std::string s) : v_(std::move(s)) {}
  Value(const char* s) : v_(std::string(s)) {}
  Value(std::int64_t i) : v_(i) {}
  Value(int i) : v_(static_cast<std::int64_t>(i)) {}
  Value(Decimal d) : v_(d) {}
  Value(Date d) : v_(d) {}
  Value(bool b) : v_(b) {}

  bool is_null() const { return std::holds_alternative<std::monostate>(v_); }
  std::optional<ValueKind> kind() const;
  const Storage& storage() const { return v_; }

  template <class T>
  const T* get_if() const {
    return std::get_if<T>(&v_);
  }

  // Canonical text; null renders as "".
  std::string to_string() const;

  // Parses `text` as `kind`. Empty text is null. Returns nullopt on a
  // conversion failure.
  static std::optional<Value> parse(ValueKind kind, std::string_view text);

  friend bool operator==(const Value&, const Value&) = default;

 private:
  Storage v_;
};

// Ordering used for members and sorting: numbers numerically, dates
// chronologically, strings case-folded lexicographically (raw bytes break
// ties), null last.
std::weak_ordering compare_values(const Value& a, const Value& b);

std::string casefold(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

}  // namespace starcube
