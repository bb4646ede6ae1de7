#include <gtest/gtest.h>

#include <random>

#include "starcube/error.hpp"
#include "starcube/hash.hpp"
#include "starcube/value.hpp"

using namespace starcube;

TEST(Decimal, ParseAndRender) {
  EXPECT_EQ(Decimal::parse("12.5")->raw(), 125000);
  EXPECT_EQ(Decimal::parse("-0.0001")->raw(), -1);
  EXPECT_EQ(Decimal::parse("+7")->raw(), 70000);
  EXPECT_EQ(Decimal::parse(".5")->raw(), 5000);
  EXPECT_EQ(Decimal::parse("6396804.80")->to_string(), "6396804.8");
  EXPECT_EQ(Decimal::from_integer(3).to_string(), "3");
  EXPECT_EQ(Decimal::from_raw(-5).to_string(), "-0.0005");
}

TEST(Decimal, RejectsMalformed) {
  for (const char* bad : {"", ".", "-", "1.23456", "1e3", "1,5", "abc", "1.2.3", " 1"}) {
    EXPECT_FALSE(Decimal::parse(bad)) << bad;
  }
  EXPECT_FALSE(Decimal::parse("99999999999999999999"));
}

TEST(Decimal, RoundTripProperty) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::int64_t> dist(-1'000'000'000'000LL, 1'000'000'000'000LL);
  for (int i = 0; i < 5000; ++i) {
    const auto d = Decimal::from_raw(dist(rng));
    const auto back = Decimal::parse(d.to_string());
    ASSERT_TRUE(back) << d.to_string();
    EXPECT_EQ(*back, d);
  }
}

TEST(Decimal, SumIsAssociative) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::int64_t> dist(-10'000'000, 10'000'000);
  std::vector<Decimal> xs;
  for (int i = 0; i < 1000; ++i) xs.push_back(Decimal::from_raw(dist(rng)));
  Decimal forward, backward;
  for (auto x : xs) forward += x;
  for (auto it = xs.rbegin(); it != xs.rend(); ++it) backward += *it;
  EXPECT_EQ(forward, backward);
}

TEST(Date, ParseAndParts) {
  auto d = Date::parse("2012-02-29");
  ASSERT_TRUE(d);
  EXPECT_EQ(d->year(), 2012);
  EXPECT_EQ(d->month(), 2u);
  EXPECT_EQ(d->day(), 29u);
  EXPECT_EQ(d->quarter(), 1u);
  EXPECT_EQ(d->yyyymmdd(), 20120229);
  EXPECT_EQ(d->to_string(), "2012-02-29");
  EXPECT_EQ(Date::parse("1970-01-01")->days(), 0);
  EXPECT_EQ(Date::from_ymd(2010, 12, 31).quarter(), 4u);
}

TEST(Date, RejectsInvalid) {
  for (const char* bad : {"2011-02-29", "2010-13-01", "2010-1-01", "20100101", "2010-01-32",
                          "abcd-ef-gh", ""}) {
    EXPECT_FALSE(Date::parse(bad)) << bad;
  }
}

TEST(Date, DayArithmeticRoundTrips) {
  for (std::int32_t days = -800; days < 30000; days += 7) {
    auto d = Date::from_days(days);
    EXPECT_EQ(Date::parse(d.to_string()), d);
    EXPECT_EQ(Date::from_ymd(d.year(), d.month(), d.day()), d);
  }
}

TEST(Value, ParseByKind) {
  EXPECT_EQ(Value::parse(ValueKind::Integer, "42"), Value(42));
  EXPECT_EQ(Value::parse(ValueKind::Integer, "+42"), Value(42));
  EXPECT_FALSE(Value::parse(ValueKind::Integer, "4.2"));
  EXPECT_FALSE(Value::parse(ValueKind::Integer, "x"));
  EXPECT_EQ(Value::parse(ValueKind::String, "x y"), Value("x y"));
  EXPECT_EQ(Value::parse(ValueKind::Boolean, "Yes"), Value(true));
  EXPECT_EQ(Value::parse(ValueKind::Boolean, "0"), Value(false));
  EXPECT_FALSE(Value::parse(ValueKind::Boolean, "maybe"));
  EXPECT_EQ(Value::parse(ValueKind::Date, "2010-01-02"), Value(*Date::parse("2010-01-02")));
  EXPECT_TRUE(Value::parse(ValueKind::Decimal, "")->is_null());
  EXPECT_EQ(Value().to_string(), "");
  EXPECT_EQ(Value(Decimal::from_raw(15000)).to_string(), "1.5");
}

TEST(Value, KindNames) {
  for (auto k : {ValueKind::String, ValueKind::Integer, ValueKind::Decimal, ValueKind::Date,
                 ValueKind::Boolean}) {
    EXPECT_EQ(parse_value_kind(to_string(k)), k);
  }
  EXPECT_EQ(parse_value_kind("INTEGER"), ValueKind::Integer);
  EXPECT_FALSE(parse_value_kind("float"));
}

TEST(Value, Ordering) {
  EXPECT_TRUE(compare_values(Value(2), Value(10)) < 0);
  EXPECT_TRUE(compare_values(Value("apple"), Value("Banana")) < 0);
  EXPECT_TRUE(compare_values(Value("B"), Value("b")) < 0);
  EXPECT_TRUE(compare_values(Value("a"), Value()) < 0);
  EXPECT_TRUE(compare_values(Value(), Value()) == 0);
  EXPECT_TRUE(compare_values(Value(*Date::parse("2009-12-31")), Value(*Date::parse("2010-01-01"))) < 0);
  EXPECT_TRUE(compare_values(Value(Decimal::from_raw(-1)), Value(Decimal::from_raw(0))) < 0);
}

TEST(Value, OrderingIsTotalAndTransitive) {
  std::vector<Value> vs = {Value("b"), Value("B"), Value("a"), Value(), Value("ab"),
                           Value(""),  Value("Z"), Value("z"), Value("A")};
  for (const auto& a : vs) {
    for (const auto& b : vs) {
      const auto ab = compare_values(a, b);
      const auto ba = compare_values(b, a);
      EXPECT_EQ(ab < 0, ba > 0);
      for (const auto& c : vs) {
        if (ab < 0 && compare_values(b, c) < 0) {
          EXPECT_TRUE(compare_values(a, c) < 0);
        }
      }
    }
  }
}

TEST(Text, Casefold) {
  EXPECT_EQ(casefold("HiO Law"), "hio law");
  EXPECT_TRUE(iequals("Female", "fEMALE"));
  EXPECT_FALSE(iequals("Female", "Femal"));
  EXPECT_EQ(casefold("الجنس"), "الجنس");
}

TEST(Hash, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Error, CarriesCodeAndPosition) {
  Error e(ErrorCode::SyntaxError, "bad", SourcePosition{2, 5});
  EXPECT_EQ(e.code(), ErrorCode::SyntaxError);
  EXPECT_EQ(e.position()->column, 5);
  EXPECT_STREQ(e.what(), "bad");
  EXPECT_EQ(to_string(ErrorCode::HierarchyReusedAcrossAxes), "HierarchyReusedAcrossAxes");
  EXPECT_EQ(to_string(ErrorCode::StaleCube), "StaleCube");
}
