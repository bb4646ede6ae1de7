#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "starcube/csv.hpp"
#include "starcube/error.hpp"

using namespace starcube;

namespace {

std::vector<std::vector<std::string>> fields(std::string_view text) {
  std::vector<std::vector<std::string>> out;
  for (auto& r : csv::parse_all(text)) out.push_back(r.fields);
  return out;
}

}  // namespace

TEST(Csv, QuotedFields) {
  auto rows = fields("a,\"b,c\",\"say \"\"hi\"\"\"\n1,\"two\nlines\",3\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"a", "b,c", "say \"hi\""}));
  EXPECT_EQ(rows[1][1], "two\nlines");
}

TEST(Csv, LineNumbersFollowPhysicalLines) {
  auto recs = csv::parse_all("h\n\"x\ny\"\nz\r\nw");
  ASSERT_EQ(recs.size(), 4u);
  EXPECT_EQ(recs[0].line, 1);
  EXPECT_EQ(recs[1].line, 2);
  EXPECT_EQ(recs[2].line, 4);
  EXPECT_EQ(recs[3].line, 5);
}

TEST(Csv, BomAndEmptyFields) {
  auto rows = fields("\xEF\xBB\xBF" "a,,b\n,\n");
  EXPECT_EQ(rows[0], (std::vector<std::string>{"a", "", "b"}));
  EXPECT_EQ(rows[1], (std::vector<std::string>{"", ""}));
}

TEST(Csv, OtherDelimiter) {
  auto recs = csv::parse_all("a;b\n", ';');
  EXPECT_EQ(recs[0].fields, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(csv::escape("a;b", ';'), "\"a;b\"");
}

TEST(Csv, EscapeAndJoin) {
  EXPECT_EQ(csv::escape("plain"), "plain");
  EXPECT_EQ(csv::escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv::escape("q\"q"), "\"q\"\"q\"");
  EXPECT_EQ(csv::join({"a", "b c", "d,e"}), "a,b c,\"d,e\"");
}

TEST(Csv, JoinThenParseRoundTrips) {
  std::mt19937 rng(5);
  const std::string alphabet = "ab ,\"\n\r;x\xC3\xA9";
  for (int i = 0; i < 500; ++i) {
    std::vector<std::vector<std::string>> table;
    const int nrows = 1 + static_cast<int>(rng() % 5);
    const int ncols = 1 + static_cast<int>(rng() % 4);
    std::string text;
    for (int r = 0; r < nrows; ++r) {
      std::vector<std::string> row;
      for (int c = 0; c < ncols; ++c) {
        std::string f;
        for (int k = static_cast<int>(rng() % 6); k > 0; --k) f += alphabet[rng() % alphabet.size()];
        row.push_back(f);
      }
      // A lone empty field would read back as an empty record.
      if (ncols == 1 && row[0].empty()) row[0] = "x";
      table.push_back(row);
      text += csv::join(row) + "\n";
    }
    EXPECT_EQ(fields(text), table);
    EXPECT_EQ(starcube::testing::read_csv_text(text), table);
  }
}

TEST(Csv, Utf8Validation) {
  EXPECT_TRUE(csv::is_valid_utf8("plain"));
  EXPECT_TRUE(csv::is_valid_utf8("الجنس"));
  EXPECT_FALSE(csv::is_valid_utf8("\xC3"));
  EXPECT_FALSE(csv::is_valid_utf8("\xFF"));
  EXPECT_FALSE(csv::is_valid_utf8("\xC0\xAF"));
  EXPECT_FALSE(csv::is_valid_utf8("\xED\xA0\x80"));
}

TEST(Csv, FileErrors) {
  starcube::testing::TempDir tmp;
  try {
    csv::read_file(tmp.path() / "missing.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SourceNotFound);
  }
  csv::write_file(tmp.path() / "out.csv", "a,b\n");
  EXPECT_EQ(csv::read_file(tmp.path() / "out.csv"), "a,b\n");
  EXPECT_THROW(csv::write_file(tmp.path() / "out.csv" / "x.csv", "x"), Error);
}
