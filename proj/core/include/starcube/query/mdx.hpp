#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace starcube::query {

enum class TokenKind { Keyword, BracketIdent, Identifier, Number, Punct, Eof };

std::string_view to_string(TokenKind kind);

struct Token {
  TokenKind kind = TokenKind::Eof;
  std::string text;  // keywords upper-cased; bracket identifiers unescaped
  int line = 1;
  int column = 1;
};

// Throws UnterminatedBracket and IllegalCharacter with the offending position.
std::vector<Token> tokenize(std::string_view text);

// Source location. Locations never take part in AST equality, so a printed
// and re-parsed query compares equal to the original.
struct Loc {
  int line = 0;
  int column = 0;
  friend bool operator==(const Loc&, const Loc&) { return true; }
};

struct Path {
  std::vector<std::string> segments;
  Loc loc;
  friend bool operator==(const Path&, const Path&) = default;
};

struct TupleExpr {
  std::vector<Path> members;
  bool parenthesized = false;
  Loc loc;
  friend bool operator==(const TupleExpr&, const TupleExpr&) = default;
};

struct SetExpr;

struct ExplicitSet {
  std::vector<SetExpr> elements;
  friend bool operator==(const ExplicitSet&, const ExplicitSet&) = default;
};
struct MembersSet {
  Path path;
  friend bool operator==(const MembersSet&, const MembersSet&) = default;
};
struct ChildrenSet {
  Path path;
  friend bool operator==(const ChildrenSet&, const ChildrenSet&) = default;
};
struct CrossJoinSet {
  std::vector<SetExpr> operands;  // exactly two
  friend bool operator==(const CrossJoinSet&, const CrossJoinSet&) = default;
};
struct TupleSet {
  TupleExpr tuple;
  friend bool operator==(const TupleSet&, const TupleSet&) = default;
};

struct SetExpr {
  std::variant<ExplicitSet, MembersSet, ChildrenSet, CrossJoinSet, TupleSet> node;
  Loc loc;
  friend bool operator==(const SetExpr&, const SetExpr&) = default;
};

enum class AxisName { Columns, Rows };

struct AxisSpec {
  bool non_empty = false;
  SetExpr set;
  AxisName axis = AxisName::Columns;
  Loc loc;
  friend bool operator==(const AxisSpec&, const AxisSpec&) = default;
};

struct QueryAst {
  std::vector<AxisSpec> axes;  // as written; at most one per axis name
  std::string cube;
  std::optional<TupleExpr> slicer;
  friend bool operator==(const QueryAst&, const QueryAst&) = default;
};

// Recursive descent over:
//
//   query  := SELECT axis ("," axis)? FROM cube (WHERE tuple)?
//   axis   := (NON EMPTY)? set ON (COLUMNS | ROWS | 0 | 1)
//   set    := "{" set ("," set)* "}"
//           | CROSSJOIN "(" set "," set ")"
//           | "(" set ")"                      grouping
//           | tuple
//           | path "." (MEMBERS | CHILDREN)
//   tuple  := "(" path ("," path)* ")" | path
//   path   := bracket_ident ("." bracket_ident)*
//   cube   := bracket_ident | identifier
//
// Braces and parentheses accept nested sets so that forms such as
// {([Date].[2010].Children)} parse. Throws SyntaxError with the position of
// the first offending token and the expected-token set.
QueryAst parse(std::string_view text);
QueryAst parse(const std::vector<Token>& tokens);

// Canonical MDX text; parse(to_mdx(ast)) == ast.
std::string to_mdx(const QueryAst& ast);
std::string to_mdx(const SetExpr& set);
std::string to_mdx(const TupleExpr& tuple);
std::string to_mdx(const Path& path);

std::string quote_ident(std::string_view name);

}  // namespace starcube::query
