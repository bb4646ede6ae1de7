#include "starcube/query/mdx.hpp"

#include <array>
#include <cctype>

#include "starcube/error.hpp"
#include "starcube/value.hpp"

namespace starcube::query {

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::Keyword: return "keyword";
    case TokenKind::BracketIdent: return "bracket_ident";
    case TokenKind::Identifier: return "identifier";
    case TokenKind::Number: return "number";
    case TokenKind::Punct: return "punct";
    case TokenKind::Eof: return "eof";
  }
  return "?";
}

namespace {

constexpr std::array<std::string_view, 11> kKeywords = {
    "SELECT", "ON", "COLUMNS", "ROWS", "FROM", "WHERE",
    "NON", "EMPTY", "CROSSJOIN", "MEMBERS", "CHILDREN"};

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Walks the input tracking line and column; columns count code points.
class Cursor {
 public:
  explicit Cursor(std::string_view s) : s_(s) {}
  bool done() const { return i_ >= s_.size(); }
  char peek(std::size_t ahead = 0) const {
    return i_ + ahead < s_.size() ? s_[i_ + ahead] : '\0';
  }
  char take() {
    char c = s_[i_++];
    if (c == '\n') {
      ++line_;
      column_ = 1;
    } else if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) {
      ++column_;
    }
    return c;
  }
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  std::string_view s_;
  std::size_t i_ = 0;
  int line_ = 1;
  int column_ = 1;
};

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  Cursor cur(text);
  while (true) {
    while (!cur.done() && std::isspace(static_cast<unsigned char>(cur.peek()))) cur.take();
    Token tok;
    tok.line = cur.line();
    tok.column = cur.column();
    if (cur.done()) {
      tok.kind = TokenKind::Eof;
      out.push_back(std::move(tok));
      return out;
    }
    const char c = cur.peek();
    if (c == '[') {
      cur.take();
      while (true) {
        if (cur.done()) {
          throw Error(ErrorCode::UnterminatedBracket, "unterminated bracket identifier",
                      SourcePosition{tok.line, tok.column});
        }
        char d = cur.take();
        if (d == ']') {
          if (cur.peek() == ']') {
            cur.take();
            tok.text += ']';
            continue;
          }
          break;
        }
        tok.text += d;
      }
      tok.kind = TokenKind::BracketIdent;
    } else if (is_ident_start(c)) {
      while (is_ident_char(cur.peek())) tok.text += cur.take();
      std::string upper = tok.text;
      for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      tok.kind = TokenKind::Identifier;
      for (auto kw : kKeywords) {
        if (upper == kw) {
          tok.kind = TokenKind::Keyword;
          tok.text = upper;
        }
      }
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      while (std::isdigit(static_cast<unsigned char>(cur.peek()))) tok.text += cur.take();
      tok.kind = TokenKind::Number;
    } else if (c == '(' || c == ')' || c == '{' || c == '}' || c == ',' || c == '.') {
      tok.text = std::string(1, cur.take());
      tok.kind = TokenKind::Punct;
    } else {
      std::string shown;
      if (static_cast<unsigned char>(c) < 0x20 || static_cast<unsigned char>(c) >= 0x7F) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "0x%02X", static_cast<unsigned char>(c));
        shown = buf;
      } else {
        shown = std::string("'") + c + "'";
      }
      throw Error(ErrorCode::IllegalCharacter, "illegal character " + shown,
                  SourcePosition{tok.line, tok.column});
    }
    out.push_back(std::move(tok));
  }
}

// ------------------------------------------------------------------ parser

namespace {

std::string describe(const Token& t) {
  switch (t.kind) {
    case TokenKind::Eof: return "end of input";
    case TokenKind::Keyword: return t.text;
    case TokenKind::BracketIdent: return quote_ident(t.text);
    case TokenKind::Identifier: return "identifier " + t.text;
    case TokenKind::Number: return "number " + t.text;
    case TokenKind::Punct: return "'" + t.text + "'";
  }
  return t.text;
}

const std::vector<std::string> kSetStart = {"'{'", "'('", "CROSSJOIN", "bracket identifier"};

class Parser {
 public:
  explicit Parser(const std::vector<Token>& tokens) : toks_(tokens) {
    if (toks_.empty() || toks_.back().kind != TokenKind::Eof) {
      throw Error(ErrorCode::InvalidArgument, "token stream must end with eof");
    }
  }

  QueryAst query() {
    QueryAst q;
    expect_keyword("SELECT");
    q.axes.push_back(axis());
    if (is_punct(",")) {
      advance();
      const Token& at = peek();
      q.axes.push_back(axis());
      if (q.axes[1].axis == q.axes[0].axis) {
        fail_at(at, "axis " + std::string(q.axes[1].axis == AxisName::Columns ? "COLUMNS"
                                                                            : "ROWS") +
                        " appears twice");
      }
    }
    expect_keyword("FROM");
    const Token& cube = peek();
    if (cube.kind != TokenKind::BracketIdent && cube.kind != TokenKind::Identifier) {
      expected({"cube name"});
    }
    q.cube = advance().text;
    if (is_keyword("WHERE")) {
      advance();
      q.slicer = tuple();
    }
    if (peek().kind != TokenKind::Eof) {
      expected(q.slicer ? std::vector<std::string>{"end of input"}
                        : std::vector<std::string>{"WHERE", "end of input"});
    }
    return q;
  }

 private:
  AxisSpec axis() {
    AxisSpec a;
    a.loc = loc(peek());
    if (is_keyword("NON")) {
      advance();
      expect_keyword("EMPTY");
      a.non_empty = true;
      a.set = set();
    } else {
      auto start = kSetStart;
      start.insert(start.begin(), "NON");
      if (!starts_set()) expected(start);
      a.set = set();
    }
    if (!is_keyword("ON")) expected({"ON"});
    advance();
    const Token& t = peek();
    if (t.kind == TokenKind::Keyword && t.text == "COLUMNS") {
      a.axis = AxisName::Columns;
    } else if (t.kind == TokenKind::Keyword && t.text == "ROWS") {
      a.axis = AxisName::Rows;
    } else if (t.kind == TokenKind::Number && (t.text == "0" || t.text == "1")) {
      a.axis = t.text == "0" ? AxisName::Columns : AxisName::Rows;
    } else {
      expected({"COLUMNS", "ROWS"});
    }
    advance();
    return a;
  }

  bool starts_set() const {
    const Token& t = peek();
    return is_punct("{") || is_punct("(") || t.kind == TokenKind::BracketIdent ||
           (t.kind == TokenKind::Keyword && t.text == "CROSSJOIN");
  }

  SetExpr set() {
    SetExpr s;
    s.loc = loc(peek());
    if (is_punct("{")) {
      advance();
      ExplicitSet e;
      if (!starts_set()) expected(kSetStart);
      e.elements.push_back(set());
      while (is_punct(",")) {
        advance();
        if (!starts_set()) expected(kSetStart);
        e.elements.push_back(set());
      }
      expect_punct("}", {"','", "'}'"});
      s.node = std::move(e);
      return s;
    }
    if (is_keyword("CROSSJOIN")) {
      advance();
      expect_punct("(", {"'('"});
      CrossJoinSet c;
      if (!starts_set()) expected(kSetStart);
      c.operands.push_back(set());
      expect_punct(",", {"','"});
      if (!starts_set()) expected(kSetStart);
      c.operands.push_back(set());
      expect_punct(")", {"')'"});
      s.node = std::move(c);
      return s;
    }
    if (is_punct("(")) {
      const Token& open = advance();
      std::vector<SetExpr> items;
      std::vector<Token> starts;
      if (!starts_set()) expected(kSetStart);
      starts.push_back(peek());
      items.push_back(set());
      while (is_punct(",")) {
        advance();
        if (!starts_set()) expected(kSetStart);
        starts.push_back(peek());
        items.push_back(set());
      }
      expect_punct(")", {"','", "')'"});
      bool all_paths = true;
      for (const auto& item : items) {
        auto* ts = std::get_if<TupleSet>(&item.node);
        if (!ts || ts->tuple.parenthesized) all_paths = false;
      }
      if (all_paths) {
        TupleSet ts;
        ts.tuple.parenthesized = true;
        ts.tuple.loc = loc(open);
        for (auto& item : items) {
          ts.tuple.members.push_back(std::get<TupleSet>(item.node).tuple.members.front());
        }
        s.node = std::move(ts);
        return s;
      }
      if (items.size() == 1) return std::move(items.front());
      for (std::size_t k = 0; k < items.size(); ++k) {
        auto* ts = std::get_if<TupleSet>(&items[k].node);
        if (!ts || ts->tuple.parenthesized) fail_at(starts[k], "expected member path in tuple");
      }
    }
    if (peek().kind == TokenKind::BracketIdent) {
      Path p = path();
      if (is_punct(".")) {
        advance();
        if (is_keyword("MEMBERS")) {
          advance();
          s.node = MembersSet{std::move(p)};
          return s;
        }
        if (is_keyword("CHILDREN")) {
          advance();
          s.node = ChildrenSet{std::move(p)};
          return s;
        }
        expected({"bracket identifier", "MEMBERS", "CHILDREN"});
      }
      TupleSet ts;
      ts.tuple.loc = p.loc;
      ts.tuple.members.push_back(std::move(p));
      s.node = std::move(ts);
      return s;
    }
    expected(kSetStart);
  }

  TupleExpr tuple() {
    TupleExpr t;
    t.loc = loc(peek());
    if (is_punct("(")) {
      advance();
      t.parenthesized = true;
      if (peek().kind != TokenKind::BracketIdent) expected({"bracket identifier"});
      t.members.push_back(path());
      while (is_punct(",")) {
        advance();
        if (peek().kind != TokenKind::BracketIdent) expected({"bracket identifier"});
        t.members.push_back(path());
      }
      expect_punct(")", {"','", "')'"});
      return t;
    }
    if (peek().kind != TokenKind::BracketIdent) expected({"'('", "bracket identifier"});
    t.members.push_back(path());
    return t;
  }

  // Consumes "[a].[b]..." and stops before a "." that is not followed by a
  // bracket identifier.
  Path path() {
    Path p;
    p.loc = loc(peek());
    p.segments.push_back(advance().text);
    while (is_punct(".") && peek(1).kind == TokenKind::BracketIdent) {
      advance();
      p.segments.push_back(advance().text);
    }
    return p;
  }

  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  const Token& advance() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool is_keyword(std::string_view kw) const {
    return peek().kind == TokenKind::Keyword && peek().text == kw;
  }
  bool is_punct(std::string_view p) const {
    return peek().kind == TokenKind::Punct && peek().text == p;
  }
  void expect_keyword(std::string_view kw) {
    if (!is_keyword(kw)) expected({std::string(kw)});
    advance();
  }
  void expect_punct(std::string_view p, const std::vector<std::string>& exp) {
    if (!is_punct(p)) expected(exp);
    advance();
  }
  static Loc loc(const Token& t) { return Loc{t.line, t.column}; }

  [[noreturn]] void expected(const std::vector<std::string>& exp) const {
    std::string msg = "expected ";
    for (std::size_t i = 0; i < exp.size(); ++i) {
      if (i) msg += i + 1 == exp.size() ? " or " : ", ";
      msg += exp[i];
    }
    fail_at(peek(), msg + ", found " + describe(peek()));
  }
  [[noreturn]] static void fail_at(const Token& t, const std::string& msg) {
    throw Error(ErrorCode::SyntaxError, msg, SourcePosition{t.line, t.column});
  }

  const std::vector<Token>& toks_;
  std::size_t pos_ = 0;
};

}  // namespace

QueryAst parse(const std::vector<Token>& tokens) { return Parser(tokens).query(); }

QueryAst parse(std::string_view text) { return parse(tokenize(text)); }

// ------------------------------------------------------------------ printer

std::string quote_ident(std::string_view name) {
  std::string out = "[";
  for (char c : name) {
    out += c;
    if (c == ']') out += ']';
  }
  return out + "]";
}

std::string to_mdx(const Path& path) {
  std::string out;
  for (std::size_t i = 0; i < path.segments.size(); ++i) {
    if (i) out += '.';
    out += quote_ident(path.segments[i]);
  }
  return out;
}

std::string to_mdx(const TupleExpr& tuple) {
  if (!tuple.parenthesized && tuple.members.size() == 1) return to_mdx(tuple.members.front());
  std::string out = "(";
  for (std::size_t i = 0; i < tuple.members.size(); ++i) {
    if (i) out += ", ";
    out += to_mdx(tuple.members[i]);
  }
  return out + ")";
}

std::string to_mdx(const SetExpr& set) {
  struct Printer {
    std::string operator()(const ExplicitSet& e) const {
      std::string out = "{";
      for (std::size_t i = 0; i < e.elements.size(); ++i) {
        if (i) out += ", ";
        out += to_mdx(e.elements[i]);
      }
      return out + "}";
    }
    std::string operator()(const MembersSet& m) const { return to_mdx(m.path) + ".Members"; }
    std::string operator()(const ChildrenSet& c) const { return to_mdx(c.path) + ".Children"; }
    std::string operator()(const CrossJoinSet& c) const {
      return "CROSSJOIN(" + to_mdx(c.operands.at(0)) + ", " + to_mdx(c.operands.at(1)) + ")";
    }
    std::string operator()(const TupleSet& t) const { return to_mdx(t.tuple); }
  };
  return std::visit(Printer{}, set.node);
}

std::string to_mdx(const QueryAst& ast) {
  std::string out = "SELECT ";
  for (std::size_t i = 0; i < ast.axes.size(); ++i) {
    const auto& a = ast.axes[i];
    if (i) out += ", ";
    if (a.non_empty) out += "NON EMPTY ";
    out += to_mdx(a.set);
    out += a.axis == AxisName::Columns ? " ON COLUMNS" : " ON ROWS";
  }
  out += " FROM " + quote_ident(ast.cube);
  if (ast.slicer) out += " WHERE " + to_mdx(*ast.slicer);
  return out;
}

}  // namespace starcube::query
