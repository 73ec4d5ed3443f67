// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "feedforge/errors.hpp"
#include "feedforge/sql/ast.hpp"

namespace feedforge::sql {

// Recursive-descent parser for the query grammar:
//
//   query  := SELECT select_list FROM ident [join] [WHERE expr]
//             [GROUP BY ident_list] [HAVING expr] [ORDER BY order_list]
//             [LIMIT int]
//   join   := (JOIN | LEFT JOIN) ident ON qual_ident = qual_ident
//   item   := * | expr [AS ident]
//   order  := expr [ASC | DESC]
//
// Keywords are case-insensitive; identifiers are dotted chains (column
// names produced by flattening contain dots). Errors carry byte offsets.

namespace lex {

enum class Tok {
  ident,
  int_lit,
  float_lit,
  string_lit,
  lparen,
  rparen,
  comma,
  dot,
  star,
  cmp,   // = != < <= > >=
  end,
};

struct Token {
  Tok type = Tok::end;
  std::string text;      // identifier (as written) or operator text
  std::string upper;     // uppercased identifier for keyword checks
  int64_t int_value = 0;
  double float_value = 0;
  size_t offset = 0;
};

inline std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  size_t i = 0;
  auto is_ident_start = [](char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
  };
  auto is_ident_char = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  };
  // Scans digits starting at i (already known to be a digit) and returns a
  // numeric token; `token_start` covers an optional leading minus.
  auto scan_number = [&](size_t token_start, bool negative) {
    size_t j = i;
    bool is_float = false;
    while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
    if (j < src.size() && src[j] == '.' && j + 1 < src.size() &&
        std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
      is_float = true;
      ++j;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
    }
    if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
      size_t k = j + 1;
      if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
      if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
        is_float = true;
        j = k;
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      }
    }
    std::string num(src.substr(i, j - i));
    Token t;
    t.offset = token_start;
    if (is_float) {
      t.type = Tok::float_lit;
      t.float_value = std::strtod(num.c_str(), nullptr);
      if (negative) t.float_value = -t.float_value;
    } else {
      t.type = Tok::int_lit;
      auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), t.int_value);
      if (ec != std::errc())
        raise(Errc::syntax_error, "integer literal out of range", token_start);
      if (negative) t.int_value = -t.int_value;
    }
    i = j;
    return t;
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.offset = i;
    if (is_ident_start(c)) {
      size_t j = i;
      while (j < src.size() && is_ident_char(src[j])) ++j;
      t.type = Tok::ident;
      t.text = std::string(src.substr(i, j - i));
      t.upper = t.text;
      std::transform(t.upper.begin(), t.upper.end(), t.upper.begin(),
                     [](unsigned char ch) { return std::toupper(ch); });
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      t = scan_number(i, false);
    } else if (c == '\'') {
      std::string s;
      size_t j = i + 1;
      for (;;) {
        if (j >= src.size())
          raise(Errc::syntax_error, "unterminated string literal", i);
        if (src[j] == '\'') {
          if (j + 1 < src.size() && src[j + 1] == '\'') {
            s += '\'';
            j += 2;
            continue;
          }
          ++j;
          break;
        }
        s += src[j++];
      }
      t.type = Tok::string_lit;
      t.text = std::move(s);
      i = j;
    } else {
      switch (c) {
        case '(': t.type = Tok::lparen; ++i; break;
        case ')': t.type = Tok::rparen; ++i; break;
        case ',': t.type = Tok::comma; ++i; break;
        case '.': t.type = Tok::dot; ++i; break;
        case '*': t.type = Tok::star; ++i; break;
        case '=': t.type = Tok::cmp; t.text = "="; ++i; break;
        case '!':
          if (i + 1 < src.size() && src[i + 1] == '=') {
            t.type = Tok::cmp;
            t.text = "!=";
            i += 2;
          } else {
            raise(Errc::syntax_error, "expected '=' after '!'", i);
          }
          break;
        case '<':
          t.type = Tok::cmp;
          if (i + 1 < src.size() && src[i + 1] == '=') { t.text = "<="; i += 2; }
          else { t.text = "<"; ++i; }
          break;
        case '>':
          t.type = Tok::cmp;
          if (i + 1 < src.size() && src[i + 1] == '=') { t.text = ">="; i += 2; }
          else { t.text = ">"; ++i; }
          break;
        case '-': {
          // Unary minus on a numeric literal; the grammar has no arithmetic.
          if (i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1]))) {
            size_t save = i;
            ++i;
            t = scan_number(save, true);
            break;
          }
          raise(Errc::syntax_error, "unexpected '-'", i);
        }
        default:
          raise(Errc::syntax_error,
                std::string("unexpected character '") + c + "'", i);
      }
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.type = Tok::end;
  end.offset = src.size();
  out.push_back(end);
  return out;
}

}  // namespace lex

namespace kw {
inline constexpr std::string_view SELECT = "SELECT", FROM = "FROM", WHERE = "WHERE",
    GROUP = "GROUP", BY = "BY", HAVING = "HAVING", ORDER = "ORDER", LIMIT = "LIMIT",
    JOIN = "JOIN", LEFT = "LEFT", ON = "ON", AS = "AS", IN = "IN", IS = "IS",
    NOT = "NOT", NULL_ = "NULL", TRUE_ = "TRUE", FALSE_ = "FALSE", AND = "AND",
    OR = "OR", DISTINCT = "DISTINCT", ASC = "ASC", DESC = "DESC", COUNT = "COUNT",
    SUM = "SUM", MIN = "MIN", MAX = "MAX", AVG = "AVG";

inline bool is_reserved(std::string_view upper) {
  static constexpr std::string_view all[] = {
      SELECT, FROM, WHERE, GROUP, BY, HAVING, ORDER, LIMIT, JOIN, LEFT, ON, AS,
      IN, IS, NOT, NULL_, TRUE_, FALSE_, AND, OR, DISTINCT, ASC, DESC,
      COUNT, SUM, MIN, MAX, AVG};
  for (auto k : all)
    if (k == upper) return true;
  return false;
}
}  // namespace kw

class Parser {
 public:
  explicit Parser(std::string_view src) : tokens_(lex::tokenize(src)) {}

  SelectQuery parse_query() {
    SelectQuery q = parse_select();
    expect_end();
    return q;
  }

  /// Standalone predicate (scan_export filters).
  ExprPtr parse_expression() {
    ExprPtr e = parse_or();
    expect_end();
    return e;
  }

 private:
  using Tok = lex::Tok;

  const lex::Token& peek(size_t ahead = 0) const {
    size_t i = pos_ + ahead;
    return i < tokens_.size() ? tokens_[i] : tokens_.back();
  }
  const lex::Token& advance() { return tokens_[pos_++]; }

  bool at_keyword(std::string_view k, size_t ahead = 0) const {
    const auto& t = peek(ahead);
    return t.type == Tok::ident && t.upper == k;
  }

  bool eat_keyword(std::string_view k) {
    if (at_keyword(k)) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect_keyword(std::string_view k) {
    if (!eat_keyword(k)) fail({std::string(k)});
  }

  [[noreturn]] void fail(std::vector<std::string> expected) const {
    const auto& t = peek();
    std::string msg = "expected ";
    for (size_t i = 0; i < expected.size(); ++i) {
      if (i) msg += i + 1 == expected.size() ? " or " : ", ";
      msg += expected[i];
    }
    msg += " at byte " + std::to_string(t.offset);
    raise(Errc::syntax_error, msg, t.offset);
  }

  std::string expect_name() {
    const auto& t = peek();
    if (t.type != Tok::ident || kw::is_reserved(t.upper)) fail({"identifier"});
    ++pos_;
    return t.text;
  }

  void expect_end() {
    if (peek().type != Tok::end) fail({"end of query"});
  }

  ColumnRef parse_column_ref() {
    ColumnRef ref;
    ref.offset = peek().offset;
    ref.parts.push_back(expect_name());
    while (peek().type == Tok::dot) {
      ++pos_;
      ref.parts.push_back(expect_name());
    }
    return ref;
  }

  Value parse_literal_value() {
    const auto& t = peek();
    switch (t.type) {
      case Tok::int_lit: ++pos_; return Value(t.int_value);
      case Tok::float_lit: ++pos_; return Value(t.float_value);
      case Tok::string_lit: ++pos_; return Value(t.text);
      case Tok::ident:
        if (t.upper == kw::TRUE_) { ++pos_; return Value(true); }
        if (t.upper == kw::FALSE_) { ++pos_; return Value(false); }
        if (t.upper == kw::NULL_) { ++pos_; return Value{}; }
        fail({"literal"});
      default:
        fail({"literal"});
    }
  }

  bool at_literal() const {
    const auto& t = peek();
    return t.type == Tok::int_lit || t.type == Tok::float_lit ||
           t.type == Tok::string_lit ||
           (t.type == Tok::ident &&
            (t.upper == kw::TRUE_ || t.upper == kw::FALSE_ || t.upper == kw::NULL_));
  }

  static bool is_agg_keyword(const lex::Token& t) {
    return t.type == Tok::ident &&
           (t.upper == kw::COUNT || t.upper == kw::SUM || t.upper == kw::MIN ||
            t.upper == kw::MAX || t.upper == kw::AVG);
  }

  ExprPtr parse_aggregate() {
    const auto& t = advance();
    auto node = std::make_shared<Expr>();
    node->kind = Expr::Kind::aggregate;
    node->offset = t.offset;
    if (peek().type != Tok::lparen) fail({"("});
    ++pos_;
    if (t.upper == kw::COUNT) {
      if (peek().type == Tok::star) {
        ++pos_;
        node->agg = AggFn::count_star;
      } else if (at_keyword(kw::DISTINCT)) {
        ++pos_;
        node->agg = AggFn::count_distinct;
        node->agg_column = parse_column_ref();
      } else {
        fail({"*", "DISTINCT"});
      }
    } else {
      if (t.upper == kw::SUM) node->agg = AggFn::sum;
      else if (t.upper == kw::MIN) node->agg = AggFn::min;
      else if (t.upper == kw::MAX) node->agg = AggFn::max;
      else node->agg = AggFn::avg;
      node->agg_column = parse_column_ref();
    }
    if (peek().type != Tok::rparen) fail({")"});
    ++pos_;
    return node;
  }

  ExprPtr parse_primary() {
    const auto& t = peek();
    if (t.type == Tok::lparen) {
      ++pos_;
      ExprPtr inner = parse_or();
      if (peek().type != Tok::rparen) fail({")"});
      ++pos_;
      return inner;
    }
    if (is_agg_keyword(t)) return parse_aggregate();
    if (at_literal()) {
      auto node = std::make_shared<Expr>();
      node->kind = Expr::Kind::literal;
      node->offset = t.offset;
      node->literal = parse_literal_value();
      return node;
    }
    if (t.type == Tok::ident && !kw::is_reserved(t.upper)) {
      auto node = std::make_shared<Expr>();
      node->kind = Expr::Kind::column;
      node->offset = t.offset;
      node->column = parse_column_ref();
      return node;
    }
    fail({"literal", "column", "aggregate", "("});
  }

  ExprPtr parse_comparison() {
    ExprPtr left = parse_primary();
    const auto& t = peek();
    if (t.type == Tok::cmp) {
      auto node = std::make_shared<Expr>();
      node->kind = Expr::Kind::compare;
      node->offset = t.offset;
      if (t.text == "=") node->cmp = CmpOp::eq;
      else if (t.text == "!=") node->cmp = CmpOp::ne;
      else if (t.text == "<") node->cmp = CmpOp::lt;
      else if (t.text == "<=") node->cmp = CmpOp::le;
      else if (t.text == ">") node->cmp = CmpOp::gt;
      else node->cmp = CmpOp::ge;
      ++pos_;
      node->lhs = left;
      node->rhs = parse_primary();
      return node;
    }
    if (at_keyword(kw::IN)) {
      auto node = std::make_shared<Expr>();
      node->kind = Expr::Kind::in_list;
      node->offset = t.offset;
      node->child = left;
      ++pos_;
      if (peek().type != Tok::lparen) fail({"("});
      ++pos_;
      node->in_items.push_back(parse_literal_value());
      while (peek().type == Tok::comma) {
        ++pos_;
        node->in_items.push_back(parse_literal_value());
      }
      if (peek().type != Tok::rparen) fail({")"});
      ++pos_;
      return node;
    }
    if (at_keyword(kw::IS)) {
      auto node = std::make_shared<Expr>();
      node->kind = Expr::Kind::is_null;
      node->offset = t.offset;
      node->child = left;
      ++pos_;
      node->negated = eat_keyword(kw::NOT);
      expect_keyword(kw::NULL_);
      return node;
    }
    return left;
  }

  ExprPtr parse_not() {
    if (at_keyword(kw::NOT)) {
      size_t off = peek().offset;
      ++pos_;
      auto node = std::make_shared<Expr>();
      node->kind = Expr::Kind::logical_not;
      node->offset = off;
      node->child = parse_not();
      return node;
    }
    return parse_comparison();
  }

  ExprPtr parse_and() {
    ExprPtr left = parse_not();
    while (at_keyword(kw::AND)) {
      size_t off = peek().offset;
      ++pos_;
      auto node = std::make_shared<Expr>();
      node->kind = Expr::Kind::logical_and;
      node->offset = off;
      node->lhs = left;
      node->rhs = parse_not();
      left = node;
    }
    return left;
  }

  ExprPtr parse_or() {
    ExprPtr left = parse_and();
    while (at_keyword(kw::OR)) {
      size_t off = peek().offset;
      ++pos_;
      auto node = std::make_shared<Expr>();
      node->kind = Expr::Kind::logical_or;
      node->offset = off;
      node->lhs = left;
      node->rhs = parse_and();
      left = node;
    }
    return left;
  }

  SelectQuery parse_select() {
    SelectQuery q;
    expect_keyword(kw::SELECT);
    for (;;) {
      SelectItem item;
      if (peek().type == Tok::star) {
        ++pos_;
        item.star = true;
      } else {
        item.expr = parse_or();
        if (eat_keyword(kw::AS)) item.alias = expect_name();
      }
      q.items.push_back(std::move(item));
      if (peek().type != Tok::comma) break;
      ++pos_;
    }
    expect_keyword(kw::FROM);
    q.table_offset = peek().offset;
    q.table = expect_name();
    if (at_keyword(kw::JOIN) || (at_keyword(kw::LEFT) && at_keyword(kw::JOIN, 1))) {
      JoinClause join;
      if (eat_keyword(kw::LEFT)) join.left = true;
      expect_keyword(kw::JOIN);
      join.table_offset = peek().offset;
      join.table = expect_name();
      expect_keyword(kw::ON);
      join.on_lhs = parse_column_ref();
      if (peek().type != Tok::cmp || peek().text != "=") fail({"="});
      ++pos_;
      join.on_rhs = parse_column_ref();
      q.join = std::move(join);
    }
    if (eat_keyword(kw::WHERE)) q.where = parse_or();
    if (at_keyword(kw::GROUP)) {
      ++pos_;
      expect_keyword(kw::BY);
      q.group_by.push_back(parse_column_ref());
      while (peek().type == Tok::comma) {
        ++pos_;
        q.group_by.push_back(parse_column_ref());
      }
    }
    if (eat_keyword(kw::HAVING)) q.having = parse_or();
    if (at_keyword(kw::ORDER)) {
      ++pos_;
      expect_keyword(kw::BY);
      for (;;) {
        OrderItem item;
        item.expr = parse_or();
        if (eat_keyword(kw::DESC)) item.descending = true;
        else eat_keyword(kw::ASC);
        q.order_by.push_back(std::move(item));
        if (peek().type != Tok::comma) break;
        ++pos_;
      }
    }
    if (eat_keyword(kw::LIMIT)) {
      const auto& t = peek();
      if (t.type != Tok::int_lit || t.int_value < 0) fail({"non-negative integer"});
      q.limit = t.int_value;
      ++pos_;
    }
    return q;
  }

  std::vector<lex::Token> tokens_;
  size_t pos_ = 0;
};

inline SelectQuery parse_query_text(std::string_view sql) {
  return Parser(sql).parse_query();
}

inline ExprPtr parse_predicate_text(std::string_view text) {
  return Parser(text).parse_expression();
}

}  // namespace feedforge::sql
