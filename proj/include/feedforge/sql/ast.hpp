// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "feedforge/errors.hpp"
#include "feedforge/value.hpp"

namespace feedforge::sql {

enum class CmpOp { eq, ne, lt, le, gt, ge };
enum class AggFn { count_star, count_distinct, sum, min, max, avg };

inline const char* cmp_op_text(CmpOp op) {
  switch (op) {
    case CmpOp::eq: return "=";
    case CmpOp::ne: return "!=";
    case CmpOp::lt: return "<";
    case CmpOp::le: return "<=";
    case CmpOp::gt: return ">";
    case CmpOp::ge: return ">=";
  }
  return "?";
}

inline const char* agg_fn_name(AggFn f) {
  switch (f) {
    case AggFn::count_star:
    case AggFn::count_distinct: return "COUNT";
    case AggFn::sum: return "SUM";
    case AggFn::min: return "MIN";
    case AggFn::max: return "MAX";
    case AggFn::avg: return "AVG";
  }
  return "?";
}

/// A possibly-qualified column reference as written: a dotted identifier
/// chain. Binding decides which prefix (if any) names a table; flattened
/// field paths mean column names themselves may contain dots.
struct ColumnRef {
  std::vector<std::string> parts;
  size_t offset = 0;

  std::string text() const {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
      if (i) out += '.';
      out += parts[i];
    }
    return out;
  }
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind {
    literal,
    column,
    compare,
    logical_and,
    logical_or,
    logical_not,
    in_list,
    is_null,
    aggregate,
  };

  Kind kind = Kind::literal;
  size_t offset = 0;

  Value literal{};                  // literal
  ColumnRef column{};               // column
  CmpOp cmp = CmpOp::eq;            // compare
  ExprPtr lhs, rhs;                 // compare / and / or
  ExprPtr child;                    // not / in_list / is_null operand
  std::vector<Value> in_items;      // in_list
  bool negated = false;             // is_null -> IS NOT NULL
  AggFn agg = AggFn::count_star;    // aggregate
  ColumnRef agg_column{};           // aggregate argument (except COUNT(*))
};

struct SelectItem {
  bool star = false;
  ExprPtr expr;        // null when star
  std::string alias;   // empty when none
};

struct OrderItem {
  ExprPtr expr;
  bool descending = false;
};

struct JoinClause {
  bool left = false;  // LEFT JOIN vs inner JOIN
  std::string table;
  size_t table_offset = 0;
  ColumnRef on_lhs, on_rhs;
};

struct SelectQuery {
  std::vector<SelectItem> items;
  std::string table;
  size_t table_offset = 0;
  std::optional<JoinClause> join;
  ExprPtr where;
  std::vector<ColumnRef> group_by;
  ExprPtr having;
  std::vector<OrderItem> order_by;
  std::optional<int64_t> limit;
};

// --- pretty printer ----------------------------------------------------
// Emits canonical text that reparses to an identical query; round-tripping
// is a tested invariant.

namespace detail {

inline std::string float_text(double d) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
  std::string s(buf, p);
  // Keep the token a float so it reparses with the same type.
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
    s += ".0";
  return s;
}

inline std::string literal_text(const Value& v) {
  switch (v.index()) {
    case 0: return "NULL";
    case 1: return std::to_string(std::get<int64_t>(v));
    case 2: return float_text(std::get<double>(v));
    case 3: return std::get<bool>(v) ? "TRUE" : "FALSE";
    default: {
      std::string out = "'";
      for (char c : std::get<std::string>(v)) {
        out += c;
        if (c == '\'') out += '\'';  // '' escape
      }
      out += '\'';
      return out;
    }
  }
}

}  // namespace detail

inline std::string pretty_expr(const Expr& e) {
  using K = Expr::Kind;
  switch (e.kind) {
    case K::literal: return detail::literal_text(e.literal);
    case K::column: return e.column.text();
    case K::compare:
      return "(" + pretty_expr(*e.lhs) + " " + cmp_op_text(e.cmp) + " " +
             pretty_expr(*e.rhs) + ")";
    case K::logical_and:
      return "(" + pretty_expr(*e.lhs) + " AND " + pretty_expr(*e.rhs) + ")";
    case K::logical_or:
      return "(" + pretty_expr(*e.lhs) + " OR " + pretty_expr(*e.rhs) + ")";
    case K::logical_not: return "(NOT " + pretty_expr(*e.child) + ")";
    case K::in_list: {
      std::string out = "(" + pretty_expr(*e.child) + " IN (";
      for (size_t i = 0; i < e.in_items.size(); ++i) {
        if (i) out += ", ";
        out += detail::literal_text(e.in_items[i]);
      }
      return out + "))";
    }
    case K::is_null:
      return "(" + pretty_expr(*e.child) + (e.negated ? " IS NOT NULL" : " IS NULL") + ")";
    case K::aggregate:
      if (e.agg == AggFn::count_star) return "COUNT(*)";
      if (e.agg == AggFn::count_distinct)
        return "COUNT(DISTINCT " + e.agg_column.text() + ")";
      return std::string(agg_fn_name(e.agg)) + "(" + e.agg_column.text() + ")";
  }
  return "?";
}

inline std::string pretty(const SelectQuery& q) {
  std::string out = "SELECT ";
  for (size_t i = 0; i < q.items.size(); ++i) {
    if (i) out += ", ";
    const auto& item = q.items[i];
    if (item.star) {
      out += "*";
    } else {
      out += pretty_expr(*item.expr);
      if (!item.alias.empty()) out += " AS " + item.alias;
    }
  }
  out += " FROM " + q.table;
  if (q.join) {
    out += q.join->left ? " LEFT JOIN " : " JOIN ";
    out += q.join->table + " ON " + q.join->on_lhs.text() + " = " + q.join->on_rhs.text();
  }
  if (q.where) out += " WHERE " + pretty_expr(*q.where);
  if (!q.group_by.empty()) {
    out += " GROUP BY ";
    for (size_t i = 0; i < q.group_by.size(); ++i) {
      if (i) out += ", ";
      out += q.group_by[i].text();
    }
  }
  if (q.having) out += " HAVING " + pretty_expr(*q.having);
  if (!q.order_by.empty()) {
    out += " ORDER BY ";
    for (size_t i = 0; i < q.order_by.size(); ++i) {
      if (i) out += ", ";
      out += pretty_expr(*q.order_by[i].expr);
      if (q.order_by[i].descending) out += " DESC";
    }
  }
  if (q.limit) out += " LIMIT " + std::to_string(*q.limit);
  return out;
}

// --- structural equality (offsets ignored) ------------------------------

inline bool expr_equal(const ExprPtr& a, const ExprPtr& b);

inline bool column_equal(const ColumnRef& a, const ColumnRef& b) {
  return a.parts == b.parts;
}

inline bool expr_equal_impl(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  using K = Expr::Kind;
  switch (a.kind) {
    case K::literal: return value_repr(a.literal) == value_repr(b.literal);
    case K::column: return column_equal(a.column, b.column);
    case K::compare:
      return a.cmp == b.cmp && expr_equal(a.lhs, b.lhs) && expr_equal(a.rhs, b.rhs);
    case K::logical_and:
    case K::logical_or:
      return expr_equal(a.lhs, b.lhs) && expr_equal(a.rhs, b.rhs);
    case K::logical_not: return expr_equal(a.child, b.child);
    case K::in_list: {
      if (!expr_equal(a.child, b.child)) return false;
      if (a.in_items.size() != b.in_items.size()) return false;
      for (size_t i = 0; i < a.in_items.size(); ++i)
        if (value_repr(a.in_items[i]) != value_repr(b.in_items[i])) return false;
      return true;
    }
    case K::is_null:
      return a.negated == b.negated && expr_equal(a.child, b.child);
    case K::aggregate:
      return a.agg == b.agg &&
             (a.agg == AggFn::count_star || column_equal(a.agg_column, b.agg_column));
  }
  return false;
}

inline bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return !a && !b;
  return expr_equal_impl(*a, *b);
}

inline bool query_equal(const SelectQuery& a, const SelectQuery& b) {
  if (a.items.size() != b.items.size()) return false;
  for (size_t i = 0; i < a.items.size(); ++i) {
    if (a.items[i].star != b.items[i].star) return false;
    if (a.items[i].alias != b.items[i].alias) return false;
    if (!a.items[i].star && !expr_equal(a.items[i].expr, b.items[i].expr)) return false;
  }
  if (a.table != b.table) return false;
  if (a.join.has_value() != b.join.has_value()) return false;
  if (a.join) {
    if (a.join->left != b.join->left || a.join->table != b.join->table) return false;
    if (!column_equal(a.join->on_lhs, b.join->on_lhs)) return false;
    if (!column_equal(a.join->on_rhs, b.join->on_rhs)) return false;
  }
  if (!expr_equal(a.where, b.where)) return false;
  if (a.group_by.size() != b.group_by.size()) return false;
  for (size_t i = 0; i < a.group_by.size(); ++i)
    if (!column_equal(a.group_by[i], b.group_by[i])) return false;
  if (!expr_equal(a.having, b.having)) return false;
  if (a.order_by.size() != b.order_by.size()) return false;
  for (size_t i = 0; i < a.order_by.size(); ++i) {
    if (a.order_by[i].descending != b.order_by[i].descending) return false;
    if (!expr_equal(a.order_by[i].expr, b.order_by[i].expr)) return false;
  }
  return a.limit == b.limit;
}

}  // namespace feedforge::sql
