// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "feedforge/errors.hpp"
#include "feedforge/sql/ast.hpp"
#include "feedforge/sql/parser.hpp"
#include "feedforge/table.hpp"
#include "feedforge/value.hpp"

namespace feedforge::sql {

struct ResultColumn {
  std::string name;
  ColumnType type = ColumnType::string;
};

struct QueryResult {
  std::vector<ResultColumn> columns;
  std::vector<std::vector<Value>> rows;
};

/// Lets the executor look tables up without depending on the warehouse.
class TableResolver {
 public:
  virtual ~TableResolver() = default;
  virtual const ColumnarTable* find_table(const std::string& name) const = 0;
};

/// A validated query: the AST plus the output schema it was bound to.
/// Execution re-binds against current table state, so a plan stays usable
/// across additive schema changes and materialization swaps.
struct QueryPlan {
  SelectQuery query;
  std::vector<ResultColumn> output;
  std::vector<std::string> tables;
};

namespace detail {

inline bool has_aggregate(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::aggregate: return true;
    case Expr::Kind::compare:
    case Expr::Kind::logical_and:
    case Expr::Kind::logical_or:
      return has_aggregate(*e.lhs) || has_aggregate(*e.rhs);
    case Expr::Kind::logical_not:
    case Expr::Kind::in_list:
    case Expr::Kind::is_null:
      return has_aggregate(*e.child);
    default:
      return false;
  }
}

struct BoundColumn {
  int side = 0;          // 0 = FROM table, 1 = joined table
  size_t col = 0;
  ColumnType type = ColumnType::string;
  int key_index = -1;    // position among GROUP BY keys (aggregate mode)
};

struct BExpr {
  Expr::Kind kind = Expr::Kind::literal;
  size_t offset = 0;
  Value literal{};
  BoundColumn col{};
  CmpOp cmp = CmpOp::eq;
  int a = -1, b = -1;               // children (compare/and/or) or operand in `a`
  std::vector<Value> in_items;
  bool negated = false;
  AggFn agg = AggFn::count_star;
  BoundColumn agg_col{};
  int agg_slot = -1;
  std::optional<ColumnType> out_type;  // nullopt == untyped NULL literal
};

struct BoundQuery {
  const ColumnarTable* t0 = nullptr;
  const ColumnarTable* t1 = nullptr;
  std::string n0, n1;
  bool left_join = false;
  size_t join_l = 0, join_r = 0;  // join columns on side 0 / side 1

  std::vector<BExpr> arena;
  int where = -1;
  bool agg_mode = false;
  std::vector<BoundColumn> group_cols;
  int having = -1;
  std::vector<std::pair<int, bool>> order;  // (node, descending)
  std::optional<int64_t> limit;
  std::vector<int> select_nodes;            // -1 for star placeholder slots
  std::vector<ResultColumn> output;
  std::vector<BoundColumn> star_cols;       // expansion when select item is star
  std::vector<bool> output_is_star;         // parallels output
  size_t agg_slots = 0;
};

inline bool numeric_family(ColumnType t) { return is_numeric(t); }

inline bool types_comparable(std::optional<ColumnType> a, std::optional<ColumnType> b) {
  if (!a || !b) return true;  // NULL literal compares with anything
  if (numeric_family(*a) && numeric_family(*b)) return true;
  if (*a == *b) return true;
  return false;
}

class Binder {
 public:
  Binder(const TableResolver& resolver, const SelectQuery& q) : q_(q) {
    b_.t0 = resolver.find_table(q.table);
    if (!b_.t0)
      raise(Errc::unknown_table, "no table '" + q.table + "'", q.table_offset);
    b_.n0 = q.table;
    if (q.join) {
      b_.t1 = resolver.find_table(q.join->table);
      if (!b_.t1)
        raise(Errc::unknown_table, "no table '" + q.join->table + "'",
              q.join->table_offset);
      b_.n1 = q.join->table;
      b_.left_join = q.join->left;
      bind_join(*q.join);
    }
    b_.agg_mode = !q.group_by.empty() || q.having != nullptr;
    for (const auto& item : q.items)
      if (!item.star && has_aggregate(*item.expr)) b_.agg_mode = true;
    for (const auto& o : q.order_by)
      if (has_aggregate(*o.expr)) b_.agg_mode = true;

    if (q.where) {
      if (has_aggregate(*q.where))
        raise(Errc::aggregate_misuse, "aggregate not allowed in WHERE",
              q.where->offset);
      b_.where = bind_expr(*q.where, /*agg_ctx=*/false);
      require_boolean(b_.where, "WHERE");
    }

    for (const auto& g : q.group_by) {
      BoundColumn c = resolve(g);
      c.key_index = static_cast<int>(b_.group_cols.size());
      b_.group_cols.push_back(c);
    }

    if (q.having) {
      b_.having = bind_expr(*q.having, /*agg_ctx=*/true);
      require_boolean(b_.having, "HAVING");
    }
    for (const auto& o : q.order_by)
      b_.order.emplace_back(bind_expr(*o.expr, b_.agg_mode), o.descending);
    b_.limit = q.limit;

    bind_select_list();
  }

  BoundQuery take() && { return std::move(b_); }

 private:
  void bind_join(const JoinClause& join) {
    BoundColumn l = resolve(join.on_lhs);
    BoundColumn r = resolve(join.on_rhs);
    if (l.side == r.side)
      raise(Errc::invalid_query,
            "join condition must reference both tables", join.on_lhs.offset);
    if (l.side == 1) std::swap(l, r);
    if (!types_comparable(l.type, r.type))
      raise(Errc::type_mismatch,
            "join keys have incompatible types", join.on_lhs.offset);
    b_.join_l = l.col;
    b_.join_r = r.col;
  }

  /// A dotted chain resolves as table-qualified when its first segment
  /// names a table in scope and the remainder is one of its columns;
  /// otherwise the whole chain is a plain (possibly dotted) column name.
  BoundColumn resolve(const ColumnRef& ref) const {
    auto join_parts = [&](size_t from) {
      std::string out;
      for (size_t i = from; i < ref.parts.size(); ++i) {
        if (i > from) out += '.';
        out += ref.parts[i];
      }
      return out;
    };
    std::vector<BoundColumn> hits;
    if (ref.parts.size() >= 2) {
      std::string rest = join_parts(1);
      if (ref.parts[0] == b_.n0) {
        size_t c = b_.t0->column_index(rest);
        if (c != ColumnarTable::npos)
          hits.push_back({0, c, b_.t0->schema()[c].type, -1});
      }
      if (b_.t1 && ref.parts[0] == b_.n1) {
        size_t c = b_.t1->column_index(rest);
        if (c != ColumnarTable::npos)
          hits.push_back({1, c, b_.t1->schema()[c].type, -1});
      }
    }
    if (hits.empty()) {
      std::string whole = join_parts(0);
      size_t c0 = b_.t0->column_index(whole);
      if (c0 != ColumnarTable::npos)
        hits.push_back({0, c0, b_.t0->schema()[c0].type, -1});
      if (b_.t1) {
        size_t c1 = b_.t1->column_index(whole);
        if (c1 != ColumnarTable::npos)
          hits.push_back({1, c1, b_.t1->schema()[c1].type, -1});
      }
    }
    if (hits.empty())
      raise(Errc::unknown_column, "no column '" + ref.text() + "'", ref.offset);
    if (hits.size() > 1)
      raise(Errc::unknown_column, "ambiguous column '" + ref.text() + "'",
            ref.offset);
    return hits[0];
  }

  int add(BExpr node) {
    b_.arena.push_back(std::move(node));
    return static_cast<int>(b_.arena.size() - 1);
  }

  void require_boolean(int node, const char* where) {
    const auto& t = b_.arena[node].out_type;
    if (t && *t != ColumnType::boolean)
      raise(Errc::type_mismatch,
            std::string(where) + " expects a boolean expression",
            b_.arena[node].offset);
  }

  std::optional<ColumnType> literal_type(const Value& v) {
    if (is_null(v)) return std::nullopt;
    return value_type(v);
  }

  int bind_expr(const Expr& e, bool agg_ctx) {
    BExpr n;
    n.kind = e.kind;
    n.offset = e.offset;
    switch (e.kind) {
      case Expr::Kind::literal:
        n.literal = e.literal;
        n.out_type = literal_type(e.literal);
        break;
      case Expr::Kind::column: {
        n.col = resolve(e.column);
        if (b_.agg_mode && agg_ctx) {
          n.col.key_index = group_key_index(n.col);
          if (n.col.key_index < 0)
            raise(Errc::aggregate_misuse,
                  "column '" + e.column.text() +
                      "' must appear in GROUP BY or inside an aggregate",
                  e.offset);
        }
        n.out_type = n.col.type;
        break;
      }
      case Expr::Kind::compare: {
        n.cmp = e.cmp;
        n.a = bind_expr(*e.lhs, agg_ctx);
        n.b = bind_expr(*e.rhs, agg_ctx);
        if (!types_comparable(b_.arena[n.a].out_type, b_.arena[n.b].out_type))
          raise(Errc::type_mismatch, "operands are not comparable", e.offset);
        n.out_type = ColumnType::boolean;
        break;
      }
      case Expr::Kind::logical_and:
      case Expr::Kind::logical_or: {
        n.a = bind_expr(*e.lhs, agg_ctx);
        n.b = bind_expr(*e.rhs, agg_ctx);
        for (int c : {n.a, n.b}) {
          const auto& t = b_.arena[c].out_type;
          if (t && *t != ColumnType::boolean)
            raise(Errc::type_mismatch, "logical operand must be boolean",
                  b_.arena[c].offset);
        }
        n.out_type = ColumnType::boolean;
        break;
      }
      case Expr::Kind::logical_not: {
        n.a = bind_expr(*e.child, agg_ctx);
        const auto& t = b_.arena[n.a].out_type;
        if (t && *t != ColumnType::boolean)
          raise(Errc::type_mismatch, "NOT operand must be boolean",
                b_.arena[n.a].offset);
        n.out_type = ColumnType::boolean;
        break;
      }
      case Expr::Kind::in_list: {
        n.a = bind_expr(*e.child, agg_ctx);
        n.in_items = e.in_items;
        for (const auto& item : e.in_items)
          if (!types_comparable(b_.arena[n.a].out_type, literal_type(item)))
            raise(Errc::type_mismatch, "IN list item type mismatch", e.offset);
        n.out_type = ColumnType::boolean;
        break;
      }
      case Expr::Kind::is_null: {
        n.a = bind_expr(*e.child, agg_ctx);
        n.negated = e.negated;
        n.out_type = ColumnType::boolean;
        break;
      }
      case Expr::Kind::aggregate: {
        if (!agg_ctx)
          raise(Errc::aggregate_misuse, "aggregate not allowed here", e.offset);
        n.agg = e.agg;
        if (e.agg != AggFn::count_star) {
          n.agg_col = resolve(e.agg_column);
          if ((e.agg == AggFn::sum || e.agg == AggFn::avg) &&
              !numeric_family(n.agg_col.type))
            raise(Errc::type_mismatch,
                  std::string(agg_fn_name(e.agg)) + " needs a numeric column",
                  e.offset);
        }
        switch (e.agg) {
          case AggFn::count_star:
          case AggFn::count_distinct: n.out_type = ColumnType::int64; break;
          case AggFn::sum: n.out_type = n.agg_col.type; break;
          case AggFn::avg: n.out_type = ColumnType::float64; break;
          case AggFn::min:
          case AggFn::max: n.out_type = n.agg_col.type; break;
        }
        n.agg_slot = static_cast<int>(b_.agg_slots++);
        break;
      }
    }
    return add(std::move(n));
  }

  int group_key_index(const BoundColumn& c) const {
    for (size_t i = 0; i < b_.group_cols.size(); ++i)
      if (b_.group_cols[i].side == c.side && b_.group_cols[i].col == c.col)
        return static_cast<int>(i);
    return -1;
  }

  std::string derived_name(const Expr& e, size_t position) const {
    if (e.kind == Expr::Kind::column) {
      // Bare column name: drop a table qualifier but keep dotted field paths.
      BoundColumn c = resolve(e.column);
      const auto& schema = c.side == 0 ? b_.t0->schema() : b_.t1->schema();
      return schema[c.col].name;
    }
    if (e.kind == Expr::Kind::aggregate) {
      std::string n = agg_fn_name(e.agg);
      std::transform(n.begin(), n.end(), n.begin(),
                     [](unsigned char ch) { return std::tolower(ch); });
      return n;
    }
    return "col" + std::to_string(position + 1);
  }

  void bind_select_list() {
    std::unordered_map<std::string, int> used;
    auto unique_name = [&](std::string base) {
      auto [it, fresh] = used.emplace(base, 1);
      if (fresh) return base;
      it->second += 1;
      std::string name = base + "_" + std::to_string(it->second);
      used.emplace(name, 1);
      return name;
    };
    for (size_t i = 0; i < q_.items.size(); ++i) {
      const auto& item = q_.items[i];
      if (item.star) {
        if (b_.agg_mode)
          raise(Errc::aggregate_misuse, "* cannot be used with grouping", 0);
        auto expand = [&](int side, const ColumnarTable* t, const std::string& tname) {
          for (size_t c = 0; c < t->schema().size(); ++c) {
            BoundColumn bc{side, c, t->schema()[c].type, -1};
            b_.star_cols.push_back(bc);
            b_.select_nodes.push_back(-1);
            std::string base = b_.t1 ? tname + "." + t->schema()[c].name
                                     : t->schema()[c].name;
            b_.output.push_back({unique_name(base), bc.type});
            b_.output_is_star.push_back(true);
          }
        };
        expand(0, b_.t0, b_.n0);
        if (b_.t1) expand(1, b_.t1, b_.n1);
        continue;
      }
      int node = bind_expr(*item.expr, b_.agg_mode);
      b_.select_nodes.push_back(node);
      b_.output_is_star.push_back(false);
      std::string base =
          !item.alias.empty() ? item.alias : derived_name(*item.expr, i);
      ColumnType out =
          b_.arena[node].out_type ? *b_.arena[node].out_type : ColumnType::string;
      b_.output.push_back({unique_name(base), out});
    }
  }

  const SelectQuery& q_;
  BoundQuery b_;
};

// --- evaluation ---------------------------------------------------------

struct RowPair {
  size_t l = 0;
  ptrdiff_t r = -1;  // -1: no right row (no join, or left-join pad)
};

struct EvalCtx {
  const BoundQuery* bq = nullptr;
  // row mode
  const RowPair* pair = nullptr;
  // group mode
  const std::vector<Value>* group_keys = nullptr;
  const std::vector<Value>* agg_values = nullptr;
};

inline Value column_value(const BoundQuery& bq, const BoundColumn& c,
                          const RowPair& p) {
  if (c.side == 0) return bq.t0->at(p.l, c.col);
  if (p.r < 0) return Value{};
  return bq.t1->at(static_cast<size_t>(p.r), c.col);
}

/// Kleene three-valued boolean: Value null == unknown.
inline Value eval_expr(int node, const EvalCtx& ctx) {
  const BExpr& n = ctx.bq->arena[node];
  switch (n.kind) {
    case Expr::Kind::literal:
      return n.literal;
    case Expr::Kind::column:
      if (ctx.group_keys) return (*ctx.group_keys)[n.col.key_index];
      return column_value(*ctx.bq, n.col, *ctx.pair);
    case Expr::Kind::compare: {
      Value a = eval_expr(n.a, ctx);
      Value b = eval_expr(n.b, ctx);
      if (is_null(a) || is_null(b)) return Value{};
      int c = compare_values(a, b);
      switch (n.cmp) {
        case CmpOp::eq: return Value(c == 0);
        case CmpOp::ne: return Value(c != 0);
        case CmpOp::lt: return Value(c < 0);
        case CmpOp::le: return Value(c <= 0);
        case CmpOp::gt: return Value(c > 0);
        case CmpOp::ge: return Value(c >= 0);
      }
      return Value{};
    }
    case Expr::Kind::logical_and: {
      Value a = eval_expr(n.a, ctx);
      Value b = eval_expr(n.b, ctx);
      bool af = !is_null(a) && !std::get<bool>(a);
      bool bf = !is_null(b) && !std::get<bool>(b);
      if (af || bf) return Value(false);
      if (is_null(a) || is_null(b)) return Value{};
      return Value(true);
    }
    case Expr::Kind::logical_or: {
      Value a = eval_expr(n.a, ctx);
      Value b = eval_expr(n.b, ctx);
      bool at = !is_null(a) && std::get<bool>(a);
      bool bt = !is_null(b) && std::get<bool>(b);
      if (at || bt) return Value(true);
      if (is_null(a) || is_null(b)) return Value{};
      return Value(false);
    }
    case Expr::Kind::logical_not: {
      Value a = eval_expr(n.a, ctx);
      if (is_null(a)) return Value{};
      return Value(!std::get<bool>(a));
    }
    case Expr::Kind::in_list: {
      Value a = eval_expr(n.a, ctx);
      if (is_null(a)) return Value{};
      bool saw_null = false;
      for (const auto& item : n.in_items) {
        if (is_null(item)) {
          saw_null = true;
          continue;
        }
        if (values_equal(a, item)) return Value(true);
      }
      return saw_null ? Value{} : Value(false);
    }
    case Expr::Kind::is_null: {
      Value a = eval_expr(n.a, ctx);
      return Value(n.negated ? !is_null(a) : is_null(a));
    }
    case Expr::Kind::aggregate:
      return (*ctx.agg_values)[n.agg_slot];
  }
  return Value{};
}

inline bool eval_true(int node, const EvalCtx& ctx) {
  if (node < 0) return true;
  Value v = eval_expr(node, ctx);
  return !is_null(v) && std::get<bool>(v);
}

inline Value aggregate_over(const BoundQuery& bq, const BExpr& n,
                            const std::vector<RowPair>& members) {
  switch (n.agg) {
    case AggFn::count_star:
      return Value(static_cast<int64_t>(members.size()));
    case AggFn::count_distinct: {
      std::unordered_set<Value, ValueHash, ValueEq> seen;
      for (const auto& p : members) {
        Value v = column_value(bq, n.agg_col, p);
        if (!is_null(v)) seen.insert(std::move(v));
      }
      return Value(static_cast<int64_t>(seen.size()));
    }
    case AggFn::sum: {
      if (n.agg_col.type == ColumnType::float64) {
        double acc = 0;
        bool any = false;
        for (const auto& p : members) {
          Value v = column_value(bq, n.agg_col, p);
          if (is_null(v)) continue;
          any = true;
          acc += std::get<double>(v);
        }
        return any ? Value(acc) : Value{};
      }
      __int128 acc = 0;
      bool any = false;
      for (const auto& p : members) {
        Value v = column_value(bq, n.agg_col, p);
        if (is_null(v)) continue;
        any = true;
        acc += std::get<int64_t>(v);
      }
      if (!any) return Value{};
      if (acc > static_cast<__int128>(INT64_MAX) ||
          acc < static_cast<__int128>(INT64_MIN))
        raise(Errc::arithmetic_overflow, "int64 SUM overflow");
      return Value(static_cast<int64_t>(acc));
    }
    case AggFn::avg: {
      double acc = 0;
      int64_t count = 0;
      for (const auto& p : members) {
        Value v = column_value(bq, n.agg_col, p);
        if (is_null(v)) continue;
        acc += std::holds_alternative<int64_t>(v)
                   ? static_cast<double>(std::get<int64_t>(v))
                   : std::get<double>(v);
        ++count;
      }
      if (count == 0) return Value{};
      return Value(acc / static_cast<double>(count));
    }
    case AggFn::min:
    case AggFn::max: {
      Value best{};
      for (const auto& p : members) {
        Value v = column_value(bq, n.agg_col, p);
        if (is_null(v)) continue;
        if (is_null(best)) {
          best = std::move(v);
          continue;
        }
        int c = compare_values(v, best);
        if ((n.agg == AggFn::min && c < 0) || (n.agg == AggFn::max && c > 0))
          best = std::move(v);
      }
      return best;
    }
  }
  return Value{};
}

/// Null-last ordering on one sort key; returns <0, 0, >0.
inline int order_compare(const Value& a, const Value& b, bool descending) {
  bool an = is_null(a), bn = is_null(b);
  if (an || bn) {
    if (an && bn) return 0;
    return an ? 1 : -1;  // nulls last regardless of direction
  }
  int c = compare_values(a, b);
  return descending ? -c : c;
}

inline QueryResult run_bound(const BoundQuery& bq) {
  // scan + join
  std::vector<RowPair> pairs;
  if (!bq.t1) {
    pairs.reserve(bq.t0->row_count());
    for (size_t i = 0; i < bq.t0->row_count(); ++i) pairs.push_back({i, -1});
  } else {
    std::unordered_map<Value, std::vector<size_t>, ValueHash, ValueEq> right;
    for (size_t r = 0; r < bq.t1->row_count(); ++r) {
      Value k = bq.t1->at(r, bq.join_r);
      if (is_null(k)) continue;  // null keys never match
      right[std::move(k)].push_back(r);
    }
    for (size_t l = 0; l < bq.t0->row_count(); ++l) {
      Value k = bq.t0->at(l, bq.join_l);
      bool matched = false;
      if (!is_null(k)) {
        auto it = right.find(k);
        if (it != right.end()) {
          matched = true;
          for (size_t r : it->second)
            pairs.push_back({l, static_cast<ptrdiff_t>(r)});
        }
      }
      if (!matched && bq.left_join) pairs.push_back({l, -1});
    }
  }

  // filter
  if (bq.where >= 0) {
    std::vector<RowPair> kept;
    kept.reserve(pairs.size());
    EvalCtx ctx;
    ctx.bq = &bq;
    for (const auto& p : pairs) {
      ctx.pair = &p;
      if (eval_true(bq.where, ctx)) kept.push_back(p);
    }
    pairs = std::move(kept);
  }

  QueryResult result;
  result.columns = bq.output;

  // Units are either surviving row pairs or groups.
  struct GroupData {
    std::vector<Value> keys;
    std::vector<Value> aggs;
  };
  std::vector<GroupData> groups;
  std::vector<RowPair> row_units;

  if (bq.agg_mode) {
    std::vector<std::vector<RowPair>> members;
    if (bq.group_cols.empty()) {
      members.emplace_back(std::move(pairs));  // one global group, even empty
      groups.emplace_back();
    } else {
      std::unordered_map<std::string, size_t> by_key;
      for (const auto& p : pairs) {
        std::vector<Value> keys;
        keys.reserve(bq.group_cols.size());
        std::string tag;
        for (const auto& gc : bq.group_cols) {
          Value v = column_value(bq, gc, p);
          std::string repr = value_repr(v);
          tag += std::to_string(repr.size());
          tag += ':';
          tag += repr;
          keys.push_back(std::move(v));
        }
        auto [it, fresh] = by_key.emplace(tag, groups.size());
        if (fresh) {
          groups.emplace_back();
          groups.back().keys = std::move(keys);
          members.emplace_back();
        }
        members[it->second].push_back(p);
      }
    }
    for (size_t g = 0; g < groups.size(); ++g) {
      groups[g].aggs.resize(bq.agg_slots);
      for (const auto& n : bq.arena)
        if (n.kind == Expr::Kind::aggregate)
          groups[g].aggs[n.agg_slot] = aggregate_over(bq, n, members[g]);
    }
    if (bq.having >= 0) {
      std::vector<GroupData> kept;
      for (auto& g : groups) {
        EvalCtx ctx;
        ctx.bq = &bq;
        ctx.group_keys = &g.keys;
        ctx.agg_values = &g.aggs;
        if (eval_true(bq.having, ctx)) kept.push_back(std::move(g));
      }
      groups = std::move(kept);
    }
  } else {
    row_units = std::move(pairs);
  }

  size_t unit_count = bq.agg_mode ? groups.size() : row_units.size();
  std::vector<size_t> order_idx(unit_count);
  std::iota(order_idx.begin(), order_idx.end(), 0);

  auto unit_ctx = [&](size_t u, EvalCtx& ctx) {
    ctx.bq = &bq;
    if (bq.agg_mode) {
      ctx.group_keys = &groups[u].keys;
      ctx.agg_values = &groups[u].aggs;
    } else {
      ctx.pair = &row_units[u];
    }
  };

  if (!bq.order.empty()) {
    std::vector<std::vector<Value>> keys(unit_count);
    for (size_t u = 0; u < unit_count; ++u) {
      EvalCtx ctx;
      unit_ctx(u, ctx);
      keys[u].reserve(bq.order.size());
      for (const auto& [node, desc] : bq.order)
        keys[u].push_back(eval_expr(node, ctx));
    }
    std::stable_sort(order_idx.begin(), order_idx.end(),
                     [&](size_t x, size_t y) {
                       for (size_t k = 0; k < bq.order.size(); ++k) {
                         int c = order_compare(keys[x][k], keys[y][k],
                                               bq.order[k].second);
                         if (c != 0) return c < 0;
                       }
                       return false;
                     });
  }

  size_t limit = bq.limit ? std::min<size_t>(*bq.limit, unit_count) : unit_count;
  result.rows.reserve(limit);
  for (size_t i = 0; i < limit; ++i) {
    size_t u = order_idx[i];
    EvalCtx ctx;
    unit_ctx(u, ctx);
    std::vector<Value> row;
    row.reserve(bq.output.size());
    size_t star_pos = 0;
    for (size_t s = 0; s < bq.select_nodes.size(); ++s) {
      if (bq.select_nodes[s] < 0) {
        row.push_back(column_value(bq, bq.star_cols[star_pos++], row_units[u]));
      } else {
        row.push_back(eval_expr(bq.select_nodes[s], ctx));
      }
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace detail

/// Validate + type-check a parsed query against current schemas.
inline QueryPlan bind_query(const TableResolver& resolver, SelectQuery q) {
  detail::Binder binder(resolver, q);
  detail::BoundQuery bound = std::move(binder).take();
  QueryPlan plan;
  plan.output = bound.output;
  plan.tables.push_back(q.table);
  if (q.join) plan.tables.push_back(q.join->table);
  plan.query = std::move(q);
  return plan;
}

inline QueryPlan parse_and_bind(const TableResolver& resolver, std::string_view sql) {
  return bind_query(resolver, parse_query_text(sql));
}

/// Inner/left hash equi-join, 3VL filters, grouping with COUNT/SUM/MIN/
/// MAX/AVG/COUNT(DISTINCT), HAVING, stable nulls-last ORDER BY, LIMIT.
inline QueryResult execute_plan(const TableResolver& resolver, const QueryPlan& plan) {
  detail::Binder binder(resolver, plan.query);
  detail::BoundQuery bound = std::move(binder).take();
  return detail::run_bound(bound);
}

/// Streaming scan with optional projection and predicate; rows come back
/// in insertion order without materializing the full result.
class ScanCursor {
 public:
  ScanCursor(const ColumnarTable* table, std::vector<size_t> projection,
             detail::BoundQuery bound, int predicate)
      : table_(table),
        projection_(std::move(projection)),
        bound_(std::move(bound)),
        predicate_(predicate) {}

  std::optional<std::vector<Value>> next() {
    while (row_ < table_->row_count()) {
      detail::RowPair pair{row_, -1};
      ++row_;
      detail::EvalCtx ctx;
      ctx.bq = &bound_;
      ctx.pair = &pair;
      if (!detail::eval_true(predicate_, ctx)) continue;
      std::vector<Value> out;
      out.reserve(projection_.size());
      for (size_t c : projection_) out.push_back(table_->at(pair.l, c));
      return out;
    }
    return std::nullopt;
  }

 private:
  const ColumnarTable* table_;
  std::vector<size_t> projection_;
  detail::BoundQuery bound_;
  int predicate_ = -1;
  size_t row_ = 0;
};

}  // namespace feedforge::sql
