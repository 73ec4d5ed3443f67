// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "feedforge/rng.hpp"
#include "feedforge/warehouse.hpp"
#include "support/oracle.hpp"
#include "support/query_gen.hpp"
#include "support/temp_dir.hpp"

using namespace feedforge;
using fftest::OracleTable;
using fftest::TempDir;

namespace {

void fill_small_fixture(Warehouse& wh) {
  wh.create_table("t", {{"a", ColumnType::int64, true},
                        {"s", ColumnType::string, true},
                        {"f", ColumnType::float64, true}});
  wh.append_rows("t", {},
                 {{Value(int64_t(1)), sv("x"), Value(0.5)},
                  {Value(int64_t(2)), sv("y"), Value{}},
                  {Value(int64_t(2)), Value{}, Value(1.5)}});
}

}  // namespace

TEST_CASE("any predicate over an empty table yields no rows", "[sql][executor]") {
  Warehouse wh;
  wh.create_table("t", {{"a", ColumnType::int64, true}});
  CHECK(wh.execute_sql("SELECT a FROM t WHERE a = 1 OR a IS NULL").rows.empty());
  CHECK(wh.execute_sql("SELECT * FROM t").rows.empty());
}

TEST_CASE("hand-countable grouping", "[sql][executor]") {
  Warehouse wh;
  wh.create_table("t", {{"a", ColumnType::int64, true}});
  wh.append_rows("t", {}, {{Value(int64_t(1))}, {Value(int64_t(2))}, {Value(int64_t(2))}});
  auto result = wh.execute_sql("SELECT a, COUNT(*) FROM t GROUP BY a ORDER BY a");
  REQUIRE(result.rows.size() == 2);
  CHECK(std::get<int64_t>(result.rows[0][0]) == 1);
  CHECK(std::get<int64_t>(result.rows[0][1]) == 1);
  CHECK(std::get<int64_t>(result.rows[1][0]) == 2);
  CHECK(std::get<int64_t>(result.rows[1][1]) == 2);
}

TEST_CASE("null semantics: comparisons exclude, IS NULL selects", "[sql][executor]") {
  Warehouse wh;
  fill_small_fixture(wh);
  CHECK(wh.execute_sql("SELECT a FROM t WHERE s = 'x'").rows.size() == 1);
  CHECK(wh.execute_sql("SELECT a FROM t WHERE s != 'x'").rows.size() == 1);
  // NOT of an unknown comparison stays unknown: the null-s row never appears
  CHECK(wh.execute_sql("SELECT a FROM t WHERE NOT s = 'x'").rows.size() == 1);
  CHECK(wh.execute_sql("SELECT a FROM t WHERE s IS NULL").rows.size() == 1);
  CHECK(wh.execute_sql("SELECT a FROM t WHERE s IS NOT NULL").rows.size() == 2);
  // IN with only non-matching items and a NULL operand excludes
  CHECK(wh.execute_sql("SELECT a FROM t WHERE s IN ('y', 'z')").rows.size() == 1);
}

TEST_CASE("aggregates skip nulls; COUNT(*) counts rows", "[sql][executor]") {
  Warehouse wh;
  fill_small_fixture(wh);
  auto r = wh.execute_sql(
      "SELECT COUNT(*), COUNT(DISTINCT a), SUM(a), MIN(f), MAX(f), AVG(a) FROM t");
  REQUIRE(r.rows.size() == 1);
  CHECK(std::get<int64_t>(r.rows[0][0]) == 3);
  CHECK(std::get<int64_t>(r.rows[0][1]) == 2);
  CHECK(std::get<int64_t>(r.rows[0][2]) == 5);
  CHECK(std::get<double>(r.rows[0][3]) == 0.5);
  CHECK(std::get<double>(r.rows[0][4]) == 1.5);
  CHECK(std::get<double>(r.rows[0][5]) == 5.0 / 3.0);
}

TEST_CASE("global aggregation over empty input yields one row", "[sql][executor]") {
  Warehouse wh;
  wh.create_table("e", {{"a", ColumnType::int64, true}});
  auto r = wh.execute_sql("SELECT COUNT(*), SUM(a), MIN(a), AVG(a) FROM e");
  REQUIRE(r.rows.size() == 1);
  CHECK(std::get<int64_t>(r.rows[0][0]) == 0);
  CHECK(is_null(r.rows[0][1]));
  CHECK(is_null(r.rows[0][2]));
  CHECK(is_null(r.rows[0][3]));
}

TEST_CASE("joins: inner drops unmatched, LEFT pads with nulls", "[sql][executor]") {
  Warehouse wh;
  wh.create_table("a", {{"k", ColumnType::int64, true},
                        {"v", ColumnType::string, true}});
  wh.create_table("b", {{"k", ColumnType::int64, true},
                        {"w", ColumnType::string, true}});
  wh.append_rows("a", {}, {{Value(int64_t(1)), sv("a1")},
                           {Value(int64_t(2)), sv("a2")},
                           {Value{}, sv("a-null")}});
  wh.append_rows("b", {}, {{Value(int64_t(1)), sv("b1")},
                           {Value(int64_t(1)), sv("b1x")},
                           {Value{}, sv("b-null")}});
  auto inner = wh.execute_sql("SELECT a.v, b.w FROM a JOIN b ON a.k = b.k ORDER BY b.w");
  REQUIRE(inner.rows.size() == 2);  // null keys never match
  CHECK(std::get<std::string>(inner.rows[0][1]) == "b1");
  CHECK(std::get<std::string>(inner.rows[1][1]) == "b1x");
  auto left = wh.execute_sql("SELECT a.v, b.w FROM a LEFT JOIN b ON a.k = b.k");
  REQUIRE(left.rows.size() == 4);  // 2 matches + 2 padded
  size_t padded = 0;
  for (const auto& row : left.rows)
    if (is_null(row[1])) ++padded;
  CHECK(padded == 2);
}

TEST_CASE("ORDER BY is stable with nulls last; LIMIT cuts after", "[sql][executor]") {
  Warehouse wh;
  wh.create_table("t", {{"a", ColumnType::int64, true},
                        {"tag", ColumnType::string, true}});
  wh.append_rows("t", {}, {{Value(int64_t(2)), sv("first")},
                           {Value{}, sv("null1")},
                           {Value(int64_t(1)), sv("x")},
                           {Value(int64_t(2)), sv("second")},
                           {Value{}, sv("null2")}});
  auto r = wh.execute_sql("SELECT tag FROM t ORDER BY a");
  REQUIRE(r.rows.size() == 5);
  CHECK(std::get<std::string>(r.rows[0][0]) == "x");
  CHECK(std::get<std::string>(r.rows[1][0]) == "first");   // stable among equals
  CHECK(std::get<std::string>(r.rows[2][0]) == "second");
  CHECK(std::get<std::string>(r.rows[3][0]) == "null1");   // nulls last
  CHECK(std::get<std::string>(r.rows[4][0]) == "null2");
  auto desc = wh.execute_sql("SELECT tag FROM t ORDER BY a DESC LIMIT 3");
  REQUIRE(desc.rows.size() == 3);
  CHECK(std::get<std::string>(desc.rows[0][0]) == "first");
  CHECK(std::get<std::string>(desc.rows[1][0]) == "second");
  CHECK(std::get<std::string>(desc.rows[2][0]) == "x");  // nulls last even DESC
}

TEST_CASE("int64 SUM overflow raises ArithmeticOverflow", "[sql][executor]") {
  Warehouse wh;
  wh.create_table("t", {{"a", ColumnType::int64, true}});
  wh.append_rows("t", {}, {{Value(INT64_MAX)}, {Value(int64_t(1))}});
  try {
    wh.execute_sql("SELECT SUM(a) FROM t");
    FAIL("expected ArithmeticOverflow");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::arithmetic_overflow);
  }
}

TEST_CASE("incomparable operand types are rejected at bind time", "[sql][executor]") {
  Warehouse wh;
  fill_small_fixture(wh);
  try {
    wh.parse("SELECT a FROM t WHERE s = 1");
    FAIL("expected TypeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::type_mismatch);
  }
  // numeric cross-type comparison is fine
  CHECK_NOTHROW(wh.parse("SELECT a FROM t WHERE f > 1"));
}

TEST_CASE("scan_export streams the same rows execute returns", "[sql][executor]") {
  Warehouse wh;
  fill_small_fixture(wh);
  CHECK_FALSE(wh.scan_export("t", {}).next() == std::nullopt);
  // empty stream from empty table
  wh.create_table("empty", {{"a", ColumnType::int64, true}});
  CHECK(wh.scan_export("empty", {}).next() == std::nullopt);
  // predicate selects one of three
  auto stream = wh.scan_export("t", {"a"}, "a = 1");
  size_t n = 0;
  while (stream.next()) ++n;
  CHECK(n == 1);
  // random comparison against execute()
  Rng rng(404);
  for (int i = 0; i < 40; ++i) {
    auto generated = fftest::generate_case(rng);
    Warehouse random_wh;
    fftest::load_oracle_tables(random_wh, generated.tables);
    const auto& t0 = generated.tables[0];
    std::string pred = t0.columns[0] + " IS NOT NULL";
    auto via_execute = random_wh.execute_sql("SELECT * FROM t0 WHERE " + pred);
    auto via_stream = random_wh.scan_export("t0", {}, pred);
    std::vector<std::vector<Value>> stream_rows;
    while (auto row = via_stream.next()) stream_rows.push_back(*row);
    REQUIRE(stream_rows.size() == via_execute.rows.size());
    for (size_t r = 0; r < stream_rows.size(); ++r)
      for (size_t c = 0; c < stream_rows[r].size(); ++c)
        CHECK(value_repr(stream_rows[r][c]) == value_repr(via_execute.rows[r][c]));
  }
}

TEST_CASE("aggregation jobs materialize atomically and idempotently",
          "[sql][executor]") {
  TempDir dir;
  Warehouse wh(dir.path());
  wh.create_table("scans", {{"observable_id", ColumnType::string, true},
                            {"event_time", ColumnType::timestamp, true}});
  wh.append_rows("scans", {},
                 {{sv("aa"), Value(int64_t(5))},
                  {sv("aa"), Value(int64_t(3))},
                  {sv("bb"), Value(int64_t(9))}});
  auto report = wh.run_aggregation(
      "observables",
      "SELECT observable_id, MIN(event_time) AS first_seen FROM scans GROUP BY "
      "observable_id",
      "observables");
  CHECK(report.output_rows == 2);
  CHECK(report.input_rows.at("scans") == 3);
  std::string checksum1 = wh.table_checksum("observables");

  SECTION("re-running on unchanged input gives an identical checksum") {
    wh.run_aggregation("observables",
                       "SELECT observable_id, MIN(event_time) AS first_seen "
                       "FROM scans GROUP BY observable_id",
                       "observables");
    CHECK(wh.table_checksum("observables") == checksum1);
  }

  SECTION("a failing run leaves the previous materialization intact") {
    CHECK_THROWS_AS(
        wh.run_aggregation("observables", "SELECT nope FROM scans", "observables"),
        Error);
    CHECK(wh.table_checksum("observables") == checksum1);
    CHECK(wh.row_count("observables") == 2);
  }

  SECTION("another job cannot steal the output table") {
    try {
      wh.run_aggregation("impostor", "SELECT observable_id FROM scans",
                         "observables");
      FAIL("expected DuplicateTable");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::duplicate_table);
    }
  }
}

TEST_CASE("join materialization matches the brute-force oracle", "[sql][executor]") {
  Rng rng(777);
  for (int round = 0; round < 30; ++round) {
    auto generated = fftest::generate_case(rng);
    if (generated.tables.size() < 2) continue;
    Warehouse wh;
    fftest::load_oracle_tables(wh, generated.tables);
    // build a concrete equi-join over the first comparable column pair
    const auto& t0 = generated.tables[0];
    const auto& t1 = generated.tables[1];
    std::string join_sql;
    for (size_t c0 = 0; c0 < t0.columns.size() && join_sql.empty(); ++c0)
      for (size_t c1 = 0; c1 < t1.columns.size() && join_sql.empty(); ++c1) {
        bool ok = (is_numeric(t0.types[c0]) && is_numeric(t1.types[c1])) ||
                  t0.types[c0] == t1.types[c1];
        if (ok)
          join_sql = "SELECT * FROM t0 JOIN t1 ON t0." + t0.columns[c0] +
                     " = t1." + t1.columns[c1];
      }
    REQUIRE_FALSE(join_sql.empty());
    auto q = sql::parse_query_text(join_sql);
    auto got = fftest::row_multiset(wh.execute_sql(join_sql).rows);
    auto want = fftest::row_multiset(fftest::oracle_execute(q, generated.tables));
    REQUIRE(got == want);
  }
}

TEST_CASE("randomized differential test against the row-at-a-time oracle",
          "[sql][executor][oracle]") {
  Rng rng(31337);
  size_t ran = 0;
  for (int i = 0; i < 300; ++i) {
    auto generated = fftest::generate_case(rng);
    Warehouse wh;
    fftest::load_oracle_tables(wh, generated.tables);
    INFO("sql: " << generated.sql);
    auto q = sql::parse_query_text(generated.sql);
    auto got = fftest::row_multiset(wh.execute_sql(generated.sql).rows);
    auto want = fftest::row_multiset(fftest::oracle_execute(q, generated.tables));
    REQUIRE(got == want);
    ++ran;
  }
  CHECK(ran == 300);
}
