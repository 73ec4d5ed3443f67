// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "feedforge/rng.hpp"
#include "feedforge/table.hpp"
#include "feedforge/warehouse.hpp"
#include "support/temp_dir.hpp"

using namespace feedforge;
using fftest::TempDir;

namespace {

FeedRecord record(std::string obs, int64_t t, FlatMap fields) {
  FeedRecord r;
  r.feed_id = "f";
  r.observable_id = std::move(obs);
  r.event_time_ms = t;
  r.fields = std::move(fields);
  return r;
}

std::string obs(int i) {
  std::string s = std::to_string(i);
  return std::string(64 - s.size(), '0') + s;
}

Batch make_batch(std::string id, std::vector<FeedRecord> records) {
  Batch b;
  b.batch_id = std::move(id);
  b.feed_id = "f";
  b.records = std::move(records);
  return b;
}

ColumnarTable feed_table(const std::string& name) {
  return ColumnarTable(name, {{"observable_id", ColumnType::string, false},
                              {"event_time", ColumnType::timestamp, false}});
}

}  // namespace

TEST_CASE("create_table basics", "[table]") {
  Warehouse wh;
  auto& t = wh.create_table("t", {{"a", ColumnType::int64, true},
                                  {"b", ColumnType::string, true}});
  CHECK(t.row_count() == 0);
  CHECK(t.schema().size() == 2);

  SECTION("duplicate table name") {
    try {
      wh.create_table("t", {});
      FAIL("expected DuplicateTable");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::duplicate_table);
    }
  }

  SECTION("duplicate column name") {
    try {
      wh.create_table("u", {{"a", ColumnType::int64, true},
                            {"a", ColumnType::string, true}});
      FAIL("expected DuplicateColumn");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::duplicate_column);
    }
  }

  SECTION("a 500-column schema is fine") {
    std::vector<ColumnSpec> wide;
    for (int i = 0; i < 500; ++i)
      wide.push_back({"c" + std::to_string(i), ColumnType::float64, true});
    auto& w = wh.create_table("wide", wide);
    CHECK(w.schema().size() == 500);
    std::vector<Value> row(500, Value(1.5));
    w.append_row(row);
    CHECK(w.row_count() == 1);
  }
}

TEST_CASE("insert_batch is idempotent on (feed_id, batch_id)", "[table]") {
  ColumnarTable t = feed_table("t");
  auto batch = make_batch("b1", {record(obs(1), 10, {{"x", Value(int64_t(1))}}),
                                 record(obs(2), 11, {{"x", Value(int64_t(2))}}),
                                 record(obs(3), 12, {{"x", Value(int64_t(3))}})});
  auto first = t.insert_batch(batch);
  CHECK(first.inserted == 3);
  CHECK_FALSE(first.skipped_duplicate);
  auto second = t.insert_batch(batch);
  CHECK(second.inserted == 0);
  CHECK(second.skipped_duplicate);
  CHECK(t.row_count() == 3);
}

TEST_CASE("unknown fields become additive nullable columns", "[table]") {
  ColumnarTable t = feed_table("t");
  t.insert_batch(make_batch("b1", {record(obs(1), 1, {{"x", Value(int64_t(5))}})}));
  REQUIRE(t.column_index("pe.sections") == ColumnarTable::npos);
  t.insert_batch(
      make_batch("b2", {record(obs(2), 2, {{"pe.sections", Value(int64_t(4))}})}));
  size_t col = t.column_index("pe.sections");
  REQUIRE(col != ColumnarTable::npos);
  CHECK(is_null(t.at(0, col)));  // earlier row backfilled with null
  CHECK(std::get<int64_t>(t.at(1, col)) == 4);
  // null-valued unknown fields do not create columns
  t.insert_batch(make_batch("b3", {record(obs(3), 3, {{"ghost", Value{}}})}));
  CHECK(t.column_index("ghost") == ColumnarTable::npos);
}

TEST_CASE("type mismatches abort the whole batch atomically", "[table]") {
  ColumnarTable t = feed_table("t");
  t.insert_batch(make_batch("b1", {record(obs(1), 1, {{"x", Value(int64_t(5))}})}));
  auto bad = make_batch(
      "b2", {record(obs(2), 2, {{"x", Value(int64_t(6))}}),
             record(obs(3), 3, {{"x", sv("not a number")}})});
  try {
    t.insert_batch(bad);
    FAIL("expected TypeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::type_mismatch);
    CHECK(std::string(e.what()).find("'x'") != std::string::npos);
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
  CHECK(t.row_count() == 1);  // nothing from the failed batch landed
  CHECK_FALSE(t.already_applied("f", "b2"));
}

TEST_CASE("int64 widens into float64 columns", "[table]") {
  ColumnarTable t = feed_table("t");
  t.insert_batch(make_batch("b1", {record(obs(1), 1, {{"ratio", Value(0.5)}})}));
  t.insert_batch(make_batch("b2", {record(obs(2), 2, {{"ratio", Value(int64_t(2))}})}));
  size_t col = t.column_index("ratio");
  CHECK(std::get<double>(t.at(1, col)) == 2.0);
}

TEST_CASE("column vectors stay row_count long through any sequence", "[table]") {
  Rng rng(7);
  ColumnarTable t = feed_table("t");
  for (int b = 0; b < 30; ++b) {
    std::vector<FeedRecord> records;
    size_t n = 1 + rng.below(5);
    for (size_t i = 0; i < n; ++i) {
      FlatMap fields;
      if (rng.chance(0.5)) fields.emplace_back("k" + std::to_string(rng.below(6)),
                                               Value(int64_t(rng.range(0, 100))));
      if (rng.chance(0.2)) fields.emplace_back("s" + std::to_string(rng.below(3)),
                                               sv("v"));
      records.push_back(record(obs(b * 10 + static_cast<int>(i)), b, fields));
    }
    t.insert_batch(make_batch("b" + std::to_string(b), records));
    for (size_t c = 0; c < t.schema().size(); ++c)
      REQUIRE(t.column(c).size() == t.row_count());
  }
}

TEST_CASE("duplicate batch multisets collapse to distinct batches", "[table]") {
  Rng rng(11);
  ColumnarTable t = feed_table("t");
  std::vector<Batch> batches;
  for (int b = 0; b < 10; ++b)
    batches.push_back(make_batch(
        "b" + std::to_string(b),
        {record(obs(b), b, {{"x", Value(int64_t(b))}})}));
  size_t distinct_applied = 0;
  std::set<std::string> seen;
  for (int i = 0; i < 100; ++i) {
    const Batch& pick = batches[rng.below(batches.size())];
    auto result = t.insert_batch(pick);
    if (!result.skipped_duplicate) {
      ++distinct_applied;
      seen.insert(pick.batch_id);
    }
  }
  CHECK(distinct_applied == seen.size());
  CHECK(t.row_count() == seen.size());
}

TEST_CASE("FFWH files round-trip bit-exactly", "[table]") {
  TempDir dir;
  ColumnarTable t("mix", {{"s", ColumnType::string, true},
                          {"i", ColumnType::int64, true},
                          {"f", ColumnType::float64, true},
                          {"b", ColumnType::boolean, true},
                          {"ts", ColumnType::timestamp, false}});
  t.append_row({sv("hello"), Value(int64_t(-42)), Value(3.25), Value(true),
                Value(int64_t(1000))});
  t.append_row({Value{}, Value{}, Value{}, Value{}, Value(int64_t(2000))});
  t.append_row({sv(""), Value(INT64_MAX), Value(-0.0), Value(false),
                Value(int64_t(3000))});

  auto path = dir / "mix.ffwh";
  t.save(path);
  ColumnarTable back = ColumnarTable::load(path);
  REQUIRE(back.row_count() == 3);
  REQUIRE(back.schema().size() == 5);
  CHECK(back.schema()[4].type == ColumnType::timestamp);
  CHECK_FALSE(back.schema()[4].nullable);
  for (size_t r = 0; r < 3; ++r)
    for (size_t c = 0; c < 5; ++c)
      CHECK(value_repr(back.at(r, c)) == value_repr(t.at(r, c)));

  SECTION("re-saving produces identical bytes") {
    auto path2 = dir / "mix2.ffwh";
    back.save(path2);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    std::string bytes_a((std::istreambuf_iterator<char>(a)),
                        std::istreambuf_iterator<char>());
    std::string bytes_b((std::istreambuf_iterator<char>(b)),
                        std::istreambuf_iterator<char>());
    CHECK(bytes_a == bytes_b);
  }

  SECTION("header starts with the FFWH magic and version 1") {
    std::ifstream in(path, std::ios::binary);
    char head[6];
    in.read(head, 6);
    CHECK(std::string(head, 4) == "FFWH");
    CHECK(head[4] == 1);
    CHECK(head[5] == 0);
  }

  SECTION("truncated file reports a decode offset") {
    Bytes bytes = t.serialize();
    bytes.resize(bytes.size() / 2);
    CHECK_THROWS_AS(ColumnarTable::deserialize(bytes, "x"), Error);
  }
}

TEST_CASE("warehouse persistence restores tables and dedup state", "[table]") {
  TempDir dir;
  {
    Warehouse wh(dir.path());
    wh.ensure_feed_table("scans");
    wh.insert_batch("scans", make_batch("b1", {record(obs(1), 5, {})}));
    wh.save_all();
  }
  Warehouse wh(dir.path());
  REQUIRE(wh.has_table("scans"));
  CHECK(wh.row_count("scans") == 1);
  auto again = wh.insert_batch("scans", make_batch("b1", {record(obs(1), 5, {})}));
  CHECK(again.skipped_duplicate);  // dedup keys came back from the sidecar
}
