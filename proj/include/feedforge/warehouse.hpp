// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "feedforge/errors.hpp"
#include "feedforge/sql/executor.hpp"
#include "feedforge/table.hpp"

namespace feedforge {

struct AggregationReport {
  std::string job_name;
  std::string output_table;
  std::map<std::string, size_t> input_rows;
  size_t output_rows = 0;
};

/// In-process columnar warehouse: a catalog of wide tables, the SQL-subset
/// engine over them, and atomic materialization. Single writer, many
/// readers per table; queries run under a shared lock, mutations under an
/// exclusive one, and a materialization swap is all-or-nothing for readers.
class Warehouse : public sql::TableResolver {
 public:
  /// With a directory, tables persist as one `<name>.ffwh` file per
  /// materialization (plus a `<name>.dedup.json` sidecar for applied batch
  /// ids) and are loaded back on open. Without one, purely in-memory.
  explicit Warehouse(std::filesystem::path dir = {}) : dir_(std::move(dir)) {
    if (dir_.empty()) return;
    std::filesystem::create_directories(dir_);
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
      if (entry.path().extension() != ".ffwh") continue;
      auto table = std::make_shared<ColumnarTable>(
          ColumnarTable::load(entry.path()));
      auto dedup = entry.path();
      dedup.replace_extension(".dedup.json");
      if (std::filesystem::exists(dedup)) {
        std::ifstream in(dedup);
        nlohmann::json j = nlohmann::json::parse(in);
        std::set<std::pair<std::string, std::string>> applied;
        for (const auto& pair : j)
          applied.insert({pair.at(0).get<std::string>(), pair.at(1).get<std::string>()});
        table->restore_applied(std::move(applied));
      }
      tables_.emplace(table->name(), std::move(table));
    }
  }

  ColumnarTable& create_table(const std::string& name,
                              std::vector<ColumnSpec> schema) {
    std::unique_lock lock(mu_);
    if (tables_.count(name))
      raise(Errc::duplicate_table, "table '" + name + "' already exists");
    auto table = std::make_shared<ColumnarTable>(name, std::move(schema));
    auto [it, ok] = tables_.emplace(name, std::move(table));
    return *it->second;
  }

  bool has_table(const std::string& name) const {
    std::shared_lock lock(mu_);
    return tables_.count(name) > 0;
  }

  std::vector<std::string> table_names() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [name, t] : tables_) out.push_back(name);
    return out;
  }

  size_t row_count(const std::string& name) const {
    std::shared_lock lock(mu_);
    return require(name)->row_count();
  }

  std::vector<ColumnSpec> table_schema(const std::string& name) const {
    std::shared_lock lock(mu_);
    return require(name)->schema();
  }

  std::string table_checksum(const std::string& name) const {
    std::shared_lock lock(mu_);
    return require(name)->content_checksum();
  }

  /// Test/diagnostic escape hatch. The snapshot must not be read while a
  /// writer could be touching the same table.
  std::shared_ptr<const ColumnarTable> snapshot(const std::string& name) const {
    std::shared_lock lock(mu_);
    return require(name);
  }

  /// Feed tables carry at least the wire envelope columns.
  void ensure_feed_table(const std::string& name) {
    std::unique_lock lock(mu_);
    if (tables_.count(name)) return;
    std::vector<ColumnSpec> schema{
        {"observable_id", ColumnType::string, false},
        {"event_time", ColumnType::timestamp, false},
    };
    tables_.emplace(name, std::make_shared<ColumnarTable>(name, std::move(schema)));
  }

  InsertResult insert_batch(const std::string& table_name, const Batch& batch) {
    std::unique_lock lock(mu_);
    auto it = tables_.find(table_name);
    if (it == tables_.end())
      raise(Errc::unknown_table, "no table '" + table_name + "'");
    return it->second->insert_batch(batch);
  }

  /// Direct row append for internal writers (label materialization builds,
  /// scorer write-back). Creates the table with `schema` when missing.
  void append_rows(const std::string& table_name,
                   const std::vector<ColumnSpec>& schema,
                   const std::vector<std::vector<Value>>& rows) {
    std::unique_lock lock(mu_);
    auto it = tables_.find(table_name);
    if (it == tables_.end()) {
      auto table = std::make_shared<ColumnarTable>(table_name, schema);
      it = tables_.emplace(table_name, std::move(table)).first;
    }
    for (const auto& row : rows) it->second->append_row(row);
  }

  // --- sql::TableResolver (callers hold the lock via parse/execute) ----
  const ColumnarTable* find_table(const std::string& name) const override {
    auto it = tables_.find(name);
    return it == tables_.end() ? nullptr : it->second.get();
  }

  /// Parse + bind: any string in the grammar yields a plan; name and type
  /// errors surface here with byte offsets.
  sql::QueryPlan parse(std::string_view sql_text) const {
    sql::SelectQuery q = sql::parse_query_text(sql_text);
    std::shared_lock lock(mu_);
    return sql::bind_query(*this, std::move(q));
  }

  sql::QueryResult execute(const sql::QueryPlan& plan) const {
    std::shared_lock lock(mu_);
    return sql::execute_plan(*this, plan);
  }

  sql::QueryResult execute_sql(std::string_view sql_text) const {
    sql::SelectQuery q = sql::parse_query_text(sql_text);
    std::shared_lock lock(mu_);
    sql::QueryPlan plan = sql::bind_query(*this, std::move(q));
    return sql::execute_plan(*this, plan);
  }

  /// Streaming export in insertion order. The stream holds the reader
  /// lock until destroyed; don't interleave with writers on one thread.
  class RowStream {
   public:
    RowStream(std::shared_lock<std::shared_mutex> lock,
              std::vector<std::string> names, sql::ScanCursor cursor)
        : lock_(std::move(lock)),
          names_(std::move(names)),
          cursor_(std::move(cursor)) {}

    const std::vector<std::string>& columns() const { return names_; }
    std::optional<std::vector<Value>> next() { return cursor_.next(); }

   private:
    std::shared_lock<std::shared_mutex> lock_;
    std::vector<std::string> names_;
    sql::ScanCursor cursor_;
  };

  RowStream scan_export(const std::string& table_name,
                        const std::vector<std::string>& projection,
                        std::string_view predicate_text = {}) const {
    std::shared_lock lock(mu_);
    const ColumnarTable* table = find_table(table_name);
    if (!table) raise(Errc::unknown_table, "no table '" + table_name + "'");
    std::vector<size_t> cols;
    std::vector<std::string> names;
    if (projection.empty()) {
      for (size_t c = 0; c < table->schema().size(); ++c) {
        cols.push_back(c);
        names.push_back(table->schema()[c].name);
      }
    } else {
      for (const auto& name : projection) {
        size_t c = table->column_index(name);
        if (c == ColumnarTable::npos)
          raise(Errc::unknown_column, "no column '" + name + "'");
        cols.push_back(c);
        names.push_back(name);
      }
    }
    // Reuse the executor's binder by wrapping the predicate in a query.
    sql::SelectQuery probe;
    probe.table = table_name;
    sql::SelectItem star;
    star.star = true;
    probe.items.push_back(std::move(star));
    int predicate = -1;
    if (!predicate_text.empty()) {
      probe.where = sql::parse_predicate_text(predicate_text);
      if (sql::detail::has_aggregate(*probe.where))
        raise(Errc::aggregate_misuse, "aggregate not allowed in a scan predicate",
              probe.where->offset);
    }
    sql::detail::Binder binder(*this, probe);
    sql::detail::BoundQuery bound = std::move(binder).take();
    predicate = bound.where;
    return RowStream(std::move(lock), std::move(names),
                     sql::ScanCursor(table, std::move(cols), std::move(bound), predicate));
  }

  /// Materialize `sql_text` into `output_table`, replacing it atomically.
  /// The output table belongs to the job that first built it; a failed run
  /// leaves the previous materialization intact.
  AggregationReport run_aggregation(const std::string& job_name,
                                    std::string_view sql_text,
                                    const std::string& output_table) {
    {
      std::shared_lock lock(mu_);
      auto owner = owners_.find(output_table);
      if (tables_.count(output_table) &&
          (owner == owners_.end() || owner->second != job_name))
        raise(Errc::duplicate_table,
              "output table '" + output_table + "' is not owned by job '" +
                  job_name + "'");
    }
    AggregationReport report;
    report.job_name = job_name;
    report.output_table = output_table;

    sql::SelectQuery q = sql::parse_query_text(sql_text);
    sql::QueryResult result;
    {
      std::shared_lock lock(mu_);
      sql::QueryPlan plan = sql::bind_query(*this, std::move(q));
      for (const auto& t : plan.tables)
        report.input_rows[t] = require(t)->row_count();
      result = sql::execute_plan(*this, plan);
    }

    auto table = std::make_shared<ColumnarTable>(output_table, result_schema(result));
    for (auto& row : result.rows) table->append_row(row);
    report.output_rows = table->row_count();

    {
      std::unique_lock lock(mu_);
      tables_[output_table] = table;
      owners_[output_table] = job_name;
    }
    persist(output_table);
    return report;
  }

  /// Atomic whole-table swap for non-SQL materializers (label recompute).
  void replace_table(std::shared_ptr<ColumnarTable> table) {
    std::string name = table->name();
    {
      std::unique_lock lock(mu_);
      tables_[name] = std::move(table);
    }
    persist(name);
  }

  /// Result schema for a materialized query output.
  static std::vector<ColumnSpec> result_schema(const sql::QueryResult& result) {
    std::vector<ColumnSpec> schema;
    schema.reserve(result.columns.size());
    for (const auto& c : result.columns)
      schema.push_back({c.name, c.type, true});
    return schema;
  }

  /// Persist every table (and its dedup sidecar) to the directory.
  void save_all() const {
    if (dir_.empty()) return;
    std::vector<std::string> names = table_names();
    for (const auto& name : names) persist(name);
  }

  const std::filesystem::path& directory() const { return dir_; }

 private:
  std::shared_ptr<const ColumnarTable> require(const std::string& name) const {
    auto it = tables_.find(name);
    if (it == tables_.end())
      raise(Errc::unknown_table, "no table '" + name + "'");
    return it->second;
  }

  void persist(const std::string& name) const {
    if (dir_.empty()) return;
    std::shared_lock lock(mu_);
    auto it = tables_.find(name);
    if (it == tables_.end()) return;
    const auto& table = *it->second;
    table.save(dir_ / (name + ".ffwh"));
    nlohmann::json applied = nlohmann::json::array();
    for (const auto& [feed, batch] : table.applied_batches())
      applied.push_back({feed, batch});
    auto sidecar_tmp = dir_ / (name + ".dedup.json.tmp");
    {
      std::ofstream out(sidecar_tmp, std::ios::trunc);
      out << applied.dump();
    }
    std::filesystem::rename(sidecar_tmp, dir_ / (name + ".dedup.json"));
  }

  std::filesystem::path dir_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<ColumnarTable>> tables_;
  std::map<std::string, std::string> owners_;  // output table -> job
};

}  // namespace feedforge
