// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "feedforge/batch.hpp"
#include "feedforge/errors.hpp"
#include "feedforge/hash.hpp"
#include "feedforge/value.hpp"

namespace feedforge {

struct ColumnSpec {
  std::string name;
  ColumnType type = ColumnType::string;
  bool nullable = true;
};

/// One typed column: a value vector plus a null mask. Null slots keep a
/// default placeholder so every vector stays row_count long.
class Column {
 public:
  Column(ColumnType type, bool nullable) : type_(type), nullable_(nullable) {
    switch (type_) {
      case ColumnType::string: data_ = std::vector<std::string>{}; break;
      case ColumnType::int64:
      case ColumnType::timestamp: data_ = std::vector<int64_t>{}; break;
      case ColumnType::float64: data_ = std::vector<double>{}; break;
      case ColumnType::boolean: data_ = std::vector<uint8_t>{}; break;
    }
  }

  ColumnType type() const { return type_; }
  bool nullable() const { return nullable_; }
  size_t size() const { return nulls_.size(); }
  bool is_null(size_t row) const { return nulls_[row]; }

  void append_null() {
    nulls_.push_back(true);
    std::visit([](auto& vec) { vec.emplace_back(); }, data_);
  }

  /// Caller has already type-checked via storable_as().
  void append(const Value& v) {
    if (is_null_value(v)) {
      append_null();
      return;
    }
    nulls_.push_back(false);
    switch (type_) {
      case ColumnType::string:
        std::get<std::vector<std::string>>(data_).push_back(std::get<std::string>(v));
        break;
      case ColumnType::int64:
      case ColumnType::timestamp:
        std::get<std::vector<int64_t>>(data_).push_back(std::get<int64_t>(v));
        break;
      case ColumnType::float64: {
        double d = std::holds_alternative<int64_t>(v)
                       ? static_cast<double>(std::get<int64_t>(v))
                       : std::get<double>(v);
        std::get<std::vector<double>>(data_).push_back(d);
        break;
      }
      case ColumnType::boolean:
        std::get<std::vector<uint8_t>>(data_).push_back(std::get<bool>(v) ? 1 : 0);
        break;
    }
  }

  Value get(size_t row) const {
    if (nulls_[row]) return Value{};
    switch (type_) {
      case ColumnType::string:
        return Value(std::get<std::vector<std::string>>(data_)[row]);
      case ColumnType::int64:
      case ColumnType::timestamp:
        return Value(std::get<std::vector<int64_t>>(data_)[row]);
      case ColumnType::float64:
        return Value(std::get<std::vector<double>>(data_)[row]);
      case ColumnType::boolean:
        return Value(std::get<std::vector<uint8_t>>(data_)[row] != 0);
    }
    return Value{};
  }

 private:
  static bool is_null_value(const Value& v) {
    return std::holds_alternative<std::monostate>(v);
  }

  ColumnType type_;
  bool nullable_;
  std::vector<bool> nulls_;
  std::variant<std::vector<std::string>, std::vector<int64_t>,
               std::vector<double>, std::vector<uint8_t>>
      data_;
};

struct InsertResult {
  size_t inserted = 0;
  bool skipped_duplicate = false;
};

/// Wide metadata table. Schema is immutable after creation except for
/// additive nullable columns; batch application is atomic and idempotent
/// on (feed_id, batch_id).
class ColumnarTable {
 public:
  static constexpr size_t npos = static_cast<size_t>(-1);

  ColumnarTable(std::string name, std::vector<ColumnSpec> schema)
      : name_(std::move(name)) {
    for (auto& spec : schema) add_column_internal(std::move(spec));
  }

  const std::string& name() const { return name_; }
  size_t row_count() const { return rows_; }
  const std::vector<ColumnSpec>& schema() const { return schema_; }

  size_t column_index(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? npos : it->second;
  }

  const Column& column(size_t i) const { return cols_[i]; }

  Value at(size_t row, size_t col) const { return cols_[col].get(row); }

  /// Additive schema evolution: new columns are nullable and backfilled
  /// with nulls for existing rows.
  void add_column(ColumnSpec spec) {
    spec.nullable = true;
    size_t idx = add_column_internal(std::move(spec));
    for (size_t i = 0; i < rows_; ++i) cols_[idx].append_null();
  }

  /// Values aligned with the schema; missing == null. Types must already
  /// satisfy storable_as; used by materialization and direct builders.
  void append_row(const std::vector<Value>& values) {
    if (values.size() != schema_.size())
      raise(Errc::invalid_argument, "row arity mismatch on " + name_);
    for (size_t c = 0; c < schema_.size(); ++c) {
      const Value& v = values[c];
      if (std::holds_alternative<std::monostate>(v)) {
        if (!schema_[c].nullable)
          raise(Errc::type_mismatch,
                "null in non-nullable column '" + schema_[c].name + "'");
        cols_[c].append_null();
        continue;
      }
      if (!storable_as(value_type(v), schema_[c].type))
        raise(Errc::type_mismatch,
              "column '" + schema_[c].name + "' expects " +
                  column_type_name(schema_[c].type) + ", got " +
                  column_type_name(value_type(v)));
      cols_[c].append(v);
    }
    ++rows_;
  }

  bool already_applied(const std::string& feed_id, const std::string& batch_id) const {
    return applied_.count({feed_id, batch_id}) > 0;
  }

  /// Atomic, idempotent batch insertion. Unknown fields create additive
  /// nullable columns (typed by their first non-null value); the whole
  /// batch is validated before any row lands, so a TypeMismatch leaves the
  /// table untouched.
  InsertResult insert_batch(const Batch& batch) {
    if (already_applied(batch.feed_id, batch.batch_id))
      return {0, true};

    struct PendingColumn { std::string name; ColumnType type; };
    std::vector<PendingColumn> pending;
    auto pending_type = [&](const std::string& name) -> PendingColumn* {
      for (auto& p : pending)
        if (p.name == name) return &p;
      return nullptr;
    };

    auto check = [&](const std::string& col_name, const Value& v, size_t row_idx) {
      if (std::holds_alternative<std::monostate>(v)) return;  // nulls always fit
      ColumnType vt = value_type(v);
      size_t idx = column_index(col_name);
      if (idx != npos) {
        if (!storable_as(vt, schema_[idx].type))
          raise(Errc::type_mismatch,
                "column '" + col_name + "' row " + std::to_string(row_idx) +
                    ": expects " + column_type_name(schema_[idx].type) +
                    ", got " + column_type_name(vt));
        return;
      }
      if (auto* p = pending_type(col_name)) {
        if (!storable_as(vt, p->type)) {
          if (storable_as(p->type, vt) && p->type == ColumnType::int64 &&
              vt == ColumnType::float64) {
            p->type = ColumnType::float64;  // widen pending int column
          } else {
            raise(Errc::type_mismatch,
                  "column '" + col_name + "' row " + std::to_string(row_idx) +
                      ": mixed types within batch");
          }
        }
        return;
      }
      pending.push_back({col_name, vt});
    };

    for (size_t i = 0; i < batch.records.size(); ++i) {
      const auto& rec = batch.records[i];
      check("observable_id", Value(rec.observable_id), i);
      check("event_time", Value(rec.event_time_ms), i);
      if (rec.blob_ref) check("blob_ref", Value(*rec.blob_ref), i);
      for (const auto& [k, v] : rec.fields) check(k, v, i);
    }

    for (auto& p : pending) add_column(ColumnSpec{p.name, p.type, true});

    for (const auto& rec : batch.records) {
      std::vector<Value> row(schema_.size(), Value{});
      auto set = [&](std::string_view name, Value v) {
        row[column_index(name)] = std::move(v);
      };
      set("observable_id", Value(rec.observable_id));
      set("event_time", Value(rec.event_time_ms));
      if (rec.blob_ref) set("blob_ref", Value(*rec.blob_ref));
      for (const auto& [k, v] : rec.fields)
        if (!std::holds_alternative<std::monostate>(v)) set(k, v);
      append_row(row);
    }

    applied_.insert({batch.feed_id, batch.batch_id});
    return {batch.records.size(), false};
  }

  const std::set<std::pair<std::string, std::string>>& applied_batches() const {
    return applied_;
  }

  void restore_applied(std::set<std::pair<std::string, std::string>> applied) {
    applied_ = std::move(applied);
  }

  /// Content digest over schema + all cells; used for idempotence checks.
  std::string content_checksum() const {
    std::string buf;
    for (const auto& s : schema_) {
      buf += s.name;
      buf += static_cast<char>(s.type);
    }
    for (size_t r = 0; r < rows_; ++r)
      for (size_t c = 0; c < cols_.size(); ++c) {
        std::string repr = value_repr(cols_[c].get(r));
        buf += std::to_string(repr.size());
        buf += ':';
        buf += repr;
      }
    return sha256_hex(buf);
  }

  // --- FFWH table file -----------------------------------------------
  // header: "FFWH" | u16 version | u32 column_count | u64 row_count |
  //         per column: u32 name_len | name | u8 type | u8 nullable
  // then per column: null bitmap (ceil(rows/8) bytes, LSB-first, bit set
  // means NULL) followed by packed non-null values in row order
  // (int64/float64 8B LE, bool 1B, strings u32-length-prefixed).

  Bytes serialize() const {
    Bytes out;
    out.insert(out.end(), {'F', 'F', 'W', 'H'});
    put_u16(out, 1);
    put_u32(out, static_cast<uint32_t>(schema_.size()));
    put_u64(out, rows_);
    for (const auto& s : schema_) {
      put_u32(out, static_cast<uint32_t>(s.name.size()));
      out.insert(out.end(), s.name.begin(), s.name.end());
      out.push_back(static_cast<uint8_t>(s.type));
      out.push_back(s.nullable ? 1 : 0);
    }
    for (size_t c = 0; c < cols_.size(); ++c) {
      const Column& col = cols_[c];
      Bytes bitmap((rows_ + 7) / 8, 0);
      for (size_t r = 0; r < rows_; ++r)
        if (col.is_null(r)) bitmap[r / 8] |= static_cast<uint8_t>(1u << (r % 8));
      out.insert(out.end(), bitmap.begin(), bitmap.end());
      for (size_t r = 0; r < rows_; ++r) {
        if (col.is_null(r)) continue;
        Value v = col.get(r);
        switch (schema_[c].type) {
          case ColumnType::int64:
          case ColumnType::timestamp:
            put_i64(out, std::get<int64_t>(v));
            break;
          case ColumnType::float64:
            put_f64(out, std::get<double>(v));
            break;
          case ColumnType::boolean:
            out.push_back(std::get<bool>(v) ? 1 : 0);
            break;
          case ColumnType::string: {
            const auto& s = std::get<std::string>(v);
            put_u32(out, static_cast<uint32_t>(s.size()));
            out.insert(out.end(), s.begin(), s.end());
            break;
          }
        }
      }
    }
    return out;
  }

  static ColumnarTable deserialize(std::span<const uint8_t> bytes,
                                   std::string name) {
    ByteReader r(bytes);
    if (r.str(4) != "FFWH") raise(Errc::decode_error, "bad table magic", 0);
    uint16_t version = r.u16();
    if (version != 1)
      raise(Errc::decode_error, "unsupported table version " + std::to_string(version), 4);
    uint32_t ncols = r.u32();
    uint64_t nrows = r.u64();
    std::vector<ColumnSpec> schema;
    schema.reserve(ncols);
    for (uint32_t c = 0; c < ncols; ++c) {
      ColumnSpec s;
      uint32_t len = r.u32();
      s.name = r.str(len);
      size_t type_off = r.offset();
      s.type = column_type_from_code(r.u8(), type_off);
      s.nullable = r.u8() != 0;
      schema.push_back(std::move(s));
    }
    ColumnarTable t(std::move(name), std::move(schema));
    std::vector<std::vector<bool>> null_of(ncols);
    std::vector<std::vector<Value>> vals(ncols);
    for (uint32_t c = 0; c < ncols; ++c) {
      auto bitmap = r.take((nrows + 7) / 8);
      null_of[c].resize(nrows);
      for (uint64_t row = 0; row < nrows; ++row)
        null_of[c][row] = (bitmap[row / 8] >> (row % 8)) & 1;
      vals[c].resize(nrows);
      for (uint64_t row = 0; row < nrows; ++row) {
        if (null_of[c][row]) continue;
        switch (t.schema_[c].type) {
          case ColumnType::int64:
          case ColumnType::timestamp: vals[c][row] = Value(r.i64()); break;
          case ColumnType::float64: vals[c][row] = Value(r.f64()); break;
          case ColumnType::boolean: vals[c][row] = Value(r.u8() != 0); break;
          case ColumnType::string: {
            uint32_t len = r.u32();
            vals[c][row] = Value(r.str(len));
            break;
          }
        }
      }
    }
    if (!r.done()) raise(Errc::decode_error, "trailing bytes", r.offset());
    for (uint64_t row = 0; row < nrows; ++row) {
      std::vector<Value> rowvals(ncols);
      for (uint32_t c = 0; c < ncols; ++c) rowvals[c] = std::move(vals[c][row]);
      t.append_row(rowvals);
    }
    return t;
  }

  void save(const std::filesystem::path& path) const {
    Bytes bytes = serialize();
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out.is_open())
        raise(Errc::io_error, "cannot write " + tmp.string());
      out.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
      if (!out.good()) raise(Errc::io_error, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  }

  static ColumnarTable load(const std::filesystem::path& path,
                            std::string name = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in.is_open()) raise(Errc::not_found, "no table file " + path.string());
    std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
    if (name.empty()) name = path.stem().string();
    return deserialize({reinterpret_cast<const uint8_t*>(raw.data()), raw.size()},
                       std::move(name));
  }

 private:
  size_t add_column_internal(ColumnSpec spec) {
    if (spec.name.empty())
      raise(Errc::invalid_argument, "column name must be non-empty");
    if (index_.count(spec.name))
      raise(Errc::duplicate_column,
            "column '" + spec.name + "' already exists in " + name_);
    cols_.emplace_back(spec.type, spec.nullable);
    index_.emplace(spec.name, schema_.size());
    schema_.push_back(std::move(spec));
    return schema_.size() - 1;
  }

  std::string name_;
  std::vector<ColumnSpec> schema_;
  std::vector<Column> cols_;
  std::unordered_map<std::string, size_t> index_;
  std::set<std::pair<std::string, std::string>> applied_;
  size_t rows_ = 0;
};

}  // namespace feedforge
