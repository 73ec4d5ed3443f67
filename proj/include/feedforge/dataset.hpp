// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "feedforge/blobstore.hpp"
#include "feedforge/errors.hpp"
#include "feedforge/features.hpp"
#include "feedforge/labeling.hpp"
#include "feedforge/rng.hpp"
#include "feedforge/warehouse.hpp"

namespace feedforge {

struct ManifestRow {
  std::string observable_id;
  Verdict verdict = Verdict::benign;
  int64_t first_seen = 0;
  BlobRef feature;
};

/// Immutable, checksummed dataset listing plus the provenance (query,
/// policy version, seed, split lineage) that produced it. Any derived
/// manifest is a new object with a new checksum.
struct DatasetManifest {
  std::string dataset_id;
  int64_t created_at = 0;
  std::string query;
  std::string policy_version;
  uint64_t seed = 0;
  std::string split = "none";
  std::vector<ManifestRow> rows;
  std::string checksum;

  nlohmann::json to_json(bool with_checksum = true) const {
    nlohmann::json j;
    j["dataset_id"] = dataset_id;
    j["created_at"] = created_at;
    j["query"] = query;
    j["policy_version"] = policy_version;
    j["seed"] = seed;
    j["split"] = split;
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json row;
      row["observable_id"] = r.observable_id;
      row["verdict"] = verdict_name(r.verdict);
      row["first_seen"] = r.first_seen;
      row["blob_ref"] = {{"address", r.feature.address}, {"size", r.feature.size}};
      rows_json.push_back(std::move(row));
    }
    j["rows"] = std::move(rows_json);
    if (with_checksum) j["checksum"] = checksum;
    return j;
  }

  /// Canonical serialization: UTF-8 JSON, keys sorted, no insignificant
  /// whitespace. The checksum is SHA-256 over this form minus the
  /// checksum field itself.
  std::string canonical_text() const { return to_json(true).dump(); }

  void seal() { checksum = sha256_hex(to_json(false).dump()); }

  static DatasetManifest from_json(const nlohmann::json& j) {
    DatasetManifest m;
    try {
      m.dataset_id = j.at("dataset_id").get<std::string>();
      m.created_at = j.at("created_at").get<int64_t>();
      m.query = j.at("query").get<std::string>();
      m.policy_version = j.at("policy_version").get<std::string>();
      m.seed = j.at("seed").get<uint64_t>();
      m.split = j.at("split").get<std::string>();
      for (const auto& row : j.at("rows")) {
        ManifestRow r;
        r.observable_id = row.at("observable_id").get<std::string>();
        r.verdict = verdict_from(row.at("verdict").get<std::string>());
        r.first_seen = row.at("first_seen").get<int64_t>();
        r.feature.address = row.at("blob_ref").at("address").get<std::string>();
        r.feature.size = row.at("blob_ref").at("size").get<uint64_t>();
        m.rows.push_back(std::move(r));
      }
      m.checksum = j.at("checksum").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      raise(Errc::decode_error, std::string("bad manifest: ") + e.what());
    }
    std::string expect = sha256_hex(m.to_json(false).dump());
    if (expect != m.checksum)
      raise(Errc::checksum_mismatch,
            "manifest checksum " + m.checksum + " != computed " + expect);
    return m;
  }

  /// Low 64 bits of the checksum; iteration seeds mix this in so order is
  /// a pure function of (manifest checksum, seed).
  uint64_t checksum_prefix() const {
    uint64_t out = 0;
    for (size_t i = 0; i < 16 && i < checksum.size(); ++i) {
      char c = checksum[i];
      out = (out << 4) | static_cast<uint64_t>(
                             c <= '9' ? c - '0' : c - 'a' + 10);
    }
    return out;
  }
};

enum class MissingFeaturePolicy { strict, skip };

struct CollectOptions {
  std::string dataset_id = "dataset";
  uint64_t seed = 0;
  int64_t now_ms = 0;
  MissingFeaturePolicy missing_feature = MissingFeaturePolicy::strict;
};

struct CollectReport {
  size_t query_rows = 0;
  size_t unknown_excluded = 0;  // unknown verdict or no label row
  size_t missing_feature = 0;
  size_t rows = 0;
};

/// Populate a manifest: run the metadata query, join verdicts from the
/// label table, resolve feature refs against the blob store. The query
/// must project observable_id, first_seen and blob_ref. Rows with unknown
/// verdicts are excluded and counted; row order is a seeded shuffle of the
/// observable_id-sorted rows, so re-collecting with one seed is
/// reproducible and different seeds reorder the same row set.
inline DatasetManifest collect(const Warehouse& warehouse, const BlobStore& store,
                               const std::string& query_text,
                               const std::string& label_table,
                               const CollectOptions& options,
                               CollectReport* report_out = nullptr) {
  sql::QueryResult result = warehouse.execute_sql(query_text);
  auto col = [&](std::string_view name, bool need_string) -> size_t {
    for (size_t i = 0; i < result.columns.size(); ++i) {
      if (result.columns[i].name != name) continue;
      ColumnType t = result.columns[i].type;
      bool ok = need_string ? t == ColumnType::string
                            : t == ColumnType::int64 || t == ColumnType::timestamp;
      if (!ok)
        raise(Errc::type_mismatch,
              "collect column '" + std::string(name) + "' has the wrong type");
      return i;
    }
    raise(Errc::invalid_query,
          "collect query must project '" + std::string(name) + "'");
  };
  size_t c_obs = col("observable_id", true);
  size_t c_seen = col("first_seen", false);
  size_t c_blob = col("blob_ref", true);

  // Verdict per observable from the label table.
  std::unordered_map<std::string, std::pair<Verdict, std::string>> labels;
  {
    auto stream = warehouse.scan_export(
        label_table, {"observable_id", "verdict", "policy_version"});
    while (auto row = stream.next()) {
      const auto& r = *row;
      labels[std::get<std::string>(r[0])] = {
          verdict_from(std::get<std::string>(r[1])),
          std::get<std::string>(r[2])};
    }
  }

  CollectReport report;
  report.query_rows = result.rows.size();
  std::vector<ManifestRow> rows;
  std::unordered_set<std::string> seen;
  std::unordered_set<std::string> versions;
  for (const auto& r : result.rows) {
    if (is_null(r[c_obs]))
      raise(Errc::invalid_query, "collect query produced a null observable_id");
    ManifestRow row;
    row.observable_id = std::get<std::string>(r[c_obs]);
    if (!seen.insert(row.observable_id).second)
      raise(Errc::invalid_query,
            "duplicate observable_id '" + row.observable_id +
                "' in collect query result");
    auto label = labels.find(row.observable_id);
    if (label == labels.end() || label->second.first == Verdict::unknown) {
      ++report.unknown_excluded;
      continue;
    }
    if (is_null(r[c_blob])) {
      if (options.missing_feature == MissingFeaturePolicy::strict)
        raise(Errc::missing_feature,
              "no feature for observable " + row.observable_id);
      ++report.missing_feature;
      continue;
    }
    row.feature.address = std::get<std::string>(r[c_blob]);
    if (!is_hex_digest(row.feature.address) || !store.contains(row.feature.address)) {
      if (options.missing_feature == MissingFeaturePolicy::strict)
        raise(Errc::missing_feature,
              "no feature for observable " + row.observable_id);
      ++report.missing_feature;
      continue;
    }
    row.feature.size = store.size_of(row.feature.address);
    row.verdict = label->second.first;
    versions.insert(label->second.second);
    row.first_seen = is_null(r[c_seen]) ? 0 : std::get<int64_t>(r[c_seen]);
    rows.push_back(std::move(row));
  }

  std::sort(rows.begin(), rows.end(),
            [](const ManifestRow& a, const ManifestRow& b) {
              return a.observable_id < b.observable_id;
            });
  Rng rng(options.seed);
  deterministic_shuffle(rows, rng);

  DatasetManifest manifest;
  manifest.dataset_id = options.dataset_id;
  manifest.created_at = options.now_ms;
  manifest.query = query_text;
  if (versions.size() == 1) {
    manifest.policy_version = *versions.begin();
  } else if (versions.empty()) {
    manifest.policy_version = "";
  } else {
    std::vector<std::string> sorted(versions.begin(), versions.end());
    std::sort(sorted.begin(), sorted.end());
    std::string joined;
    for (const auto& v : sorted) {
      if (!joined.empty()) joined += ",";
      joined += v;
    }
    manifest.policy_version = joined;
  }
  manifest.seed = options.seed;
  manifest.rows = std::move(rows);
  manifest.seal();
  report.rows = manifest.rows.size();
  if (report_out) *report_out = report;
  return manifest;
}

struct SplitSpec {
  enum class Kind { temporal, stratified };
  Kind kind = Kind::temporal;
  int64_t cutoff_ms = 0;        // temporal: train < cutoff <= test
  double test_fraction = 0.25;  // stratified
  uint64_t seed = 0;            // stratified

  static SplitSpec temporal(int64_t cutoff) {
    SplitSpec s;
    s.kind = Kind::temporal;
    s.cutoff_ms = cutoff;
    return s;
  }
  static SplitSpec stratified(double fraction, uint64_t seed) {
    SplitSpec s;
    s.kind = Kind::stratified;
    s.test_fraction = fraction;
    s.seed = seed;
    return s;
  }
};

struct SplitResult {
  DatasetManifest train;
  DatasetManifest test;
  bool degenerate = false;  // one side came out empty
};

/// Partition a manifest. Temporal: train gets first_seen < cutoff (the
/// default split; time-ordered data leaks if split randomly). Stratified:
/// per-verdict seeded shuffle, first ceil(fraction * n_class) of each
/// class to test. Both sides keep the parent's row order.
inline SplitResult split(const DatasetManifest& manifest, const SplitSpec& spec) {
  SplitResult out;
  std::vector<bool> to_test(manifest.rows.size(), false);
  std::string desc;
  if (spec.kind == SplitSpec::Kind::temporal) {
    desc = "temporal(cutoff=" + std::to_string(spec.cutoff_ms) + ")";
    for (size_t i = 0; i < manifest.rows.size(); ++i)
      to_test[i] = manifest.rows[i].first_seen >= spec.cutoff_ms;
  } else {
    if (manifest.rows.empty())
      raise(Errc::invalid_argument, "stratified split needs a non-empty manifest");
    if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
      raise(Errc::invalid_argument, "test_fraction must be in (0,1)");
    desc = "stratified(fraction=" + std::to_string(spec.test_fraction) +
           ",seed=" + std::to_string(spec.seed) + ")";
    std::map<Verdict, std::vector<size_t>> by_class;
    for (size_t i = 0; i < manifest.rows.size(); ++i)
      by_class[manifest.rows[i].verdict].push_back(i);
    for (auto& [verdict, indices] : by_class) {
      Rng rng(mix_seed(spec.seed, static_cast<uint64_t>(verdict)));
      deterministic_shuffle(indices, rng);
      size_t n_test = static_cast<size_t>(std::ceil(
          spec.test_fraction * static_cast<double>(indices.size())));
      for (size_t k = 0; k < n_test && k < indices.size(); ++k)
        to_test[indices[k]] = true;
    }
  }

  auto derive = [&](bool test_side) {
    DatasetManifest m;
    m.dataset_id = manifest.dataset_id + (test_side ? ".test" : ".train");
    m.created_at = manifest.created_at;
    m.query = manifest.query;
    m.policy_version = manifest.policy_version;
    m.seed = manifest.seed;
    m.split = desc + (test_side ? "/test" : "/train");
    for (size_t i = 0; i < manifest.rows.size(); ++i)
      if (to_test[i] == test_side) m.rows.push_back(manifest.rows[i]);
    m.seal();
    return m;
  };
  out.train = derive(false);
  out.test = derive(true);
  out.degenerate = out.train.rows.empty() || out.test.rows.empty();
  return out;
}

struct SlicePredicate {
  std::optional<Verdict> verdict;
  std::optional<int64_t> first_seen_lo;  // inclusive
  std::optional<int64_t> first_seen_hi;  // exclusive

  bool matches(const ManifestRow& r) const {
    if (verdict && r.verdict != *verdict) return false;
    if (first_seen_lo && r.first_seen < *first_seen_lo) return false;
    if (first_seen_hi && r.first_seen >= *first_seen_hi) return false;
    return true;
  }
};

/// Subset manifest; slices compose like predicate conjunction.
inline DatasetManifest slice(const DatasetManifest& manifest,
                             const SlicePredicate& predicate) {
  DatasetManifest m;
  m.dataset_id = manifest.dataset_id + ".slice";
  m.created_at = manifest.created_at;
  m.query = manifest.query;
  m.policy_version = manifest.policy_version;
  m.seed = manifest.seed;
  std::string desc = "slice(";
  if (predicate.verdict) desc += std::string("verdict=") + verdict_name(*predicate.verdict);
  if (predicate.first_seen_lo)
    desc += std::string(desc.back() == '(' ? "" : ",") +
            "from=" + std::to_string(*predicate.first_seen_lo);
  if (predicate.first_seen_hi)
    desc += std::string(desc.back() == '(' ? "" : ",") +
            "until=" + std::to_string(*predicate.first_seen_hi);
  desc += ")";
  m.split = manifest.split == "none" ? desc : manifest.split + "+" + desc;
  for (const auto& r : manifest.rows)
    if (predicate.matches(r)) m.rows.push_back(r);
  m.seal();
  return m;
}

struct DatasetItem {
  std::string observable_id;
  FeatureVector features;
  Verdict verdict = Verdict::benign;
};

/// Randomly ordered epoch iteration. The visitation order is a
/// Fisher–Yates permutation from a splitmix64 PRNG seeded with
/// mix(seed, low-64-bits-of-manifest-checksum); features load lazily per
/// batch. A failed batch does not advance the cursor, so iteration
/// resumes at the same batch after the caller repairs the store.
class DatasetIterator {
 public:
  DatasetIterator(const DatasetManifest& manifest, uint64_t seed,
                  size_t batch_size, const BlobStore& store)
      : rows_(manifest.rows), batch_size_(batch_size), store_(&store) {
    if (batch_size_ < 1)
      raise(Errc::invalid_argument, "batch_size must be >= 1");
    Rng rng(mix_seed(seed, manifest.checksum_prefix()));
    order_ = shuffled_indices(rows_.size(), rng);
  }

  const std::vector<size_t>& order() const { return order_; }

  std::optional<std::vector<DatasetItem>> next() {
    if (pos_ >= order_.size()) return std::nullopt;
    size_t end = std::min(pos_ + batch_size_, order_.size());
    std::vector<DatasetItem> batch;
    batch.reserve(end - pos_);
    for (size_t i = pos_; i < end; ++i) {
      const ManifestRow& row = rows_[order_[i]];
      DatasetItem item;
      item.observable_id = row.observable_id;
      item.verdict = row.verdict;
      try {
        Bytes bytes = store_->get(row.feature);
        item.features = decode_features(bytes);
      } catch (const Error& e) {
        throw Error(e.code(), "observable " + row.observable_id + ": " + e.what());
      }
      if (item.features.observable_id != row.observable_id)
        raise(Errc::integrity_error,
              "feature blob belongs to " + item.features.observable_id +
                  ", not " + row.observable_id);
      batch.push_back(std::move(item));
    }
    pos_ = end;  // only after the whole batch loaded
    return batch;
  }

 private:
  std::vector<ManifestRow> rows_;
  std::vector<size_t> order_;
  size_t batch_size_;
  size_t pos_ = 0;
  const BlobStore* store_;
};

struct ExportReport {
  size_t rows = 0;
  uint64_t feature_bytes = 0;
};

inline void save_manifest(const DatasetManifest& manifest,
                          const std::filesystem::path& file) {
  if (file.has_parent_path())
    std::filesystem::create_directories(file.parent_path());
  std::filesystem::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out.is_open()) raise(Errc::io_error, "cannot write " + tmp.string());
    out << manifest.canonical_text();
    if (!out.good()) raise(Errc::io_error, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, file);
}

inline DatasetManifest load_manifest(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in.is_open()) raise(Errc::not_found, "no manifest " + file.string());
  nlohmann::json j =
      nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded())
    raise(Errc::decode_error, "manifest is not valid JSON: " + file.string());
  return DatasetManifest::from_json(j);
}

/// Write manifest.json plus features.ffv (each row's encoded feature
/// vector concatenated in manifest row order). Re-export of the same
/// manifest is byte-identical.
inline ExportReport export_dataset(const DatasetManifest& manifest,
                                   const BlobStore& store,
                                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ExportReport report;
  std::filesystem::path features_tmp = dir / "features.ffv.tmp";
  {
    std::ofstream out(features_tmp, std::ios::binary | std::ios::trunc);
    if (!out.is_open())
      raise(Errc::io_error, "cannot write " + features_tmp.string());
    for (const auto& row : manifest.rows) {
      Bytes bytes = store.get(row.feature);
      FeatureVector fv = decode_features(bytes);
      if (fv.observable_id != row.observable_id)
        raise(Errc::integrity_error,
              "feature blob belongs to " + fv.observable_id + ", not " +
                  row.observable_id);
      out.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
      report.feature_bytes += bytes.size();
      ++report.rows;
    }
    if (!out.good())
      raise(Errc::io_error, "short write to " + features_tmp.string());
  }
  std::filesystem::rename(features_tmp, dir / "features.ffv");
  save_manifest(manifest, dir / "manifest.json");
  return report;
}

inline DatasetManifest import_dataset(const std::filesystem::path& dir) {
  return load_manifest(dir / "manifest.json");
}

}  // namespace feedforge
