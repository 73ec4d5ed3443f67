// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "feedforge/blobstore.hpp"
#include "feedforge/errors.hpp"
#include "feedforge/features.hpp"
#include "feedforge/warehouse.hpp"

namespace feedforge {

/// Stub linear model closing the training loop: score = logistic(w.x + b),
/// written back to the warehouse.
struct ScorerConfig {
  std::vector<float> weights;
  std::optional<std::string> weights_ref;  // FFFV blob holding the weights
  double bias = 0.0;
  double threshold = 0.5;
  std::string model_version = "m1";
};

struct ScoreReport {
  size_t scored = 0;
  size_t skipped = 0;              // missing blob or dimension mismatch
  size_t duplicates_skipped = 0;   // (observable, model_version) already scored
  size_t above_threshold = 0;
};

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline std::vector<ColumnSpec> model_scores_schema() {
  return {
      {"observable_id", ColumnType::string, false},
      {"score", ColumnType::float64, false},
      {"model_version", ColumnType::string, false},
      {"scored_at", ColumnType::timestamp, false},
  };
}

/// Score every observable in the features table once per model version.
/// Re-running writes nothing new (idempotent on (observable, version)).
inline ScoreReport run_scorer(Warehouse& warehouse, const BlobStore& store,
                              const ScorerConfig& config,
                              const std::string& features_table,
                              int64_t now_ms) {
  std::vector<float> weights = config.weights;
  if (weights.empty() && config.weights_ref)
    weights = decode_features(store.get(*config.weights_ref)).values;
  if (weights.empty())
    raise(Errc::config_error, "scorer has no weights");

  // Latest blob_ref per observable, by scan order.
  std::map<std::string, std::string> targets;
  {
    auto stream = warehouse.scan_export(features_table, {"observable_id", "blob_ref"});
    while (auto row = stream.next()) {
      const auto& r = *row;
      if (is_null(r[0]) || is_null(r[1])) continue;
      targets[std::get<std::string>(r[0])] = std::get<std::string>(r[1]);
    }
  }

  std::set<std::string> already;
  if (warehouse.has_table("model_scores")) {
    auto stream =
        warehouse.scan_export("model_scores", {"observable_id", "model_version"});
    while (auto row = stream.next()) {
      const auto& r = *row;
      if (std::get<std::string>(r[1]) == config.model_version)
        already.insert(std::get<std::string>(r[0]));
    }
  }

  ScoreReport report;
  std::vector<std::vector<Value>> rows;
  for (const auto& [observable, address] : targets) {
    if (already.count(observable)) {
      ++report.duplicates_skipped;
      continue;
    }
    FeatureVector fv;
    try {
      fv = decode_features(store.get(address));
    } catch (const Error&) {
      ++report.skipped;
      continue;
    }
    if (fv.values.size() != weights.size()) {
      ++report.skipped;
      continue;
    }
    double dot = config.bias;
    for (size_t i = 0; i < weights.size(); ++i)
      dot += static_cast<double>(weights[i]) * static_cast<double>(fv.values[i]);
    double score = logistic(dot);
    if (score > config.threshold) ++report.above_threshold;
    rows.push_back({Value(observable), Value(score), Value(config.model_version),
                    Value(now_ms)});
    ++report.scored;
  }
  if (!rows.empty())
    warehouse.append_rows("model_scores", model_scores_schema(), rows);
  return report;
}

}  // namespace feedforge
