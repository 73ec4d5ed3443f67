// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "feedforge/dataset.hpp"
#include "feedforge/errors.hpp"
#include "feedforge/ingest.hpp"
#include "feedforge/labeling.hpp"
#include "feedforge/scorer.hpp"

namespace feedforge {

struct AggregationJob {
  std::string job_name;
  std::string sql;
  std::string output_table;
};

struct DatasetConfig {
  std::string query;
  std::string label_table = "labels";
  std::filesystem::path output_dir;
  std::optional<SplitSpec> split;
  MissingFeaturePolicy missing_feature = MissingFeaturePolicy::strict;
};

/// Everything cmd_run needs, parsed from one JSON file.
struct PipelineConfig {
  QueueConfig queue;
  std::vector<FeedConfig> feeds;
  std::filesystem::path warehouse_dir;
  std::filesystem::path blobstore_dir;
  std::filesystem::path policy_path;
  std::string evidence_table = "evidence";
  std::string labels_table = "labels";
  std::string features_table = "features";
  std::string observables_table;  // coverage population source (optional)
  std::vector<AggregationJob> aggregations;
  size_t consumers = 1;
  std::optional<ScorerConfig> scorer;
  std::optional<DatasetConfig> dataset;

  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::filesystem::path& path);

  std::map<std::string, FeedConfig> feeds_by_id() const {
    std::map<std::string, FeedConfig> out;
    for (const auto& f : feeds) out.emplace(f.feed_id, f);
    return out;
  }
};

inline SplitSpec split_spec_from_json(const nlohmann::json& j) {
  std::string kind = j.value("kind", std::string("temporal"));
  if (kind == "temporal") {
    if (!j.contains("cutoff_ms"))
      raise(Errc::config_error, "temporal split needs cutoff_ms");
    return SplitSpec::temporal(j.at("cutoff_ms").get<int64_t>());
  }
  if (kind == "stratified") {
    if (!j.contains("test_fraction"))
      raise(Errc::config_error, "stratified split needs test_fraction");
    return SplitSpec::stratified(j.at("test_fraction").get<double>(),
                                 j.value("seed", uint64_t{0}));
  }
  raise(Errc::config_error, "unknown split kind '" + kind + "'");
}

inline PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  PipelineConfig c;
  try {
    const auto& q = j.at("queue");
    c.queue.name = q.value("name", std::string("main"));
    c.queue.visibility_timeout_ms =
        q.value("visibility_timeout_ms", int64_t{30'000});
    c.queue.max_receives = q.value("max_receives", uint32_t{5});
    c.queue.wal_path = q.at("wal_path").get<std::string>();
    c.queue.fsync_on_append = q.value("fsync", false);

    for (const auto& f : j.at("feeds")) c.feeds.push_back(FeedConfig::from_json(f));

    c.warehouse_dir = j.at("warehouse_dir").get<std::string>();
    c.blobstore_dir = j.at("blobstore_dir").get<std::string>();
    if (j.contains("policy_path"))
      c.policy_path = j.at("policy_path").get<std::string>();
    c.evidence_table = j.value("evidence_table", std::string("evidence"));
    c.labels_table = j.value("labels_table", std::string("labels"));
    c.features_table = j.value("features_table", std::string("features"));
    c.observables_table = j.value("observables_table", std::string());
    if (j.contains("aggregations")) {
      for (const auto& a : j.at("aggregations")) {
        AggregationJob job;
        job.job_name = a.at("job_name").get<std::string>();
        job.sql = a.at("sql").get<std::string>();
        job.output_table = a.at("output_table").get<std::string>();
        c.aggregations.push_back(std::move(job));
      }
    }
    c.consumers = j.value("consumers", size_t{1});
    if (j.contains("scorer")) {
      const auto& s = j.at("scorer");
      ScorerConfig sc;
      if (s.contains("weights"))
        for (const auto& w : s.at("weights")) sc.weights.push_back(w.get<float>());
      if (s.contains("weights_ref"))
        sc.weights_ref = s.at("weights_ref").get<std::string>();
      sc.bias = s.value("bias", 0.0);
      sc.threshold = s.value("threshold", 0.5);
      sc.model_version = s.value("model_version", std::string("m1"));
      c.scorer = std::move(sc);
    }
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      DatasetConfig dc;
      dc.query = d.at("query").get<std::string>();
      dc.label_table = d.value("label_table", c.labels_table);
      dc.output_dir = d.value("output_dir", std::string("dataset"));
      if (d.contains("split")) dc.split = split_spec_from_json(d.at("split"));
      if (d.value("missing_feature", std::string("strict")) == "skip")
        dc.missing_feature = MissingFeaturePolicy::skip;
      c.dataset = std::move(dc);
    }
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::config_error, std::string("bad pipeline config: ") + e.what());
  }

  if (c.feeds.empty())
    raise(Errc::config_error, "config needs at least one feed");
  if (c.consumers < 1) raise(Errc::config_error, "consumers must be >= 1");
  std::set<std::string> paths;
  for (const auto& p :
       {c.queue.wal_path, c.warehouse_dir, c.blobstore_dir, c.policy_path}) {
    if (p.empty()) continue;
    if (!paths.insert(std::filesystem::weakly_canonical(p).string()).second)
      raise(Errc::config_error, "config paths must be distinct: " + p.string());
  }
  return c;
}

inline PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in.is_open())
    raise(Errc::config_error, "cannot open config " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded())
    raise(Errc::config_error, "config is not valid JSON: " + path.string());
  return from_json(j);
}

struct RunOptions {
  std::optional<FaultPlan> fault;       // applies to the first consumer
  int64_t duration_ms = 0;              // wall budget for draining; 0 = drain fully
};

struct RunSummary {
  uint64_t records_read = 0;
  uint64_t malformed_skipped = 0;
  uint64_t batches_emitted = 0;
  uint64_t batches_applied = 0;
  uint64_t records_inserted = 0;
  uint64_t duplicates_skipped = 0;
  uint64_t blobs_stored = 0;
  uint64_t poison_skipped = 0;
  size_t dead_letters = 0;
  bool consumer_crashed = false;
  bool stopped_at_duration = false;
  std::vector<AggregationReport> aggregations;
  std::optional<RecomputeReport> labels;
  std::optional<double> coverage;
  std::map<std::string, ProducerReport> per_feed;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["records_read"] = records_read;
    j["malformed_skipped"] = malformed_skipped;
    j["batches_emitted"] = batches_emitted;
    j["batches_applied"] = batches_applied;
    j["records_inserted"] = records_inserted;
    j["duplicates_skipped"] = duplicates_skipped;
    j["blobs_stored"] = blobs_stored;
    j["poison_skipped"] = poison_skipped;
    j["dead_letters"] = dead_letters;
    j["stopped_at_duration"] = stopped_at_duration;
    nlohmann::json aggs = nlohmann::json::array();
    for (const auto& a : aggregations) {
      nlohmann::json input = nlohmann::json::object();
      for (const auto& [t, n] : a.input_rows) input[t] = n;
      aggs.push_back({{"job_name", a.job_name},
                      {"output_table", a.output_table},
                      {"input_rows", input},
                      {"output_rows", a.output_rows}});
    }
    j["aggregations"] = std::move(aggs);
    if (labels)
      j["labels"] = {{"observables", labels->observables},
                     {"malicious", labels->malicious},
                     {"benign", labels->benign},
                     {"unknown", labels->unknown}};
    if (coverage)
      j["coverage"] = *coverage;
    else
      j["coverage"] = nullptr;
    nlohmann::json feeds = nlohmann::json::object();
    for (const auto& [id, r] : per_feed)
      feeds[id] = {{"records_read", r.records_read},
                   {"malformed_skipped", r.malformed_skipped},
                   {"batches_emitted", r.batches_emitted}};
    j["per_feed"] = std::move(feeds);
    return j;
  }
};

/// Shared handles for the stages the CLI runs piecemeal.
struct PipelineContext {
  explicit PipelineContext(const PipelineConfig& config)
      : queue(config.queue),
        warehouse(config.warehouse_dir),
        blobstore(config.blobstore_dir) {}

  DurableQueue queue;
  Warehouse warehouse;
  BlobStore blobstore;
};

/// Figure-1 loop minus model training: producers to completion, consumers
/// to drain, then aggregation jobs and a label recompute, in that order.
inline RunSummary run_pipeline(const PipelineConfig& config,
                               PipelineContext& ctx,
                               const RunOptions& options = {}) {
  RunSummary summary;

  // Producers: one worker per feed, each on its own logical timeline.
  {
    std::vector<std::thread> workers;
    std::mutex merge_mu;
    std::exception_ptr first_error;
    for (const auto& feed : config.feeds) {
      workers.emplace_back([&, feed]() {
        try {
          SimulatedClock producer_clock(0);
          ProducerReport report = run_producer(feed, ctx.queue, producer_clock);
          std::lock_guard lock(merge_mu);
          summary.records_read += report.records_read;
          summary.malformed_skipped += report.malformed_skipped;
          summary.batches_emitted += report.batches_emitted;
          summary.per_feed.emplace(feed.feed_id, std::move(report));
        } catch (...) {
          std::lock_guard lock(merge_mu);
          if (!first_error) first_error = std::current_exception();
        }
      });
    }
    for (auto& w : workers) w.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  // Consumers: a worker pool over one shared logical clock. Each round
  // runs the pool to quiescence; anything left in flight afterwards was
  // never acknowledged (lost ack, crash, poison), so time jumps past the
  // visibility timeout and the next round picks up the redeliveries.
  {
    auto feeds = config.feeds_by_id();
    SimulatedClock consumer_clock(0);
    bool first_round = true;
    auto drain_start = std::chrono::steady_clock::now();
    auto out_of_budget = [&] {
      if (options.duration_ms <= 0) return false;
      auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - drain_start)
                         .count();
      return elapsed >= options.duration_ms;
    };
    for (;;) {
      std::vector<std::thread> workers;
      std::mutex merge_mu;
      std::exception_ptr first_error;
      for (size_t i = 0; i < config.consumers; ++i) {
        ConsumerOptions copts;
        copts.advance_clock_when_starved = false;
        if (i == 0 && first_round && options.fault) copts.fault = options.fault;
        workers.emplace_back([&, copts]() {
          try {
            ConsumerReport report =
                run_consumer(ctx.queue, ctx.warehouse, ctx.blobstore,
                             consumer_clock, feeds, copts);
            std::lock_guard lock(merge_mu);
            summary.batches_applied += report.batches_applied;
            summary.records_inserted += report.records_inserted;
            summary.duplicates_skipped += report.duplicates_skipped;
            summary.blobs_stored += report.blobs_stored;
            summary.poison_skipped += report.poison_skipped;
            summary.consumer_crashed |= report.crashed;
          } catch (...) {
            std::lock_guard lock(merge_mu);
            if (!first_error) first_error = std::current_exception();
          }
        });
      }
      for (auto& w : workers) w.join();
      if (first_error) std::rethrow_exception(first_error);
      first_round = false;
      QueueStats stats = ctx.queue.stats();
      if (stats.visible == 0 && stats.in_flight == 0) break;
      if (out_of_budget()) {
        summary.stopped_at_duration = true;  // undrained work stays queued
        break;
      }
      consumer_clock.advance_ms(config.queue.visibility_timeout_ms + 1);
    }
  }

  for (const auto& job : config.aggregations)
    summary.aggregations.push_back(
        ctx.warehouse.run_aggregation(job.job_name, job.sql, job.output_table));

  if (!config.policy_path.empty() && ctx.warehouse.has_table(config.evidence_table)) {
    std::ifstream in(config.policy_path);
    if (!in.is_open())
      raise(Errc::config_error, "cannot open policy " + config.policy_path.string());
    nlohmann::json pj = nlohmann::json::parse(in, nullptr, false);
    if (pj.is_discarded())
      raise(Errc::config_error, "policy file is not valid JSON");
    LabelPolicy policy = LabelPolicy::from_json(pj);
    summary.labels = recompute_all(ctx.warehouse, config.evidence_table, policy,
                                   config.labels_table, /*now_ms=*/0);
    size_t population = summary.labels->observables;
    if (!config.observables_table.empty() &&
        ctx.warehouse.has_table(config.observables_table))
      population = ctx.warehouse.row_count(config.observables_table);
    if (population > 0)
      summary.coverage =
          label_coverage(*ctx.warehouse.snapshot(config.labels_table), population);
  }

  summary.dead_letters = ctx.queue.stats().dead_lettered;
  ctx.warehouse.save_all();
  return summary;
}

inline RunSummary run_pipeline(const PipelineConfig& config,
                               const RunOptions& options = {}) {
  PipelineContext ctx(config);
  return run_pipeline(config, ctx, options);
}

}  // namespace feedforge
