// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0
//
// Operator surface for the pipeline: ingest runs, ad-hoc queries, label
// recomputation, dataset builds and the scoring write-back loop.
//
// Exit codes: 0 ok, 2 config error, 3 query error, 4 pipeline failure.

#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "feedforge/feedforge.hpp"

namespace {

using namespace feedforge;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitQuery = 3;
constexpr int kExitPipeline = 4;

bool use_color() {
  if (std::getenv("NO_COLOR") != nullptr) return false;
  return ::isatty(::fileno(stderr));
}

void print_error(const std::string& message) {
  if (use_color())
    std::cerr << "\x1b[31merror:\x1b[0m " << message << "\n";
  else
    std::cerr << "error: " << message << "\n";
}

/// Point at the offending byte of a query, line by line.
void print_caret(const std::string& sql, size_t offset) {
  size_t line_start = 0, line_no = 1;
  for (size_t i = 0; i < offset && i < sql.size(); ++i) {
    if (sql[i] == '\n') {
      line_start = i + 1;
      ++line_no;
    }
  }
  size_t line_end = sql.find('\n', line_start);
  if (line_end == std::string::npos) line_end = sql.size();
  std::cerr << "  line " << line_no << ": "
            << sql.substr(line_start, line_end - line_start) << "\n";
  std::cerr << "  " << std::string(8 + std::to_string(line_no).size(), ' ')
            << std::string(offset - line_start, ' ') << "^\n";
}

LabelPolicy load_policy(const PipelineConfig& config) {
  if (config.policy_path.empty())
    raise(Errc::config_error, "config has no policy_path");
  std::ifstream in(config.policy_path);
  if (!in.is_open())
    raise(Errc::config_error,
          "cannot open policy " + config.policy_path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded())
    raise(Errc::config_error, "policy file is not valid JSON");
  return LabelPolicy::from_json(j);
}

int cmd_run(const PipelineConfig& config, int64_t duration_ms) {
  RunOptions options;
  options.duration_ms = duration_ms;
  RunSummary summary = run_pipeline(config, options);
  std::cout << summary.to_json().dump() << "\n";
  return kExitOk;
}

int cmd_query(const PipelineConfig& config, const std::string& sql) {
  Warehouse warehouse(config.warehouse_dir);
  try {
    sql::QueryPlan plan = warehouse.parse(sql);
    sql::QueryResult result = warehouse.execute(plan);
    nlohmann::json header;
    nlohmann::json names = nlohmann::json::array();
    for (const auto& c : result.columns) names.push_back(c.name);
    header["columns"] = std::move(names);
    std::cout << header.dump() << "\n";
    for (const auto& row : result.rows) {
      nlohmann::json out = nlohmann::json::object();
      for (size_t i = 0; i < row.size(); ++i)
        out[result.columns[i].name] = value_to_json(row[i]);
      std::cout << out.dump() << "\n";
    }
    return kExitOk;
  } catch (const Error& e) {
    print_error(e.what());
    if (e.code() == Errc::syntax_error && e.has_offset()) print_caret(sql, e.offset());
    return kExitQuery;
  }
}

int cmd_label_recompute(const PipelineConfig& config) {
  Warehouse warehouse(config.warehouse_dir);
  LabelPolicy policy = load_policy(config);
  RecomputeReport report = recompute_all(warehouse, config.evidence_table, policy,
                                         config.labels_table, /*now_ms=*/0);
  warehouse.save_all();
  nlohmann::json j = {{"observables", report.observables},
                      {"malicious", report.malicious},
                      {"benign", report.benign},
                      {"unknown", report.unknown},
                      {"policy_version", policy.policy_version}};
  std::cout << j.dump() << "\n";
  return kExitOk;
}

const DatasetConfig& need_dataset(const PipelineConfig& config) {
  if (!config.dataset)
    raise(Errc::config_error, "config has no dataset section");
  return *config.dataset;
}

int cmd_dataset_build(const PipelineConfig& config, uint64_t seed,
                      std::string out_path) {
  const DatasetConfig& dc = need_dataset(config);
  Warehouse warehouse(config.warehouse_dir);
  BlobStore store(config.blobstore_dir);
  CollectOptions options;
  options.seed = seed;
  options.dataset_id = "dataset-" + std::to_string(seed);
  options.missing_feature = dc.missing_feature;
  CollectReport report;
  DatasetManifest manifest =
      collect(warehouse, store, dc.query, dc.label_table, options, &report);
  if (out_path.empty()) out_path = (dc.output_dir / "manifest.json").string();
  save_manifest(manifest, out_path);
  nlohmann::json j = {{"manifest", out_path},
                      {"rows", report.rows},
                      {"query_rows", report.query_rows},
                      {"unknown_excluded", report.unknown_excluded},
                      {"missing_feature", report.missing_feature},
                      {"checksum", manifest.checksum}};
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_dataset_split(const PipelineConfig& config, const std::string& manifest_path,
                      std::string out_dir, std::optional<int64_t> cutoff,
                      std::optional<double> fraction, uint64_t seed) {
  const DatasetConfig& dc = need_dataset(config);
  DatasetManifest manifest = load_manifest(manifest_path);
  SplitSpec spec;
  if (cutoff) {
    spec = SplitSpec::temporal(*cutoff);
  } else if (fraction) {
    spec = SplitSpec::stratified(*fraction, seed);
  } else if (dc.split) {
    spec = *dc.split;
    if (spec.kind == SplitSpec::Kind::stratified) spec.seed = seed;
  } else {
    raise(Errc::config_error, "no split spec in config or flags");
  }
  if (out_dir.empty()) out_dir = dc.output_dir.string();
  SplitResult result = split(manifest, spec);
  std::filesystem::create_directories(out_dir);
  save_manifest(result.train, std::filesystem::path(out_dir) / "train.manifest.json");
  save_manifest(result.test, std::filesystem::path(out_dir) / "test.manifest.json");
  nlohmann::json j = {{"train_rows", result.train.rows.size()},
                      {"test_rows", result.test.rows.size()},
                      {"degenerate", result.degenerate},
                      {"train_checksum", result.train.checksum},
                      {"test_checksum", result.test.checksum}};
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_dataset_export(const PipelineConfig& config, const std::string& manifest_path,
                       std::string out_dir) {
  const DatasetConfig& dc = need_dataset(config);
  BlobStore store(config.blobstore_dir);
  DatasetManifest manifest = load_manifest(manifest_path);
  if (out_dir.empty()) out_dir = (dc.output_dir / "export").string();
  ExportReport report = export_dataset(manifest, store, out_dir);
  nlohmann::json j = {{"rows", report.rows},
                      {"feature_bytes", report.feature_bytes},
                      {"directory", out_dir}};
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_score(const PipelineConfig& config) {
  if (!config.scorer) raise(Errc::config_error, "config has no scorer section");
  Warehouse warehouse(config.warehouse_dir);
  BlobStore store(config.blobstore_dir);
  ScoreReport report = run_scorer(warehouse, store, *config.scorer,
                                  config.features_table, /*now_ms=*/0);
  warehouse.save_all();
  nlohmann::json j = {{"scored", report.scored},
                      {"skipped", report.skipped},
                      {"duplicates_skipped", report.duplicates_skipped},
                      {"above_threshold", report.above_threshold},
                      {"model_version", config.scorer->model_version}};
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_stats(const PipelineConfig& config) {
  nlohmann::json j;
  {
    DurableQueue queue(config.queue);
    QueueStats qs = queue.stats();
    j["queue"] = {{"visible", qs.visible},
                  {"in_flight", qs.in_flight},
                  {"dead_letters", qs.dead_lettered}};
  }
  Warehouse warehouse(config.warehouse_dir);
  nlohmann::json tables = nlohmann::json::object();
  for (const auto& name : warehouse.table_names())
    tables[name] = {{"rows", warehouse.row_count(name)},
                    {"columns", warehouse.table_schema(name).size()}};
  j["tables"] = std::move(tables);
  if (warehouse.has_table(config.labels_table)) {
    size_t population = warehouse.row_count(config.labels_table);
    if (!config.observables_table.empty() &&
        warehouse.has_table(config.observables_table))
      population = warehouse.row_count(config.observables_table);
    if (population > 0)
      j["coverage"] =
          label_coverage(*warehouse.snapshot(config.labels_table), population);
  }
  std::cout << j.dump() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"feedforge: desk-scale security-ML data pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "pipeline config (JSON)")->required();

  auto* run = app.add_subcommand("run", "ingest feeds, aggregate, recompute labels");
  int64_t duration_ms = 0;
  run->add_option("--duration-ms", duration_ms,
                  "stop draining after this wall budget (default: drain fully)");
  auto* query = app.add_subcommand("query", "run a SQL query, JSONL to stdout");
  std::vector<std::string> sql_words;
  query->add_option("sql", sql_words, "query text")->required()->expected(-1);
  auto* label = app.add_subcommand("label-recompute", "re-fuse labels under the policy file");
  auto* build = app.add_subcommand("dataset-build", "collect a dataset manifest");
  uint64_t seed = 0;
  std::string out_path, manifest_path, out_dir;
  build->add_option("--seed", seed, "manifest row-order seed");
  build->add_option("--out", out_path, "manifest output path");
  auto* split_cmd = app.add_subcommand("dataset-split", "split a manifest into train/test");
  std::optional<int64_t> cutoff;
  std::optional<double> fraction;
  split_cmd->add_option("--manifest", manifest_path, "input manifest")->required();
  split_cmd->add_option("--out-dir", out_dir, "output directory");
  split_cmd->add_option("--cutoff-ms", cutoff, "temporal split cutoff");
  split_cmd->add_option("--test-fraction", fraction, "stratified test fraction");
  split_cmd->add_option("--seed", seed, "stratified shuffle seed");
  auto* export_cmd = app.add_subcommand("dataset-export", "export manifest + features file");
  export_cmd->add_option("--manifest", manifest_path, "input manifest")->required();
  export_cmd->add_option("--out-dir", out_dir, "output directory");
  auto* score = app.add_subcommand("score", "score features and write back model_scores");
  auto* stats = app.add_subcommand("stats", "queue, table and coverage stats");

  CLI11_PARSE(app, argc, argv);

  PipelineConfig config;
  try {
    config = PipelineConfig::load(config_path);
  } catch (const Error& e) {
    print_error(e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    print_error(e.what());
    return kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(config, duration_ms);
    if (query->parsed()) {
      std::string sql;
      for (const auto& w : sql_words) {
        if (!sql.empty()) sql += " ";
        sql += w;
      }
      return cmd_query(config, sql);
    }
    if (label->parsed()) return cmd_label_recompute(config);
    if (build->parsed()) return cmd_dataset_build(config, seed, out_path);
    if (split_cmd->parsed())
      return cmd_dataset_split(config, manifest_path, out_dir, cutoff, fraction, seed);
    if (export_cmd->parsed()) return cmd_dataset_export(config, manifest_path, out_dir);
    if (score->parsed()) return cmd_score(config);
    if (stats->parsed()) return cmd_stats(config);
  } catch (const Error& e) {
    print_error(e.what());
    return e.code() == Errc::config_error || e.code() == Errc::invalid_argument
               ? kExitConfig
               : kExitPipeline;
  } catch (const std::exception& e) {
    print_error(e.what());
    return kExitPipeline;
  }
  return kExitOk;
}
