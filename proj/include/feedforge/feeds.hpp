// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "feedforge/clock.hpp"
#include "feedforge/errors.hpp"
#include "feedforge/hash.hpp"
#include "feedforge/rng.hpp"

namespace feedforge {

enum class AdapterKind { jsonl_directory, http_poll_stub, synthetic };

inline AdapterKind adapter_kind_from(std::string_view s) {
  if (s == "jsonl_directory") return AdapterKind::jsonl_directory;
  if (s == "http_poll_stub") return AdapterKind::http_poll_stub;
  if (s == "synthetic") return AdapterKind::synthetic;
  raise(Errc::config_error, "unknown adapter '" + std::string(s) + "'");
}

struct FeedTarget {
  enum class Kind { warehouse_table, blobstore };
  Kind kind = Kind::warehouse_table;
  std::string table;  // destination table, or the blob metadata table
};

struct FeedConfig {
  std::string feed_id;
  AdapterKind adapter = AdapterKind::synthetic;
  nlohmann::json params;
  size_t max_batch_size = 500;
  int64_t max_batch_age_ms = 60'000;
  FeedTarget target;

  static FeedConfig from_json(const nlohmann::json& j) {
    FeedConfig f;
    try {
      f.feed_id = j.at("feed_id").get<std::string>();
      f.adapter = adapter_kind_from(j.at("adapter").get<std::string>());
      if (j.contains("params")) f.params = j.at("params");
      if (j.contains("max_batch_size"))
        f.max_batch_size = j.at("max_batch_size").get<size_t>();
      if (j.contains("max_batch_age_ms"))
        f.max_batch_age_ms = j.at("max_batch_age_ms").get<int64_t>();
      const auto& target = j.at("target");
      if (target.contains("warehouse_table")) {
        f.target.kind = FeedTarget::Kind::warehouse_table;
        f.target.table = target.at("warehouse_table").get<std::string>();
      } else if (target.contains("blobstore")) {
        f.target.kind = FeedTarget::Kind::blobstore;
        f.target.table = target.at("blobstore")
                             .value("metadata_table", std::string("features"));
      } else {
        raise(Errc::config_error,
              "feed '" + f.feed_id + "' needs warehouse_table or blobstore target");
      }
    } catch (const nlohmann::json::exception& e) {
      raise(Errc::config_error, std::string("bad feed config: ") + e.what());
    }
    if (f.max_batch_size < 1 || f.max_batch_age_ms < 1)
      raise(Errc::config_error, "batch limits must be >= 1");
    return f;
  }
};

/// Pull-based source of raw JSON documents. Synthetic feeds drive the
/// injected clock to model inter-arrival gaps.
class FeedAdapter {
 public:
  virtual ~FeedAdapter() = default;
  virtual std::optional<std::string> next(Clock& clock) = 0;
};

namespace adapters {

class JsonlDirectory final : public FeedAdapter {
 public:
  explicit JsonlDirectory(const nlohmann::json& params) {
    std::filesystem::path dir = params.value("dir", std::string());
    if (dir.empty())
      raise(Errc::config_error, "jsonl_directory needs a 'dir' parameter");
    if (!std::filesystem::is_directory(dir))
      raise(Errc::io_error, "feed directory " + dir.string() + " does not exist");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    files_ = std::move(files);
  }

  std::optional<std::string> next(Clock&) override {
    for (;;) {
      if (current_.is_open()) {
        std::string line;
        while (std::getline(current_, line)) {
          if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
          return line;
        }
        current_.close();
      }
      if (file_index_ >= files_.size()) return std::nullopt;
      current_.open(files_[file_index_++]);
      if (!current_.is_open())
        raise(Errc::io_error, "cannot read " + files_[file_index_ - 1].string());
    }
  }

 private:
  std::vector<std::filesystem::path> files_;
  std::ifstream current_;
  size_t file_index_ = 0;
};

/// One blocking GET whose body is JSONL; stands in for real poll loops.
class HttpPollStub final : public FeedAdapter {
 public:
  explicit HttpPollStub(const nlohmann::json& params)
      : url_(params.value("url", std::string())) {
    if (url_.empty())
      raise(Errc::config_error, "http_poll_stub needs a 'url' parameter");
  }

  std::optional<std::string> next(Clock&) override {
    if (!fetched_) fetch();
    if (lines_.empty()) return std::nullopt;
    std::string line = std::move(lines_.front());
    lines_.pop_front();
    return line;
  }

 private:
  void fetch() {
    fetched_ = true;
    constexpr std::string_view scheme = "http://";
    if (url_.rfind(scheme, 0) != 0)
      raise(Errc::config_error, "http_poll_stub only speaks http:// URLs");
    std::string rest = url_.substr(scheme.size());
    size_t slash = rest.find('/');
    std::string host = slash == std::string::npos ? rest : rest.substr(0, slash);
    std::string path = slash == std::string::npos ? "/" : rest.substr(slash);
    httplib::Client client(("http://" + host).c_str());
    client.set_connection_timeout(5);
    auto res = client.Get(path.c_str());
    if (!res || res->status != 200)
      raise(Errc::io_error, "poll of " + url_ + " failed");
    std::string body = res->body;
    size_t start = 0;
    while (start < body.size()) {
      size_t end = body.find('\n', start);
      std::string line = body.substr(
          start, end == std::string::npos ? std::string::npos : end - start);
      if (line.find_first_not_of(" \t\r\n") != std::string::npos)
        lines_.push_back(std::move(line));
      if (end == std::string::npos) break;
      start = end + 1;
    }
  }

  std::string url_;
  bool fetched_ = false;
  std::deque<std::string> lines_;
};

/// Deterministic record generator. Parameters:
///   profile          scan | evidence | features   (default scan)
///   records          how many documents to emit
///   malware_ratio    P(observable is malicious) in ground truth
///   vendor_count     vendors voting per observable (evidence profile)
///   time_start_ms / time_end_ms   event_time range
///   seed             generator randomness
///   population_seed  observable universe (defaults to seed; share it
///                    across feeds so their observables line up)
///   observables      scan profile: distinct observables (0 = one/record)
///   dims             features profile: vector width
///   inter_arrival_ms clock advance before each record
class Synthetic final : public FeedAdapter {
 public:
  explicit Synthetic(const nlohmann::json& params) {
    profile_ = params.value("profile", std::string("scan"));
    if (profile_ != "scan" && profile_ != "evidence" && profile_ != "features")
      raise(Errc::config_error, "unknown synthetic profile '" + profile_ + "'");
    records_ = params.value("records", uint64_t{0});
    malware_ratio_ = params.value("malware_ratio", 0.3);
    vendor_count_ = params.value("vendor_count", uint64_t{10});
    time_start_ = params.value("time_start_ms", int64_t{0});
    time_end_ = params.value("time_end_ms", int64_t{86'400'000});
    seed_ = params.value("seed", uint64_t{1});
    population_seed_ = params.value("population_seed", seed_);
    observables_ = params.value("observables", uint64_t{0});
    dims_ = params.value("dims", uint32_t{8});
    inter_arrival_ = params.value("inter_arrival_ms", int64_t{0});
    if (profile_ == "evidence" && vendor_count_ < 1)
      raise(Errc::config_error, "evidence profile needs vendor_count >= 1");
    if (time_end_ <= time_start_)
      raise(Errc::config_error, "time_end_ms must exceed time_start_ms");
  }

  std::optional<std::string> next(Clock& clock) override {
    if (index_ >= records_) return std::nullopt;
    if (inter_arrival_ > 0) clock.advance_ms(inter_arrival_);
    uint64_t i = index_++;
    nlohmann::ordered_json doc;
    if (profile_ == "scan") {
      uint64_t obs = observables_ > 0 ? i % observables_ : i;
      Rng rng(mix_seed(seed_, i));
      doc["observable_id"] = observable_id(obs);
      doc["event_time"] = event_time(rng);
      nlohmann::ordered_json file;
      file["size"] = rng.range(512, 8 * 1024 * 1024);
      file["entropy"] = rng.next_unit() * 8.0;
      static constexpr const char* kTypes[] = {"pe", "elf", "pdf", "doc", "js"};
      file["type"] = kTypes[rng.below(5)];
      file["packed"] = rng.chance(0.25);
      doc["file"] = std::move(file);
      doc["truth_malware"] = is_malware(obs);
    } else if (profile_ == "evidence") {
      uint64_t obs = i / vendor_count_;
      uint64_t vendor = i % vendor_count_;
      Rng rng(mix_seed(mix_seed(seed_, obs), vendor));
      int64_t t = event_time(rng);
      doc["observable_id"] = observable_id(obs);
      doc["event_time"] = t;
      doc["observed_at"] = t;
      doc["source_class"] = "vendor";
      doc["source_name"] = "av" + std::to_string(vendor);
      double draw = rng.next_unit();
      const char* verdict;
      if (is_malware(obs))
        verdict = draw < 0.80 ? "malicious" : (draw < 0.95 ? "benign" : "unknown");
      else
        verdict = draw < 0.03 ? "malicious" : (draw < 0.95 ? "benign" : "unknown");
      doc["verdict"] = verdict;
    } else {  // features
      uint64_t obs = observables_ > 0 ? i % observables_ : i;
      Rng rng(mix_seed(mix_seed(seed_, 0xfea7), obs));
      doc["observable_id"] = observable_id(obs);
      doc["event_time"] = event_time(rng);
      doc["dims"] = dims_;
      nlohmann::ordered_json values = nlohmann::ordered_json::array();
      for (uint32_t d = 0; d < dims_; ++d) {
        float v = static_cast<float>(rng.next_unit() * 2.0 - 1.0);
        values.push_back(static_cast<double>(v));
      }
      doc["features"] = std::move(values);
    }
    return doc.dump();
  }

 private:
  std::string observable_id(uint64_t obs) const {
    std::string key = "ffobs:" + std::to_string(population_seed_) + ":" +
                      std::to_string(obs);
    return sha256_hex(key);
  }

  bool is_malware(uint64_t obs) const {
    uint64_t s = mix_seed(population_seed_, obs);
    Rng rng(s);
    return rng.next_unit() < malware_ratio_;
  }

  int64_t event_time(Rng& rng) const { return rng.range(time_start_, time_end_); }

  std::string profile_;
  uint64_t records_ = 0;
  double malware_ratio_ = 0.3;
  uint64_t vendor_count_ = 10;
  int64_t time_start_ = 0;
  int64_t time_end_ = 0;
  uint64_t seed_ = 1;
  uint64_t population_seed_ = 1;
  uint64_t observables_ = 0;
  uint32_t dims_ = 8;
  int64_t inter_arrival_ = 0;
  uint64_t index_ = 0;
};

}  // namespace adapters

inline std::unique_ptr<FeedAdapter> make_adapter(const FeedConfig& feed) {
  switch (feed.adapter) {
    case AdapterKind::jsonl_directory:
      return std::make_unique<adapters::JsonlDirectory>(feed.params);
    case AdapterKind::http_poll_stub:
      return std::make_unique<adapters::HttpPollStub>(feed.params);
    case AdapterKind::synthetic:
      return std::make_unique<adapters::Synthetic>(feed.params);
  }
  raise(Errc::config_error, "unreachable adapter kind");
}

}  // namespace feedforge
