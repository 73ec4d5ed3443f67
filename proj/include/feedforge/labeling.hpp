// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "feedforge/errors.hpp"
#include "feedforge/warehouse.hpp"

namespace feedforge {

enum class SourceClass { manual, sandbox, vendor };
enum class Verdict { malicious, benign, unknown };

inline const char* source_class_name(SourceClass c) {
  switch (c) {
    case SourceClass::manual: return "manual";
    case SourceClass::sandbox: return "sandbox";
    case SourceClass::vendor: return "vendor";
  }
  return "?";
}

inline SourceClass source_class_from(std::string_view s) {
  if (s == "manual") return SourceClass::manual;
  if (s == "sandbox") return SourceClass::sandbox;
  if (s == "vendor") return SourceClass::vendor;
  raise(Errc::type_mismatch, "unknown source_class '" + std::string(s) + "'");
}

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::malicious: return "malicious";
    case Verdict::benign: return "benign";
    case Verdict::unknown: return "unknown";
  }
  return "?";
}

inline Verdict verdict_from(std::string_view s) {
  if (s == "malicious") return Verdict::malicious;
  if (s == "benign") return Verdict::benign;
  if (s == "unknown") return Verdict::unknown;
  raise(Errc::type_mismatch, "unknown verdict '" + std::string(s) + "'");
}

/// One verdict claim from one source at one time.
struct LabelEvidence {
  std::string observable_id;
  SourceClass source_class = SourceClass::vendor;
  std::string source_name;
  Verdict verdict = Verdict::unknown;
  int64_t observed_at = 0;
};

struct VendorRule {
  uint32_t malicious_min = 5;  // K_mal
  uint32_t benign_max = 0;     // K_ben
  uint32_t min_total = 10;
};

/// Declarative, versioned fusion policy: class precedence plus vendor vote
/// thresholds. Policies are data so relabeling is a config edit, not code.
struct LabelPolicy {
  std::string policy_version = "v1";
  std::vector<SourceClass> precedence{SourceClass::manual, SourceClass::sandbox,
                                      SourceClass::vendor};
  VendorRule vendor_rule;
  std::optional<int64_t> staleness_window_ms;

  void validate() const {
    if (vendor_rule.benign_max >= vendor_rule.malicious_min)
      raise(Errc::config_error, "policy requires benign_max < malicious_min");
    if (vendor_rule.malicious_min < 1 || vendor_rule.min_total < 1)
      raise(Errc::config_error, "vendor thresholds must be positive");
    bool seen[3] = {false, false, false};
    if (precedence.size() != 3)
      raise(Errc::config_error, "precedence must order all three source classes");
    for (auto c : precedence) seen[static_cast<int>(c)] = true;
    if (!seen[0] || !seen[1] || !seen[2])
      raise(Errc::config_error, "precedence must be a permutation of the classes");
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["policy_version"] = policy_version;
    nlohmann::json prec = nlohmann::json::array();
    for (auto c : precedence) prec.push_back(source_class_name(c));
    j["precedence"] = std::move(prec);
    j["vendor_rule"] = {{"malicious_min", vendor_rule.malicious_min},
                        {"benign_max", vendor_rule.benign_max},
                        {"min_total", vendor_rule.min_total}};
    if (staleness_window_ms) j["staleness_window_ms"] = *staleness_window_ms;
    return j;
  }

  static LabelPolicy from_json(const nlohmann::json& j) {
    LabelPolicy p;
    try {
      p.policy_version = j.at("policy_version").get<std::string>();
      if (j.contains("precedence")) {
        p.precedence.clear();
        for (const auto& s : j.at("precedence"))
          p.precedence.push_back(source_class_from(s.get<std::string>()));
      }
      const auto& r = j.at("vendor_rule");
      p.vendor_rule.malicious_min = r.at("malicious_min").get<uint32_t>();
      p.vendor_rule.benign_max = r.at("benign_max").get<uint32_t>();
      p.vendor_rule.min_total = r.at("min_total").get<uint32_t>();
      if (j.contains("staleness_window_ms"))
        p.staleness_window_ms = j.at("staleness_window_ms").get<int64_t>();
    } catch (const nlohmann::json::exception& e) {
      raise(Errc::config_error, std::string("bad policy file: ") + e.what());
    }
    p.validate();
    return p;
  }
};

/// Fused per-observable verdict under a policy version.
struct Label {
  std::string observable_id;
  Verdict verdict = Verdict::unknown;
  double score = 0.0;  // vendor decisions: malicious/total; manual/sandbox: 0 or 1
  std::optional<SourceClass> deciding_class;
  std::string policy_version;
  int64_t computed_at = 0;
};

/// Fuse one observable's evidence. Precedence walk: manual/sandbox take
/// the latest non-unknown verdict (timestamp ties go malicious); the
/// vendor class counts the latest verdict per vendor against the
/// thresholds; everything falling through is unknown.
inline Label fuse_one(std::span<const LabelEvidence> evidence,
                      const LabelPolicy& policy, int64_t now_ms) {
  Label label;
  label.policy_version = policy.policy_version;
  label.computed_at = now_ms;
  if (!evidence.empty()) label.observable_id = evidence.front().observable_id;
  for (const auto& e : evidence)
    if (e.observable_id != label.observable_id)
      raise(Errc::invalid_argument, "fuse_one evidence spans observables");

  auto fresh = [&](const LabelEvidence& e) {
    if (!policy.staleness_window_ms) return true;
    return e.observed_at >= now_ms - *policy.staleness_window_ms;
  };
  // Higher wins on equal timestamps: malicious > benign > unknown.
  auto severity = [](Verdict v) {
    switch (v) {
      case Verdict::malicious: return 2;
      case Verdict::benign: return 1;
      case Verdict::unknown: return 0;
    }
    return 0;
  };

  for (SourceClass cls : policy.precedence) {
    if (cls == SourceClass::manual || cls == SourceClass::sandbox) {
      const LabelEvidence* best = nullptr;
      for (const auto& e : evidence) {
        if (e.source_class != cls || e.verdict == Verdict::unknown || !fresh(e))
          continue;
        if (!best || e.observed_at > best->observed_at ||
            (e.observed_at == best->observed_at &&
             severity(e.verdict) > severity(best->verdict)))
          best = &e;
      }
      if (best) {
        label.verdict = best->verdict;
        label.score = best->verdict == Verdict::malicious ? 1.0 : 0.0;
        label.deciding_class = cls;
        return label;
      }
    } else {
      // Latest claim per vendor, then threshold voting over the counts.
      std::map<std::string, const LabelEvidence*> latest;
      for (const auto& e : evidence) {
        if (e.source_class != SourceClass::vendor || !fresh(e)) continue;
        auto [it, inserted] = latest.emplace(e.source_name, &e);
        if (!inserted) {
          const LabelEvidence* cur = it->second;
          if (e.observed_at > cur->observed_at ||
              (e.observed_at == cur->observed_at &&
               severity(e.verdict) > severity(cur->verdict)))
            it->second = &e;
        }
      }
      uint32_t malicious = 0, total = 0;
      for (const auto& [name, e] : latest) {
        if (e->verdict == Verdict::unknown) continue;
        ++total;
        if (e->verdict == Verdict::malicious) ++malicious;
      }
      if (malicious >= policy.vendor_rule.malicious_min) {
        label.verdict = Verdict::malicious;
        label.score = static_cast<double>(malicious) / static_cast<double>(total);
        label.deciding_class = SourceClass::vendor;
        return label;
      }
      if (total >= policy.vendor_rule.min_total &&
          malicious <= policy.vendor_rule.benign_max) {
        label.verdict = Verdict::benign;
        label.score = static_cast<double>(malicious) / static_cast<double>(total);
        label.deciding_class = SourceClass::vendor;
        return label;
      }
    }
  }
  label.verdict = Verdict::unknown;
  label.deciding_class.reset();
  label.score = 0.0;
  return label;
}

struct RecomputeReport {
  size_t observables = 0;
  size_t malicious = 0;
  size_t benign = 0;
  size_t unknown = 0;
};

inline std::vector<ColumnSpec> labels_schema() {
  return {
      {"observable_id", ColumnType::string, false},
      {"verdict", ColumnType::string, false},
      {"score", ColumnType::float64, false},
      {"deciding_class", ColumnType::string, true},
      {"policy_version", ColumnType::string, false},
      {"computed_at", ColumnType::timestamp, false},
  };
}

/// Full recomputation: read the evidence table, fuse per observable, and
/// atomically replace the labels table so a policy edit propagates to
/// every observable at once.
inline RecomputeReport recompute_all(Warehouse& warehouse,
                                     const std::string& evidence_table,
                                     const LabelPolicy& policy,
                                     const std::string& labels_table,
                                     int64_t now_ms) {
  policy.validate();
  // Schema check happens up front; a mismatch aborts before any write.
  auto schema = warehouse.table_schema(evidence_table);
  auto col_of = [&](std::string_view name, bool need_string) -> size_t {
    for (size_t i = 0; i < schema.size(); ++i) {
      if (schema[i].name != name) continue;
      bool ok = need_string
                    ? schema[i].type == ColumnType::string
                    : schema[i].type == ColumnType::int64 ||
                          schema[i].type == ColumnType::timestamp;
      if (!ok)
        raise(Errc::type_mismatch, "evidence column '" + std::string(name) +
                                       "' has the wrong type");
      return i;
    }
    raise(Errc::type_mismatch,
          "evidence table lacks column '" + std::string(name) + "'");
  };
  size_t c_obs = col_of("observable_id", true);
  size_t c_class = col_of("source_class", true);
  size_t c_name = col_of("source_name", true);
  size_t c_verdict = col_of("verdict", true);
  size_t c_at = col_of("observed_at", false);

  std::map<std::string, std::vector<LabelEvidence>> grouped;
  {
    auto stream = warehouse.scan_export(evidence_table, {});
    while (auto row = stream.next()) {
      const auto& r = *row;
      if (is_null(r[c_obs]) || is_null(r[c_class]) || is_null(r[c_verdict]))
        raise(Errc::type_mismatch, "evidence row has null key fields");
      LabelEvidence e;
      e.observable_id = std::get<std::string>(r[c_obs]);
      e.source_class = source_class_from(std::get<std::string>(r[c_class]));
      e.source_name = is_null(r[c_name]) ? "" : std::get<std::string>(r[c_name]);
      e.verdict = verdict_from(std::get<std::string>(r[c_verdict]));
      e.observed_at = is_null(r[c_at]) ? 0 : std::get<int64_t>(r[c_at]);
      grouped[e.observable_id].push_back(std::move(e));
    }
  }

  auto table = std::make_shared<ColumnarTable>(labels_table, labels_schema());
  RecomputeReport report;
  for (const auto& [obs, evidence] : grouped) {
    Label label = fuse_one(evidence, policy, now_ms);
    ++report.observables;
    switch (label.verdict) {
      case Verdict::malicious: ++report.malicious; break;
      case Verdict::benign: ++report.benign; break;
      case Verdict::unknown: ++report.unknown; break;
    }
    table->append_row({
        Value(label.observable_id),
        Value(std::string(verdict_name(label.verdict))),
        Value(label.score),
        label.deciding_class
            ? Value(std::string(source_class_name(*label.deciding_class)))
            : Value{},
        Value(label.policy_version),
        Value(label.computed_at),
    });
  }
  warehouse.replace_table(std::move(table));
  return report;
}

/// Fraction of the population with a non-unknown fused verdict.
inline double label_coverage(const ColumnarTable& labels, size_t population) {
  if (population == 0)
    raise(Errc::empty_population, "coverage over zero observables");
  size_t c_verdict = labels.column_index("verdict");
  if (c_verdict == ColumnarTable::npos)
    raise(Errc::type_mismatch, "labels table lacks 'verdict'");
  size_t labeled = 0;
  for (size_t r = 0; r < labels.row_count(); ++r) {
    Value v = labels.at(r, c_verdict);
    if (!is_null(v) && std::get<std::string>(v) != "unknown") ++labeled;
  }
  return static_cast<double>(labeled) / static_cast<double>(population);
}

}  // namespace feedforge
