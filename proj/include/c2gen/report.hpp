// Copyright 2026 The C2Gen Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Aggregation over cells: per fold, mean and sample std over seeds; per
// setting, the mean of those over folds. Absent values (e.g. Forget when the
// S1 accuracy was 0) are skipped.

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "c2gen/eval.hpp"
#include "c2gen/experiment.hpp"

namespace c2gen::harness {

struct Stat {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;  // seeds at fold level, folds at setting level
};

/// Mean and sample standard deviation (0 for a single value).
inline std::optional<Stat> summarize(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  Stat s;
  s.n = xs.size();
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

using Extractor = std::function<std::optional<double>(const CellRecord&)>;

struct Metric {
  std::string name;
  Extractor get;
};

/// Accuracy of the primitive learned in S1 (V for ver-nat, N for nat-ver).
inline std::optional<double> first_primitive(const CellRecord& r, const std::string& stage) {
  const auto* s = r.snapshot(stage);
  if (!s || r.order == "n/a") return std::nullopt;
  return r.order == "ver-nat" ? s->acc_v : s->acc_n;
}

inline const std::vector<Metric>& metrics() {
  static const std::vector<Metric> m = [] {
    std::vector<Metric> v;
    auto plain = [&](const char* name, double eval::EvalReport::*field) {
      v.push_back({name, [field](const CellRecord& r) -> std::optional<double> { return r.report.*field; }});
    };
    plain("acc_v", &eval::EvalReport::acc_v);
    plain("acc_n", &eval::EvalReport::acc_n);
    plain("acc_vn", &eval::EvalReport::acc_vn);
    plain("acc_ci", &eval::EvalReport::acc_ci);
    v.push_back({"forget_v", [](const CellRecord& r) { return r.report.forget_v; }});
    v.push_back({"forget_n", [](const CellRecord& r) { return r.report.forget_n; }});
    v.push_back({"forget_first", [](const CellRecord& r) -> std::optional<double> {
                   if (r.order == "ver-nat") return r.report.forget_v;
                   if (r.order == "nat-ver") return r.report.forget_n;
                   return std::nullopt;
                 }});
    v.push_back({"first_s1", [](const CellRecord& r) { return first_primitive(r, "S1"); }});
    v.push_back({"first_s2", [](const CellRecord& r) { return first_primitive(r, "S2"); }});
    const char* px[] = {"pxci_pc_cic", "pxci_pc_ciw", "pxci_pw_cic", "pxci_pw_ciw"};
    for (std::size_t k = 0; k < 4; ++k)
      v.push_back({px[k], [k](const CellRecord& r) -> std::optional<double> { return r.report.pxci[k]; }});
    v.push_back({"compactness_v", [](const CellRecord& r) { return r.report.compactness.v; }});
    v.push_back({"compactness_n", [](const CellRecord& r) { return r.report.compactness.n; }});
    for (const char* st : {"S1", "S2"}) {
      const std::string s = st;
      v.push_back({s + "_acc_v", [s](const CellRecord& r) -> std::optional<double> {
                     const auto* x = r.snapshot(s);
                     return x ? std::optional<double>(x->acc_v) : std::nullopt;
                   }});
      v.push_back({s + "_acc_n", [s](const CellRecord& r) -> std::optional<double> {
                     const auto* x = r.snapshot(s);
                     return x ? std::optional<double>(x->acc_n) : std::nullopt;
                   }});
      v.push_back({s + "_acc_ci", [s](const CellRecord& r) -> std::optional<double> {
                     const auto* x = r.snapshot(s);
                     return x ? std::optional<double>(x->acc_ci) : std::nullopt;
                   }});
      v.push_back({s + "_compactness_v", [s](const CellRecord& r) -> std::optional<double> {
                     const auto* x = r.snapshot(s);
                     return x ? x->compactness_v : std::nullopt;
                   }});
      v.push_back({s + "_compactness_n", [s](const CellRecord& r) -> std::optional<double> {
                     const auto* x = r.snapshot(s);
                     return x ? x->compactness_n : std::nullopt;
                   }});
    }
    return v;
  }();
  return m;
}

struct SettingSummary {
  std::size_t setting = 0;
  std::string label, regime, order, strategy, curriculum;
  std::size_t cells = 0;
  std::size_t failed = 0;
  std::map<std::string, Stat> overall;                               // by metric
  std::map<std::string, std::map<std::string, Stat>> per_fold;       // fold -> metric
  std::optional<eval::PerTypeTable> per_type;
};

struct Aggregate {
  std::vector<SettingSummary> settings;

  const SettingSummary* find(const std::string& label) const {
    for (const auto& s : settings)
      if (s.label == label) return &s;
    return nullptr;
  }
  std::optional<double> mean(const std::string& label, const std::string& metric) const {
    const auto* s = find(label);
    if (!s) return std::nullopt;
    auto it = s->overall.find(metric);
    if (it == s->overall.end()) return std::nullopt;
    return it->second.mean;
  }
};

inline Aggregate aggregate(const std::vector<CellRecord>& records) {
  std::map<std::size_t, std::vector<const CellRecord*>> by_setting;
  for (const auto& r : records) by_setting[r.setting].push_back(&r);

  Aggregate agg;
  for (const auto& [idx, rs] : by_setting) {
    SettingSummary s;
    s.setting = idx;
    s.label = rs.front()->label;
    s.regime = rs.front()->regime;
    s.order = rs.front()->order;
    s.strategy = rs.front()->strategy;
    s.curriculum = rs.front()->curriculum;
    s.cells = rs.size();
    std::map<CompType, std::vector<const CellRecord*>> by_fold;
    for (const auto* r : rs) {
      if (!r->ok) {
        ++s.failed;
        continue;
      }
      by_fold[r->fold].push_back(r);
    }
    for (const auto& m : metrics()) {
      std::vector<double> means, stds;
      for (const auto& [fold, frs] : by_fold) {
        std::vector<double> xs;
        for (const auto* r : frs)
          if (auto v = m.get(*r)) xs.push_back(*v);
        if (auto st = summarize(xs)) {
          s.per_fold[to_string(fold)][m.name] = *st;
          means.push_back(st->mean);
          stds.push_back(st->std);
        }
      }
      if (auto st = summarize(means)) {
        Stat o{st->mean, 0.0, st->n};
        for (double x : stds) o.std += x;
        o.std /= static_cast<double>(stds.size());
        s.overall[m.name] = o;
      }
    }
    if (by_fold.size() == 9) {
      std::vector<eval::FoldAccuracy> fa;
      for (const auto& [fold, frs] : by_fold)
        fa.push_back({fold, s.per_fold[to_string(fold)]["acc_ci"].mean, frs.front()->report.n_test});
      s.per_type = eval::per_type_table(fa);
    }
    agg.settings.push_back(std::move(s));
  }
  return agg;
}

// ---- emitters ----------------------------------------------------------------

inline nlohmann::ordered_json to_json(const Stat& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"n", s.n}};
}

inline nlohmann::ordered_json to_json(const Aggregate& a) {
  nlohmann::ordered_json j;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& s : a.settings) {
    nlohmann::ordered_json o;
    o["setting"] = s.setting;
    o["label"] = s.label;
    o["regime"] = s.regime;
    o["order"] = s.order;
    o["strategy"] = s.strategy;
    o["curriculum"] = s.curriculum;
    o["cells"] = s.cells;
    o["failed"] = s.failed;
    nlohmann::ordered_json m = nlohmann::ordered_json::object();
    for (const auto& metric : metrics())
      if (auto it = s.overall.find(metric.name); it != s.overall.end()) m[metric.name] = to_json(it->second);
    o["metrics"] = m;
    nlohmann::ordered_json pf = nlohmann::ordered_json::object();
    for (const auto& [fold, ms] : s.per_fold) {
      nlohmann::ordered_json f = nlohmann::ordered_json::object();
      for (const auto& metric : metrics())
        if (auto it = ms.find(metric.name); it != ms.end()) f[metric.name] = to_json(it->second);
      pf[fold] = f;
    }
    o["per_fold"] = pf;
    o["per_type"] = s.per_type ? eval::to_json(*s.per_type) : nlohmann::ordered_json(nullptr);
    arr.push_back(o);
  }
  j["settings"] = arr;
  return j;
}

inline Aggregate aggregate_from_json(const json& j) {
  Aggregate a;
  auto stat = [](const json& x) {
    return Stat{x.at("mean").get<double>(), x.at("std").get<double>(), x.at("n").get<std::size_t>()};
  };
  for (const auto& o : j.at("settings")) {
    SettingSummary s;
    s.setting = o.at("setting").get<std::size_t>();
    s.label = o.at("label").get<std::string>();
    s.regime = o.at("regime").get<std::string>();
    s.order = o.at("order").get<std::string>();
    s.strategy = o.at("strategy").get<std::string>();
    s.curriculum = o.at("curriculum").get<std::string>();
    s.cells = o.at("cells").get<std::size_t>();
    s.failed = o.at("failed").get<std::size_t>();
    for (const auto& [k, v] : o.at("metrics").items()) s.overall[k] = stat(v);
    for (const auto& [fold, ms] : o.at("per_fold").items())
      for (const auto& [k, v] : ms.items()) s.per_fold[fold][k] = stat(v);
    if (!o.at("per_type").is_null()) s.per_type = eval::per_type_from_json(o.at("per_type"));
    a.settings.push_back(std::move(s));
  }
  return a;
}

inline std::string to_csv(const Aggregate& a) {
  std::string out = "label,regime,order,strategy,curriculum,cells,failed";
  for (const auto& m : metrics()) out += "," + m.name + "_mean," + m.name + "_std";
  out += "\n";
  for (const auto& s : a.settings) {
    out += s.label + "," + s.regime + "," + s.order + "," + s.strategy + "," + s.curriculum + "," +
           std::to_string(s.cells) + "," + std::to_string(s.failed);
    for (const auto& m : metrics()) {
      auto it = s.overall.find(m.name);
      if (it == s.overall.end())
        out += ",,";
      else
        out += "," + eval::fmt2(it->second.mean) + "," + eval::fmt2(it->second.std);
    }
    out += "\n";
  }
  return out;
}

inline std::string to_markdown(const Aggregate& a) {
  auto cell = [](const SettingSummary& s, const std::string& m) -> std::string {
    auto it = s.overall.find(m);
    if (it == s.overall.end()) return "-";
    return eval::fmt2(it->second.mean) + " ± " + eval::fmt2(it->second.std);
  };
  std::string out = "## Accuracy and forgetting\n\n";
  out += "| Setting | Acc_V | Acc_N | Acc_VN | Acc_CI | Forget_V | Forget_N | S1 first | S2 first |\n";
  out += "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& s : a.settings) {
    out += "| " + s.label;
    for (const char* m : {"acc_v", "acc_n", "acc_vn", "acc_ci", "forget_v", "forget_n", "first_s1", "first_s2"})
      out += " | " + cell(s, m);
    out += " |\n";
  }
  out += "\n## Primitive x compositional breakdown (%)\n\n";
  out += "| Setting | P✓ CI✓ | P✓ CI✗ | P✗ CI✓ | P✗ CI✗ |\n|---|---|---|---|---|\n";
  for (const auto& s : a.settings) {
    out += "| " + s.label;
    for (const char* m : {"pxci_pc_cic", "pxci_pc_ciw", "pxci_pw_cic", "pxci_pw_ciw"}) out += " | " + cell(s, m);
    out += " |\n";
  }
  out += "\n## Representation compactness (silhouette)\n\n";
  out += "| Setting | S1 V | S1 N | S2 V | S2 N | final V | final N |\n|---|---|---|---|---|---|---|\n";
  for (const auto& s : a.settings) {
    out += "| " + s.label;
    for (const char* m : {"S1_compactness_v", "S1_compactness_n", "S2_compactness_v", "S2_compactness_n",
                          "compactness_v", "compactness_n"}) {
      auto it = s.overall.find(m);
      char buf[32];
      if (it == s.overall.end()) {
        out += " | -";
      } else {
        std::snprintf(buf, sizeof buf, "%.4f", it->second.mean);
        out += std::string(" | ") + buf;
      }
    }
    out += " |\n";
  }
  for (const auto& s : a.settings) {
    if (!s.per_type) continue;
    const auto& t = *s.per_type;
    out += "\n## Per-type Acc_CI: " + s.label + "\n\n";
    out += "| | N_e | N_n | N_c | avg |\n|---|---|---|---|---|\n";
    const char* rows[] = {"V_e (f_ve)", "V_n (f_vn)", "V_c (f_vc)"};
    for (int r = 0; r < 3; ++r) {
      out += std::string("| ") + rows[r];
      for (int c = 0; c < 3; ++c) out += " | " + eval::fmt2(t.grid[r][c]);
      out += " | " + eval::fmt2(t.row_avg[r]) + " |\n";
    }
    out += "| avg";
    for (int c = 0; c < 3; ++c) out += " | " + eval::fmt2(t.col_avg[c]);
    out += " | " + eval::fmt2(t.overall) + " |\n";
  }
  return out;
}

/// Writes OUT/aggregate.{json,csv,md}.
inline void write_aggregate(const Aggregate& a, const fs::path& out_dir) {
  write_text(out_dir / "aggregate.json", to_json(a).dump(2) + "\n");
  write_text(out_dir / "aggregate.csv", to_csv(a));
  write_text(out_dir / "aggregate.md", to_markdown(a));
}

}  // namespace c2gen::harness
