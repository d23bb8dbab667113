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

// Measurement suite: per-task accuracy, relative forgetting, the four-way
// primitive x compositional breakdown, per-type tables and a silhouette-based
// compactness score for encoder representations.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "c2gen/core.hpp"
#include "c2gen/model.hpp"
#include "c2gen/split.hpp"

namespace c2gen::eval {

using nn::Encoded;
using nn::Prediction;

/// Anything mapping an encoded test item to three head predictions.
template <class P>
concept Predictor = requires(const P& p, const Encoded& x) {
  { p(x) } -> std::convertible_to<Prediction>;
};

struct ModelPredictor {
  const nn::ModelParams* params;
  Prediction operator()(const Encoded& x) const { return nn::predict(*params, x); }
};

/// Gold passthrough; scores 100 on everything.
struct OraclePredictor {
  Prediction operator()(const Encoded& x) const { return {x.gold_v, x.gold_n, x.gold_ci}; }
};

/// Test items: each test instance paired with its held-out probes.
inline std::vector<Encoded> make_eval_set(const nn::Vocabulary& vocab, const datagen::Split& split) {
  std::vector<Encoded> out;
  out.reserve(split.test.size());
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    const auto& x = split.test[i];
    out.push_back(Encoded{vocab.encode(x.premise, x.hypothesis),
                          vocab.encode(split.unseen_prim_v[i]),
                          vocab.encode(split.unseen_prim_n[i]),
                          x.gold_ci,
                          split.unseen_prim_v[i].gold,
                          split.unseen_prim_n[i].gold,
                          x.ctype});
  }
  return out;
}

/// Category order: P correct & CI correct, P correct & CI wrong, P wrong & CI
/// correct, both wrong. P correct means both primitive heads are correct.
enum PxCi : std::size_t { kPCiC = 0, kPCiW = 1, kPwCiC = 2, kPwCiW = 3 };

struct Compactness {
  std::optional<double> v;
  std::optional<double> n;
};

struct PerTypeTable {
  std::array<std::array<double, 3>, 3> grid{};  // [signature][nli label]
  std::array<double, 3> row_avg{};              // per signature (function type)
  std::array<double, 3> col_avg{};              // per NLI label
  double overall = 0.0;                         // mean of the nine cells
  double overall_weighted = 0.0;                // instance-weighted
};

struct EvalReport {
  double acc_v = 0.0;
  double acc_n = 0.0;
  double acc_vn = 0.0;
  double acc_ci = 0.0;
  std::optional<double> forget_v;
  std::optional<double> forget_n;
  std::array<double, 4> pxci{};
  std::optional<PerTypeTable> per_type;
  Compactness compactness;
  std::size_t n_test = 0;
};

template <Predictor P>
EvalReport evaluate(const P& predictor, std::span<const Encoded> items) {
  if (items.empty()) throw Error("evaluate: empty test set");
  std::size_t v = 0, n = 0, vn = 0, ci = 0;
  std::array<std::size_t, 4> cat{};
  for (const auto& x : items) {
    const Prediction p = predictor(x);
    const bool ok_v = p.v == x.gold_v;
    const bool ok_n = p.n == x.gold_n;
    const bool ok_ci = p.ci == x.gold_ci;
    v += ok_v;
    n += ok_n;
    vn += ok_v && ok_n;
    ci += ok_ci;
    const bool ok_p = ok_v && ok_n;
    cat[ok_p ? (ok_ci ? kPCiC : kPCiW) : (ok_ci ? kPwCiC : kPwCiW)]++;
  }
  const double total = static_cast<double>(items.size());
  auto pct = [&](std::size_t k) { return 100.0 * static_cast<double>(k) / total; };
  EvalReport r;
  r.n_test = items.size();
  r.acc_v = pct(v);
  r.acc_n = pct(n);
  r.acc_vn = pct(vn);
  r.acc_ci = pct(ci);
  for (std::size_t i = 0; i < 4; ++i) r.pxci[i] = pct(cat[i]);
  return r;
}

inline EvalReport evaluate(const nn::ModelParams& params, std::span<const Encoded> items) {
  return evaluate(ModelPredictor{&params}, items);
}

/// Four-way percentages alone.
template <Predictor P>
std::array<double, 4> pxci_categorize(const P& predictor, std::span<const Encoded> items) {
  return evaluate(predictor, items).pxci;
}

/// Relative accuracy drop, in percent. Absent when acc_s1 is not positive.
inline std::optional<double> forget(double acc_s1, double acc_s1s2) {
  if (!(acc_s1 > 0.0)) return std::nullopt;
  return (acc_s1 - acc_s1s2) / acc_s1 * 100.0;
}

struct FoldAccuracy {
  CompType fold;
  double acc_ci = 0.0;
  std::size_t n_test = 0;
};

/// 3x3 Task_CI grid over the nine folds with row, column and grand averages.
inline PerTypeTable per_type_table(std::span<const FoldAccuracy> folds) {
  std::array<std::optional<FoldAccuracy>, 9> seen;
  for (const auto& f : folds) seen[f.fold.index() - 1] = f;
  PerTypeTable t;
  double weighted = 0.0;
  std::size_t weight = 0;
  for (CompType ct : all_comp_types()) {
    const auto& f = seen[ct.index() - 1];
    if (!f) throw Error("per_type_table: missing fold " + to_string(ct));
    t.grid[code(ct.v)][code(ct.n)] = f->acc_ci;
    weighted += f->acc_ci * static_cast<double>(f->n_test);
    weight += f->n_test;
  }
  double sum = 0.0;
  for (int r = 0; r < 3; ++r) {
    t.row_avg[r] = (t.grid[r][0] + t.grid[r][1] + t.grid[r][2]) / 3.0;
    t.col_avg[r] = (t.grid[0][r] + t.grid[1][r] + t.grid[2][r]) / 3.0;
    sum += t.grid[r][0] + t.grid[r][1] + t.grid[r][2];
  }
  t.overall = sum / 9.0;
  t.overall_weighted = weight ? weighted / static_cast<double>(weight) : 0.0;
  return t;
}

/// Mean silhouette coefficient, Euclidean distance, grouped by label. A point
/// whose class has no other member scores 0, as does any point whose own and
/// nearest-other mean distances are both 0. Absent with fewer than two classes.
inline std::optional<double> silhouette(std::span<const Eigen::VectorXd> points,
                                        std::span<const int> labels) {
  if (points.size() != labels.size()) throw Error("silhouette: size mismatch");
  std::vector<int> classes;
  for (int l : labels)
    if (std::find(classes.begin(), classes.end(), l) == classes.end()) classes.push_back(l);
  if (classes.size() < 2 || points.empty()) return std::nullopt;

  const std::size_t n = points.size();
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      dist[i * n + j] = dist[j * n + i] = (points[i] - points[j]).norm();

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> sum(classes.size(), 0.0);
    std::vector<std::size_t> cnt(classes.size(), 0);
    std::size_t own = 0;
    for (std::size_t c = 0; c < classes.size(); ++c)
      if (classes[c] == labels[i]) own = c;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      std::size_t c = std::find(classes.begin(), classes.end(), labels[j]) - classes.begin();
      sum[c] += dist[i * n + j];
      cnt[c]++;
    }
    if (cnt[own] == 0) continue;
    const double a = sum[own] / static_cast<double>(cnt[own]);
    double b = INFINITY;
    for (std::size_t c = 0; c < classes.size(); ++c)
      if (c != own && cnt[c] > 0) b = std::min(b, sum[c] / static_cast<double>(cnt[c]));
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

/// Silhouette of encoder outputs over a probe set, grouped by gold label.
inline std::optional<double> compactness(const nn::ModelParams& params,
                                         const nn::Vocabulary& vocab,
                                         std::span<const datagen::PrimitivePair> probes) {
  std::vector<Eigen::VectorXd> pts;
  std::vector<int> labels;
  for (const auto& p : probes) {
    pts.push_back(nn::forward(params, vocab.encode(p)).hidden);
    labels.push_back(code(p.gold));
  }
  return silhouette(pts, labels);
}

// ---- serialization -----------------------------------------------------------

/// Fixed two-decimal rendering used in CSV and Markdown.
inline std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline std::optional<double> opt_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

inline nlohmann::ordered_json to_json(const PerTypeTable& t) {
  nlohmann::ordered_json j;
  j["grid"] = t.grid;
  j["row_avg"] = t.row_avg;
  j["col_avg"] = t.col_avg;
  j["overall"] = t.overall;
  j["overall_weighted"] = t.overall_weighted;
  return j;
}

inline PerTypeTable per_type_from_json(const nlohmann::json& j) {
  PerTypeTable t;
  t.grid = j.at("grid").get<decltype(t.grid)>();
  t.row_avg = j.at("row_avg").get<decltype(t.row_avg)>();
  t.col_avg = j.at("col_avg").get<decltype(t.col_avg)>();
  t.overall = j.at("overall").get<double>();
  t.overall_weighted = j.at("overall_weighted").get<double>();
  return t;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["n_test"] = r.n_test;
  j["acc_v"] = r.acc_v;
  j["acc_n"] = r.acc_n;
  j["acc_vn"] = r.acc_vn;
  j["acc_ci"] = r.acc_ci;
  j["forget_v"] = opt_json(r.forget_v);
  j["forget_n"] = opt_json(r.forget_n);
  j["pxci"] = r.pxci;
  j["per_type"] = r.per_type ? to_json(*r.per_type) : nlohmann::ordered_json(nullptr);
  j["compactness_v"] = opt_json(r.compactness.v);
  j["compactness_n"] = opt_json(r.compactness.n);
  return j;
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.n_test = j.at("n_test").get<std::size_t>();
  r.acc_v = j.at("acc_v").get<double>();
  r.acc_n = j.at("acc_n").get<double>();
  r.acc_vn = j.at("acc_vn").get<double>();
  r.acc_ci = j.at("acc_ci").get<double>();
  r.forget_v = opt_from(j, "forget_v");
  r.forget_n = opt_from(j, "forget_n");
  r.pxci = j.at("pxci").get<std::array<double, 4>>();
  if (j.contains("per_type") && !j.at("per_type").is_null())
    r.per_type = per_type_from_json(j.at("per_type"));
  r.compactness.v = opt_from(j, "compactness_v");
  r.compactness.n = opt_from(j, "compactness_n");
  return r;
}

inline std::string csv_header() {
  return "n_test,acc_v,acc_n,acc_vn,acc_ci,forget_v,forget_n,pxci_pc_cic,pxci_pc_ciw,"
         "pxci_pw_cic,pxci_pw_ciw,compactness_v,compactness_n";
}

inline std::string csv_row(const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt2(*v) : std::string(); };
  std::string s = std::to_string(r.n_test);
  for (double v : {r.acc_v, r.acc_n, r.acc_vn, r.acc_ci}) s += "," + fmt2(v);
  s += "," + opt(r.forget_v) + "," + opt(r.forget_n);
  for (double v : r.pxci) s += "," + fmt2(v);
  auto opt4 = [](const std::optional<double>& v) {
    if (!v) return std::string();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return std::string(buf);
  };
  s += "," + opt4(r.compactness.v) + "," + opt4(r.compactness.n);
  return s;
}

/// 4x4 CSV: three signature rows plus an average row, three NLI-label columns
/// plus an average column.
inline std::string per_type_csv(const PerTypeTable& t) {
  std::string s = ",N_e,N_n,N_c,avg_ci_v\n";
  const char* rows[] = {"V_e", "V_n", "V_c"};
  for (int r = 0; r < 3; ++r) {
    s += rows[r];
    for (int c = 0; c < 3; ++c) s += "," + fmt2(t.grid[r][c]);
    s += "," + fmt2(t.row_avg[r]) + "\n";
  }
  s += "avg_ci_n";
  for (int c = 0; c < 3; ++c) s += "," + fmt2(t.col_avg[c]);
  s += "," + fmt2(t.overall) + "\n";
  return s;
}

}  // namespace c2gen::eval
