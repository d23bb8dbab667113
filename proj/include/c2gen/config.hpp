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

// Experiment configuration. A config file is a JSON object whose keys must be
// a subset of the default document below, with matching value kinds; missing
// keys take the defaults. Grid files hold a base config plus per-setting
// overrides applied as JSON merge patches.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "c2gen/continual.hpp"
#include "c2gen/core.hpp"
#include "c2gen/dataset.hpp"
#include "c2gen/model.hpp"
#include "c2gen/split.hpp"
#include "c2gen/stream.hpp"
#include "c2gen/trainer.hpp"

namespace c2gen::harness {

using json = nlohmann::json;

struct ExperimentConfig {
  std::string label = "C2Gen ver-nat None";
  datagen::DataConfig data;
  datagen::SplitOptions split;
  datagen::StreamConfig stream;
  datagen::Regime regime = datagen::Regime::C2Gen;
  datagen::Order order = datagen::Order::VerNat;
  datagen::Curriculum curriculum = datagen::Curriculum::None;
  nn::ModelConfig model;  // vocab is filled in per run
  continual::TrainerConfig trainer;
  std::vector<CompType> folds = all_comp_types_vector();
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string out = "runs";

  static std::vector<CompType> all_comp_types_vector() {
    auto a = all_comp_types();
    return {a.begin(), a.end()};
  }
};

/// The full default document; also the schema.
inline json default_config_json() {
  const ExperimentConfig d;
  json folds = json::array();
  for (CompType ct : d.folds) folds.push_back(to_string(ct));
  return json{
      {"label", d.label},
      {"lexicon",
       {{"verbs", d.data.lexicon.verbs},
        {"concepts", d.data.lexicon.concepts},
        {"fields", d.data.lexicon.fields},
        {"relations", d.data.lexicon.relations},
        {"subjects", d.data.lexicon.subjects},
        {"templates", d.data.lexicon.templates}}},
      {"data", {{"nli_counts", d.data.nli_counts}, {"type_counts", d.data.type_counts}}},
      {"split",
       {{"max_attempts", d.split.max_attempts},
        {"probes_per_verb", d.split.probes_per_verb},
        {"probe_pairs_per_label", d.split.probe_pairs_per_label}}},
      {"stream",
       {{"stage_size", d.stream.stage_size},
        {"nli_pool_per_label", d.stream.nli_pool_per_label},
        {"verb_pool_per_signature", d.stream.verb_pool_per_signature},
        {"epochs", d.stream.epochs},
        {"supervise_ci_in_primitive_stages", d.stream.supervise_ci_in_primitive_stages}}},
      {"regime", datagen::to_string(d.regime)},
      {"order", datagen::to_string(d.order)},
      {"curriculum", datagen::to_string(d.curriculum)},
      {"nn",
       {{"d_emb", d.model.d_emb},
        {"hidden", d.model.hidden},
        {"init_scale", d.model.init_scale},
        {"lr", d.trainer.lr},
        {"batch_size", d.trainer.batch_size},
        {"reduction", "mean"}}},
      {"strategy",
       {{"kind", continual::to_string(d.trainer.strategy.kind)},
        {"replay_batch", d.trainer.strategy.replay_batch},
        {"mir_candidates", d.trainer.strategy.mir_candidates},
        {"kd_temperature", d.trainer.strategy.kd_temperature},
        {"kd_weight", d.trainer.strategy.kd_weight}}},
      {"memory",
       {{"capacity", d.trainer.memory_capacity}, {"reset_for_s3", d.trainer.reset_memory_for_s3}}},
      {"folds", folds},
      {"seeds", d.seeds},
      {"out", d.out}};
}

namespace detail {

inline std::string kind_name(const json& j) {
  if (j.is_object()) return "object";
  if (j.is_array()) return "array";
  if (j.is_string()) return "string";
  if (j.is_boolean()) return "boolean";
  if (j.is_number()) return "number";
  return "null";
}

inline void check_against(const json& given, const json& schema, const std::string& path) {
  if (kind_name(given) != kind_name(schema))
    throw Error("config: '" + path + "' must be a " + kind_name(schema) + ", got " + kind_name(given));
  if (schema.is_number_integer() && !given.is_number_integer())
    throw Error("config: '" + path + "' must be an integer");
  if (schema.is_number_unsigned() && given.is_number_integer() && given.get<std::int64_t>() < 0)
    throw Error("config: '" + path + "' must be non-negative");
  if (given.is_object()) {
    for (const auto& [k, v] : given.items()) {
      if (!schema.contains(k)) throw Error("config: unknown key '" + path + (path.empty() ? "" : ".") + k + "'");
      check_against(v, schema[k], path + (path.empty() ? "" : ".") + k);
    }
  } else if (given.is_array() && !schema.empty()) {
    for (std::size_t i = 0; i < given.size(); ++i)
      check_against(given[i], schema[0], path + "[" + std::to_string(i) + "]");
  }
}

template <std::size_t N>
std::array<std::size_t, N> fixed_array(const json& j, const char* what) {
  if (j.size() != N) throw Error(std::string("config: '") + what + "' needs " + std::to_string(N) + " entries");
  std::array<std::size_t, N> a{};
  for (std::size_t i = 0; i < N; ++i) a[i] = j[i].get<std::size_t>();
  return a;
}

}  // namespace detail

/// Rejects unknown keys and kind mismatches.
inline void validate_config_json(const json& j) { detail::check_against(j, default_config_json(), ""); }

inline ExperimentConfig config_from_json(const json& given) {
  validate_config_json(given);
  json j = default_config_json();
  j.merge_patch(given);

  ExperimentConfig c;
  c.label = j["label"].get<std::string>();
  auto& lx = c.data.lexicon;
  lx.verbs = detail::fixed_array<3>(j["lexicon"]["verbs"], "lexicon.verbs");
  lx.concepts = j["lexicon"]["concepts"].get<std::size_t>();
  lx.fields = j["lexicon"]["fields"].get<std::size_t>();
  lx.relations = detail::fixed_array<3>(j["lexicon"]["relations"], "lexicon.relations");
  lx.subjects = j["lexicon"]["subjects"].get<std::size_t>();
  lx.templates = j["lexicon"]["templates"].get<std::size_t>();
  datagen::validate(lx);
  c.data.nli_counts = detail::fixed_array<3>(j["data"]["nli_counts"], "data.nli_counts");
  c.data.type_counts = detail::fixed_array<9>(j["data"]["type_counts"], "data.type_counts");

  c.split.max_attempts = j["split"]["max_attempts"].get<std::size_t>();
  c.split.probes_per_verb = j["split"]["probes_per_verb"].get<std::size_t>();
  c.split.probe_pairs_per_label = j["split"]["probe_pairs_per_label"].get<std::size_t>();

  const auto& st = j["stream"];
  c.stream.stage_size = st["stage_size"].get<std::size_t>();
  c.stream.nli_pool_per_label = st["nli_pool_per_label"].get<std::size_t>();
  c.stream.verb_pool_per_signature = st["verb_pool_per_signature"].get<std::size_t>();
  c.stream.epochs = st["epochs"].get<int>();
  c.stream.supervise_ci_in_primitive_stages = st["supervise_ci_in_primitive_stages"].get<bool>();
  if (c.stream.epochs < 1) throw Error("config: stream.epochs must be at least 1");
  if (c.stream.stage_size == 0) throw Error("config: stream.stage_size must be positive");

  c.regime = datagen::parse_regime(j["regime"].get<std::string>());
  c.order = datagen::parse_order(j["order"].get<std::string>());
  c.curriculum = datagen::parse_curriculum(j["curriculum"].get<std::string>());

  const auto& nn = j["nn"];
  c.model.d_emb = nn["d_emb"].get<int>();
  c.model.hidden = nn["hidden"].get<int>();
  c.model.init_scale = nn["init_scale"].get<double>();
  if (c.model.d_emb < 1 || c.model.hidden < 1) throw Error("config: nn dimensions must be positive");
  c.trainer.lr = nn["lr"].get<double>();
  if (!(c.trainer.lr > 0.0)) throw Error("config: nn.lr must be positive");
  c.trainer.batch_size = nn["batch_size"].get<std::size_t>();
  if (c.trainer.batch_size == 0) throw Error("config: nn.batch_size must be positive");
  const auto red = nn["reduction"].get<std::string>();
  if (red != "mean" && red != "sum") throw Error("config: nn.reduction must be 'mean' or 'sum'");
  c.trainer.reduction = red == "mean" ? nn::Reduction::Mean : nn::Reduction::Sum;

  const auto& sg = j["strategy"];
  auto& s = c.trainer.strategy;
  s.kind = continual::parse_strategy(sg["kind"].get<std::string>());
  s.replay_batch = sg["replay_batch"].get<std::size_t>();
  s.mir_candidates = sg["mir_candidates"].get<std::size_t>();
  s.kd_temperature = sg["kd_temperature"].get<double>();
  s.kd_weight = sg["kd_weight"].get<double>();
  c.trainer.memory_capacity = j["memory"]["capacity"].get<std::size_t>();
  c.trainer.reset_memory_for_s3 = j["memory"]["reset_for_s3"].get<bool>();
  if (c.trainer.memory_capacity == 0) throw Error("config: memory.capacity must be positive");
  s.validate(c.trainer.memory_capacity);

  c.folds.clear();
  for (const auto& f : j["folds"]) c.folds.push_back(parse_comp_type(f.get<std::string>()));
  if (c.folds.empty()) throw Error("config: folds must not be empty");
  c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  if (c.seeds.empty()) throw Error("config: seeds must not be empty");
  c.out = j["out"].get<std::string>();
  return c;
}

inline json to_json(const ExperimentConfig& c) {
  json folds = json::array();
  for (CompType ct : c.folds) folds.push_back(to_string(ct));
  return json{
      {"label", c.label},
      {"lexicon",
       {{"verbs", c.data.lexicon.verbs},
        {"concepts", c.data.lexicon.concepts},
        {"fields", c.data.lexicon.fields},
        {"relations", c.data.lexicon.relations},
        {"subjects", c.data.lexicon.subjects},
        {"templates", c.data.lexicon.templates}}},
      {"data", {{"nli_counts", c.data.nli_counts}, {"type_counts", c.data.type_counts}}},
      {"split",
       {{"max_attempts", c.split.max_attempts},
        {"probes_per_verb", c.split.probes_per_verb},
        {"probe_pairs_per_label", c.split.probe_pairs_per_label}}},
      {"stream",
       {{"stage_size", c.stream.stage_size},
        {"nli_pool_per_label", c.stream.nli_pool_per_label},
        {"verb_pool_per_signature", c.stream.verb_pool_per_signature},
        {"epochs", c.stream.epochs},
        {"supervise_ci_in_primitive_stages", c.stream.supervise_ci_in_primitive_stages}}},
      {"regime", datagen::to_string(c.regime)},
      {"order", datagen::to_string(c.order)},
      {"curriculum", datagen::to_string(c.curriculum)},
      {"nn",
       {{"d_emb", c.model.d_emb},
        {"hidden", c.model.hidden},
        {"init_scale", c.model.init_scale},
        {"lr", c.trainer.lr},
        {"batch_size", c.trainer.batch_size},
        {"reduction", c.trainer.reduction == nn::Reduction::Mean ? "mean" : "sum"}}},
      {"strategy",
       {{"kind", continual::to_string(c.trainer.strategy.kind)},
        {"replay_batch", c.trainer.strategy.replay_batch},
        {"mir_candidates", c.trainer.strategy.mir_candidates},
        {"kd_temperature", c.trainer.strategy.kd_temperature},
        {"kd_weight", c.trainer.strategy.kd_weight}}},
      {"memory",
       {{"capacity", c.trainer.memory_capacity}, {"reset_for_s3", c.trainer.reset_memory_for_s3}}},
      {"folds", folds},
      {"seeds", c.seeds},
      {"out", c.out}};
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw Error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_json_file(path));
}

// ---- grids -------------------------------------------------------------------

struct GridConfig {
  std::string name = "default";
  std::vector<ExperimentConfig> settings;
};

/// The thirteen-setting comparison: offline CGen, then each order crossed with
/// the six strategies.
inline json default_grid_json() {
  json settings = json::array();
  settings.push_back({{"label", "CGen None"}, {"regime", "cgen"}, {"strategy", {{"kind", "None"}}}});
  for (const char* order : {"ver-nat", "nat-ver"})
    for (const char* kind : {"None", "ER_Res", "ER_Buff", "ER_Mir", "AGEM", "KD"})
      settings.push_back({{"label", std::string("C2Gen ") + order + " " + kind},
                          {"regime", "c2gen"},
                          {"order", order},
                          {"strategy", {{"kind", kind}}}});
  return json{{"name", "default"}, {"base", json::object()}, {"settings", settings}};
}

inline GridConfig grid_from_json(const json& j) {
  if (!j.is_object()) throw Error("grid: top level must be an object");
  for (const auto& [k, v] : j.items())
    if (k != "name" && k != "base" && k != "settings") throw Error("grid: unknown key '" + k + "'");
  if (!j.contains("settings") || !j["settings"].is_array() || j["settings"].empty())
    throw Error("grid: 'settings' must be a non-empty array");
  GridConfig g;
  g.name = j.value("name", std::string("grid"));
  const json base = j.value("base", json::object());
  validate_config_json(base);
  for (const auto& s : j["settings"]) {
    json merged = base;
    merged.merge_patch(s);
    g.settings.push_back(config_from_json(merged));
  }
  return g;
}

/// A file is a grid when it has a "settings" array; otherwise a single setting.
inline GridConfig load_grid(const std::filesystem::path& path) {
  json j = read_json_file(path);
  if (j.is_object() && j.contains("settings")) return grid_from_json(j);
  GridConfig g;
  g.name = "single";
  g.settings.push_back(config_from_json(j));
  return g;
}

}  // namespace c2gen::harness
