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

// Staged trainer. Owns parameters, optimizer state and memory; consumes stages
// strictly in order and records a snapshot at each stage end.

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "c2gen/adam.hpp"
#include "c2gen/continual.hpp"
#include "c2gen/model.hpp"
#include "c2gen/rng.hpp"
#include "c2gen/stream.hpp"

namespace c2gen::continual {

struct EncodedStage {
  std::string name;
  std::vector<Encoded> xs;
  int epochs = 1;
  bool shuffle_within = true;
  std::vector<datagen::Block> blocks;
};

inline EncodedStage encode_stage(const nn::Vocabulary& vocab, const datagen::Stage& s) {
  EncodedStage out{s.name, nn::encode_all(vocab, s.instances), s.epochs, s.shuffle_within, s.blocks};
  if (out.blocks.empty()) out.blocks.push_back({0, out.xs.size(), true, true, "all"});
  return out;
}

/// Order-free fingerprint of an encoded instance.
inline std::uint64_t instance_hash(const Encoded& x) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto mix = [&](std::uint64_t v) { h = splitmix64(h ^ v); };
  for (const auto* ids : {&x.ids_ci, &x.ids_v, &x.ids_n}) {
    mix(ids->size());
    for (int id : *ids) mix(static_cast<std::uint64_t>(id));
  }
  mix(static_cast<std::uint64_t>(code(x.gold_ci)));
  return h;
}

struct Snapshot {
  std::string stage;
  double acc_v = 0.0;
  double acc_n = 0.0;
  double acc_vn = 0.0;
  double acc_ci = 0.0;
  std::optional<double> compactness_v;
  std::optional<double> compactness_n;
};

struct StageRecord {
  std::string name;
  std::size_t steps = 0;
  std::uint64_t stage_hash = 0;     // sum of instance hashes over the stage
  std::uint64_t consumed_hash = 0;  // sum over every item actually trained on
  std::size_t memory_size = 0;
};

struct StepLoss {
  double total = 0.0;
  double cr = 0.0;
  double prim = 0.0;
  double kd = 0.0;
};

struct TrainLog {
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::vector<StepLoss> steps;
  std::vector<Snapshot> snapshots;
  std::vector<StageRecord> stages;
  std::size_t agem_projections = 0;
  std::size_t agem_degenerate = 0;

  const Snapshot* snapshot(const std::string& stage) const {
    for (const auto& s : snapshots)
      if (s.stage == stage) return &s;
    return nullptr;
  }
};

struct TrainerConfig {
  double lr = 1e-3;
  std::size_t batch_size = 8;
  nn::Reduction reduction = nn::Reduction::Mean;
  std::size_t memory_capacity = 100;
  bool reset_memory_for_s3 = false;
  StrategyConfig strategy;
};

using EvalHook = std::function<Snapshot(const ModelParams&, const std::string&)>;

class Trainer {
 public:
  Trainer(ModelParams params, TrainerConfig cfg, std::uint64_t seed)
      : params_(std::move(params)),
        adam_(nn::AdamState::for_params(params_)),
        memory_(cfg.memory_capacity),
        cfg_(cfg),
        shuffle_rng_(derive_seed(seed, "shuffle")),
        memory_rng_(derive_seed(seed, "memory")) {
    if (cfg.batch_size == 0) throw Error("batch_size must be positive");
    cfg.strategy.validate(cfg.memory_capacity);
    log_.seed = seed;
  }

  const ModelParams& params() const { return params_; }
  const Memory& memory() const { return memory_; }
  const TrainLog& log() const { return log_; }
  TrainLog& log() { return log_; }
  std::uint64_t step_count() const { return adam_.step; }

  void train_stage(const EncodedStage& stage, const EvalHook& hook = {}) {
    if (stage.xs.empty()) throw Error("stage " + stage.name + " is empty");
    const auto t0 = std::chrono::steady_clock::now();
    const bool uses_memory = cfg_.strategy.kind != StrategyKind::None;
    const Policy policy = policy_for(cfg_.strategy.kind);
    if (uses_memory) {
      if (cfg_.reset_memory_for_s3 && stage.name == "S3") {
        memory_.clear();
        mem_stage_ = 0;
      }
      memory_.begin_stage(mem_stage_++, policy, memory_rng_);
    }

    StageRecord rec;
    rec.name = stage.name;
    for (const auto& x : stage.xs) rec.stage_hash += instance_hash(x);

    for (const auto& block : stage.blocks) {
      const nn::TaskMask mask{block.prim, block.ci};
      std::vector<std::size_t> order;
      for (std::size_t i = block.begin; i < block.end; ++i) order.push_back(i);
      for (int e = 0; e < stage.epochs; ++e) {
        if (stage.shuffle_within) shuffle_rng_.shuffle(order);
        for (std::size_t b = 0; b < order.size(); b += cfg_.batch_size) {
          std::vector<const Encoded*> batch;
          for (std::size_t k = b; k < std::min(order.size(), b + cfg_.batch_size); ++k) {
            batch.push_back(&stage.xs[order[k]]);
            rec.consumed_hash += instance_hash(stage.xs[order[k]]);
          }
          step(batch, mask);
          ++rec.steps;
          if (uses_memory)
            for (const Encoded* x : batch) memory_.update({*x, mask}, policy, memory_rng_);
        }
      }
    }
    rec.memory_size = memory_.size();
    log_.stages.push_back(rec);
    if (!params_.all_finite()) throw Error("non-finite parameters after stage " + stage.name);
    if (hook) {
      Snapshot s = hook(params_, stage.name);
      s.stage = stage.name;
      log_.snapshots.push_back(s);
    }
    if (cfg_.strategy.kind == StrategyKind::KD) capture_teacher(memory_, params_);
    log_.wall_seconds +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

 private:
  void step(std::span<const Encoded* const> batch, nn::TaskMask mask) {
    const auto& sc = cfg_.strategy;
    std::vector<nn::Term> terms;
    Gradient g = params_.zeros_like();
    nn::LossParts parts;

    switch (sc.kind) {
      case StrategyKind::None: {
        nn::append_joint_terms(terms, batch, mask, nn::reduction_weight(cfg_.reduction, batch.size()));
        parts = nn::evaluate_terms(params_, terms, &g);
        break;
      }
      case StrategyKind::ER_Res:
      case StrategyKind::ER_Buff:
      case StrategyKind::ER_Mir: {
        auto picked = replay_batch(memory_, sc, params_, batch, mask, cfg_.reduction, cfg_.lr, memory_rng_);
        const double w = nn::reduction_weight(cfg_.reduction, batch.size() + picked.size());
        nn::append_joint_terms(terms, batch, mask, w);
        append_memory_terms(terms, memory_, picked, w);
        parts = nn::evaluate_terms(params_, terms, &g);
        break;
      }
      case StrategyKind::AGEM: {
        nn::append_joint_terms(terms, batch, mask, nn::reduction_weight(cfg_.reduction, batch.size()));
        parts = nn::evaluate_terms(params_, terms, &g);
        if (!memory_.empty()) {
          auto ref = memory_rng_.sample_indices(memory_.size(), sc.replay_batch);
          std::vector<nn::Term> ref_terms;
          append_memory_terms(ref_terms, memory_, ref, nn::reduction_weight(cfg_.reduction, ref.size()));
          Gradient g_ref = params_.zeros_like();
          nn::evaluate_terms(params_, ref_terms, &g_ref);
          Projection p = agem_project(g, g_ref);
          log_.agem_projections += p.projected;
          log_.agem_degenerate += p.degenerate;
          g = std::move(p.g);
        }
        break;
      }
      case StrategyKind::KD: {
        nn::append_joint_terms(terms, batch, mask, nn::reduction_weight(cfg_.reduction, batch.size()));
        std::vector<std::size_t> with_teacher;
        for (std::size_t i = 0; i < memory_.size(); ++i)
          if (memory_.slots()[i].teacher) with_teacher.push_back(i);
        if (!with_teacher.empty()) {
          auto pick = memory_rng_.sample_indices(with_teacher.size(), sc.replay_batch);
          std::vector<std::size_t> slots;
          for (auto k : pick) slots.push_back(with_teacher[k]);
          append_kd_terms(terms, memory_, slots, sc.kd_temperature,
                          sc.kd_weight * nn::reduction_weight(cfg_.reduction, slots.size()));
        }
        parts = nn::evaluate_terms(params_, terms, &g);
        break;
      }
    }
    nn::adam_step(params_, adam_, g, cfg_.lr);
    log_.steps.push_back({parts.total, parts.cr, parts.prim, parts.kd});
  }

  ModelParams params_;
  nn::AdamState adam_;
  Memory memory_;
  TrainerConfig cfg_;
  Rng shuffle_rng_;
  Rng memory_rng_;
  TrainLog log_;
  int mem_stage_ = 0;
};

// ---- serialization -----------------------------------------------------------

inline nlohmann::ordered_json to_json(const Snapshot& s) {
  nlohmann::ordered_json j;
  j["stage"] = s.stage;
  j["acc_v"] = s.acc_v;
  j["acc_n"] = s.acc_n;
  j["acc_vn"] = s.acc_vn;
  j["acc_ci"] = s.acc_ci;
  j["compactness_v"] = s.compactness_v ? nlohmann::ordered_json(*s.compactness_v) : nlohmann::ordered_json();
  j["compactness_n"] = s.compactness_n ? nlohmann::ordered_json(*s.compactness_n) : nlohmann::ordered_json();
  return j;
}

inline Snapshot snapshot_from_json(const nlohmann::json& j) {
  Snapshot s;
  s.stage = j.at("stage").get<std::string>();
  s.acc_v = j.at("acc_v").get<double>();
  s.acc_n = j.at("acc_n").get<double>();
  s.acc_vn = j.at("acc_vn").get<double>();
  s.acc_ci = j.at("acc_ci").get<double>();
  if (j.contains("compactness_v") && !j["compactness_v"].is_null())
    s.compactness_v = j["compactness_v"].get<double>();
  if (j.contains("compactness_n") && !j["compactness_n"].is_null())
    s.compactness_n = j["compactness_n"].get<double>();
  return s;
}

/// Step losses are stored column-wise to keep the file small.
inline nlohmann::ordered_json to_json(const TrainLog& log, bool with_wall_clock = true) {
  nlohmann::ordered_json j;
  j["seed"] = log.seed;
  if (with_wall_clock) j["wall_seconds"] = log.wall_seconds;
  auto snaps = nlohmann::ordered_json::array();
  for (const auto& s : log.snapshots) snaps.push_back(to_json(s));
  j["snapshots"] = snaps;
  auto stages = nlohmann::ordered_json::array();
  for (const auto& r : log.stages)
    stages.push_back({{"name", r.name},
                      {"steps", r.steps},
                      {"stage_hash", r.stage_hash},
                      {"consumed_hash", r.consumed_hash},
                      {"memory_size", r.memory_size}});
  j["stages"] = stages;
  j["agem_projections"] = log.agem_projections;
  j["agem_degenerate"] = log.agem_degenerate;
  std::vector<double> total, cr, prim, kd;
  for (const auto& s : log.steps) {
    total.push_back(s.total);
    cr.push_back(s.cr);
    prim.push_back(s.prim);
    kd.push_back(s.kd);
  }
  j["steps"] = {{"loss", total}, {"cr", cr}, {"prim", prim}, {"kd", kd}};
  return j;
}

inline TrainLog trainlog_from_json(const nlohmann::json& j) {
  TrainLog log;
  log.seed = j.at("seed").get<std::uint64_t>();
  log.wall_seconds = j.value("wall_seconds", 0.0);
  for (const auto& s : j.at("snapshots")) log.snapshots.push_back(snapshot_from_json(s));
  for (const auto& r : j.at("stages"))
    log.stages.push_back({r.at("name").get<std::string>(), r.at("steps").get<std::size_t>(),
                          r.at("stage_hash").get<std::uint64_t>(),
                          r.at("consumed_hash").get<std::uint64_t>(),
                          r.at("memory_size").get<std::size_t>()});
  log.agem_projections = j.value("agem_projections", std::size_t{0});
  log.agem_degenerate = j.value("agem_degenerate", std::size_t{0});
  const auto& st = j.at("steps");
  const auto n = st.at("loss").size();
  for (std::size_t i = 0; i < n; ++i)
    log.steps.push_back({st["loss"][i].get<double>(), st["cr"][i].get<double>(),
                         st["prim"][i].get<double>(), st["kd"][i].get<double>()});
  return log;
}

}  // namespace c2gen::continual
