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

// One cell = (setting, fold, seed). Cells share nothing and run on a small
// worker pool; a failing cell is recorded and the rest continue.
//
// Output layout:
//   OUT/cell-<hash>/config.json     setting echo plus fold and seed
//   OUT/cell-<hash>/trainlog.json   losses, snapshots, wall clock
//   OUT/cell-<hash>/eval.json       final metrics (byte-stable across reruns)
//   OUT/cell-<hash>/checkpoint.bin  final parameters
//   OUT/cell-<hash>/error.txt       only when the cell failed
//   OUT/aggregate.{json,csv,md}

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "c2gen/checkpoint.hpp"
#include "c2gen/config.hpp"
#include "c2gen/eval.hpp"
#include "c2gen/split.hpp"
#include "c2gen/stream.hpp"
#include "c2gen/trainer.hpp"

namespace c2gen::harness {

namespace fs = std::filesystem;

/// What a cell contributes to aggregation; also the content of eval.json.
struct CellRecord {
  std::string cell;
  std::size_t setting = 0;
  std::string label;
  std::string regime;
  std::string order;
  std::string strategy;
  std::string curriculum;
  CompType fold;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  eval::EvalReport report;
  std::vector<continual::Snapshot> snapshots;

  const continual::Snapshot* snapshot(const std::string& stage) const {
    for (const auto& s : snapshots)
      if (s.stage == stage) return &s;
    return nullptr;
  }
};

struct CellOutput {
  CellRecord record;
  continual::TrainLog log;
  nn::ModelParams params;
  std::uint64_t steps = 0;
};

/// Everything that changes results, minus bookkeeping fields.
inline json cell_identity(const ExperimentConfig& cfg, CompType fold, std::uint64_t seed) {
  json j = to_json(cfg);
  j.erase("out");
  j.erase("folds");
  j.erase("seeds");
  j.erase("label");
  j["fold"] = to_string(fold);
  j["seed"] = seed;
  return j;
}

inline std::string cell_hash(const ExperimentConfig& cfg, CompType fold, std::uint64_t seed) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(cell_identity(cfg, fold, seed).dump())));
  return buf;
}

/// Builds the stream for a cell, with S3 appended when a curriculum is set.
inline datagen::Stream build_cell_stream(const ExperimentConfig& cfg, const datagen::Split& split,
                                         std::uint64_t seed) {
  Rng rng(derive_seed(seed, "stream"));
  auto stream = datagen::build_stream(split, cfg.regime, cfg.order, cfg.stream, rng);
  if (cfg.curriculum != datagen::Curriculum::None)
    stream.stages.push_back(datagen::build_curriculum_stage(split, cfg.curriculum, cfg.stream, rng));
  return stream;
}

inline datagen::Split build_cell_split(const ExperimentConfig& cfg, const datagen::Dataset& ds,
                                       CompType fold, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "split"));
  return datagen::ninefold_split(ds.lexicon, ds.instances, fold, rng, cfg.split);
}

inline CellOutput run_cell(const ExperimentConfig& cfg, std::size_t setting, CompType fold,
                           std::uint64_t seed) {
  CellOutput out;
  auto& rec = out.record;
  rec.cell = cell_hash(cfg, fold, seed);
  rec.setting = setting;
  rec.label = cfg.label;
  rec.regime = datagen::to_string(cfg.regime);
  rec.order = cfg.regime == datagen::Regime::CGen ? "n/a" : datagen::to_string(cfg.order);
  rec.strategy = continual::to_string(cfg.trainer.strategy.kind);
  rec.curriculum = datagen::to_string(cfg.curriculum);
  rec.fold = fold;
  rec.seed = seed;

  const auto ds = datagen::generate_dataset(cfg.data, seed);
  const auto split = build_cell_split(cfg, ds, fold, seed);
  const auto stream = build_cell_stream(cfg, split, seed);

  const nn::Vocabulary vocab(ds.lexicon);
  const auto test = eval::make_eval_set(vocab, split);
  nn::ModelConfig mc = cfg.model;
  mc.vocab = vocab.size();
  continual::Trainer trainer(nn::init_params(mc, derive_seed(seed, "init")), cfg.trainer, seed);

  auto hook = [&](const nn::ModelParams& p, const std::string& stage) {
    const auto r = eval::evaluate(p, test);
    return continual::Snapshot{stage,
                               r.acc_v,
                               r.acc_n,
                               r.acc_vn,
                               r.acc_ci,
                               eval::compactness(p, vocab, split.probe_v),
                               eval::compactness(p, vocab, split.probe_n)};
  };
  for (const auto& stage : stream.stages) trainer.train_stage(continual::encode_stage(vocab, stage), hook);

  rec.report = eval::evaluate(trainer.params(), test);
  rec.snapshots = trainer.log().snapshots;
  const auto* s1 = rec.snapshot("S1");
  const auto* s2 = rec.snapshot("S2");
  if (s1 && s2) {
    rec.report.forget_v = eval::forget(s1->acc_v, s2->acc_v);
    rec.report.forget_n = eval::forget(s1->acc_n, s2->acc_n);
  }
  const auto& last = rec.snapshots.back();
  rec.report.compactness = {last.compactness_v, last.compactness_n};
  out.log = trainer.log();
  out.params = trainer.params();
  out.steps = trainer.step_count();
  return out;
}

// ---- eval.json -------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const CellRecord& r) {
  nlohmann::ordered_json j;
  j["cell"] = r.cell;
  j["setting"] = r.setting;
  j["label"] = r.label;
  j["regime"] = r.regime;
  j["order"] = r.order;
  j["strategy"] = r.strategy;
  j["curriculum"] = r.curriculum;
  j["fold"] = to_string(r.fold);
  j["seed"] = r.seed;
  j["ok"] = r.ok;
  if (!r.ok) {
    j["error"] = r.error;
    return j;
  }
  j["report"] = eval::to_json(r.report);
  auto snaps = nlohmann::ordered_json::array();
  for (const auto& s : r.snapshots) snaps.push_back(continual::to_json(s));
  j["snapshots"] = snaps;
  return j;
}

inline CellRecord cell_record_from_json(const json& j) {
  CellRecord r;
  r.cell = j.at("cell").get<std::string>();
  r.setting = j.at("setting").get<std::size_t>();
  r.label = j.at("label").get<std::string>();
  r.regime = j.at("regime").get<std::string>();
  r.order = j.at("order").get<std::string>();
  r.strategy = j.at("strategy").get<std::string>();
  r.curriculum = j.at("curriculum").get<std::string>();
  r.fold = parse_comp_type(j.at("fold").get<std::string>());
  r.seed = j.at("seed").get<std::uint64_t>();
  r.ok = j.at("ok").get<bool>();
  if (!r.ok) {
    r.error = j.value("error", std::string());
    return r;
  }
  r.report = eval::eval_report_from_json(j.at("report"));
  for (const auto& s : j.at("snapshots")) r.snapshots.push_back(continual::snapshot_from_json(s));
  return r;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os << text;
  if (!os) throw Error("write failed: " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

/// Runs one cell and writes its directory. Never throws for training failures.
inline CellRecord run_and_write_cell(const ExperimentConfig& cfg, std::size_t setting, CompType fold,
                                     std::uint64_t seed, const fs::path& out_dir) {
  const std::string hash = cell_hash(cfg, fold, seed);
  const fs::path dir = out_dir / ("cell-" + hash);
  fs::create_directories(dir);
  fs::remove(dir / "error.txt");
  json cfg_echo = to_json(cfg);
  cfg_echo["fold"] = to_string(fold);
  cfg_echo["seed"] = seed;
  write_text(dir / "config.json", cfg_echo.dump(2) + "\n");
  try {
    CellOutput res = run_cell(cfg, setting, fold, seed);
    write_text(dir / "trainlog.json", continual::to_json(res.log).dump() + "\n");
    write_text(dir / "eval.json", to_json(res.record).dump(2) + "\n");
    nn::save_checkpoint(dir / "checkpoint.bin", {cfg_echo.dump(), seed, res.steps, res.params});
    return res.record;
  } catch (const std::exception& e) {
    CellRecord r;
    r.cell = hash;
    r.setting = setting;
    r.label = cfg.label;
    r.regime = datagen::to_string(cfg.regime);
    r.order = cfg.regime == datagen::Regime::CGen ? "n/a" : datagen::to_string(cfg.order);
    r.strategy = continual::to_string(cfg.trainer.strategy.kind);
    r.curriculum = datagen::to_string(cfg.curriculum);
    r.fold = fold;
    r.seed = seed;
    r.ok = false;
    r.error = e.what();
    write_text(dir / "error.txt", std::string(e.what()) + "\n");
    write_text(dir / "eval.json", to_json(r).dump(2) + "\n");
    return r;
  }
}

struct CellJob {
  std::size_t setting;
  CompType fold;
  std::uint64_t seed;
};

inline std::vector<CellJob> enumerate_cells(const GridConfig& grid) {
  std::vector<CellJob> jobs;
  for (std::size_t s = 0; s < grid.settings.size(); ++s)
    for (CompType f : grid.settings[s].folds)
      for (std::uint64_t seed : grid.settings[s].seeds) jobs.push_back({s, f, seed});
  return jobs;
}

using Progress = std::function<void(std::size_t done, std::size_t total, const CellRecord&)>;

/// Runs every cell of the grid on `jobs` worker threads. Records come back in
/// enumeration order regardless of scheduling.
inline std::vector<CellRecord> run_grid(const GridConfig& grid, const fs::path& out_dir,
                                        unsigned jobs = 1, const Progress& progress = {}) {
  fs::create_directories(out_dir);
  const auto cells = enumerate_cells(grid);
  std::vector<CellRecord> records(cells.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const auto& c = cells[i];
      records[i] = run_and_write_cell(grid.settings[c.setting], c.setting, c.fold, c.seed, out_dir);
      const std::size_t d = ++done;
      if (progress) {
        std::lock_guard lock(mu);
        progress(d, cells.size(), records[i]);
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(cells.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return records;
}

/// Every cell-*/eval.json under `out_dir`, ordered by setting, fold, seed.
inline std::vector<CellRecord> load_cell_records(const fs::path& out_dir) {
  if (!fs::is_directory(out_dir)) throw Error("no such output directory: " + out_dir.string());
  std::vector<CellRecord> out;
  for (const auto& e : fs::directory_iterator(out_dir)) {
    if (!e.is_directory() || e.path().filename().string().rfind("cell-", 0) != 0) continue;
    const fs::path p = e.path() / "eval.json";
    if (!fs::exists(p)) continue;
    out.push_back(cell_record_from_json(read_json_file(p)));
  }
  std::sort(out.begin(), out.end(), [](const CellRecord& a, const CellRecord& b) {
    if (a.setting != b.setting) return a.setting < b.setting;
    if (a.fold != b.fold) return a.fold < b.fold;
    return a.seed < b.seed;
  });
  return out;
}

}  // namespace c2gen::harness
