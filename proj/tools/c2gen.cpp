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

// c2gen: generate | train | grid | report | selfcheck
//
// Exit codes: 0 all cells ok, 2 some cells failed, 1 configuration or usage error.
// C2GEN_OUT, when set, replaces the output directory from flags or config.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "c2gen/c2gen.hpp"

namespace fs = std::filesystem;
using namespace c2gen;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kCellsFailed = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "md";
  unsigned jobs = 1;
};

fs::path resolve_out(const Common& c, const std::string& from_config) {
  if (const char* env = std::getenv("C2GEN_OUT"); env && *env) return env;
  if (!c.out.empty()) return c.out;
  return from_config;
}

std::string render(const harness::Aggregate& a, const std::string& format) {
  if (format == "json") return harness::to_json(a).dump(2) + "\n";
  if (format == "csv") return harness::to_csv(a);
  return harness::to_markdown(a);
}

int finish_grid(const harness::GridConfig& grid, const Common& c) {
  const fs::path out = resolve_out(c, grid.settings.front().out);
  const auto cells = harness::enumerate_cells(grid);
  std::fprintf(stderr, "running %zu cells into %s with %u job(s)\n", cells.size(), out.string().c_str(), c.jobs);
  auto records = harness::run_grid(grid, out, c.jobs, [](std::size_t d, std::size_t n, const harness::CellRecord& r) {
    std::fprintf(stderr, "[%zu/%zu] %s fold %s seed %llu: %s\n", d, n, r.label.c_str(), to_string(r.fold).c_str(),
                 static_cast<unsigned long long>(r.seed),
                 r.ok ? ("acc_ci " + eval::fmt2(r.report.acc_ci)).c_str() : ("FAILED: " + r.error).c_str());
  });
  const auto agg = harness::aggregate(records);
  harness::write_aggregate(agg, out);
  std::cout << render(agg, c.format);
  for (const auto& r : records)
    if (!r.ok) return kCellsFailed;
  return kOk;
}

void apply_seed(harness::GridConfig& g, const Common& c) {
  if (!c.seed) return;
  for (auto& s : g.settings) s.seeds = {*c.seed};
}

int cmd_train(const Common& c) {
  harness::GridConfig g;
  g.name = "train";
  g.settings.push_back(c.config.empty() ? harness::ExperimentConfig{} : harness::load_config(c.config));
  apply_seed(g, c);
  return finish_grid(g, c);
}

int cmd_grid(const Common& c) {
  harness::GridConfig g = c.config.empty() ? harness::grid_from_json(harness::default_grid_json())
                                           : harness::load_grid(c.config);
  apply_seed(g, c);
  return finish_grid(g, c);
}

int cmd_report(const Common& c) {
  const fs::path out = resolve_out(c, "runs");
  const auto agg = harness::aggregate(harness::load_cell_records(out));
  harness::write_aggregate(agg, out);
  std::cout << render(agg, c.format);
  for (const auto& s : agg.settings)
    if (s.failed) return kCellsFailed;
  return kOk;
}

/// Dataset, per-fold splits and streams as JSON Lines.
int cmd_generate(const Common& c) {
  const auto cfg = c.config.empty() ? harness::ExperimentConfig{} : harness::load_config(c.config);
  const std::uint64_t seed = c.seed.value_or(cfg.seeds.front());
  const fs::path out = resolve_out(c, cfg.out) / "data";
  fs::create_directories(out);
  const auto ds = datagen::generate_dataset(cfg.data, seed);
  {
    std::ofstream os(out / "dataset.jsonl");
    datagen::write_jsonl(os, ds.instances);
  }
  {
    std::ofstream os(out / "nli_pairs.jsonl");
    for (const auto& p : ds.nli_pairs) os << datagen::to_json(p).dump() << '\n';
  }
  for (CompType fold : cfg.folds) {
    const fs::path dir = out / ("fold-" + std::to_string(fold.index()));
    fs::create_directories(dir);
    const auto split = harness::build_cell_split(cfg, ds, fold, seed);
    if (auto why = datagen::check_split(split); !why.empty()) throw Error("split check failed: " + why);
    std::ofstream tr(dir / "train.jsonl");
    datagen::write_jsonl(tr, split.train);
    std::ofstream te(dir / "test.jsonl");
    datagen::write_jsonl(te, split.test);
    datagen::write_stream(harness::build_cell_stream(cfg, split, seed), dir / "stream");
    std::fprintf(stderr, "fold %s: train %zu, test %zu\n", to_string(fold).c_str(), split.train.size(),
                 split.test.size());
  }
  std::printf("wrote %zu instances to %s\n", ds.instances.size(), out.string().c_str());
  return kOk;
}

/// Fast structural checks on a fresh seed.
int cmd_selfcheck(const Common& c) {
  const std::uint64_t seed = c.seed.value_or(1);
  int failures = 0;
  auto line = [&](bool ok, const std::string& what) {
    std::printf("%s %s\n", ok ? "PASS" : "FAIL", what.c_str());
    failures += !ok;
  };

  bool table = true;
  for (CompType t : all_comp_types()) {
    const Label expect = t.v == Signature::Plus ? t.n : t.v == Signature::Neutral ? Label::N : invert(t.n);
    table = table && compose(t.v, t.n) == expect;
  }
  line(table, "composition table");

  const harness::ExperimentConfig cfg;
  const auto ds = datagen::generate_dataset(cfg.data, seed);
  bool gold = true;
  for (const auto& x : ds.instances) gold = gold && x.gold_ci == compose(x.ctype.v, x.ctype.n);
  line(gold, "gold labels follow the composition table (" + std::to_string(ds.instances.size()) + " instances)");

  std::string why;
  for (CompType fold : all_comp_types()) {
    auto s = harness::build_cell_split(cfg, ds, fold, seed);
    if (auto w = datagen::check_split(s); !w.empty()) why += to_string(fold) + ": " + w + "; ";
  }
  line(why.empty(), "split constraints on all nine folds" + (why.empty() ? "" : " (" + why + ")"));

  const nn::Vocabulary vocab(ds.lexicon);
  nn::ModelConfig mc;
  mc.vocab = vocab.size();
  const auto p = nn::init_params(mc, seed);
  std::vector<nn::Encoded> xs;
  for (std::size_t i = 0; i < 4; ++i) xs.push_back(nn::encode(vocab, ds.instances[i * 997 % ds.instances.size()]));
  std::vector<const nn::Encoded*> batch;
  for (const auto& x : xs) batch.push_back(&x);
  const auto g = nn::backward(p, batch);
  double worst = 0.0;
  Rng pick(seed);
  for (int k = 0; k < 20; ++k) {
    const std::size_t i = pick.index(p.size());
    auto a = p, b = p;
    a.at(i) += 1e-4;
    b.at(i) -= 1e-4;
    const double fd = (nn::loss(a, batch).total - nn::loss(b, batch).total) / 2e-4;
    const double an = g.at(i);
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
    worst = std::max(worst, std::abs(fd - an) / denom);
  }
  line(worst < 1e-4, "gradient check, worst relative error " + std::to_string(worst));

  std::stringstream buf;
  nn::write_checkpoint(buf, {"{}", seed, 0, p});
  const auto back = nn::read_checkpoint(buf);
  bool same = true;
  for (std::size_t i = 0; i < p.size(); i += 97)
    same = same && back.params.at(i) == static_cast<double>(static_cast<float>(p.at(i)));
  line(same, "checkpoint round trip");

  return failures ? kCellsFailed : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual compositional generalization lab for synthetic NLI"};
  app.require_subcommand(1);
  Common c;
  std::uint64_t seed_value = 0;

  auto add_common = [&](CLI::App* sub, bool config, bool seed, bool jobs) {
    if (config) sub->add_option("--config", c.config, "JSON config (single setting or grid)")->check(CLI::ExistingFile);
    if (seed) sub->add_option("--seed", seed_value, "run only this seed");
    sub->add_option("--out", c.out, "output directory (C2GEN_OUT overrides)");
    sub->add_option("--format", c.format, "stdout format")->check(CLI::IsMember({"json", "csv", "md"}));
    if (jobs) sub->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  };
  auto* gen = app.add_subcommand("generate", "write the dataset, splits and streams");
  add_common(gen, true, true, false);
  auto* train = app.add_subcommand("train", "run one setting over its folds and seeds");
  add_common(train, true, true, true);
  auto* grid = app.add_subcommand("grid", "run a grid of settings (default: the 13-setting comparison)");
  add_common(grid, true, true, true);
  auto* report = app.add_subcommand("report", "re-aggregate cell results in an output directory");
  add_common(report, false, false, false);
  auto* self = app.add_subcommand("selfcheck", "quick structural checks");
  self->add_option("--seed", seed_value, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }
  for (auto* sub : {gen, train, grid, self})
    if (sub->parsed() && sub->count("--seed")) c.seed = seed_value;

  try {
    if (gen->parsed()) return cmd_generate(c);
    if (train->parsed()) return cmd_train(c);
    if (grid->parsed()) return cmd_grid(c);
    if (report->parsed()) return cmd_report(c);
    if (self->parsed()) return cmd_selfcheck(c);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  }
  return kConfigError;
}
