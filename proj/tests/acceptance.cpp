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

// Acceptance run: one PASS/FAIL line per criterion, then exit 0 only if all pass.
//
//   acceptance [--out DIR] [--jobs N] [--seeds 1,2,3] [--only 1,2,...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "c2gen/c2gen.hpp"

using namespace c2gen;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string f2(double v) { return eval::fmt2(v); }

// ---- 1 ----------------------------------------------------------------------

Outcome composition_oracle() {
  // Rows of the composition table as written: (signature, nli) -> label.
  const std::map<std::string, char> table{{"+e", 'e'}, {"+n", 'n'}, {"+c", 'c'}, {"oe", 'n'}, {"on", 'n'},
                                          {"oc", 'n'}, {"-e", 'c'}, {"-n", 'n'}, {"-c", 'e'}};
  int ok = 0, agree = 0;
  for (const auto& [row, want] : table) {
    const CompType t = parse_comp_type(row);
    ok += to_char(compose(t.v, t.n)) == want;
    agree += apply(function_type(t.v), t.n) == compose(t.v, t.n);
  }
  return {ok == 9 && agree == 9, std::to_string(ok) + "/9 rows, " + std::to_string(agree) + "/9 function agreements"};
}

// ---- 2 ----------------------------------------------------------------------

Outcome split_constraints() {
  const harness::ExperimentConfig cfg;
  const auto ds = datagen::generate_dataset(cfg.data, 1);
  std::size_t bad_gold = 0;
  for (const auto& x : ds.instances) bad_gold += x.gold_ci != compose(x.ctype.v, x.ctype.n);
  std::string why;
  for (CompType fold : all_comp_types()) {
    const auto s = harness::build_cell_split(cfg, ds, fold, 1);
    const auto train_types = datagen::comp_types(s.train);
    const auto tv = datagen::verb_keys(s.train), tn = datagen::nli_keys(s.train);
    bool ok = !train_types.count(fold) && !s.test.empty();
    for (const auto& x : s.test) {
      ok = ok && x.ctype == fold && tv.count(x.ver.key) && tn.count(x.nli.key);
      bad_gold += x.gold_ci != compose(x.ctype.v, x.ctype.n);
    }
    for (const auto& x : s.train) bad_gold += x.gold_ci != compose(x.ctype.v, x.ctype.n);
    if (!ok) why += to_string(fold) + " ";
  }
  return {why.empty() && bad_gold == 0,
          "9 folds over " + std::to_string(ds.instances.size()) + " instances, violating folds [" + why +
              "], gold mismatches " + std::to_string(bad_gold)};
}

// ---- 3 ----------------------------------------------------------------------

Outcome gradient_check() {
  const auto ds = datagen::generate_dataset(datagen::DataConfig{}, 3);
  const nn::Vocabulary vocab(ds.lexicon);
  nn::ModelConfig mc;
  mc.vocab = vocab.size();
  mc.d_emb = 6;
  mc.hidden = 5;
  mc.init_scale = 0.5;
  Rng rng(11);
  double worst = 0.0;
  std::size_t coords = 0;
  for (int b = 0; b < 10; ++b) {
    auto p = nn::init_params(mc, 100 + b);
    for (auto* t : {&p.b1, &p.b2, &p.head_b[0], &p.head_b[1], &p.head_b[2]})
      for (Eigen::Index i = 0; i < t->size(); ++i) (*t)(i) = rng.uniform(-0.5, 0.5);
    std::vector<nn::Encoded> xs;
    for (int k = 0; k < 4; ++k) xs.push_back(nn::encode(vocab, ds.instances[rng.index(ds.instances.size())]));
    std::vector<const nn::Encoded*> batch;
    for (const auto& x : xs) batch.push_back(&x);
    std::vector<nn::Term> terms;
    nn::append_joint_terms(terms, batch, {}, 0.25);
    terms.push_back({&xs[1].ids_n, nn::Head::N, nn::Term::Kind::Distill, nn::Term::Group::Distill, Label::E,
                     {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)}, 2.0, 0.5});
    nn::Gradient g = p.zeros_like();
    nn::evaluate_terms(p, terms, &g);
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto hi = p, lo = p;
      hi.at(i) += 1e-4;
      lo.at(i) -= 1e-4;
      const double fd = (nn::evaluate_terms(hi, terms).total - nn::evaluate_terms(lo, terms).total) / 2e-4;
      const double an = g.at(i);
      if (fd == 0.0 && an == 0.0) continue;
      worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
      ++coords;
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", worst);
  return {worst < 1e-4, "10 batches, " + std::to_string(coords) + " nonzero coordinates over all 11 tensors, max rel err " + buf};
}

// ---- 4 ----------------------------------------------------------------------

Outcome reservoir_uniformity() {
  const int n = 1000, trials = 10000;
  std::vector<int> hits(n, 0);
  Rng rng(derive_seed(1, "memory"));
  for (int t = 0; t < trials; ++t) {
    continual::EpisodicMemory<int> m(100);
    for (int i = 0; i < n; ++i) m.update(i, continual::Policy::Res, rng);
    for (const auto& s : m.slots()) hits[s.item]++;
  }
  int inside = 0;
  double lo = 1, hi = 0;
  for (int h : hits) {
    const double f = h / double(trials);
    inside += std::abs(f - 0.1) <= 0.010;
    lo = std::min(lo, f);
    hi = std::max(hi, f);
  }
  return {inside >= 990, std::to_string(inside) + "/1000 items within 0.100 +- 0.010 (range " + f2(lo * 100) +
                             "%.." + f2(hi * 100) + "%)"};
}

// ---- 5 ----------------------------------------------------------------------

Outcome agem_projection() {
  nn::ModelConfig mc;
  mc.vocab = 12;
  mc.d_emb = 4;
  mc.hidden = 4;
  mc.init_scale = 1.0;
  double worst = 0.0;
  int unchanged_violations = 0, projected = 0;
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const auto g = nn::init_params(mc, 7 * k + 1), r = nn::init_params(mc, 7 * k + 2);
    const auto out = continual::agem_project(g, r);
    worst = std::min(worst, nn::dot(out.g, r));
    projected += out.projected;
    if (nn::dot(g, r) >= 0) {
      auto diff = out.g;
      nn::axpy(-1.0, g, diff);
      unchanged_violations += nn::dot(diff, diff) != 0.0;
    }
  }
  return {worst >= -1e-9 && unchanged_violations == 0,
          "min <g~, g_ref> " + std::to_string(worst) + ", " + std::to_string(projected) +
              " projected, changed-when-nonconflicting " + std::to_string(unchanged_violations)};
}

// ---- 6 ----------------------------------------------------------------------

Outcome kd_identity() {
  Rng rng(6);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    std::vector<nn::Logits> t(3);
    for (auto& z : t) z = {rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)};
    for (double tau : {1.0, 2.0, 5.0}) worst = std::max(worst, std::abs(continual::kd_loss(t, t, tau)));
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", worst);
  return {worst <= 1e-9, std::string("max |kd(t,t)| ") + buf};
}

// ---- 7 ----------------------------------------------------------------------

Outcome forget_arithmetic() {
  const double a = *eval::forget(93.94, 71.15), b = *eval::forget(57.3, 57.3);
  return {std::abs(a - 24.26) <= 0.01 && b == 0.0, "forget(93.94, 71.15) = " + f2(a) + ", forget(x, x) = " + f2(b)};
}

// ---- trend grid ---------------------------------------------------------------

struct TrendRun {
  harness::GridConfig grid;
  std::vector<harness::CellRecord> records;
  harness::Aggregate agg;
  double seconds = 0.0;
};

harness::GridConfig trend_grid(const std::vector<std::uint64_t>& seeds) {
  using harness::json;
  json settings = json::array();
  settings.push_back({{"label", "CGen None"}, {"regime", "cgen"}});
  for (const char* order : {"ver-nat", "nat-ver"})
    for (const char* kind : {"None", "ER_Res"})
      settings.push_back({{"label", std::string("C2Gen ") + order + " " + kind},
                          {"order", order},
                          {"strategy", {{"kind", kind}}}});
  for (const char* cur : {"easy-hard", "hard-easy"})
    settings.push_back({{"label", std::string("C2Gen ver-nat ER_Res S3 ") + cur},
                        {"order", "ver-nat"},
                        {"curriculum", cur},
                        {"strategy", {{"kind", "ER_Res"}}}});
  return harness::grid_from_json(json{{"name", "acceptance"}, {"base", {{"seeds", seeds}}}, {"settings", settings}});
}

Outcome pxci_partition(const TrendRun& run) {
  std::size_t evals = 0, bad = 0;
  for (const auto& r : run.records) {
    if (!r.ok) continue;
    const auto& p = r.report.pxci;
    ++evals;
    bad += std::abs(p[0] + p[1] + p[2] + p[3] - 100.0) > 0.01 || std::abs(r.report.acc_ci - (p[0] + p[2])) > 1e-9;
  }
  return {evals > 0 && bad == 0, std::to_string(evals) + " evaluations, " + std::to_string(bad) + " violations"};
}

std::optional<double> mean(const TrendRun& run, const std::string& label, const std::string& metric) {
  return run.agg.mean(label, metric);
}

std::string opt2(std::optional<double> v) { return v ? f2(*v) : "n/a"; }

Outcome trend_forgetting(const TrendRun& run) {
  bool pass = true;
  std::string d;
  for (const char* order : {"ver-nat", "nat-ver"}) {
    const std::string label = std::string("C2Gen ") + order + " None";
    const auto s1 = mean(run, label, "first_s1"), s2 = mean(run, label, "first_s2");
    const bool ok = s1 && s2 && *s1 - *s2 >= 5.0;
    pass = pass && ok;
    d += std::string(order) + (order[0] == 'v' ? " V " : " N ") + opt2(s1) + " -> " + opt2(s2) + " (drop " +
         (s1 && s2 ? f2(*s1 - *s2) : "n/a") + ")" + (order[0] == 'v' ? "; " : "");
  }
  return {pass, d};
}

Outcome trend_mitigation(const TrendRun& run) {
  bool pass = true;
  std::string d;
  for (const char* order : {"ver-nat", "nat-ver"}) {
    const std::string none = std::string("C2Gen ") + order + " None", er = std::string("C2Gen ") + order + " ER_Res";
    const auto fn = mean(run, none, "forget_first"), fe = mean(run, er, "forget_first");
    const auto cn = mean(run, none, "acc_ci"), ce = mean(run, er, "acc_ci");
    const bool forget_ok = fn && fe && *fn > 0 && *fe <= 0.5 * *fn;
    const bool ci_ok = cn && ce && *ce > *cn;
    pass = pass && forget_ok && ci_ok;
    // Informational only: the same ratio taken on fold-averaged accuracies.
    auto pooled = [&](const std::string& label) -> std::string {
      const auto a1 = mean(run, label, "first_s1"), a2 = mean(run, label, "first_s2");
      const auto f = a1 && a2 ? eval::forget(*a1, *a2) : std::nullopt;
      return opt2(f);
    };
    d += std::string(order) + ": forget " + opt2(fn) + " -> " + opt2(fe) + (forget_ok ? " ok" : " NOT halved") +
         " (on averaged accuracies " + pooled(none) + " -> " + pooled(er) + ")" +
         ", acc_ci " + opt2(cn) + " -> " + opt2(ce) + (ci_ok ? " ok" : " NOT higher") + (order[0] == 'v' ? "; " : "");
  }
  return {pass, d};
}

Outcome trend_offline(const TrendRun& run) {
  const auto cg = mean(run, "CGen None", "acc_ci");
  bool pass = cg.has_value();
  std::string d = "CGen " + opt2(cg);
  for (const char* order : {"ver-nat", "nat-ver"}) {
    const auto c = mean(run, std::string("C2Gen ") + order + " None", "acc_ci");
    pass = pass && c && *cg > *c;
    d += std::string(", ") + order + " " + opt2(c) + " (gap " + (cg && c ? f2(*cg - *c) : "n/a") + ")";
  }
  return {pass, d};
}

Outcome trend_curriculum(const TrendRun& run) {
  const auto eh = mean(run, "C2Gen ver-nat ER_Res S3 easy-hard", "acc_ci");
  const auto he = mean(run, "C2Gen ver-nat ER_Res S3 hard-easy", "acc_ci");
  return {eh && he && *eh >= *he,
          "easy->hard " + opt2(eh) + " vs hard->easy " + opt2(he) + " (diff " + (eh && he ? f2(*eh - *he) : "n/a") + ")"};
}

// ---- 13 ---------------------------------------------------------------------

Outcome relexicalization() {
  const harness::ExperimentConfig cfg;
  const std::uint64_t seed = 1;
  const auto ds = datagen::generate_dataset(cfg.data, seed);
  nn::Vocabulary vocab(ds.lexicon);
  nn::ModelConfig mc = cfg.model;
  mc.vocab = vocab.size();

  // Offline training on the whole original dataset.
  datagen::Stage stage;
  stage.name = "S1";
  stage.instances = ds.instances;
  stage.epochs = cfg.stream.epochs;
  continual::Trainer trainer(nn::init_params(mc, derive_seed(seed, "init")), cfg.trainer, seed);
  trainer.train_stage(continual::encode_stage(vocab, stage));
  const auto orig = nn::encode_all(vocab, ds.instances);
  const double acc_orig = eval::evaluate(trainer.params(), orig).acc_ci;

  const auto relex = datagen::relexicalize(ds.lexicon, ds.instances, seed);
  auto params = trainer.params();
  const std::size_t before = vocab.size();
  vocab.add_all(relex.lexicon);
  nn::grow_vocabulary(params, vocab.size() - before, cfg.model.init_scale, derive_seed(seed, "relexicalize"));
  const auto test = nn::encode_all(vocab, relex.instances);
  const double acc = eval::evaluate(params, test).acc_ci;

  std::array<std::size_t, 3> hist{}, pred{};
  for (const auto& x : relex.instances) hist[code(x.gold_ci)]++;
  for (const auto& x : test) pred[code(nn::predict(params, x).ci)]++;
  const double majority = 100.0 * *std::max_element(hist.begin(), hist.end()) / relex.instances.size();
  auto pct = [&](const std::array<std::size_t, 3>& h) {
    std::string s;
    for (int i = 0; i < 3; ++i) s += (i ? "/" : "") + f2(100.0 * h[i] / test.size());
    return s;
  };
  return {std::abs(acc - majority) <= 5.0, "relexicalized acc_ci " + f2(acc) + " vs majority " + f2(majority) +
                                               ", gold e/n/c " + pct(hist) + ", predicted e/n/c " + pct(pred) +
                                               " (original-lexicon acc_ci " + f2(acc_orig) + ")"};
}

// ---- 14 ---------------------------------------------------------------------

Outcome determinism(const TrendRun& run, const fs::path& out) {
  // Re-run the first C2Gen cell of the grid into a fresh directory.
  const auto& cfg = run.grid.settings[1];
  const CompType fold = cfg.folds.front();
  const std::uint64_t seed = cfg.seeds.front();
  const auto hash = harness::cell_hash(cfg, fold, seed);
  const fs::path first = out / "grid" / ("cell-" + hash) / "eval.json";
  const fs::path again_dir = out / "rerun";
  fs::remove_all(again_dir);
  harness::run_and_write_cell(cfg, 1, fold, seed, again_dir);
  const fs::path again = again_dir / ("cell-" + hash) / "eval.json";
  if (!fs::exists(first) || !fs::exists(again)) return {false, "eval.json missing"};
  const bool same = harness::read_text(first) == harness::read_text(again);
  return {same, "cell " + hash + (same ? " byte-identical" : " differs")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string out = "acceptance_out";
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<int> only;
  app.add_option("--out", out, "scratch directory");
  app.add_option("--jobs", jobs, "worker threads for the trend grid")->check(CLI::PositiveNumber);
  app.add_option("--seeds", seeds, "seeds for the trend grid")->delimiter(',');
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::set<int> want(only.begin(), only.end());
  auto wanted = [&](int k) { return want.empty() || want.count(k); };
  int failures = 0;
  auto report = [&](int k, const char* name, const std::function<Outcome()>& fn) {
    if (!wanted(k)) return;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", k, name, o.detail.c_str(), s);
    std::fflush(stdout);
    failures += !o.pass;
  };

  report(1, "composition oracle", composition_oracle);
  report(2, "split constraints", split_constraints);
  report(3, "gradient correctness", gradient_check);
  report(4, "reservoir uniformity", reservoir_uniformity);
  report(5, "A-GEM projection", agem_projection);
  report(6, "KD identity", kd_identity);
  report(7, "forget arithmetic", forget_arithmetic);

  const bool need_grid = want.empty() || want.count(8) || want.count(9) || want.count(10) || want.count(11) ||
                         want.count(12) || want.count(14);
  TrendRun run;
  if (need_grid) {
    run.grid = trend_grid(seeds);
    const fs::path grid_dir = fs::path(out) / "grid";
    const auto t0 = std::chrono::steady_clock::now();
    run.records = harness::run_grid(run.grid, grid_dir, jobs);
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    run.agg = harness::aggregate(run.records);
    harness::write_aggregate(run.agg, grid_dir);
    std::size_t failed = 0;
    for (const auto& r : run.records) failed += !r.ok;
    std::printf("# trend grid: %zu cells, %zu failed, %.1fs wall on %u thread(s), %.1f cell-seconds per setting\n",
                run.records.size(), failed, run.seconds, jobs, run.seconds * jobs / run.grid.settings.size());
    std::fflush(stdout);
  }
  report(8, "PxCI partition", [&] { return pxci_partition(run); });
  report(9, "T1 forgetting exists", [&] { return trend_forgetting(run); });
  report(10, "T2 ER_Res mitigates", [&] { return trend_mitigation(run); });
  report(11, "T3 continual below offline", [&] { return trend_offline(run); });
  report(12, "T4 easy->hard curriculum", [&] { return trend_curriculum(run); });
  report(13, "relexicalization control", relexicalization);
  report(14, "determinism", [&] { return determinism(run, out); });
  return failures ? 1 : 0;
}
