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

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "c2gen/continual.hpp"
#include "c2gen/trainer.hpp"

using namespace c2gen;
using namespace c2gen::continual;
using nn::Head;
using nn::Logits;

namespace {

using IntMemory = EpisodicMemory<int>;

nn::ModelParams toy_model(std::uint64_t seed) {
  nn::ModelConfig cfg;
  cfg.vocab = 3;
  cfg.d_emb = 1;
  cfg.hidden = 1;
  cfg.init_scale = 0.8;
  return nn::init_params(cfg, seed);
}

Encoded toy_item(std::vector<int> ids, Label gold) {
  Encoded x;
  x.ids_ci = x.ids_v = x.ids_n = std::move(ids);
  x.gold_ci = x.gold_v = x.gold_n = gold;
  return x;
}

// Joint loss of one item computed only through forward(): sum of the three heads' CE.
double joint_loss_oracle(const nn::ModelParams& p, const Encoded& x, nn::TaskMask mask) {
  double s = 0.0;
  for (Head h : nn::kHeads) {
    if (h == Head::CI ? !mask.ci : !mask.prim) continue;
    const auto z = nn::forward(p, x.ids(h)).logits[code(h)];
    const double lse = std::log(std::exp(z[0]) + std::exp(z[1]) + std::exp(z[2]));
    s += lse - z[code(x.gold(h))];
  }
  return s;
}

}  // namespace

TEST(Reservoir, BelowCapacityKeepsEverything) {
  IntMemory m(100);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) m.update(i, Policy::Res, rng);
  ASSERT_EQ(m.size(), 100u);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(m.slots()[i].item, i);
}

TEST(Reservoir, InclusionProbabilityIsUniform) {
  const int n = 1000, trials = 10000;
  std::vector<int> hits(n, 0);
  Rng rng(2024);
  for (int t = 0; t < trials; ++t) {
    IntMemory m(100);
    for (int i = 0; i < n; ++i) m.update(i, Policy::Res, rng);
    for (const auto& s : m.slots()) hits[s.item]++;
  }
  int inside = 0;
  for (int h : hits) inside += std::abs(h / double(trials) - 0.1) <= 0.01;
  EXPECT_GE(inside, 990);
}

TEST(Reservoir, SpansStagesAndNeverExceedsCapacity) {
  IntMemory m(10);
  Rng rng(3);
  m.begin_stage(0, Policy::Res, rng);
  for (int i = 0; i < 50; ++i) m.update(i, Policy::Res, rng);
  m.begin_stage(1, Policy::Res, rng);
  for (int i = 0; i < 50; ++i) {
    m.update(100 + i, Policy::Res, rng);
    EXPECT_LE(m.size(), 10u);
  }
  EXPECT_EQ(m.seen_total(), 100u);
  EXPECT_EQ(m.seen_in_stage(1), 50u);
  EXPECT_EQ(m.count_stage(0) + m.count_stage(1), 10u);
}

TEST(Buff, TwoStagesSplitEvenly) {
  IntMemory m(100);
  Rng rng(4);
  m.begin_stage(0, Policy::Buff, rng);
  for (int i = 0; i < 500; ++i) m.update(i, Policy::Buff, rng);
  EXPECT_EQ(m.count_stage(0), 100u);
  m.begin_stage(1, Policy::Buff, rng);
  EXPECT_EQ(m.count_stage(0), 50u);
  for (int i = 0; i < 500; ++i) m.update(1000 + i, Policy::Buff, rng);
  EXPECT_EQ(m.count_stage(0), 50u);
  EXPECT_EQ(m.count_stage(1), 50u);
  for (const auto& s : m.slots()) EXPECT_EQ(s.item >= 1000, s.stage == 1);
  m.begin_stage(2, Policy::Buff, rng);
  EXPECT_EQ(m.quota(), 33u);
  EXPECT_EQ(m.count_stage(0), 33u);
  EXPECT_EQ(m.count_stage(1), 33u);
}

TEST(Buff, WithinStageIsAReservoir) {
  const int trials = 4000;
  std::vector<int> hits(200, 0);
  Rng rng(5);
  for (int t = 0; t < trials; ++t) {
    IntMemory m(20);
    m.begin_stage(0, Policy::Buff, rng);
    for (int i = 0; i < 10; ++i) m.update(-1, Policy::Buff, rng);
    m.begin_stage(1, Policy::Buff, rng);
    for (int i = 0; i < 200; ++i) m.update(i, Policy::Buff, rng);
    for (const auto& s : m.slots())
      if (s.stage == 1) hits[s.item]++;
  }
  // quota 10 of 200 items → 0.05 each.
  for (int h : hits) EXPECT_NEAR(h / double(trials), 0.05, 0.02);
}

TEST(Memory, ClearAndCapacityValidation) {
  IntMemory m(3);
  Rng rng(1);
  m.update(1, Policy::Res, rng);
  m.clear();
  EXPECT_TRUE(m.empty());
  EXPECT_EQ(m.seen_total(), 0u);
  EXPECT_THROW(IntMemory(0), Error);
}

TEST(Strategy, ConfigValidation) {
  StrategyConfig c;
  c.kind = StrategyKind::ER_Mir;
  EXPECT_NO_THROW(c.validate(100));
  c.mir_candidates = 101;
  EXPECT_THROW(c.validate(100), Error);
  c.mir_candidates = 4;
  EXPECT_THROW(c.validate(100), Error);
  StrategyConfig r;
  r.kind = StrategyKind::ER_Res;
  r.replay_batch = 101;
  EXPECT_THROW(r.validate(100), Error);
  StrategyConfig k;
  k.kd_temperature = 0.0;
  EXPECT_THROW(k.validate(100), Error);
  for (auto kind : {StrategyKind::None, StrategyKind::ER_Res, StrategyKind::ER_Buff, StrategyKind::ER_Mir,
                    StrategyKind::AGEM, StrategyKind::KD})
    EXPECT_EQ(parse_strategy(to_string(kind)), kind);
  EXPECT_THROW(parse_strategy("EWC"), Error);
  EXPECT_EQ(policy_for(StrategyKind::ER_Buff), Policy::Buff);
  EXPECT_EQ(policy_for(StrategyKind::AGEM), Policy::Res);
}

TEST(Replay, SingleItemMemoryAlwaysReturnsIt) {
  Memory m(100);
  Rng rng(1);
  m.update({toy_item({0, 1}, Label::N), {}}, Policy::Res, rng);
  const auto p = toy_model(1);
  const Encoded in = toy_item({2}, Label::E);
  const Encoded* batch[] = {&in};
  for (auto kind : {StrategyKind::ER_Res, StrategyKind::ER_Buff, StrategyKind::ER_Mir}) {
    StrategyConfig cfg;
    cfg.kind = kind;
    const auto got = replay_batch(m, cfg, p, batch, {}, nn::Reduction::Mean, 1e-3, rng);
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0], 0u);
  }
  Memory empty(10);
  StrategyConfig cfg;
  cfg.kind = StrategyKind::ER_Res;
  EXPECT_TRUE(replay_batch(empty, cfg, p, batch, {}, nn::Reduction::Mean, 1e-3, rng).empty());
}

TEST(Mir, ScoresMatchBruteForce) {
  const auto p = toy_model(7);
  Memory m(10);
  Rng rng(2);
  const std::vector<std::vector<int>> inputs{{0}, {1}, {2}, {0, 1}, {1, 2}, {0, 2}};
  for (std::size_t i = 0; i < inputs.size(); ++i)
    m.update({toy_item(inputs[i], static_cast<Label>(i % 3)), {i % 2 == 0, true}}, Policy::Res, rng);
  const Encoded a = toy_item({0, 0, 1}, Label::C), b = toy_item({2, 1}, Label::E);
  const Encoded* incoming[] = {&a, &b};
  const double lr = 0.5;

  // Gradient of the incoming loss by central differences, independent of backward().
  const std::vector<const Encoded*> inc(incoming, incoming + 2);
  nn::ModelParams virt = p;
  for (std::size_t i = 0; i < p.size(); ++i) {
    nn::ModelParams hi = p, lo = p;
    hi.at(i) += 1e-6;
    lo.at(i) -= 1e-6;
    const double g = (nn::loss(hi, inc).total - nn::loss(lo, inc).total) / 2e-6;
    virt.at(i) -= lr * g;
  }
  const auto g = nn::backward(p, inc);
  std::vector<std::size_t> cand(m.size());
  std::iota(cand.begin(), cand.end(), 0);
  const auto s = mir_scores(p, g, lr, m, cand);
  for (std::size_t k = 0; k < cand.size(); ++k) {
    const auto& slot = m.slots()[k].item;
    const double oracle = joint_loss_oracle(virt, slot.x, slot.mask) - joint_loss_oracle(p, slot.x, slot.mask);
    EXPECT_NEAR(s[k], oracle, 1e-6) << k;
  }
}

TEST(Mir, HigherInterferenceFirstTiesToEarlierSlot) {
  const std::vector<std::size_t> cand{7, 3, 5, 1};
  const std::vector<double> scores{0.0, 0.5, 0.5, -1.0};
  const auto top = top_interfered(cand, scores, 3);
  EXPECT_EQ(top, (std::vector<std::size_t>{3, 5, 7}));
  EXPECT_EQ(top_interfered(cand, scores, 10).size(), 4u);
}

TEST(Agem, Examples) {
  nn::ModelConfig cfg;
  cfg.vocab = 4;
  cfg.d_emb = 3;
  cfg.hidden = 2;
  const auto g = nn::init_params(cfg, 1);
  const auto same = agem_project(g, g);
  EXPECT_FALSE(same.projected);
  EXPECT_EQ(nn::dot(same.g, same.g), nn::dot(g, g));
  auto neg = g;
  for (auto* t : neg.tensors()) *t = -*t;
  const auto zero = agem_project(g, neg);
  EXPECT_TRUE(zero.projected);
  EXPECT_NEAR(nn::dot(zero.g, zero.g), 0.0, 1e-20);
  const auto degenerate = agem_project(g, g.zeros_like());
  EXPECT_FALSE(degenerate.degenerate);  // zero dot product is not a conflict
  auto tiny = neg;
  for (auto* t : tiny.tensors()) *t *= 1e-9;
  const auto d2 = agem_project(g, tiny);
  EXPECT_TRUE(d2.degenerate);
  EXPECT_EQ(nn::dot(d2.g, g), nn::dot(g, g));
}

TEST(Agem, RandomPairsSatisfyTheConstraint) {
  nn::ModelConfig cfg;
  cfg.vocab = 6;
  cfg.d_emb = 3;
  cfg.hidden = 3;
  cfg.init_scale = 1.0;
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const auto g = nn::init_params(cfg, 2 * k + 1), r = nn::init_params(cfg, 2 * k + 2);
    const auto out = agem_project(g, r);
    EXPECT_GE(nn::dot(out.g, r), -1e-9);
    if (nn::dot(g, r) >= 0) EXPECT_EQ(nn::dot(out.g, out.g), nn::dot(g, g));
  }
}

TEST(Kd, IdentityIsZero) {
  Rng rng(8);
  for (int k = 0; k < 100; ++k) {
    std::vector<Logits> t(3);
    for (auto& z : t) z = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
    for (double tau : {1.0, 2.0, 5.0}) EXPECT_LE(std::abs(kd_loss(t, t, tau)), 1e-9);
  }
}

TEST(Kd, HandSetLogitsMatchNumericKl) {
  const std::vector<Logits> t{{1, 0, 0}}, s{{0, 1, 0}};
  const double e = std::exp(1.0), z = e + 2.0;
  const double pt[3] = {e / z, 1 / z, 1 / z}, ps[3] = {1 / z, e / z, 1 / z};
  double kl = 0.0;
  for (int i = 0; i < 3; ++i) kl += pt[i] * std::log(pt[i] / ps[i]);
  EXPECT_NEAR(kd_loss(t, s, 1.0), kl, 1e-12);
  EXPECT_NEAR(kl, (e - 1) / z, 1e-12);
}

TEST(Kd, HighTemperatureVanishes) {
  const std::vector<Logits> t{{3, -1, 0.5}}, s{{-2, 4, 1}};
  EXPECT_LT(kd_loss(t, s, 1e4), 1e-6);
  EXPECT_GT(kd_loss(t, s, 1.0), kd_loss(t, s, 10.0));
  EXPECT_THROW(kd_loss(t, std::vector<Logits>{}, 1.0), Error);
}

TEST(Kd, TeacherCaptureAndTerms) {
  Memory m(4);
  Rng rng(1);
  m.update({toy_item({0, 1}, Label::N), {}}, Policy::Res, rng);
  const auto p = toy_model(3);
  capture_teacher(m, p);
  ASSERT_TRUE(m.slots()[0].teacher.has_value());
  m.update({toy_item({2}, Label::E), {}}, Policy::Res, rng);
  const std::vector<std::size_t> picked{0, 1};
  std::vector<nn::Term> terms;
  append_kd_terms(terms, m, picked, 2.0, 0.5);
  EXPECT_EQ(terms.size(), 3u);  // only the slot with a teacher contributes
  // Unchanged parameters reproduce the teacher exactly.
  EXPECT_NEAR(nn::evaluate_terms(p, terms).kd, 0.0, 1e-12);
  capture_teacher(m, toy_model(4));
  EXPECT_EQ((*m.slots()[0].teacher)[0], nn::forward(p, m.slots()[0].item.x.ids_v).logits[0]);
}

// ---- trainer -------------------------------------------------------------------

namespace {

struct TinyWorld {
  datagen::Dataset ds;
  datagen::Split split;
  nn::Vocabulary vocab;
  std::vector<EncodedStage> stages;
};

const TinyWorld& world() {
  static const TinyWorld w = [] {
    TinyWorld t;
    t.ds = datagen::generate_dataset(datagen::DataConfig{}, 1);
    Rng rng(1);
    t.split = datagen::ninefold_split(t.ds.lexicon, t.ds.instances, parse_comp_type("+e"), rng);
    t.vocab = nn::Vocabulary(t.ds.lexicon);
    datagen::StreamConfig sc;
    sc.stage_size = 200;
    sc.epochs = 2;
    Rng srng(2);
    const auto st = datagen::build_stream(t.split, datagen::Regime::C2Gen, datagen::Order::VerNat, sc, srng);
    for (const auto& s : st.stages) t.stages.push_back(encode_stage(t.vocab, s));
    return t;
  }();
  return w;
}

nn::ModelParams fresh_params(std::uint64_t seed) {
  nn::ModelConfig mc;
  mc.vocab = world().vocab.size();
  return nn::init_params(mc, seed);
}

TrainerConfig with(StrategyKind k) {
  TrainerConfig c;
  c.strategy.kind = k;
  return c;
}

}  // namespace

TEST(Trainer, NoneBypassesMemory) {
  Trainer t(fresh_params(1), with(StrategyKind::None), 5);
  for (const auto& s : world().stages) t.train_stage(s);
  EXPECT_TRUE(t.memory().empty());
  EXPECT_EQ(t.log().stages.size(), 2u);
  EXPECT_EQ(t.log().stages[0].steps, 2u * 25u);
}

TEST(Trainer, ReservoirHoldsBothStages) {
  Trainer t(fresh_params(1), with(StrategyKind::ER_Res), 5);
  for (const auto& s : world().stages) t.train_stage(s);
  EXPECT_EQ(t.memory().size(), 100u);
  EXPECT_GT(t.memory().count_stage(0), 0u);
  EXPECT_GT(t.memory().count_stage(1), 0u);
}

TEST(Trainer, BuffSplitsMemoryEvenly) {
  Trainer t(fresh_params(1), with(StrategyKind::ER_Buff), 5);
  for (const auto& s : world().stages) t.train_stage(s);
  EXPECT_EQ(t.memory().count_stage(0), 50u);
  EXPECT_EQ(t.memory().count_stage(1), 50u);
}

// Every epoch consumes each stage item exactly once and nothing from other stages.
TEST(Trainer, StagesAreConsumedInOrderAndInIsolation) {
  Trainer t(fresh_params(1), with(StrategyKind::ER_Mir), 5);
  for (const auto& s : world().stages) t.train_stage(s);
  const auto& st = t.log().stages;
  ASSERT_EQ(st.size(), 2u);
  EXPECT_EQ(st[0].name, "S1");
  EXPECT_EQ(st[1].name, "S2");
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(st[k].consumed_hash, static_cast<std::uint64_t>(world().stages[k].epochs) * st[k].stage_hash);
    EXPECT_NE(st[0].stage_hash, st[1].stage_hash);
  }
}

TEST(Trainer, DeterministicPerSeed) {
  for (auto kind : {StrategyKind::None, StrategyKind::ER_Mir, StrategyKind::AGEM, StrategyKind::KD}) {
    Trainer a(fresh_params(3), with(kind), 9), b(fresh_params(3), with(kind), 9), c(fresh_params(3), with(kind), 10);
    for (const auto& s : world().stages) {
      a.train_stage(s);
      b.train_stage(s);
      c.train_stage(s);
    }
    EXPECT_EQ(to_json(a.log(), false).dump(), to_json(b.log(), false).dump()) << to_string(kind);
    EXPECT_EQ(a.params().emb, b.params().emb);
    EXPECT_NE(a.params().emb, c.params().emb);
  }
}

// Strategy None on one stage is plain shuffled multi-task training.
TEST(Trainer, NoneEqualsPlainTraining) {
  const auto& stage = world().stages[0];
  Trainer t(fresh_params(4), with(StrategyKind::None), 11);
  t.train_stage(stage);

  auto p = fresh_params(4);
  auto adam = nn::AdamState::for_params(p);
  Rng rng(derive_seed(11, "shuffle"));
  std::vector<std::size_t> order(stage.xs.size());
  std::iota(order.begin(), order.end(), 0);
  for (int e = 0; e < stage.epochs; ++e) {
    rng.shuffle(order);
    for (std::size_t b = 0; b < order.size(); b += 8) {
      std::vector<const Encoded*> batch;
      for (std::size_t k = b; k < std::min(order.size(), b + 8); ++k) batch.push_back(&stage.xs[order[k]]);
      nn::adam_step(p, adam, nn::backward(p, batch), 1e-3);
    }
  }
  EXPECT_EQ(dot(p, p), dot(t.params(), t.params()));
}

TEST(Trainer, AgemProjectsAndKdCapturesTeachers) {
  Trainer a(fresh_params(2), with(StrategyKind::AGEM), 3);
  for (const auto& s : world().stages) a.train_stage(s);
  EXPECT_GT(a.log().agem_projections, 0u);

  Trainer k(fresh_params(2), with(StrategyKind::KD), 3);
  k.train_stage(world().stages[0]);
  for (const auto& s : k.memory().slots()) EXPECT_TRUE(s.teacher.has_value());
  k.train_stage(world().stages[1]);
  double kd = 0.0;
  for (const auto& s : k.log().steps) kd += s.kd;
  EXPECT_GT(kd, 0.0);
}

TEST(Trainer, SnapshotPerStageAndLogRoundTrip) {
  Trainer t(fresh_params(1), with(StrategyKind::ER_Res), 5);
  int calls = 0;
  auto hook = [&](const nn::ModelParams&, const std::string&) {
    ++calls;
    Snapshot s;
    s.acc_v = 10.0 * calls;
    s.compactness_v = 0.25;
    return s;
  };
  for (const auto& s : world().stages) t.train_stage(s, hook);
  ASSERT_EQ(t.log().snapshots.size(), 2u);
  EXPECT_EQ(t.log().snapshot("S2")->acc_v, 20.0);
  const auto back = trainlog_from_json(to_json(t.log()));
  EXPECT_EQ(to_json(back).dump(), to_json(t.log()).dump());
}

TEST(Trainer, RejectsEmptyStagesAndBadConfigs) {
  Trainer t(fresh_params(1), with(StrategyKind::None), 5);
  EncodedStage empty;
  empty.name = "S1";
  EXPECT_THROW(t.train_stage(empty), Error);
  TrainerConfig bad = with(StrategyKind::ER_Res);
  bad.strategy.replay_batch = 500;
  EXPECT_THROW(Trainer(fresh_params(1), bad, 1), Error);
}

TEST(Trainer, DeskScaleVeridicalStageLearnsItsProbes) {
  const auto& w = world();
  datagen::StreamConfig sc;
  Rng srng(3);
  const auto st = datagen::build_stream(w.split, datagen::Regime::C2Gen, datagen::Order::VerNat, sc, srng);
  const auto s1 = encode_stage(w.vocab, st.stages.front());
  Trainer t(fresh_params(4), with(StrategyKind::None), 4);
  t.train_stage(s1);
  std::size_t ok = 0;
  for (const auto& x : s1.xs) ok += nn::predict(t.params(), x).v == x.gold_v;
  EXPECT_GE(100.0 * ok / s1.xs.size(), 99.0);
}
