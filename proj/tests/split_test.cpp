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

#include <set>

#include "c2gen/split.hpp"

using namespace c2gen;
using namespace c2gen::datagen;

namespace {

const Dataset& ds() {
  static const Dataset d = generate_dataset(DataConfig{}, 1);
  return d;
}

Split split_for(CompType fold, std::uint64_t seed = 1) {
  Rng rng(derive_seed(seed, "split"));
  return ninefold_split(ds().lexicon, ds().instances, fold, rng);
}

}  // namespace

class AllFolds : public ::testing::TestWithParam<int> {};

TEST_P(AllFolds, ConstraintsHoldBySetArithmetic) {
  const CompType fold = CompType::from_index(GetParam());
  const auto s = split_for(fold);
  EXPECT_EQ(check_split(s), "");
  ASSERT_FALSE(s.test.empty());
  for (const auto& x : s.test) EXPECT_EQ(x.ctype, fold);
  std::set<CompType> expect;
  for (CompType t : all_comp_types())
    if (t != fold) expect.insert(t);
  EXPECT_EQ(comp_types(s.train), expect);
  const auto tv = verb_keys(s.train), tn = nli_keys(s.train);
  for (const auto& x : s.test) {
    EXPECT_TRUE(tv.count(x.ver.key));
    EXPECT_TRUE(tn.count(x.nli.key));
    EXPECT_EQ(x.gold_ci, compose(x.ctype.v, x.ctype.n));
  }
  EXPECT_EQ(s.train.size() + s.test.size(), ds().instances.size());
}

TEST_P(AllFolds, UnseenProbesAreFreshSurfacesOfSeenPrimitives) {
  const auto s = split_for(CompType::from_index(GetParam()));
  std::set<std::pair<Tokens, Tokens>> seen_v, seen_n;
  for (const auto& x : s.train) {
    seen_v.insert({x.ver.premise, x.ver.hypothesis});
    seen_n.insert({x.nli.premise, x.nli.hypothesis});
  }
  ASSERT_EQ(s.unseen_prim_v.size(), s.test.size());
  ASSERT_EQ(s.unseen_prim_n.size(), s.test.size());
  for (std::size_t i = 0; i < s.test.size(); ++i) {
    const auto& v = s.unseen_prim_v[i];
    const auto& n = s.unseen_prim_n[i];
    EXPECT_EQ(v.key, s.test[i].ver.key);
    EXPECT_EQ(n.key, s.test[i].nli.key);
    EXPECT_EQ(v.gold, s.test[i].ver.gold);
    EXPECT_EQ(n.gold, s.test[i].nli.gold);
    EXPECT_FALSE(seen_v.count({v.premise, v.hypothesis}));
    EXPECT_FALSE(seen_n.count({n.premise, n.hypothesis}));
  }
  for (const auto& p : s.probe_v) EXPECT_FALSE(seen_v.count({p.premise, p.hypothesis}));
  for (const auto& p : s.probe_n) EXPECT_FALSE(seen_n.count({p.premise, p.hypothesis}));
  EXPECT_FALSE(s.probe_v.empty());
  EXPECT_FALSE(s.probe_n.empty());
}

INSTANTIATE_TEST_SUITE_P(Folds, AllFolds, ::testing::Range(1, 10));

TEST(Split, FirstFoldTrainsOnTheOtherEight) {
  const auto s = split_for(parse_comp_type("+e"));
  for (const auto& x : s.test) EXPECT_EQ(to_string(x.ctype), "+e");
  EXPECT_EQ(comp_types(s.train).size(), 8u);
  EXPECT_FALSE(comp_types(s.train).count(parse_comp_type("+e")));
}

TEST(Split, RepairsStrandedPrimitives) {
  // A dataset where one "+e" instance uses a verb that appears nowhere else.
  LexiconConfig cfg;
  cfg.verbs = {3, 2, 2};
  const auto lex = build_lexicon(cfg, 3);
  Rng rng(1);
  const auto pairs = generate_primitive_nli(lex, {4, 4, 4}, rng);
  std::vector<CompInstance> data;
  const auto plus = lex.verbs_with(Signature::Plus);
  for (const auto& p : pairs) {
    for (const Verb& v : lex.verbs) {
      if (v.signature == Signature::Plus && p.gold == Label::E && &v != plus[2]) continue;
      if (&v == plus[2] && p.gold != Label::E) continue;
      data.push_back(compose_instance(p, v));
    }
  }
  Rng srng(4);
  const auto s = ninefold_split(lex, data, parse_comp_type("+e"), srng);
  EXPECT_EQ(check_split(s), "");
  for (const auto& x : s.test) EXPECT_NE(x.ver.key, plus[2]->token);
}

TEST(Split, FailsWhenCoverageIsImpossible) {
  LexiconConfig cfg;
  cfg.verbs = {2, 2, 2};
  const auto lex = build_lexicon(cfg, 3);
  Rng rng(1);
  const auto pairs = generate_primitive_nli(lex, {2, 2, 2}, rng);
  // Every "+" verb occurs only in "+e" instances, so the fold strands them all.
  std::vector<CompInstance> data;
  for (const auto& p : pairs)
    for (const Verb& v : lex.verbs)
      if (v.signature != Signature::Plus || p.gold == Label::E) data.push_back(compose_instance(p, v));
  // Add one instance of each other "+" type with a verb from a different signature so all nine types exist.
  const Verb fake{"zzzz", Signature::Plus};
  for (const auto& p : pairs)
    if (p.gold != Label::E) data.push_back(compose_instance(p, fake));
  Rng srng(4);
  EXPECT_THROW(ninefold_split(lex, data, parse_comp_type("+e"), srng), Error);
}

TEST(Split, RejectsIncompleteDatasets) {
  std::vector<CompInstance> partial;
  for (const auto& x : ds().instances)
    if (x.ctype.index() != 5) partial.push_back(x);
  Rng rng(1);
  EXPECT_THROW(ninefold_split(ds().lexicon, partial, parse_comp_type("+e"), rng), Error);
}

TEST(Split, CheckSplitReportsViolations) {
  auto s = split_for(parse_comp_type("on"));
  s.train.push_back(s.test.front());
  EXPECT_NE(check_split(s), "");
}
