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

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "c2gen/core.hpp"
#include "c2gen/dataset.hpp"
#include "c2gen/lexicon.hpp"
#include "c2gen/rng.hpp"

namespace c2gen::datagen {

struct SplitOptions {
  /// Upper bound on re-sampling rounds (coverage repair, fresh probe surfaces).
  std::size_t max_attempts = 1000;
  /// Compactness probe set: probes per training verb and NLI pairs per label.
  std::size_t probes_per_verb = 6;
  std::size_t probe_pairs_per_label = 40;
};

/// One fold of nine-fold compositional cross-validation. Held-out probes are
/// index-aligned with `test`.
struct Split {
  CompType fold;
  std::vector<CompInstance> train;
  std::vector<CompInstance> test;
  std::vector<PrimitivePair> unseen_prim_v;
  std::vector<PrimitivePair> unseen_prim_n;
  /// Multi-label probe sets over seen primitives, for representation compactness.
  std::vector<PrimitivePair> probe_v;
  std::vector<PrimitivePair> probe_n;
};

inline std::set<std::string> verb_keys(const std::vector<CompInstance>& xs) {
  std::set<std::string> out;
  for (const auto& x : xs) out.insert(x.ver.key);
  return out;
}

inline std::set<std::string> nli_keys(const std::vector<CompInstance>& xs) {
  std::set<std::string> out;
  for (const auto& x : xs) out.insert(x.nli.key);
  return out;
}

inline std::set<CompType> comp_types(const std::vector<CompInstance>& xs) {
  std::set<CompType> out;
  for (const auto& x : xs) out.insert(x.ctype);
  return out;
}

/// Checks the generalization constraints. Returns an empty string when they
/// hold, otherwise a description of the first violation.
inline std::string check_split(const Split& s) {
  auto train_types = comp_types(s.train);
  if (train_types.count(s.fold)) return "train contains the held-out type " + to_string(s.fold);
  for (const auto& t : s.test)
    if (t.ctype != s.fold) return "test contains type " + to_string(t.ctype);
  auto tv = verb_keys(s.train);
  for (const auto& k : verb_keys(s.test))
    if (!tv.count(k)) return "test verb '" + k + "' unseen in train";
  auto tn = nli_keys(s.train);
  for (const auto& k : nli_keys(s.test))
    if (!tn.count(k)) return "test NLI pair '" + k + "' unseen in train";
  for (const auto& x : s.train)
    if (x.gold_ci != compose(x.ctype)) return "train instance with inconsistent gold";
  for (const auto& x : s.test)
    if (x.gold_ci != compose(x.ctype)) return "test instance with inconsistent gold";
  if (s.unseen_prim_v.size() != s.test.size() || s.unseen_prim_n.size() != s.test.size())
    return "held-out probes are not aligned with test";
  return {};
}

namespace detail {

using SurfaceSet = std::set<std::pair<Tokens, Tokens>>;

inline PrimitivePair fresh_veridical(const Lexicon& lex, const Verb& verb, const SurfaceSet& seen,
                                     const PrimitivePair& preferred, Rng& rng,
                                     std::size_t attempts) {
  if (!seen.count({preferred.premise, preferred.hypothesis})) return preferred;
  for (std::size_t a = 0; a < attempts; ++a) {
    auto p = make_veridical_probe(rng.pick(lex.subjects), verb, rng.pick(lex.templates),
                                  rng.pick(lex.concepts));
    if (!seen.count({p.premise, p.hypothesis})) return p;
  }
  throw Error("no fresh veridical probe surface for verb '" + verb.token + "'");
}

inline PrimitivePair fresh_nli(const Lexicon& lex, const PrimitivePair& base,
                               const SurfaceSet& seen, Rng& rng, std::size_t attempts) {
  if (!seen.count({base.premise, base.hypothesis})) return base;
  const ConceptPair pair = parse_nli_key(base.key);
  for (std::size_t a = 0; a < attempts; ++a) {
    auto p = make_nli_probe(rng.pick(lex.subjects), rng.pick(lex.templates), pair, base.gold);
    if (!seen.count({p.premise, p.hypothesis})) return p;
  }
  throw Error("no fresh NLI probe surface for pair '" + base.key + "'");
}

}  // namespace detail

/// Holds out every instance of `fold` as test; the other eight types train.
inline Split ninefold_split(const Lexicon& lex, const std::vector<CompInstance>& dataset,
                            CompType fold, Rng& rng, const SplitOptions& opt = {}) {
  if (comp_types(dataset).size() != 9)
    throw Error("ninefold_split: dataset must cover all nine compositional types");
  Split s;
  s.fold = fold;
  for (const auto& x : dataset) (x.ctype == fold ? s.test : s.train).push_back(x);

  // Repair coverage: swap an uncovered constituent for a covered one of the
  // same signature / label.
  const auto tv = verb_keys(s.train);
  const auto tn = nli_keys(s.train);
  std::vector<const Verb*> covered_verbs;
  for (const Verb* v : lex.verbs_with(fold.v))
    if (tv.count(v->token)) covered_verbs.push_back(v);
  std::vector<const PrimitivePair*> covered_pairs;
  for (const auto& x : s.train)
    if (x.nli.gold == fold.n) covered_pairs.push_back(&x.nli);
  for (auto& x : s.test) {
    std::size_t attempts = 0;
    while (!tv.count(x.ver.key) || !tn.count(x.nli.key)) {
      if (++attempts > opt.max_attempts || covered_verbs.empty() || covered_pairs.empty())
        throw Error("ninefold_split: cannot cover test primitives of fold " + to_string(fold) +
                    " from train");
      const Verb* verb = lex.find_verb(x.ver.key);
      if (!tv.count(x.ver.key) || verb == nullptr) verb = rng.pick(covered_verbs);
      const PrimitivePair& nli = tn.count(x.nli.key) ? x.nli : *rng.pick(covered_pairs);
      x = compose_instance(nli, *verb);
    }
  }

  detail::SurfaceSet seen_v, seen_n;
  for (const auto& x : s.train) {
    seen_v.insert({x.ver.premise, x.ver.hypothesis});
    seen_n.insert({x.nli.premise, x.nli.hypothesis});
  }
  for (const auto& x : s.test) {
    const Verb* verb = lex.find_verb(x.ver.key);
    s.unseen_prim_v.push_back(
        detail::fresh_veridical(lex, *verb, seen_v, x.ver, rng, opt.max_attempts));
    s.unseen_prim_n.push_back(detail::fresh_nli(lex, x.nli, seen_n, rng, opt.max_attempts));
  }

  // Compactness probes: every train verb, and a label-balanced sample of train pairs.
  for (const Verb& verb : lex.verbs) {
    if (!tv.count(verb.token)) continue;
    for (std::size_t k = 0; k < opt.probes_per_verb; ++k) {
      PrimitivePair dummy = make_veridical_probe(rng.pick(lex.subjects), verb,
                                                 rng.pick(lex.templates), rng.pick(lex.concepts));
      s.probe_v.push_back(detail::fresh_veridical(lex, verb, seen_v, dummy, rng, opt.max_attempts));
    }
  }
  std::map<std::string, const PrimitivePair*> by_key;
  for (const auto& x : s.train) by_key.emplace(x.nli.key, &x.nli);
  for (Label l : kLabels) {
    std::vector<const PrimitivePair*> pool;
    for (const auto& [key, p] : by_key)
      if (p->gold == l) pool.push_back(p);
    for (std::size_t i : rng.sample_indices(pool.size(), opt.probe_pairs_per_label))
      s.probe_n.push_back(detail::fresh_nli(lex, *pool[i], seen_n, rng, opt.max_attempts));
  }

  if (auto why = check_split(s); !why.empty()) throw Error("ninefold_split: " + why);
  return s;
}

}  // namespace c2gen::datagen
