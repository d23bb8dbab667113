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

// Primitive and compositional instances.
//
// Surface layout (token positions are fixed and relied upon):
//   NLI probe        premise    SUBJ T0 Cp T1
//                    hypothesis SUBJ T0 Ch T1
//   veridical probe  premise    SUBJ VERB to T0 C T1
//                    hypothesis SUBJ T0 C T1
//   compositional    premise    SUBJ VERB to T0 Cp T1
//                    hypothesis SUBJ T0 Ch T1

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "c2gen/core.hpp"
#include "c2gen/lexicon.hpp"
#include "c2gen/rng.hpp"

namespace c2gen::datagen {

using Tokens = std::vector<std::string>;

struct PrimitivePair {
  enum class Kind : std::uint8_t { Veridical, Nli };
  Kind kind = Kind::Nli;
  Tokens premise;
  Tokens hypothesis;
  Label gold = Label::E;
  /// Verb token for veridical pairs, "premise_concept|hypothesis_concept" for NLI.
  std::string key;

  bool same_surface(const PrimitivePair& o) const {
    return premise == o.premise && hypothesis == o.hypothesis;
  }
};

struct CompInstance {
  Tokens premise;
  Tokens hypothesis;
  PrimitivePair ver;
  PrimitivePair nli;
  CompType ctype;
  Label gold_ci = Label::E;
};

inline std::string nli_key(const ConceptPair& p) { return p.first + "|" + p.second; }

inline ConceptPair parse_nli_key(const std::string& key) {
  auto bar = key.find('|');
  if (bar == std::string::npos) throw Error("malformed NLI key '" + key + "'");
  return {key.substr(0, bar), key.substr(bar + 1)};
}

// ---- surface realization -------------------------------------------------

inline Tokens realize_vp(const std::string& subject, const Template& tmpl,
                         const std::string& concept_token) {
  return {subject, tmpl[0], concept_token, tmpl[1]};
}

inline Tokens realize_embedded(const std::string& subject, const std::string& verb,
                               const Template& tmpl, const std::string& concept_token) {
  return {subject, verb, kToToken, tmpl[0], concept_token, tmpl[1]};
}

inline PrimitivePair make_nli_probe(const std::string& subject, const Template& tmpl,
                                    const ConceptPair& pair, Label gold) {
  if (pair.first == pair.second) throw Error("degenerate NLI pair (premise = hypothesis)");
  return PrimitivePair{PrimitivePair::Kind::Nli, realize_vp(subject, tmpl, pair.first),
                       realize_vp(subject, tmpl, pair.second), gold, nli_key(pair)};
}

inline PrimitivePair make_veridical_probe(const std::string& subject, const Verb& verb,
                                          const Template& tmpl, const std::string& concept_token) {
  return PrimitivePair{PrimitivePair::Kind::Veridical,
                       realize_embedded(subject, verb.token, tmpl, concept_token),
                       realize_vp(subject, tmpl, concept_token), label_image(verb.signature),
                       verb.token};
}

/// Builds a compositional instance from an NLI probe and a verb.
inline CompInstance compose_instance(const PrimitivePair& nli, const Verb& verb) {
  if (nli.kind != PrimitivePair::Kind::Nli || nli.premise.size() != 4)
    throw Error("compose_instance: expected an NLI probe");
  const std::string& subject = nli.premise[0];
  Template tmpl{nli.premise[1], nli.premise[3]};
  CompInstance ci;
  ci.premise = realize_embedded(subject, verb.token, tmpl, nli.premise[2]);
  ci.hypothesis = nli.hypothesis;
  ci.ver = make_veridical_probe(subject, verb, tmpl, nli.premise[2]);
  ci.nli = nli;
  ci.ctype = CompType{verb.signature, nli.gold};
  ci.gold_ci = compose(ci.ctype);
  return ci;
}

/// The two primitive probes a compositional instance was built from.
inline std::pair<PrimitivePair, PrimitivePair> decompose(const CompInstance& inst) {
  return {inst.ver, inst.nli};
}

// ---- generation ----------------------------------------------------------

/// Instance counts per compositional type in the source benchmark, rows 1..9.
inline constexpr std::array<std::size_t, 9> kReferenceTypeCounts{5976, 5544, 5520, 5976, 5544,
                                                                 5520, 3735, 3465, 3450};
/// Primitive NLI counts per label (e, n, c) in the source benchmark.
inline constexpr std::array<std::size_t, 3> kReferenceNliCounts{747, 693, 690};

inline std::array<std::size_t, 9> scaled_type_counts(std::size_t divisor) {
  if (divisor == 0) throw Error("divisor must be positive");
  std::array<std::size_t, 9> out{};
  for (std::size_t i = 0; i < 9; ++i) out[i] = kReferenceTypeCounts[i] / divisor;
  return out;
}

inline std::array<std::size_t, 3> scaled_nli_counts(std::size_t divisor) {
  if (divisor == 0) throw Error("divisor must be positive");
  std::array<std::size_t, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) out[i] = (kReferenceNliCounts[i] + divisor - 1) / divisor;
  return out;
}

/// Exactly counts[l] NLI probes per label, each on a distinct relation key.
inline std::vector<PrimitivePair> generate_primitive_nli(const Lexicon& lex,
                                                         const std::array<std::size_t, 3>& counts,
                                                         Rng& rng) {
  std::vector<PrimitivePair> out;
  for (Label l : kLabels) {
    const auto& keys = lex.relations_by_label[code(l)];
    const std::size_t want = counts[code(l)];
    if (want < 1) throw Error("generate_primitive_nli: count per label must be >= 1");
    if (want > keys.size())
      throw Error("generate_primitive_nli: " + std::to_string(want) + " '" + to_string(l) +
                  "' pairs requested but the lexicon holds only " + std::to_string(keys.size()) +
                  " relations of that label");
    for (std::size_t k : rng.sample_indices(keys.size(), want)) {
      const auto& subject = rng.pick(lex.subjects);
      const auto& tmpl = rng.pick(lex.templates);
      out.push_back(make_nli_probe(subject, tmpl, keys[k], l));
    }
  }
  return out;
}

/// Crosses verbs with NLI probes. counts[i] is the count for type index i+1;
/// combinations are drawn without replacement.
inline std::vector<CompInstance> assemble_compositional(const Lexicon& lex,
                                                        const std::vector<PrimitivePair>& nli_pairs,
                                                        const std::array<std::size_t, 9>& counts,
                                                        Rng& rng) {
  std::vector<CompInstance> out;
  for (CompType t : all_comp_types()) {
    const std::size_t want = counts[t.index() - 1];
    if (want == 0) continue;
    auto verbs = lex.verbs_with(t.v);
    std::vector<const PrimitivePair*> pairs;
    for (const auto& p : nli_pairs)
      if (p.gold == t.n) pairs.push_back(&p);
    const std::size_t available = verbs.size() * pairs.size();
    if (want > available)
      throw Error("assemble_compositional: type " + to_string(t) + " needs " +
                  std::to_string(want) + " instances but only " + std::to_string(available) +
                  " verb x pair combinations exist");
    // Each instance realizes its concept pair on its own subject and template.
    for (std::size_t combo : rng.sample_indices(available, want)) {
      const PrimitivePair& base = *pairs[combo % pairs.size()];
      const PrimitivePair nli = make_nli_probe(rng.pick(lex.subjects), rng.pick(lex.templates),
                                               parse_nli_key(base.key), base.gold);
      out.push_back(compose_instance(nli, *verbs[combo / pairs.size()]));
    }
  }
  return out;
}

struct DataConfig {
  LexiconConfig lexicon;
  std::array<std::size_t, 3> nli_counts = scaled_nli_counts(3);
  std::array<std::size_t, 9> type_counts = scaled_type_counts(3);
};

struct Dataset {
  Lexicon lexicon;
  std::vector<PrimitivePair> nli_pairs;
  std::vector<CompInstance> instances;
};

inline Dataset generate_dataset(const DataConfig& cfg, std::uint64_t seed) {
  Dataset ds;
  ds.lexicon = build_lexicon(cfg.lexicon, seed);
  Rng rng(derive_seed(seed, "data"));
  ds.nli_pairs = generate_primitive_nli(ds.lexicon, cfg.nli_counts, rng);
  ds.instances = assemble_compositional(ds.lexicon, ds.nli_pairs, cfg.type_counts, rng);
  return ds;
}

// ---- relexicalization ------------------------------------------------------

struct Relexicalized {
  Lexicon lexicon;
  std::vector<CompInstance> instances;
  std::map<std::string, std::string> token_map;
};

namespace detail {
inline Tokens map_tokens(const Tokens& in, const std::map<std::string, std::string>& m) {
  Tokens out;
  out.reserve(in.size());
  for (const auto& t : in) {
    auto it = m.find(t);
    out.push_back(it == m.end() ? t : it->second);
  }
  return out;
}

inline PrimitivePair map_pair(const PrimitivePair& p, const std::map<std::string, std::string>& m) {
  PrimitivePair out = p;
  out.premise = map_tokens(p.premise, m);
  out.hypothesis = map_tokens(p.hypothesis, m);
  if (p.kind == PrimitivePair::Kind::Veridical) {
    out.key = m.at(p.key);
  } else {
    auto [a, b] = parse_nli_key(p.key);
    out.key = nli_key({m.at(a), m.at(b)});
  }
  return out;
}
}  // namespace detail

/// Replaces every verb and concept with a fresh pseudo-word that occurs
/// nowhere in the source lexicon. Labels, types and positions are untouched.
inline Relexicalized relexicalize(const Lexicon& lex, const std::vector<CompInstance>& instances,
                                  std::uint64_t seed) {
  Rng rng(derive_seed(seed, "relexicalize"));
  std::set<std::string> taken;
  for (const auto& t : lex.all_tokens()) taken.insert(t);

  Relexicalized out;
  out.lexicon = lex;
  out.lexicon.seed = seed;
  for (auto& v : out.lexicon.verbs) {
    std::string fresh = fresh_word(rng, taken);
    out.token_map.emplace(v.token, fresh);
    v.token = fresh;
  }
  for (auto& c : out.lexicon.concepts) {
    std::string fresh = fresh_word(rng, taken);
    out.token_map.emplace(c, fresh);
    c = fresh;
  }
  const auto& m = out.token_map;
  out.lexicon.relations.clear();
  for (auto& by_label : out.lexicon.relations_by_label)
    for (auto& pair : by_label) pair = {m.at(pair.first), m.at(pair.second)};
  for (Label l : kLabels)
    for (const auto& pair : out.lexicon.relations_by_label[code(l)])
      out.lexicon.relations.emplace(pair, l);

  out.instances.reserve(instances.size());
  for (const auto& inst : instances) {
    CompInstance r = inst;
    r.premise = detail::map_tokens(inst.premise, m);
    r.hypothesis = detail::map_tokens(inst.hypothesis, m);
    r.ver = detail::map_pair(inst.ver, m);
    r.nli = detail::map_pair(inst.nli, m);
    out.instances.push_back(std::move(r));
  }
  return out;
}

// ---- JSON Lines ----------------------------------------------------------

inline nlohmann::ordered_json to_json(const PrimitivePair& p) {
  nlohmann::ordered_json o;
  o["premise"] = p.premise;
  o["hypothesis"] = p.hypothesis;
  o["gold"] = to_string(p.gold);
  o["key"] = p.key;
  return o;
}

inline PrimitivePair primitive_from_json(const nlohmann::json& j, PrimitivePair::Kind kind) {
  PrimitivePair p;
  p.kind = kind;
  p.premise = j.at("premise").get<Tokens>();
  p.hypothesis = j.at("hypothesis").get<Tokens>();
  p.gold = parse_label(j.at("gold").get<std::string>());
  p.key = j.at("key").get<std::string>();
  return p;
}

inline nlohmann::ordered_json to_json(const CompInstance& c) {
  nlohmann::ordered_json j;
  j["premise"] = c.premise;
  j["hypothesis"] = c.hypothesis;
  j["ctype"] = to_string(c.ctype);
  j["gold_ci"] = to_string(c.gold_ci);
  j["ver"] = to_json(c.ver);
  j["nli"] = to_json(c.nli);
  return j;
}

inline std::string to_jsonl_line(const CompInstance& c) { return to_json(c).dump(); }

inline CompInstance instance_from_json(const nlohmann::json& j) {
  CompInstance c;
  c.premise = j.at("premise").get<Tokens>();
  c.hypothesis = j.at("hypothesis").get<Tokens>();
  c.ctype = parse_comp_type(j.at("ctype").get<std::string>());
  c.gold_ci = parse_label(j.at("gold_ci").get<std::string>());
  c.ver = primitive_from_json(j.at("ver"), PrimitivePair::Kind::Veridical);
  c.nli = primitive_from_json(j.at("nli"), PrimitivePair::Kind::Nli);
  if (c.gold_ci != compose(c.ctype))
    throw Error("instance gold_ci disagrees with the composition table for type " +
                to_string(c.ctype));
  return c;
}

inline void write_jsonl(std::ostream& os, const std::vector<CompInstance>& instances) {
  for (const auto& c : instances) os << to_jsonl_line(c) << '\n';
}

inline std::vector<CompInstance> read_jsonl(std::istream& is) {
  std::vector<CompInstance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(instance_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error("jsonl line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace c2gen::datagen
