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

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "c2gen/core.hpp"
#include "c2gen/rng.hpp"

namespace c2gen::datagen {

inline const std::string kSepToken = "[SEP]";
inline const std::string kToToken = "to";

/// Pseudo-word alphabet and length range. Changing these changes the
/// collision bound asserted in tests.
inline constexpr std::size_t kAlphabetSize = 26;
inline constexpr std::size_t kMinWordLen = 4;
inline constexpr std::size_t kMaxWordLen = 7;

struct LexiconConfig {
  /// Verbs per signature, indexed by Signature code (+, o, -).
  std::array<std::size_t, 3> verbs{8, 8, 5};
  std::size_t concepts = 80;
  /// Directed concept relations per label (e, n, c).
  std::array<std::size_t, 3> relations{249, 231, 230};
  /// Semantic fields; concept i sits in field i % fields. Fields 2k and 2k+1
  /// are antonymous. Synonym pairs share a field, antonym pairs span partner
  /// fields, unrelated pairs span any other two fields.
  std::size_t fields = 8;
  std::size_t subjects = 12;
  std::size_t templates = 12;
};

struct Verb {
  std::string token;
  Signature signature = Signature::Plus;
};

/// Ordered concept pair; the premise side is `first`.
using ConceptPair = std::pair<std::string, std::string>;

/// Two template tokens with a concept slot between them.
using Template = std::array<std::string, 2>;

struct Lexicon {
  std::vector<Verb> verbs;
  std::vector<std::string> concepts;
  /// Directed relation labels. Only one orientation of each unordered pair exists.
  std::map<ConceptPair, Label> relations;
  /// Relation keys per label in generation order.
  std::array<std::vector<ConceptPair>, 3> relations_by_label;
  std::vector<std::string> subjects;
  std::vector<Template> templates;
  std::uint64_t seed = 0;

  std::vector<const Verb*> verbs_with(Signature s) const {
    std::vector<const Verb*> out;
    for (const auto& v : verbs)
      if (v.signature == s) out.push_back(&v);
    return out;
  }

  const Verb* find_verb(const std::string& token) const {
    for (const auto& v : verbs)
      if (v.token == token) return &v;
    return nullptr;
  }

  /// Every token the lexicon can emit, including SEP and "to".
  std::vector<std::string> all_tokens() const {
    std::vector<std::string> out{kSepToken, kToToken};
    for (const auto& v : verbs) out.push_back(v.token);
    out.insert(out.end(), concepts.begin(), concepts.end());
    out.insert(out.end(), subjects.begin(), subjects.end());
    for (const auto& t : templates) out.insert(out.end(), t.begin(), t.end());
    return out;
  }
};

/// Random lowercase string with length uniform in [kMinWordLen, kMaxWordLen].
inline std::string pseudo_word(Rng& rng) {
  std::size_t len = kMinWordLen + rng.index(kMaxWordLen - kMinWordLen + 1);
  std::string w(len, 'a');
  for (auto& ch : w) ch = static_cast<char>('a' + rng.index(kAlphabetSize));
  return w;
}

/// Draws pseudo-words not present in `taken`, inserting each into it.
inline std::string fresh_word(Rng& rng, std::set<std::string>& taken) {
  for (;;) {
    std::string w = pseudo_word(rng);
    if (taken.insert(w).second) return w;
  }
}

inline std::size_t field_of(std::size_t concept_index, std::size_t fields) {
  return concept_index % fields;
}

/// Relation label implied by two concept indices' fields.
inline Label field_relation(std::size_t i, std::size_t j, std::size_t fields) {
  const std::size_t a = field_of(i, fields), b = field_of(j, fields);
  if (a == b) return Label::E;
  if ((a ^ 1) == b) return Label::C;
  return Label::N;
}

/// Unordered pairs available per label (e, n, c) under the field structure.
inline std::array<std::size_t, 3> relation_capacity(const LexiconConfig& cfg) {
  std::array<std::size_t, 3> cap{};
  for (std::size_t i = 0; i < cfg.concepts; ++i)
    for (std::size_t j = i + 1; j < cfg.concepts; ++j) cap[code(field_relation(i, j, cfg.fields))]++;
  return cap;
}

inline void validate(const LexiconConfig& cfg) {
  for (std::size_t n : cfg.verbs)
    if (n < 2) throw Error("lexicon config: need at least 2 verbs per signature");
  if (cfg.concepts < 10) throw Error("lexicon config: need at least 10 concepts");
  if (cfg.subjects < 1 || cfg.templates < 1)
    throw Error("lexicon config: need at least one subject and one template");
  if (cfg.fields < 4 || cfg.fields % 2 != 0 || cfg.fields > cfg.concepts)
    throw Error("lexicon config: fields must be even, at least 4 and at most the concept count");
  const std::size_t demanded = cfg.relations[0] + cfg.relations[1] + cfg.relations[2];
  const std::size_t available = cfg.concepts * (cfg.concepts - 1) / 2;
  if (demanded > available)
    throw Error("lexicon config: " + std::to_string(demanded) +
                " concept relations requested but only " + std::to_string(available) +
                " unordered pairs exist over " + std::to_string(cfg.concepts) + " concepts");
  const auto cap = relation_capacity(cfg);
  for (Label l : kLabels)
    if (cfg.relations[code(l)] > cap[code(l)])
      throw Error("lexicon config: " + std::to_string(cfg.relations[code(l)]) + " '" +
                  to_string(l) + "' relations requested but the concept fields allow only " +
                  std::to_string(cap[code(l)]));
}

inline Lexicon build_lexicon(const LexiconConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  Rng rng(derive_seed(seed, "lexicon"));
  Lexicon lex;
  lex.seed = seed;
  std::set<std::string> taken{kSepToken, kToToken};

  for (Signature s : kSignatures)
    for (std::size_t i = 0; i < cfg.verbs[code(s)]; ++i)
      lex.verbs.push_back(Verb{fresh_word(rng, taken), s});
  for (std::size_t i = 0; i < cfg.concepts; ++i) lex.concepts.push_back(fresh_word(rng, taken));
  for (std::size_t i = 0; i < cfg.subjects; ++i) lex.subjects.push_back(fresh_word(rng, taken));
  for (std::size_t i = 0; i < cfg.templates; ++i) {
    std::string a = fresh_word(rng, taken);
    std::string b = fresh_word(rng, taken);
    lex.templates.push_back(Template{a, b});
  }

  // Unordered pairs per label, drawn without replacement, then oriented at random.
  const std::size_t n = cfg.concepts;
  std::array<std::vector<std::pair<std::size_t, std::size_t>>, 3> pool;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pool[code(field_relation(i, j, cfg.fields))].push_back({i, j});
  for (Label l : kLabels) {
    const auto& p = pool[code(l)];
    for (std::size_t k : rng.sample_indices(p.size(), cfg.relations[code(l)])) {
      const auto [i, j] = p[k];
      ConceptPair pair = rng.bernoulli(0.5) ? ConceptPair{lex.concepts[i], lex.concepts[j]}
                                            : ConceptPair{lex.concepts[j], lex.concepts[i]};
      lex.relations.emplace(pair, l);
      lex.relations_by_label[code(l)].push_back(pair);
    }
  }
  return lex;
}

}  // namespace c2gen::datagen
