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

// Training schedules: the offline single-stage regime, the two-stage
// continual regime (one primitive focused per stage), and the function-typed
// curriculum stage that can follow it.

#include <array>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "c2gen/core.hpp"
#include "c2gen/dataset.hpp"
#include "c2gen/rng.hpp"
#include "c2gen/split.hpp"

namespace c2gen::datagen {

enum class Regime { CGen, C2Gen };
enum class Order { VerNat, NatVer };
enum class Curriculum { None, EasyHard, HardEasy, PrimEasyHard, PrimHardEasy };

inline std::string to_string(Regime r) { return r == Regime::CGen ? "cgen" : "c2gen"; }
inline std::string to_string(Order o) { return o == Order::VerNat ? "ver-nat" : "nat-ver"; }
inline std::string to_string(Curriculum c) {
  switch (c) {
    case Curriculum::None: return "none";
    case Curriculum::EasyHard: return "easy-hard";
    case Curriculum::HardEasy: return "hard-easy";
    case Curriculum::PrimEasyHard: return "prim-easy-hard";
    case Curriculum::PrimHardEasy: return "prim-hard-easy";
  }
  return "none";
}

inline Regime parse_regime(const std::string& s) {
  if (s == "cgen") return Regime::CGen;
  if (s == "c2gen") return Regime::C2Gen;
  throw Error("bad regime '" + s + "' (expected cgen|c2gen)");
}
inline Order parse_order(const std::string& s) {
  if (s == "ver-nat") return Order::VerNat;
  if (s == "nat-ver") return Order::NatVer;
  throw Error("bad order '" + s + "' (expected ver-nat|nat-ver)");
}
inline Curriculum parse_curriculum(const std::string& s) {
  for (auto c : {Curriculum::None, Curriculum::EasyHard, Curriculum::HardEasy,
                 Curriculum::PrimEasyHard, Curriculum::PrimHardEasy})
    if (to_string(c) == s) return c;
  throw Error("bad curriculum '" + s + "'");
}

/// Contiguous range of a stage trained to completion (all epochs) before the
/// next one starts. `prim` / `ci` select which losses are active.
struct Block {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool prim = true;
  bool ci = true;
  std::string tag;
};

struct Stage {
  std::string name;
  std::vector<CompInstance> instances;
  int epochs = 20;
  bool shuffle_within = true;
  std::vector<Block> blocks;
};

struct Stream {
  std::vector<Stage> stages;
};

struct StreamConfig {
  std::size_t stage_size = 3200;
  std::size_t nli_pool_per_label = 4;
  std::size_t verb_pool_per_signature = 1;
  int epochs = 20;
  bool supervise_ci_in_primitive_stages = true;
};

/// Types fed to the stage that teaches veridicality (positive vs neutral,
/// positive vs negative contrasts) and to the stage that teaches NLI.
inline const std::array<int, 4> kVeridicalStageTypes{2, 5, 3, 9};
inline const std::array<int, 4> kNliStageTypes{4, 6, 7, 8};

inline std::array<FunctionType, 3> function_order(Curriculum c) {
  switch (c) {
    case Curriculum::EasyHard:
    case Curriculum::PrimEasyHard:
      return {FunctionType::ConstNeutral, FunctionType::Identity, FunctionType::Inverse};
    case Curriculum::HardEasy:
    case Curriculum::PrimHardEasy:
      return {FunctionType::Inverse, FunctionType::Identity, FunctionType::ConstNeutral};
    case Curriculum::None: break;
  }
  throw Error("function_order: curriculum must name an order");
}

namespace detail {

inline Stage single_block_stage(std::string name, std::vector<CompInstance> xs, int epochs,
                                bool ci) {
  Stage s;
  s.name = std::move(name);
  s.instances = std::move(xs);
  s.epochs = epochs;
  s.blocks.push_back(Block{0, s.instances.size(), true, ci, "all"});
  return s;
}

inline std::vector<const CompInstance*> eligible(const Split& split, const std::array<int, 4>& types) {
  std::set<int> want(types.begin(), types.end());
  std::vector<const CompInstance*> out;
  for (const auto& x : split.train)
    if (want.count(x.ctype.index())) out.push_back(&x);
  return out;
}

inline std::vector<const CompInstance*> draw(const std::vector<const CompInstance*>& pool,
                                             std::size_t n, const char* what, Rng& rng) {
  if (pool.size() < n)
    throw Error(std::string("build_stream: ") + what + " stage needs " + std::to_string(n) +
                " instances but the split offers only " + std::to_string(pool.size()));
  std::vector<const CompInstance*> out;
  for (std::size_t i : rng.sample_indices(pool.size(), n)) out.push_back(pool[i]);
  return out;
}

/// Many verbs, NLI constituent projected onto a small fixed pool per label.
inline std::vector<CompInstance> veridical_stage(const Split& split, const StreamConfig& cfg,
                                                 Rng& rng) {
  auto pool = eligible(split, kVeridicalStageTypes);
  std::array<std::vector<ConceptPair>, 3> fixed;
  for (Label l : kLabels) {
    std::set<std::string> keys;
    for (const auto* x : pool)
      if (x->nli.gold == l) keys.insert(x->nli.key);
    std::vector<std::string> ordered(keys.begin(), keys.end());
    for (std::size_t i : rng.sample_indices(ordered.size(), cfg.nli_pool_per_label))
      fixed[code(l)].push_back(parse_nli_key(ordered[i]));
  }
  std::vector<CompInstance> out;
  for (const auto* x : draw(pool, cfg.stage_size, "veridical", rng)) {
    const auto& pairs = fixed[code(x->nli.gold)];
    const ConceptPair& pair = rng.pick(pairs);
    Template tmpl{x->nli.premise[1], x->nli.premise[3]};
    PrimitivePair nli = make_nli_probe(x->nli.premise[0], tmpl, pair, x->nli.gold);
    Verb verb{x->ver.key, x->ctype.v};
    out.push_back(compose_instance(nli, verb));
  }
  return out;
}

/// Many NLI pairs, verb projected onto a small fixed pool per signature.
inline std::vector<CompInstance> nli_stage(const Split& split, const StreamConfig& cfg, Rng& rng) {
  auto pool = eligible(split, kNliStageTypes);
  std::array<std::vector<std::string>, 3> fixed;
  for (Signature s : kSignatures) {
    std::set<std::string> verbs;
    for (const auto* x : pool)
      if (x->ctype.v == s) verbs.insert(x->ver.key);
    std::vector<std::string> ordered(verbs.begin(), verbs.end());
    for (std::size_t i : rng.sample_indices(ordered.size(), cfg.verb_pool_per_signature))
      fixed[code(s)].push_back(ordered[i]);
  }
  std::vector<CompInstance> out;
  for (const auto* x : draw(pool, cfg.stage_size, "NLI", rng)) {
    Verb verb{rng.pick(fixed[code(x->ctype.v)]), x->ctype.v};
    out.push_back(compose_instance(x->nli, verb));
  }
  return out;
}

}  // namespace detail

inline Stream build_stream(const Split& split, Regime regime, Order order, const StreamConfig& cfg,
                           Rng& rng) {
  Stream stream;
  if (regime == Regime::CGen) {
    stream.stages.push_back(detail::single_block_stage("S1", split.train, cfg.epochs, true));
    return stream;
  }
  auto ver = detail::veridical_stage(split, cfg, rng);
  auto nat = detail::nli_stage(split, cfg, rng);
  const bool ci = cfg.supervise_ci_in_primitive_stages;
  if (order == Order::VerNat) {
    stream.stages.push_back(detail::single_block_stage("S1", std::move(ver), cfg.epochs, ci));
    stream.stages.push_back(detail::single_block_stage("S2", std::move(nat), cfg.epochs, ci));
  } else {
    stream.stages.push_back(detail::single_block_stage("S1", std::move(nat), cfg.epochs, ci));
    stream.stages.push_back(detail::single_block_stage("S2", std::move(ver), cfg.epochs, ci));
  }
  return stream;
}

/// Compositional training data in hard blocks ordered by function type. The
/// primitive-first variants prepend a block carrying only primitive
/// supervision; the function blocks then carry only compositional loss.
inline Stage build_curriculum_stage(const Split& split, Curriculum order, const StreamConfig& cfg,
                                    Rng& rng) {
  const auto functions = function_order(order);
  const bool prim_first = order == Curriculum::PrimEasyHard || order == Curriculum::PrimHardEasy;

  std::vector<const CompInstance*> all;
  for (const auto& x : split.train) all.push_back(&x);
  std::vector<CompInstance> picked;
  for (std::size_t i : rng.sample_indices(all.size(), cfg.stage_size)) picked.push_back(*all[i]);

  Stage s;
  s.name = "S3";
  s.epochs = cfg.epochs;
  if (prim_first) {
    s.instances = picked;
    s.blocks.push_back(Block{0, picked.size(), true, false, "prim"});
  }
  for (FunctionType f : functions) {
    const std::size_t begin = s.instances.size();
    for (const auto& x : picked)
      if (function_type(x.ctype.v) == f) s.instances.push_back(x);
    s.blocks.push_back(Block{begin, s.instances.size(), !prim_first, true, to_string(f)});
  }
  return s;
}

// ---- serialization -------------------------------------------------------

inline nlohmann::ordered_json manifest_entry(const Stage& s, const std::string& file) {
  nlohmann::ordered_json j;
  j["name"] = s.name;
  j["file"] = file;
  j["epochs"] = s.epochs;
  if (s.blocks.size() > 1 || (!s.blocks.empty() && (!s.blocks[0].prim || !s.blocks[0].ci))) {
    auto blocks = nlohmann::ordered_json::array();
    for (const auto& b : s.blocks) {
      nlohmann::ordered_json bj;
      bj["tag"] = b.tag;
      bj["begin"] = b.begin;
      bj["end"] = b.end;
      bj["prim"] = b.prim;
      bj["ci"] = b.ci;
      blocks.push_back(bj);
    }
    j["blocks"] = blocks;
  }
  return j;
}

/// Writes OUT/<stage>.jsonl per stage plus OUT/manifest.json.
inline void write_stream(const Stream& stream, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : stream.stages) {
    const std::string file = s.name + ".jsonl";
    std::ofstream os(dir / file);
    if (!os) throw Error("cannot write " + (dir / file).string());
    write_jsonl(os, s.instances);
    manifest["stages"].push_back(manifest_entry(s, file));
  }
  std::ofstream os(dir / "manifest.json");
  if (!os) throw Error("cannot write " + (dir / "manifest.json").string());
  os << manifest.dump(2) << '\n';
}

inline Stream read_stream(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw Error("cannot read " + (dir / "manifest.json").string());
  auto manifest = nlohmann::json::parse(is);
  Stream stream;
  for (const auto& e : manifest.at("stages")) {
    Stage s;
    s.name = e.at("name").get<std::string>();
    s.epochs = e.at("epochs").get<int>();
    std::ifstream data(dir / e.at("file").get<std::string>());
    if (!data) throw Error("cannot read stage file for " + s.name);
    s.instances = read_jsonl(data);
    if (e.contains("blocks")) {
      for (const auto& b : e["blocks"])
        s.blocks.push_back(Block{b.at("begin").get<std::size_t>(), b.at("end").get<std::size_t>(),
                                 b.at("prim").get<bool>(), b.at("ci").get<bool>(),
                                 b.at("tag").get<std::string>()});
    } else {
      s.blocks.push_back(Block{0, s.instances.size(), true, true, "all"});
    }
    stream.stages.push_back(std::move(s));
  }
  return stream;
}

/// Whole stream as one string (manifest then every stage's lines).
inline std::string serialize(const Stream& stream) {
  std::ostringstream os;
  for (const auto& s : stream.stages) {
    os << manifest_entry(s, s.name + ".jsonl").dump() << '\n';
    write_jsonl(os, s.instances);
  }
  return os.str();
}

}  // namespace c2gen::datagen
