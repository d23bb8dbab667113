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

// Episodic memory, replay selection, gradient projection and distillation.

#include <algorithm>
#include <array>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "c2gen/core.hpp"
#include "c2gen/model.hpp"
#include "c2gen/rng.hpp"

namespace c2gen::continual {

using nn::Encoded;
using nn::Gradient;
using nn::Logits;
using nn::ModelParams;

enum class StrategyKind { None, ER_Res, ER_Buff, ER_Mir, AGEM, KD };
enum class Policy { Res, Buff };

inline std::string to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::None: return "None";
    case StrategyKind::ER_Res: return "ER_Res";
    case StrategyKind::ER_Buff: return "ER_Buff";
    case StrategyKind::ER_Mir: return "ER_Mir";
    case StrategyKind::AGEM: return "AGEM";
    case StrategyKind::KD: return "KD";
  }
  return "?";
}

inline StrategyKind parse_strategy(const std::string& s) {
  for (auto k : {StrategyKind::None, StrategyKind::ER_Res, StrategyKind::ER_Buff,
                 StrategyKind::ER_Mir, StrategyKind::AGEM, StrategyKind::KD})
    if (to_string(k) == s) return k;
  throw Error("unknown strategy '" + s + "'");
}

/// Buff for ER_Buff, reservoir for everything else.
constexpr Policy policy_for(StrategyKind k) {
  return k == StrategyKind::ER_Buff ? Policy::Buff : Policy::Res;
}

struct StrategyConfig {
  StrategyKind kind = StrategyKind::None;
  std::size_t replay_batch = 8;
  std::size_t mir_candidates = 50;
  double kd_temperature = 2.0;
  double kd_weight = 1.0;

  void validate(std::size_t capacity) const {
    if (replay_batch == 0) throw Error("replay_batch must be positive");
    if (kind != StrategyKind::None && replay_batch > capacity)
      throw Error("replay_batch exceeds memory capacity");
    if (kind == StrategyKind::ER_Mir && (mir_candidates > capacity || mir_candidates < replay_batch))
      throw Error("mir_candidates must lie in [replay_batch, capacity]");
    if (!(kd_temperature > 0.0)) throw Error("kd_temperature must be positive");
  }
};

// ---- memory ----------------------------------------------------------------

template <class Item>
struct Slot {
  Item item;
  int stage = 0;
  std::optional<std::array<Logits, 3>> teacher;
};

/// Fixed-capacity store. Res is a single reservoir over the whole stream; Buff
/// keeps a floor(M / stages) quota per stage with a reservoir inside each.
template <class Item>
class EpisodicMemory {
 public:
  explicit EpisodicMemory(std::size_t capacity = 100) : capacity_(capacity) {
    if (capacity == 0) throw Error("memory capacity must be positive");
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return slots_.size(); }
  bool empty() const { return slots_.empty(); }
  const std::vector<Slot<Item>>& slots() const { return slots_; }
  std::vector<Slot<Item>>& slots() { return slots_; }
  int stage() const { return stage_; }
  std::size_t seen_total() const { return seen_total_; }
  std::size_t seen_in_stage(int s) const {
    return s >= 0 && static_cast<std::size_t>(s) < seen_.size() ? seen_[s] : 0;
  }

  std::size_t count_stage(int s) const {
    return static_cast<std::size_t>(
        std::count_if(slots_.begin(), slots_.end(), [&](const auto& x) { return x.stage == s; }));
  }

  /// Opens stage `s` (0-based). Under Buff, earlier holdings shrink to the new quota.
  void begin_stage(int s, Policy policy, Rng& rng) {
    stage_ = s;
    if (seen_.size() <= static_cast<std::size_t>(s)) seen_.resize(s + 1, 0);
    if (policy != Policy::Buff) return;
    const std::size_t q = quota();
    for (int old = 0; old < s; ++old) {
      std::vector<std::size_t> pos;
      for (std::size_t i = 0; i < slots_.size(); ++i)
        if (slots_[i].stage == old) pos.push_back(i);
      if (pos.size() <= q) continue;
      auto keep = rng.sample_indices(pos.size(), q);
      std::vector<bool> kept(pos.size(), false);
      for (auto k : keep) kept[k] = true;
      std::vector<bool> drop(slots_.size(), false);
      for (std::size_t k = 0; k < pos.size(); ++k)
        if (!kept[k]) drop[pos[k]] = true;
      std::vector<Slot<Item>> next;
      for (std::size_t i = 0; i < slots_.size(); ++i)
        if (!drop[i]) next.push_back(std::move(slots_[i]));
      slots_ = std::move(next);
    }
  }

  std::size_t quota() const { return capacity_ / static_cast<std::size_t>(stage_ + 1); }

  void update(const Item& item, Policy policy, Rng& rng) {
    if (seen_.size() <= static_cast<std::size_t>(stage_)) seen_.resize(stage_ + 1, 0);
    ++seen_total_;
    const std::size_t seen = ++seen_[stage_];
    if (policy == Policy::Res) {
      if (slots_.size() < capacity_) {
        slots_.push_back({item, stage_, std::nullopt});
      } else {
        const std::size_t j = rng.index(seen_total_);
        if (j < capacity_) slots_[j] = {item, stage_, std::nullopt};
      }
    } else {
      const std::size_t q = quota();
      std::vector<std::size_t> pos;
      for (std::size_t i = 0; i < slots_.size(); ++i)
        if (slots_[i].stage == stage_) pos.push_back(i);
      if (pos.size() < q) {
        slots_.push_back({item, stage_, std::nullopt});
      } else if (q > 0) {
        const std::size_t j = rng.index(seen);
        if (j < q) slots_[pos[j]] = {item, stage_, std::nullopt};
      }
    }
    if (slots_.size() > capacity_) throw Error("episodic memory over capacity");
  }

  void clear() {
    slots_.clear();
    seen_.clear();
    seen_total_ = 0;
    stage_ = 0;
  }

 private:
  std::size_t capacity_;
  std::vector<Slot<Item>> slots_;
  std::vector<std::size_t> seen_;
  std::size_t seen_total_ = 0;
  int stage_ = 0;
};

/// What the trainer stores: an encoded instance and the losses it was trained with.
struct MemoryItem {
  Encoded x;
  nn::TaskMask mask;
};

using Memory = EpisodicMemory<MemoryItem>;

/// Teacher logits for every slot that lacks them, from the given snapshot.
inline void capture_teacher(Memory& memory, const ModelParams& params) {
  for (auto& s : memory.slots()) {
    if (s.teacher) continue;
    std::array<Logits, 3> t{};
    for (nn::Head h : nn::kHeads) t[code(h)] = nn::forward(params, s.item.x.ids(h)).logits[code(h)];
    s.teacher = t;
  }
}

// ---- strategies --------------------------------------------------------------

/// Terms for replayed items, each with its stored mask.
inline void append_memory_terms(std::vector<nn::Term>& terms, const Memory& memory,
                                std::span<const std::size_t> picked, double weight) {
  for (auto i : picked) {
    const Encoded* x = &memory.slots()[i].item.x;
    nn::append_joint_terms(terms, std::span<const Encoded* const>(&x, 1), memory.slots()[i].item.mask,
                           weight);
  }
}

/// Joint loss of each memory item, one value per listed slot.
inline std::vector<double> item_losses(const ModelParams& params, const Memory& memory,
                                       std::span<const std::size_t> slots) {
  std::vector<nn::Term> terms;
  std::vector<std::size_t> owner;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const std::size_t before = terms.size();
    append_memory_terms(terms, memory, slots.subspan(k, 1), 1.0);
    owner.insert(owner.end(), terms.size() - before, k);
  }
  std::vector<double> values;
  nn::evaluate_terms(params, terms, nullptr, &values);
  std::vector<double> out(slots.size(), 0.0);
  for (std::size_t t = 0; t < values.size(); ++t) out[owner[t]] += values[t];
  return out;
}

/// MIR interference scores L(theta', c) - L(theta, c) with theta' = theta - lr * g.
inline std::vector<double> mir_scores(const ModelParams& params, const Gradient& g, double lr,
                                      const Memory& memory, std::span<const std::size_t> candidates) {
  ModelParams virt = params;
  nn::axpy(-lr, g, virt);
  auto before = item_losses(params, memory, candidates);
  auto after = item_losses(virt, memory, candidates);
  std::vector<double> s(candidates.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = after[i] - before[i];
  return s;
}

/// Top-k by score, ties toward the earlier memory slot.
inline std::vector<std::size_t> top_interfered(std::span<const std::size_t> candidates,
                                               std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return candidates[a] < candidates[b];
  });
  order.resize(std::min(k, order.size()));
  std::vector<std::size_t> out;
  for (auto i : order) out.push_back(candidates[i]);
  return out;
}

/// Slot indices to replay alongside `incoming`. Empty when memory is empty.
inline std::vector<std::size_t> replay_batch(const Memory& memory, const StrategyConfig& cfg,
                                             const ModelParams& params,
                                             std::span<const Encoded* const> incoming,
                                             nn::TaskMask incoming_mask, nn::Reduction reduction,
                                             double lr, Rng& rng) {
  if (memory.empty()) return {};
  if (cfg.kind != StrategyKind::ER_Mir) return rng.sample_indices(memory.size(), cfg.replay_batch);
  auto cand = rng.sample_indices(memory.size(), cfg.mir_candidates);
  Gradient g = nn::backward(params, incoming, reduction, incoming_mask);
  auto s = mir_scores(params, g, lr, memory, cand);
  return top_interfered(cand, s, cfg.replay_batch);
}

struct Projection {
  Gradient g;
  bool projected = false;
  bool degenerate = false;
};

/// A-GEM: drop the component of g that conflicts with g_ref.
inline Projection agem_project(const Gradient& g, const Gradient& g_ref) {
  const double dot = nn::dot(g, g_ref);
  if (dot >= 0.0) return {g, false, false};
  const double rr = nn::dot(g_ref, g_ref);
  if (rr < 1e-12) return {g, false, true};
  Projection p{g, true, false};
  nn::axpy(-dot / rr, g_ref, p.g);
  return p;
}

/// Softened KL between teacher and student, summed over the heads given.
inline double kd_loss(std::span<const Logits> teacher, std::span<const Logits> student, double tau) {
  if (teacher.size() != student.size()) throw Error("kd_loss: head count mismatch");
  double s = 0.0;
  for (std::size_t h = 0; h < teacher.size(); ++h) s += nn::softened_kl(teacher[h], student[h], tau);
  return s;
}

/// Distillation terms for the listed slots, all three heads each.
inline void append_kd_terms(std::vector<nn::Term>& terms, const Memory& memory,
                            std::span<const std::size_t> picked, double tau, double weight) {
  for (auto i : picked) {
    const auto& s = memory.slots()[i];
    if (!s.teacher) continue;
    for (nn::Head h : nn::kHeads)
      terms.push_back(nn::Term{&s.item.x.ids(h), h, nn::Term::Kind::Distill, nn::Term::Group::Distill,
                               Label::E, (*s.teacher)[code(h)], tau, weight});
  }
}

}  // namespace c2gen::continual
