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

// Multi-task classifier: mean-pooled token embeddings, a two-layer tanh
// encoder shared by all tasks, and three softmax heads (veridical, NLI,
// compositional). Losses and gradients are computed in one batched pass over
// a list of weighted terms so the trainer, replay scoring and distillation
// share the same code path.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "c2gen/core.hpp"
#include "c2gen/dataset.hpp"
#include "c2gen/lexicon.hpp"
#include "c2gen/rng.hpp"

namespace c2gen::nn {

using Matrix = Eigen::MatrixXd;
using Logits = std::array<double, 3>;

enum class Head : std::uint8_t { V = 0, N = 1, CI = 2 };
inline constexpr std::array<Head, 3> kHeads{Head::V, Head::N, Head::CI};
constexpr int code(Head h) { return static_cast<int>(h); }

// ---- vocabulary ------------------------------------------------------------

/// Closed token inventory; id 0 is the separator.
class Vocabulary {
 public:
  Vocabulary() { add(datagen::kSepToken); }
  explicit Vocabulary(const datagen::Lexicon& lex) : Vocabulary() { add_all(lex); }

  int add(const std::string& token) {
    auto [it, inserted] = ids_.emplace(token, static_cast<int>(tokens_.size()));
    if (inserted) tokens_.push_back(token);
    return it->second;
  }
  void add_all(const datagen::Lexicon& lex) {
    for (const auto& t : lex.all_tokens()) add(t);
  }

  int id(const std::string& token) const {
    auto it = ids_.find(token);
    if (it == ids_.end()) throw Error("token '" + token + "' is not in the vocabulary");
    return it->second;
  }
  int sep() const { return 0; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// premise + [SEP] + hypothesis as ids.
  std::vector<int> encode(const datagen::Tokens& premise, const datagen::Tokens& hypothesis) const {
    std::vector<int> out;
    out.reserve(premise.size() + hypothesis.size() + 1);
    for (const auto& t : premise) out.push_back(id(t));
    out.push_back(sep());
    for (const auto& t : hypothesis) out.push_back(id(t));
    return out;
  }
  std::vector<int> encode(const datagen::PrimitivePair& p) const {
    return encode(p.premise, p.hypothesis);
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// A compositional instance with all three inputs pre-encoded.
struct Encoded {
  std::vector<int> ids_ci;
  std::vector<int> ids_v;
  std::vector<int> ids_n;
  Label gold_ci = Label::E;
  Label gold_v = Label::E;
  Label gold_n = Label::E;
  CompType ctype;

  const std::vector<int>& ids(Head h) const {
    return h == Head::V ? ids_v : h == Head::N ? ids_n : ids_ci;
  }
  Label gold(Head h) const { return h == Head::V ? gold_v : h == Head::N ? gold_n : gold_ci; }
};

inline Encoded encode(const Vocabulary& vocab, const datagen::CompInstance& x) {
  return Encoded{vocab.encode(x.premise, x.hypothesis),
                 vocab.encode(x.ver),
                 vocab.encode(x.nli),
                 x.gold_ci,
                 x.ver.gold,
                 x.nli.gold,
                 x.ctype};
}

inline std::vector<Encoded> encode_all(const Vocabulary& vocab,
                                       const std::vector<datagen::CompInstance>& xs) {
  std::vector<Encoded> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(encode(vocab, x));
  return out;
}

// ---- parameters --------------------------------------------------------------

struct ModelConfig {
  std::size_t vocab = 0;
  int d_emb = 32;
  int hidden = 64;
  double init_scale = 0.1;
};

inline constexpr std::size_t kTensorCount = 11;
inline constexpr std::array<const char*, kTensorCount> kTensorNames{
    "embedding", "enc1.w", "enc1.b", "enc2.w", "enc2.b", "head_v.w",
    "head_v.b",  "head_n.w", "head_n.b", "head_ci.w", "head_ci.b"};

/// Every tensor is a dense matrix; biases are column vectors. Gradients and
/// Adam moments reuse this type.
struct ModelParams {
  Matrix emb;  // vocab x d_emb, one row per token
  Matrix w1;   // hidden x d_emb
  Matrix b1;   // hidden x 1
  Matrix w2;   // hidden x hidden
  Matrix b2;   // hidden x 1
  std::array<Matrix, 3> head_w;  // 3 x hidden, indexed by Head
  std::array<Matrix, 3> head_b;  // 3 x 1

  std::array<Matrix*, kTensorCount> tensors() {
    return {&emb, &w1, &b1, &w2, &b2, &head_w[0], &head_b[0], &head_w[1], &head_b[1],
            &head_w[2], &head_b[2]};
  }
  std::array<const Matrix*, kTensorCount> tensors() const {
    return {&emb, &w1, &b1, &w2, &b2, &head_w[0], &head_b[0], &head_w[1], &head_b[1],
            &head_w[2], &head_b[2]};
  }

  static ModelParams zeros(const ModelConfig& cfg) {
    ModelParams p;
    const auto v = static_cast<Eigen::Index>(cfg.vocab);
    p.emb = Matrix::Zero(v, cfg.d_emb);
    p.w1 = Matrix::Zero(cfg.hidden, cfg.d_emb);
    p.b1 = Matrix::Zero(cfg.hidden, 1);
    p.w2 = Matrix::Zero(cfg.hidden, cfg.hidden);
    p.b2 = Matrix::Zero(cfg.hidden, 1);
    for (int h = 0; h < 3; ++h) {
      p.head_w[h] = Matrix::Zero(3, cfg.hidden);
      p.head_b[h] = Matrix::Zero(3, 1);
    }
    return p;
  }

  ModelParams zeros_like() const {
    ModelParams z = *this;
    for (Matrix* t : z.tensors()) t->setZero();
    return z;
  }

  std::size_t vocab() const { return static_cast<std::size_t>(emb.rows()); }

  std::size_t size() const {
    std::size_t n = 0;
    for (const Matrix* t : tensors()) n += static_cast<std::size_t>(t->size());
    return n;
  }

  bool all_finite() const {
    for (const Matrix* t : tensors())
      if (!t->allFinite()) return false;
    return true;
  }

  /// Flat coordinate access in tensor order, row-major within each tensor.
  double& at(std::size_t flat) {
    for (Matrix* t : tensors()) {
      const auto n = static_cast<std::size_t>(t->size());
      if (flat < n) return (*t)(static_cast<Eigen::Index>(flat / t->cols()),
                                static_cast<Eigen::Index>(flat % t->cols()));
      flat -= n;
    }
    throw Error("parameter index out of range");
  }
  double at(std::size_t flat) const { return const_cast<ModelParams*>(this)->at(flat); }
};

using Gradient = ModelParams;

inline double dot(const ModelParams& a, const ModelParams& b) {
  auto ta = a.tensors();
  auto tb = b.tensors();
  double s = 0.0;
  for (std::size_t i = 0; i < kTensorCount; ++i) s += ta[i]->cwiseProduct(*tb[i]).sum();
  return s;
}

/// y += alpha * x
inline void axpy(double alpha, const ModelParams& x, ModelParams& y) {
  auto tx = x.tensors();
  auto ty = y.tensors();
  for (std::size_t i = 0; i < kTensorCount; ++i) *ty[i] += alpha * *tx[i];
}

inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.vocab == 0) throw Error("model config: empty vocabulary");
  ModelParams p = ModelParams::zeros(cfg);
  Rng rng(seed);
  auto fill = [&](Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        m(r, c) = rng.uniform(-cfg.init_scale, cfg.init_scale);
  };
  fill(p.emb);
  fill(p.w1);
  fill(p.w2);
  for (auto& w : p.head_w) fill(w);
  return p;
}

/// Appends `extra` embedding rows drawn like the initial ones. Used to score
/// inputs containing tokens the model never saw.
inline void grow_vocabulary(ModelParams& p, std::size_t extra, double init_scale, std::uint64_t seed) {
  const auto old = p.emb.rows();
  Matrix grown(old + static_cast<Eigen::Index>(extra), p.emb.cols());
  grown.topRows(old) = p.emb;
  Rng rng(seed);
  for (Eigen::Index r = old; r < grown.rows(); ++r)
    for (Eigen::Index c = 0; c < grown.cols(); ++c) grown(r, c) = rng.uniform(-init_scale, init_scale);
  p.emb = std::move(grown);
}

// ---- softmax helpers -------------------------------------------------------

inline Logits softmax(const Logits& z, double tau = 1.0) {
  double m = std::max({z[0], z[1], z[2]}) / tau;
  Logits p{};
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += (p[i] = std::exp(z[i] / tau - m));
  for (auto& v : p) v /= s;
  return p;
}

inline Logits log_softmax(const Logits& z, double tau = 1.0) {
  double m = std::max({z[0], z[1], z[2]}) / tau;
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += std::exp(z[i] / tau - m);
  const double lse = m + std::log(s);
  return {z[0] / tau - lse, z[1] / tau - lse, z[2] / tau - lse};
}

inline double cross_entropy(const Logits& z, Label gold) { return -log_softmax(z)[code(gold)]; }

/// KL(teacher_tau || student_tau) over one head.
inline double softened_kl(const Logits& teacher, const Logits& student, double tau) {
  auto lt = log_softmax(teacher, tau);
  auto ls = log_softmax(student, tau);
  double kl = 0.0;
  for (int i = 0; i < 3; ++i) kl += std::exp(lt[i]) * (lt[i] - ls[i]);
  return kl;
}

/// Argmax with ties resolved toward the lower label code.
inline Label argmax(const Logits& z) {
  int best = 0;
  for (int i = 1; i < 3; ++i)
    if (z[i] > z[best]) best = i;
  return static_cast<Label>(best);
}

// ---- forward ---------------------------------------------------------------

struct Forward {
  Eigen::VectorXd mean;
  Eigen::VectorXd hidden1;
  Eigen::VectorXd hidden;  // encoder output x
  std::array<Logits, 3> logits;  // indexed by Head
};

inline Forward forward(const ModelParams& p, std::span<const int> ids) {
  if (ids.empty()) throw Error("forward: empty input");
  const auto vocab = static_cast<int>(p.emb.rows());
  Forward f;
  f.mean = Eigen::VectorXd::Zero(p.emb.cols());
  for (int id : ids) {
    if (id < 0 || id >= vocab) throw Error("forward: token id " + std::to_string(id) + " out of vocabulary");
    f.mean += p.emb.row(id).transpose();
  }
  f.mean /= static_cast<double>(ids.size());
  f.hidden1 = (p.w1 * f.mean + p.b1).array().tanh();
  f.hidden = (p.w2 * f.hidden1 + p.b2).array().tanh();
  for (Head h : kHeads) {
    Eigen::Vector3d z = p.head_w[code(h)] * f.hidden + p.head_b[code(h)];
    f.logits[code(h)] = {z[0], z[1], z[2]};
  }
  return f;
}

// ---- loss terms --------------------------------------------------------------

/// One weighted loss term on one input through one head.
struct Term {
  enum class Kind : std::uint8_t { CrossEntropy, Distill };
  enum class Group : std::uint8_t { Compositional, Primitive, Distill };
  const std::vector<int>* ids = nullptr;
  Head head = Head::CI;
  Kind kind = Kind::CrossEntropy;
  Group group = Group::Compositional;
  Label gold = Label::E;
  Logits teacher{};
  double tau = 1.0;
  double weight = 1.0;
};

struct LossParts {
  double total = 0.0;
  double cr = 0.0;    // compositional cross-entropy
  double prim = 0.0;  // veridical + NLI cross-entropy
  double kd = 0.0;    // distillation
};

enum class Reduction { Mean, Sum };

/// Which losses a batch contributes.
struct TaskMask {
  bool prim = true;
  bool ci = true;
};

/// Appends the joint-loss terms for a batch of instances. With Mean reduction
/// each instance carries weight 1 / normalizer.
inline void append_joint_terms(std::vector<Term>& terms, std::span<const Encoded* const> batch,
                               TaskMask mask, double weight) {
  for (const Encoded* x : batch) {
    if (mask.ci)
      terms.push_back(Term{&x->ids_ci, Head::CI, Term::Kind::CrossEntropy,
                           Term::Group::Compositional, x->gold_ci, {}, 1.0, weight});
    if (mask.prim) {
      terms.push_back(Term{&x->ids_v, Head::V, Term::Kind::CrossEntropy, Term::Group::Primitive,
                           x->gold_v, {}, 1.0, weight});
      terms.push_back(Term{&x->ids_n, Head::N, Term::Kind::CrossEntropy, Term::Group::Primitive,
                           x->gold_n, {}, 1.0, weight});
    }
  }
}

inline double reduction_weight(Reduction r, std::size_t batch) {
  return r == Reduction::Mean ? 1.0 / static_cast<double>(batch) : 1.0;
}

/// Evaluates the weighted terms; when `grad` is non-null the exact gradient is
/// accumulated into it (it must be shaped like `p`).
inline LossParts evaluate_terms(const ModelParams& p, std::span<const Term> terms,
                                Gradient* grad = nullptr, std::vector<double>* values = nullptr) {
  LossParts out;
  if (values) values->assign(terms.size(), 0.0);
  const auto n = static_cast<Eigen::Index>(terms.size());
  if (n == 0) return out;
  const auto d = p.emb.cols();
  const auto vocab = static_cast<int>(p.emb.rows());

  Matrix mean = Matrix::Zero(d, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& ids = *terms[k].ids;
    if (ids.empty()) throw Error("evaluate_terms: empty input");
    for (int id : ids) {
      if (id < 0 || id >= vocab) throw Error("evaluate_terms: token id out of vocabulary");
      mean.col(k) += p.emb.row(id).transpose();
    }
    mean.col(k) /= static_cast<double>(ids.size());
  }
  Matrix h1 = ((p.w1 * mean).colwise() + p.b1.col(0)).array().tanh();
  Matrix h2 = ((p.w2 * h1).colwise() + p.b2.col(0)).array().tanh();

  Matrix d_h2;
  if (grad) d_h2 = Matrix::Zero(h2.rows(), n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Term& t = terms[k];
    const int h = code(t.head);
    Eigen::Vector3d zv = p.head_w[h] * h2.col(k) + p.head_b[h];
    Logits z{zv[0], zv[1], zv[2]};
    Eigen::Vector3d dz;
    double value = 0.0;
    if (t.kind == Term::Kind::CrossEntropy) {
      auto ls = log_softmax(z);
      value = -ls[code(t.gold)];
      for (int i = 0; i < 3; ++i) dz[i] = std::exp(ls[i]) - (i == code(t.gold) ? 1.0 : 0.0);
    } else {
      auto lt = log_softmax(t.teacher, t.tau);
      auto ls = log_softmax(z, t.tau);
      for (int i = 0; i < 3; ++i) {
        value += std::exp(lt[i]) * (lt[i] - ls[i]);
        dz[i] = (std::exp(ls[i]) - std::exp(lt[i])) / t.tau;
      }
    }
    value *= t.weight;
    if (values) (*values)[static_cast<std::size_t>(k)] = value;
    out.total += value;
    switch (t.group) {
      case Term::Group::Compositional: out.cr += value; break;
      case Term::Group::Primitive: out.prim += value; break;
      case Term::Group::Distill: out.kd += value; break;
    }
    if (grad) {
      dz *= t.weight;
      grad->head_w[h] += dz * h2.col(k).transpose();
      grad->head_b[h] += dz;
      d_h2.col(k) += p.head_w[h].transpose() * dz;
    }
  }
  if (!grad) return out;

  Matrix d_pre2 = d_h2.array() * (1.0 - h2.array().square());
  grad->w2 += d_pre2 * h1.transpose();
  grad->b2 += d_pre2.rowwise().sum();
  Matrix d_pre1 = (p.w2.transpose() * d_pre2).array() * (1.0 - h1.array().square());
  grad->w1 += d_pre1 * mean.transpose();
  grad->b1 += d_pre1.rowwise().sum();
  Matrix d_mean = p.w1.transpose() * d_pre1;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& ids = *terms[k].ids;
    const double inv = 1.0 / static_cast<double>(ids.size());
    for (int id : ids) grad->emb.row(id) += inv * d_mean.col(k).transpose();
  }
  return out;
}

/// Joint loss L = L_prim + L_cr of a batch.
inline LossParts loss(const ModelParams& p, std::span<const Encoded* const> batch,
                      Reduction r = Reduction::Mean, TaskMask mask = {}) {
  if (batch.empty()) throw Error("loss: empty batch");
  std::vector<Term> terms;
  append_joint_terms(terms, batch, mask, reduction_weight(r, batch.size()));
  return evaluate_terms(p, terms);
}

inline Gradient backward(const ModelParams& p, std::span<const Encoded* const> batch,
                         Reduction r = Reduction::Mean, TaskMask mask = {},
                         LossParts* parts = nullptr) {
  std::vector<Term> terms;
  append_joint_terms(terms, batch, mask, reduction_weight(r, batch.size()));
  Gradient g = p.zeros_like();
  LossParts lp = evaluate_terms(p, terms, &g);
  if (parts) *parts = lp;
  return g;
}

// ---- prediction --------------------------------------------------------------

struct Prediction {
  Label v = Label::E;
  Label n = Label::E;
  Label ci = Label::E;
};

/// Argmax of each head on its own input.
inline Prediction predict(const ModelParams& p, const Encoded& x) {
  return Prediction{argmax(forward(p, x.ids_v).logits[code(Head::V)]),
                    argmax(forward(p, x.ids_n).logits[code(Head::N)]),
                    argmax(forward(p, x.ids_ci).logits[code(Head::CI)])};
}

}  // namespace c2gen::nn
