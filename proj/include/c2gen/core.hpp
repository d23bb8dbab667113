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

// Label algebra for compositional inference: the three-way NLI label, verb
// veridicality signatures, the nine compositional types and the composition
// table that defines every gold label downstream.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace c2gen {

/// Library-wide error type. Everything the library throws derives from it.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Three-way inference label. Integer codes are stable and serialized.
enum class Label : std::uint8_t { E = 0, N = 1, C = 2 };

/// Veridicality signature of a sentence-embedding verb.
enum class Signature : std::uint8_t { Plus = 0, Neutral = 1, Minus = 2 };

/// Label map induced by a signature: identity, constant-neutral, inversion.
enum class FunctionType : std::uint8_t { Identity = 0, ConstNeutral = 1, Inverse = 2 };

inline constexpr std::array<Label, 3> kLabels{Label::E, Label::N, Label::C};
inline constexpr std::array<Signature, 3> kSignatures{Signature::Plus, Signature::Neutral,
                                                      Signature::Minus};

constexpr int code(Label l) { return static_cast<int>(l); }
constexpr int code(Signature s) { return static_cast<int>(s); }
constexpr int code(FunctionType f) { return static_cast<int>(f); }

constexpr Label label_from_code(int c) {
  if (c < 0 || c > 2) throw Error("label code out of range");
  return static_cast<Label>(c);
}
constexpr Signature signature_from_code(int c) {
  if (c < 0 || c > 2) throw Error("signature code out of range");
  return static_cast<Signature>(c);
}

/// A compositional type is a (signature, NLI label) pair; there are nine.
struct CompType {
  Signature v = Signature::Plus;
  Label n = Label::E;

  /// 1-based row index of the composition table (1..9).
  constexpr int index() const { return code(v) * 3 + code(n) + 1; }
  static constexpr CompType from_index(int idx) {
    if (idx < 1 || idx > 9) throw Error("compositional type index must be in [1, 9]");
    return CompType{signature_from_code((idx - 1) / 3), label_from_code((idx - 1) % 3)};
  }
  friend constexpr bool operator==(CompType, CompType) = default;
  friend constexpr auto operator<=>(CompType a, CompType b) { return a.index() <=> b.index(); }
};

inline constexpr std::array<CompType, 9> all_comp_types() {
  std::array<CompType, 9> out{};
  for (int i = 1; i <= 9; ++i) out[i - 1] = CompType::from_index(i);
  return out;
}

namespace detail {
// Rows are signatures (+, o, -), columns NLI labels (e, n, c).
inline constexpr std::array<std::array<Label, 3>, 3> kCompositionTable{{
    {Label::E, Label::N, Label::C},
    {Label::N, Label::N, Label::N},
    {Label::C, Label::N, Label::E},
}};
}  // namespace detail

/// Gold compositional label for a verb signature applied to an NLI label.
constexpr Label compose(Signature v, Label n) {
  return detail::kCompositionTable[code(v)][code(n)];
}
constexpr Label compose(CompType t) { return compose(t.v, t.n); }

constexpr FunctionType function_type(Signature v) {
  switch (v) {
    case Signature::Plus: return FunctionType::Identity;
    case Signature::Neutral: return FunctionType::ConstNeutral;
    case Signature::Minus: return FunctionType::Inverse;
  }
  return FunctionType::Identity;
}

constexpr Label invert(Label l) {
  switch (l) {
    case Label::E: return Label::C;
    case Label::C: return Label::E;
    case Label::N: return Label::N;
  }
  return l;
}

constexpr Label apply(FunctionType f, Label n) {
  switch (f) {
    case FunctionType::Identity: return n;
    case FunctionType::ConstNeutral: return Label::N;
    case FunctionType::Inverse: return invert(n);
  }
  return n;
}

/// Gold label of a primitive veridical probe: the signature's label image.
constexpr Label label_image(Signature v) { return static_cast<Label>(code(v)); }

// ---- text forms ----------------------------------------------------------

constexpr char to_char(Label l) {
  constexpr char kChars[] = {'e', 'n', 'c'};
  return kChars[code(l)];
}
constexpr char to_char(Signature s) {
  constexpr char kChars[] = {'+', 'o', '-'};
  return kChars[code(s)];
}

inline std::string to_string(Label l) { return std::string(1, to_char(l)); }
inline std::string to_string(Signature s) { return std::string(1, to_char(s)); }
inline std::string to_string(CompType t) { return {to_char(t.v), to_char(t.n)}; }

inline std::string to_string(FunctionType f) {
  switch (f) {
    case FunctionType::Identity: return "f_ve";
    case FunctionType::ConstNeutral: return "f_vn";
    case FunctionType::Inverse: return "f_vc";
  }
  return "?";
}

inline Label parse_label(std::string_view s) {
  if (s == "e") return Label::E;
  if (s == "n") return Label::N;
  if (s == "c") return Label::C;
  throw Error("bad label '" + std::string(s) + "'");
}

inline Signature parse_signature(std::string_view s) {
  if (s == "+") return Signature::Plus;
  if (s == "o") return Signature::Neutral;
  if (s == "-") return Signature::Minus;
  throw Error("bad signature '" + std::string(s) + "'");
}

inline CompType parse_comp_type(std::string_view s) {
  if (s.size() != 2) throw Error("bad compositional type '" + std::string(s) + "'");
  return CompType{parse_signature(s.substr(0, 1)), parse_label(s.substr(1, 1))};
}

inline FunctionType parse_function_type(std::string_view s) {
  if (s == "f_ve") return FunctionType::Identity;
  if (s == "f_vn") return FunctionType::ConstNeutral;
  if (s == "f_vc") return FunctionType::Inverse;
  throw Error("bad function type '" + std::string(s) + "'");
}

}  // namespace c2gen
