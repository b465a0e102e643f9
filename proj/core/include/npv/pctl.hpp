#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace npv {

/// Boolean combination of atomic propositions. Disjunction and `false` are
/// sugar: a | b is !(!a & !b), false is !true.
struct StateFormula {
  enum class Kind { truth, prop, negation, conjunction };

  Kind kind = Kind::truth;
  std::string name;                   // prop only
  std::vector<StateFormula> children;  // one for negation, two for conjunction

  static StateFormula top();
  static StateFormula atom(std::string name);
  static StateFormula negate(StateFormula f);
  static StateFormula both(StateFormula a, StateFormula b);
  static StateFormula either(StateFormula a, StateFormula b);

  /// `labels` must be sorted.
  bool holds(const std::vector<std::string>& labels) const;
  void collect_propositions(std::vector<std::string>& out) const;
  std::string to_string() const;

  bool operator==(const StateFormula&) const = default;
};

struct PathFormula {
  enum class Kind { next, bounded_until, until };

  Kind kind = Kind::bounded_until;
  StateFormula left;   // phi_1 (unused for next)
  StateFormula right;  // phi_2, or phi for next
  std::size_t bound = 0;

  static PathFormula next(StateFormula phi);
  static PathFormula until(StateFormula phi1, StateFormula phi2);
  static PathFormula bounded_until(StateFormula phi1, StateFormula phi2, std::size_t k);
  static PathFormula eventually(StateFormula phi);
  static PathFormula bounded_eventually(StateFormula phi, std::size_t k);

  std::string to_string() const;
  bool operator==(const PathFormula&) const = default;
};

enum class CompareOp { ge, gt, le, lt };
std::string_view to_string(CompareOp op);

struct Threshold {
  CompareOp op = CompareOp::ge;
  double p = 0.0;
  bool operator==(const Threshold&) const = default;
};

/// One top-level probabilistic query P~p [ path ], or a bare path formula.
struct PctlQuery {
  std::optional<Threshold> threshold;
  PathFormula path;

  std::string to_string() const;
  bool operator==(const PctlQuery&) const = default;
};

/// Grammar:
///   query := 'P' ('>=' | '>' | '<=' | '<') number '[' path ']' | 'P=?' '[' path ']' | path
///   path  := 'X' state | 'F' ['<=' int] state | state 'U' ['<=' int] state
///   state := and ('|' and)*
///   and   := unary ('&' unary)*
///   unary := '!' unary | '(' state ')' | 'true' | 'false' | identifier
/// X, U, F, P, true and false are reserved. Nested P operators are rejected.
/// Throws ValidationError with the offending position.
PctlQuery parse_query(std::string_view text);
PathFormula parse_path(std::string_view text);
StateFormula parse_state(std::string_view text);

}  // namespace npv
