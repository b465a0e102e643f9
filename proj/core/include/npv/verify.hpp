#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "npv/abstraction.hpp"
#include "npv/pctl.hpp"

namespace npv {

enum class Direction { minimize, maximize };

/// Distribution theta with lo <= theta <= up and sum theta = 1 that
/// minimizes (maximizes) sum theta_j v_j. Starts from lo and pours the free
/// mass 1 - sum lo into successors in increasing (decreasing) order of v,
/// equal values by lowest index. Throws InfeasibleRow unless
/// sum lo <= 1 <= sum up (slack 1e-9).
std::vector<double> resolve_adversary(std::span<const double> lo, std::span<const double> up,
                                      std::span<const double> v, Direction dir);

enum class StateClass : std::uint8_t { maybe, yes, no };

/// Q1 = states satisfying phi2, Q0 = states satisfying !phi1 & !phi2.
/// Throws ValidationError for a proposition the IMDP does not declare.
std::vector<StateClass> classify_states(const Imdp& imdp, const StateFormula& phi1, const StateFormula& phi2);

/// How actions combine with adversaries. `paper`: lower bound min over
/// actions of the pessimistic adversary, upper bound max over actions of the
/// optimistic one. `robust`: the lower bound maximizes over actions instead,
/// which gives the best guaranteed probability for synthesis.
enum class SynthesisMode { paper, robust };
std::string_view to_string(SynthesisMode m);
SynthesisMode synthesis_mode_from_string(std::string_view s);

struct VerifyOptions {
  SynthesisMode mode = SynthesisMode::paper;
  double tol = 1e-6;
  std::size_t max_iters = 100000;
  std::size_t max_horizon = 10'000'000;
  bool keep_history = true;
  unsigned threads = 1;
};

struct VerificationResult {
  std::vector<double> p_lo;
  std::vector<double> p_up;
  /// strategy_lo[t][s]: action at time step t (t = 0 first) attaining p_lo.
  /// Unbounded until keeps a single stationary map.
  std::vector<std::vector<std::size_t>> strategy_lo;
  std::vector<std::vector<std::size_t>> strategy_up;
  /// history_lo[t]: bounds with t steps to go (bounded until, keep_history).
  std::vector<std::vector<double>> history_lo;
  std::vector<std::vector<double>> history_up;
  std::vector<StateClass> classes;
  std::size_t horizon = 0;     // k for bounded formulas, sweeps for unbounded until
  double residual = 0.0;       // last sup-norm change (unbounded until)
  bool converged = true;
  SynthesisMode mode = SynthesisMode::paper;
  std::string formula;
};

VerificationResult interval_value_iteration(const Imdp& imdp, const PathFormula& psi, const VerifyOptions& opt = {});
VerificationResult interval_value_iteration_unbounded(const Imdp& imdp, const PathFormula& psi,
                                                      const VerifyOptions& opt = {});
VerificationResult check_next(const Imdp& imdp, const StateFormula& phi, const VerifyOptions& opt = {});
/// Dispatches on the path formula kind.
VerificationResult check_path(const Imdp& imdp, const PathFormula& psi, const VerifyOptions& opt = {});

enum class Verdict { yes, no, unknown };
std::string_view to_string(Verdict v);

/// yes if every p in [lo, up] satisfies the comparison, no if none does.
Verdict check_threshold(double lo, double up, const Threshold& t);
std::vector<Verdict> check_threshold(const VerificationResult& r, const Threshold& t);

struct StrategyTable {
  std::vector<std::vector<std::size_t>> minimizing;  // [step][state]
  std::vector<std::vector<std::size_t>> maximizing;
};

/// Time-indexed action maps. Throws ValidationError if the result carries no
/// action records.
StrategyTable synthesize_strategy(const VerificationResult& r);

nlohmann::json to_json(const VerificationResult& r, const Imdp& imdp);
/// Grid metadata plus p_lo / p_up per cell (dimension 0 fastest); sink excluded.
nlohmann::json heatmap_json(const VerificationResult& r, const Imdp& imdp);
/// Step-0 action names per cell for the minimizing and maximizing strategies.
nlohmann::json strategy_map_json(const VerificationResult& r, const Imdp& imdp);

}  // namespace npv
