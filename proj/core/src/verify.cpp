#include "npv/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace npv {

namespace {

constexpr double kRowSlack = 1e-9;
constexpr double kActionTie = 1e-12;

struct Scratch {
  std::vector<std::size_t> order;
};

// Optimal expectation of `v` over the interval polytope of `row`.
double row_value(const std::vector<ImdpEntry>& row, const std::vector<double>& v, Direction dir, Scratch& scratch) {
  double sum_lo = 0.0, sum_up = 0.0, base = 0.0;
  for (const auto& e : row) {
    sum_lo += e.lo;
    sum_up += e.up;
    base += e.lo * v[e.col];
  }
  if (sum_lo > 1.0 + kRowSlack || sum_up < 1.0 - kRowSlack)
    throw InfeasibleRow("interval row violates sum lo <= 1 <= sum up (" + format_double(sum_lo) + ", " +
                        format_double(sum_up) + ")");
  auto& order = scratch.order;
  order.resize(row.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Rows are sorted by column, so a stable sort on value keeps lowest-index-first among ties.
  if (dir == Direction::minimize)
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[row[a].col] < v[row[b].col]; });
  else
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[row[a].col] > v[row[b].col]; });
  double free_mass = 1.0 - sum_lo;
  double value = base;
  for (std::size_t idx : order) {
    if (free_mass <= 0.0) break;
    const auto& e = row[idx];
    const double add = std::min(e.up - e.lo, free_mass);
    if (add > 0.0) {
      value += add * v[e.col];
      free_mass -= add;
    }
  }
  return value;
}

void check_propositions(const Imdp& imdp, std::initializer_list<const StateFormula*> formulas) {
  std::vector<std::string> props;
  for (const auto* f : formulas) f->collect_propositions(props);
  for (const auto& p : props)
    if (std::find(imdp.propositions.begin(), imdp.propositions.end(), p) == imdp.propositions.end())
      throw ValidationError("formula uses undeclared proposition '" + p + "'");
}

// Best value over actions and the lowest action index within kActionTie of it.
struct Choice {
  double value;
  std::size_t action;
};

Choice choose(const std::vector<double>& values, bool maximize) {
  double best = values[0];
  for (double x : values) best = maximize ? std::max(best, x) : std::min(best, x);
  for (std::size_t a = 0; a < values.size(); ++a)
    if (std::abs(values[a] - best) <= kActionTie) return {best, a};
  return {best, 0};
}

// One Jacobi sweep of the interval Bellman operator on the undecided states.
void sweep(const Imdp& m, const std::vector<StateClass>& cls, SynthesisMode mode, const std::vector<double>& lo_prev,
           const std::vector<double>& up_prev, std::vector<double>& lo_next, std::vector<double>& up_next,
           std::vector<std::size_t>& act_lo, std::vector<std::size_t>& act_up, unsigned threads) {
  const std::size_t n = m.num_states, k = m.num_actions();
  lo_next.resize(n);
  up_next.resize(n);
  act_lo.assign(n, 0);
  act_up.assign(n, 0);
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(threads ? threads : 1, n));
  parallel_for(chunks, static_cast<unsigned>(chunks), [&](std::size_t chunk) {
    Scratch scratch;
    std::vector<double> vl(k), vu(k);
    for (std::size_t s = chunk; s < n; s += chunks) {
      if (!cls.empty() && cls[s] != StateClass::maybe) {
        const double fixed = cls[s] == StateClass::yes ? 1.0 : 0.0;
        lo_next[s] = up_next[s] = fixed;
        continue;
      }
      for (std::size_t a = 0; a < k; ++a) {
        const auto& row = m.rows[a][s];
        vl[a] = row_value(row, lo_prev, Direction::minimize, scratch);
        vu[a] = row_value(row, up_prev, Direction::maximize, scratch);
      }
      const Choice cl = choose(vl, mode == SynthesisMode::robust);
      const Choice cu = choose(vu, true);
      lo_next[s] = std::clamp(cl.value, 0.0, 1.0);
      up_next[s] = std::clamp(cu.value, 0.0, 1.0);
      act_lo[s] = cl.action;
      act_up[s] = cu.action;
    }
  });
}

std::vector<double> initial_values(const std::vector<StateClass>& cls) {
  std::vector<double> v(cls.size(), 0.0);
  for (std::size_t s = 0; s < cls.size(); ++s)
    if (cls[s] == StateClass::yes) v[s] = 1.0;
  return v;
}

}  // namespace

std::vector<double> resolve_adversary(std::span<const double> lo, std::span<const double> up,
                                      std::span<const double> v, Direction dir) {
  if (lo.size() != up.size() || lo.size() != v.size()) throw ValidationError("adversary: length mismatch");
  double sum_lo = 0.0, sum_up = 0.0;
  for (std::size_t j = 0; j < lo.size(); ++j) {
    if (lo[j] < 0.0 || lo[j] > up[j] || up[j] > 1.0 + kRowSlack)
      throw InfeasibleRow("adversary: need 0 <= lo <= up <= 1 at successor " + std::to_string(j));
    sum_lo += lo[j];
    sum_up += up[j];
  }
  if (sum_lo > 1.0 + kRowSlack || sum_up < 1.0 - kRowSlack)
    throw InfeasibleRow("adversary: need sum lo <= 1 <= sum up");
  std::vector<std::size_t> order(lo.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (dir == Direction::minimize)
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  else
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  std::vector<double> theta(lo.begin(), lo.end());
  double free_mass = 1.0 - sum_lo;
  for (std::size_t j : order) {
    if (free_mass <= 0.0) break;
    const double add = std::min(up[j] - lo[j], free_mass);
    theta[j] += add;
    free_mass -= add;
  }
  return theta;
}

std::vector<StateClass> classify_states(const Imdp& imdp, const StateFormula& phi1, const StateFormula& phi2) {
  check_propositions(imdp, {&phi1, &phi2});
  std::vector<StateClass> cls(imdp.num_states, StateClass::maybe);
  for (std::size_t s = 0; s < imdp.num_states; ++s) {
    const auto& l = imdp.labels[s];
    if (phi2.holds(l)) cls[s] = StateClass::yes;
    else if (!phi1.holds(l)) cls[s] = StateClass::no;
  }
  return cls;
}

std::string_view to_string(SynthesisMode m) { return m == SynthesisMode::robust ? "robust" : "paper"; }

SynthesisMode synthesis_mode_from_string(std::string_view s) {
  if (s == "paper") return SynthesisMode::paper;
  if (s == "robust") return SynthesisMode::robust;
  throw ValidationError("unknown synthesis mode '" + std::string(s) + "'");
}

VerificationResult interval_value_iteration(const Imdp& imdp, const PathFormula& psi, const VerifyOptions& opt) {
  if (psi.kind != PathFormula::Kind::bounded_until) throw ValidationError("value iteration needs a bounded until");
  if (psi.bound > opt.max_horizon)
    throw ValidationError("horizon " + std::to_string(psi.bound) + " exceeds the limit " + std::to_string(opt.max_horizon));
  VerificationResult r;
  r.classes = classify_states(imdp, psi.left, psi.right);
  r.mode = opt.mode;
  r.formula = psi.to_string();
  r.horizon = psi.bound;
  r.p_lo = initial_values(r.classes);
  r.p_up = r.p_lo;
  if (opt.keep_history) {
    r.history_lo.push_back(r.p_lo);
    r.history_up.push_back(r.p_up);
  }
  r.strategy_lo.assign(psi.bound, {});
  r.strategy_up.assign(psi.bound, {});
  std::vector<double> lo_next, up_next;
  for (std::size_t t = 1; t <= psi.bound; ++t) {
    auto& al = r.strategy_lo[psi.bound - t];
    auto& au = r.strategy_up[psi.bound - t];
    sweep(imdp, r.classes, opt.mode, r.p_lo, r.p_up, lo_next, up_next, al, au, opt.threads);
    r.p_lo.swap(lo_next);
    r.p_up.swap(up_next);
    if (opt.keep_history) {
      r.history_lo.push_back(r.p_lo);
      r.history_up.push_back(r.p_up);
    }
  }
  return r;
}

VerificationResult interval_value_iteration_unbounded(const Imdp& imdp, const PathFormula& psi,
                                                      const VerifyOptions& opt) {
  if (psi.kind != PathFormula::Kind::until) throw ValidationError("unbounded iteration needs an until formula");
  if (!(opt.tol > 0.0)) throw ValidationError("tolerance must be positive");
  if (opt.max_iters < 1) throw ValidationError("max_iters must be at least 1");
  VerificationResult r;
  r.classes = classify_states(imdp, psi.left, psi.right);
  r.mode = opt.mode;
  r.formula = psi.to_string();
  r.p_lo = initial_values(r.classes);
  r.p_up = r.p_lo;
  r.strategy_lo.assign(1, std::vector<std::size_t>(imdp.num_states, 0));
  r.strategy_up.assign(1, std::vector<std::size_t>(imdp.num_states, 0));
  r.converged = false;
  std::vector<double> lo_next, up_next;
  for (std::size_t it = 1; it <= opt.max_iters; ++it) {
    sweep(imdp, r.classes, opt.mode, r.p_lo, r.p_up, lo_next, up_next, r.strategy_lo[0], r.strategy_up[0], opt.threads);
    double change = 0.0;
    for (std::size_t s = 0; s < imdp.num_states; ++s)
      change = std::max({change, std::abs(lo_next[s] - r.p_lo[s]), std::abs(up_next[s] - r.p_up[s])});
    r.p_lo.swap(lo_next);
    r.p_up.swap(up_next);
    r.horizon = it;
    r.residual = change;
    if (change < opt.tol) {
      r.converged = true;
      break;
    }
  }
  return r;
}

VerificationResult check_next(const Imdp& imdp, const StateFormula& phi, const VerifyOptions& opt) {
  check_propositions(imdp, {&phi});
  VerificationResult r;
  r.mode = opt.mode;
  r.formula = PathFormula::next(phi).to_string();
  r.horizon = 1;
  r.classes.assign(imdp.num_states, StateClass::maybe);
  std::vector<double> indicator(imdp.num_states, 0.0);
  for (std::size_t s = 0; s < imdp.num_states; ++s)
    if (phi.holds(imdp.labels[s])) indicator[s] = 1.0;
  r.strategy_lo.assign(1, {});
  r.strategy_up.assign(1, {});
  sweep(imdp, {}, opt.mode, indicator, indicator, r.p_lo, r.p_up, r.strategy_lo[0], r.strategy_up[0], opt.threads);
  return r;
}

VerificationResult check_path(const Imdp& imdp, const PathFormula& psi, const VerifyOptions& opt) {
  switch (psi.kind) {
    case PathFormula::Kind::next: return check_next(imdp, psi.right, opt);
    case PathFormula::Kind::bounded_until: return interval_value_iteration(imdp, psi, opt);
    case PathFormula::Kind::until: return interval_value_iteration_unbounded(imdp, psi, opt);
  }
  throw ValidationError("unknown path formula");
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::yes: return "yes";
    case Verdict::no: return "no";
    case Verdict::unknown: return "unknown";
  }
  return "unknown";
}

Verdict check_threshold(double lo, double up, const Threshold& t) {
  auto sat = [&](double p) {
    switch (t.op) {
      case CompareOp::ge: return p >= t.p;
      case CompareOp::gt: return p > t.p;
      case CompareOp::le: return p <= t.p;
      case CompareOp::lt: return p < t.p;
    }
    return false;
  };
  // The comparison set is an interval, so checking the two ends decides containment and disjointness.
  const bool a = sat(lo), b = sat(up);
  if (a && b) return Verdict::yes;
  if (!a && !b) return Verdict::no;
  return Verdict::unknown;
}

std::vector<Verdict> check_threshold(const VerificationResult& r, const Threshold& t) {
  std::vector<Verdict> v(r.p_lo.size());
  for (std::size_t s = 0; s < v.size(); ++s) v[s] = check_threshold(r.p_lo[s], r.p_up[s], t);
  return v;
}

StrategyTable synthesize_strategy(const VerificationResult& r) {
  if (r.strategy_lo.empty() || r.strategy_up.empty())
    throw ValidationError("result has no action records (zero horizon)");
  return StrategyTable{r.strategy_lo, r.strategy_up};
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

namespace {

std::string_view class_name(StateClass c) {
  switch (c) {
    case StateClass::yes: return "Q1";
    case StateClass::no: return "Q0";
    case StateClass::maybe: return "Q?";
  }
  return "Q?";
}

nlohmann::json grid_json(const Imdp& imdp) {
  if (!imdp.grid) throw ValidationError("IMDP carries no grid metadata");
  const auto& g = *imdp.grid;
  return {{"lo", std::vector<double>(g.domain.lower().begin(), g.domain.lower().end())},
          {"hi", std::vector<double>(g.domain.upper().begin(), g.domain.upper().end())},
          {"counts", g.counts},
          {"order", "dimension 0 varies fastest"}};
}

std::size_t grid_cells(const Imdp& imdp) {
  std::size_t c = 1;
  for (auto n : imdp.grid->counts) c *= n;
  return c;
}

}  // namespace

nlohmann::json to_json(const VerificationResult& r, const Imdp& imdp) {
  nlohmann::json classes = nlohmann::json::array();
  for (auto c : r.classes) classes.push_back(class_name(c));
  return {{"formula", r.formula},
          {"mode", to_string(r.mode)},
          {"states", r.p_lo.size()},
          {"horizon", r.horizon},
          {"residual", r.residual},
          {"converged", r.converged},
          {"actions", imdp.actions},
          {"p_lo", r.p_lo},
          {"p_up", r.p_up},
          {"classes", classes},
          {"strategy_lo", r.strategy_lo},
          {"strategy_up", r.strategy_up}};
}

nlohmann::json heatmap_json(const VerificationResult& r, const Imdp& imdp) {
  nlohmann::json j = {{"grid", grid_json(imdp)}, {"formula", r.formula}};
  const std::size_t cells = grid_cells(imdp);
  if (cells > r.p_lo.size()) throw ValidationError("heatmap: grid larger than the state space");
  j["p_lo"] = std::vector<double>(r.p_lo.begin(), r.p_lo.begin() + static_cast<std::ptrdiff_t>(cells));
  j["p_up"] = std::vector<double>(r.p_up.begin(), r.p_up.begin() + static_cast<std::ptrdiff_t>(cells));
  return j;
}

nlohmann::json strategy_map_json(const VerificationResult& r, const Imdp& imdp) {
  const auto table = synthesize_strategy(r);
  const std::size_t cells = grid_cells(imdp);
  auto names = [&](const std::vector<std::size_t>& acts) {
    std::vector<std::string> out(cells);
    for (std::size_t c = 0; c < cells; ++c) out[c] = imdp.actions.at(acts.at(c));
    return out;
  };
  return {{"grid", grid_json(imdp)},
          {"formula", r.formula},
          {"mode", to_string(r.mode)},
          {"actions", imdp.actions},
          {"minimizing", names(table.minimizing.front())},
          {"maximizing", names(table.maximizing.front())}};
}

}  // namespace npv
