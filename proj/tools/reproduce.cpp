#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "app.hpp"

namespace npv::app {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string num(double v, int prec = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

void save(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error("cannot open '" + p.string() + "' for writing");
  os << text;
}

RunConfig materialize(json doc, const fs::path& dir, unsigned threads) {
  doc["output"] = {{"dir", dir.string()}, {"formats", {"json", "csv"}}};
  save(dir / "config.json", doc.dump(2) + "\n");
  RunConfig cfg = parse_config(doc);
  cfg.threads = threads;
  return cfg;
}

// ---------------------------------------------------------------------------
// Lipschitz-constant cases
// ---------------------------------------------------------------------------

struct LcCase {
  const char* builtin;
  double truth;
  std::size_t n;
  std::size_t grid;
  json constants;
  std::optional<std::pair<double, double>> range;  // accepted band for L_hat
};

std::vector<ReproduceRow> lc_case(const LcCase& c, std::uint64_t seed, unsigned threads, const fs::path& dir,
                                  std::ostream& log) {
  json doc = {{"seed", seed},
              {"system", {{"builtin", c.builtin}}},
              {"lc", {{"n", c.n}, {"m", 20}, {"grid_resolution", c.grid}, {"constants", c.constants}}}};
  const RunConfig cfg = materialize(doc, dir, threads);
  const auto r = cmd_estimate_lc(cfg, log).front();
  std::vector<ReproduceRow> rows;
  rows.push_back({"interval contains L = " + num(c.truth),
                  "[" + num(r.interval_lo) + ", " + num(r.interval_hi) + "]", r.contains(c.truth)});
  if (c.range)
    rows.push_back({"L_hat in [" + num(c.range->first, 2) + ", " + num(c.range->second, 2) + "]", num(r.overall),
                    r.overall >= c.range->first && r.overall <= c.range->second});
  return rows;
}

// ---------------------------------------------------------------------------
// Verification case studies
// ---------------------------------------------------------------------------

const char* const kFormula = "!O U<=3 D";

json labels_json() {
  return {{"O", {{{"lo", {1.2, 1.6}}, {"hi", {2.0, 2.0}}}}}, {"D", {{{"lo", {0.0, 0.0}}, {"hi", {0.8, 0.4}}}}}};
}

json abstraction_json(const std::string& method, double delta) {
  json a = {{"method", method}, {"delta", delta}};
  if (method == "empirical") {
    // The global budget eps_g = 0.2 is affordable on the coarse grid only.
    if (delta >= 0.4) a["eps_g"] = 0.2;
    else a["eps_bar"] = 0.01;
    a["beta_bar"] = 0.1;
  } else if (method == "npe") {
    a["n"] = 2000;
    a["x_grid"] = 3;
  }
  return a;
}

struct Run {
  std::string method;
  double delta = 0.0;
  Imdp imdp;
  VerificationResult result;
};

bool invariants_hold(const VerificationResult& r) {
  for (std::size_t s = 0; s < r.p_lo.size(); ++s)
    if (!(r.p_lo[s] <= r.p_up[s])) return false;
  for (std::size_t t = 0; t < r.history_lo.size(); ++t)
    for (std::size_t s = 0; s < r.p_lo.size(); ++s) {
      if (!(r.history_lo[t][s] <= r.history_up[t][s])) return false;
      if (t > 0 && (r.history_lo[t][s] < r.history_lo[t - 1][s] || r.history_up[t][s] < r.history_up[t - 1][s]))
        return false;
    }
  return true;
}

std::vector<Run> case_study_runs(const char* builtin, std::uint64_t seed, unsigned threads, const fs::path& dir,
                                 std::ostream& log) {
  std::vector<Run> runs;
  for (double delta : {0.4, 0.1}) {
    for (const char* method : {"model_based", "empirical", "npe"}) {
      const std::string tag = std::string(method) + (delta >= 0.4 ? "_delta0.4" : "_delta0.1");
      json doc = {{"seed", seed},
                  {"system", {{"builtin", builtin}}},
                  {"abstraction", abstraction_json(method, delta)},
                  {"spec", {{"formula", kFormula}, {"labels", labels_json()}}}};
      const RunConfig cfg = materialize(doc, dir / tag, threads);
      log << "[" << tag << "]\n";
      Run run{method, delta, run_build_imdp(cfg), {}};
      write_build_outputs(cfg, run.imdp, log);
      run.result = run_verify(cfg, run.imdp);
      write_verify_outputs(cfg, run.imdp, run.result, "in-memory", log);
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

const Run& find(const std::vector<Run>& runs, const std::string& method, double delta) {
  for (const auto& r : runs)
    if (r.method == method && r.delta == delta) return r;
  throw Error("missing run " + method);
}

double max_on_label(const Run& r, const std::string& label) {
  double m = 0.0;
  for (std::size_t s = 0; s < r.imdp.num_states; ++s)
    if (r.imdp.has_label(s, label)) m = std::max(m, r.result.p_up[s]);
  return m;
}

std::vector<ReproduceRow> common_rows(const std::vector<Run>& runs, std::ostringstream& widths) {
  std::vector<ReproduceRow> rows;
  double worst_o = 0.0;
  for (const char* m : {"model_based", "empirical", "npe"}) worst_o = std::max(worst_o, max_on_label(find(runs, m, 0.1), "O"));
  rows.push_back({"O-labeled states have p_up < 0.05 (all methods, delta 0.1)", num(worst_o), worst_o < 0.05});

  bool inv = true;
  for (const auto& r : runs) inv = inv && invariants_hold(r.result);
  rows.push_back({"sandwich and horizon monotonicity on every run", inv ? "hold" : "violated", inv});

  widths << "mean width of [p_lo, p_up] over cells\n";
  widths << std::left << std::setw(14) << "method" << std::setw(12) << "delta 0.4" << "delta 0.1\n";
  for (const char* m : {"model_based", "empirical", "npe"})
    widths << std::left << std::setw(14) << m << std::setw(12) << num(mean_width(find(runs, m, 0.4).result, find(runs, m, 0.4).imdp), 6)
           << num(mean_width(find(runs, m, 0.1).result, find(runs, m, 0.1).imdp), 6) << "\n";
  return rows;
}

std::vector<ReproduceRow> case_study_1(std::uint64_t seed, unsigned threads, const fs::path& dir, std::ostream& log) {
  const auto runs = case_study_runs("case_study_linear", seed, threads, dir, log);
  std::ostringstream widths;
  auto rows = common_rows(runs, widths);
  const auto& n4 = find(runs, "npe", 0.4);
  const auto& n1 = find(runs, "npe", 0.1);
  const double w4 = mean_width(n4.result, n4.imdp), w1 = mean_width(n1.result, n1.imdp);
  rows.push_back({"NPE mean width shrinks from delta 0.4 to 0.1", num(w4, 6) + " -> " + num(w1, 6), w1 < w4});
  const auto& mb = find(runs, "model_based", 0.1);
  double diff = 0.0;
  const std::size_t cells = mb.imdp.num_states - 1;
  for (std::size_t s = 0; s < cells; ++s) diff += std::abs(n1.result.p_up[s] - mb.result.p_up[s]);
  diff /= static_cast<double>(cells);
  rows.push_back({"mean |NPE p_up - model-based p_up| <= 0.15 (delta 0.1)", num(diff), diff <= 0.15});
  save(dir / "widths.txt", widths.str());
  log << widths.str();
  return rows;
}

std::vector<ReproduceRow> case_study_2(std::uint64_t seed, unsigned threads, const fs::path& dir, std::ostream& log) {
  const auto runs = case_study_runs("case_study_switched", seed, threads, dir, log);
  std::ostringstream widths;
  auto rows = common_rows(runs, widths);
  bool maps = true;
  for (const auto& r : runs) {
    const std::string tag = r.method + (r.delta >= 0.4 ? "_delta0.4" : "_delta0.1");
    maps = maps && fs::exists(dir / tag / "strategy_map.json");
  }
  rows.push_back({"strategy maps written for both delta values", maps ? "yes" : "no", maps});
  save(dir / "widths.txt", widths.str());
  log << widths.str();
  return rows;
}

}  // namespace

std::vector<ReproduceRow> cmd_reproduce(const std::string& case_id, std::uint64_t seed, unsigned threads,
                                        const fs::path& out_dir, std::ostream& log) {
  std::vector<ReproduceRow> rows;
  if (case_id == "example5") {
    rows = lc_case({"univariate_linear", 0.1210, 60000, 50, {{"c_f", 1.0}, {"c_b1", 0.5}, {"c_b2", 0.5}},
                    std::pair{0.06, 0.17}},
                   seed, threads, out_dir, log);
  } else if (case_id == "example6") {
    rows = lc_case({"univariate_mixture", 0.0968, 60000, 50, {{"c_f", 1.0}, {"c_b1", 0.5}, {"c_b2", 0.5}},
                    std::pair{0.05, 0.15}},
                   seed, threads, out_dir, log);
  } else if (case_id == "example7_case1") {
    rows = lc_case({"bivariate_gaussian_case1", 0.0588, 30000, 15, {{"c_f", 0.5}, {"deriv_bound", 0.5}}, std::nullopt},
                   seed, threads, out_dir, log);
  } else if (case_id == "case_study_1") {
    rows = case_study_1(seed, threads, out_dir, log);
  } else if (case_id == "case_study_2") {
    rows = case_study_2(seed, threads, out_dir, log);
  } else {
    throw ValidationError("reproduce: unknown case id '" + case_id +
                          "' (example5, example6, example7_case1, case_study_1, case_study_2)");
  }

  std::ostringstream table;
  json j = json::array();
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.criterion.size());
  table << "case " << case_id << ", seed " << seed << "\n";
  for (const auto& r : rows) {
    table << (r.pass ? "PASS  " : "FAIL  ") << std::left << std::setw(static_cast<int>(width) + 2) << r.criterion
          << r.value << "\n";
    j.push_back({{"criterion", r.criterion}, {"value", r.value}, {"pass", r.pass}});
  }
  save(out_dir / "table.txt", table.str());
  save(out_dir / "table.json", json{{"case", case_id}, {"seed", seed}, {"rows", j}}.dump(2) + "\n");
  log << table.str();
  return rows;
}

}  // namespace npv::app
