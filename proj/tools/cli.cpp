#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "app.hpp"

namespace npv::app {

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out;
  std::string imdp;
  std::string case_id;
};

void add_common(CLI::App* cmd, Flags& f, bool config_required) {
  auto* c = cmd->add_option("--config", f.config, "run configuration (JSON)");
  if (config_required) c->required();
  cmd->add_option("--seed", f.seed, "root seed, overrides the config");
  cmd->add_option("--threads", f.threads, "worker threads (0 = hardware parallelism)");
  cmd->add_option("--out", f.out, "output directory, overrides the config");
}

RunConfig resolve(const Flags& f) {
  RunConfig cfg = load_config(f.config);
  if (f.seed) {
    cfg.seed = *f.seed;
    cfg.raw["seed"] = *f.seed;
  }
  if (f.threads) cfg.threads = *f.threads;
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (!f.imdp.empty()) {
    if (!cfg.spec) cfg.spec = SpecSection{};
    cfg.spec->imdp = std::filesystem::absolute(f.imdp);
  }
  return cfg;
}

int reproduce(const Flags& f, std::ostream& out) {
  std::string id = f.case_id;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::filesystem::path dir;
  if (!f.config.empty()) {
    std::ifstream is(f.config);
    if (!is) throw ValidationError("cannot open config '" + f.config + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("config '" + f.config + "': " + e.what());
    }
    for (const auto& [k, v] : j.items())
      if (k != "case" && k != "seed" && k != "threads" && k != "out") throw ValidationError(k + ": unknown field");
    try {
      if (id.empty() && j.contains("case")) id = j["case"].get<std::string>();
      if (j.contains("seed")) seed = j["seed"].get<std::uint64_t>();
      if (j.contains("threads")) threads = j["threads"].get<unsigned>();
      if (j.contains("out")) dir = j["out"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("config: ") + e.what());
    }
  }
  if (id.empty()) throw ValidationError("reproduce: give a case id");
  if (f.seed) seed = *f.seed;
  if (f.threads) threads = *f.threads;
  if (!f.out.empty()) dir = f.out;
  if (dir.empty()) dir = std::filesystem::path("reproduce") / id;
  cmd_reproduce(id, seed, threads, dir, out);
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Data-driven verification of stochastic systems from sampled transitions", "npv"};
  app.require_subcommand(1);
  Flags f;
  auto* lc = app.add_subcommand("estimate-lc", "estimate the Lipschitz constant of the transition density");
  auto* build = app.add_subcommand("build-imdp", "build an interval MDP abstraction");
  auto* verify = app.add_subcommand("verify", "check a PCTL formula on an abstraction");
  auto* repro = app.add_subcommand("reproduce", "rerun a reference experiment and tabulate checks");
  add_common(lc, f, true);
  add_common(build, f, true);
  add_common(verify, f, true);
  verify->add_option("--imdp", f.imdp, "abstraction file (default: <out>/abstraction.imdp)");
  add_common(repro, f, false);
  repro->add_option("case", f.case_id, "example5 | example6 | example7_case1 | case_study_1 | case_study_2");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (f.threads) set_default_threads(*f.threads);
    if (lc->parsed()) cmd_estimate_lc(resolve(f), out);
    else if (build->parsed()) cmd_build_imdp(resolve(f), out);
    else if (verify->parsed()) cmd_verify(resolve(f), out);
    else return reproduce(f, out);
    return kExitOk;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const BudgetError& e) {
    err << "budget error: " << e.what() << "\n";
    return kExitBudget;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace npv::app
