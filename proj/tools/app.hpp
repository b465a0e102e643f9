#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "npv/abstraction.hpp"
#include "npv/lipschitz.hpp"
#include "npv/systems.hpp"
#include "npv/verify.hpp"

namespace npv::app {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitBudget = 3;
inline constexpr int kExitNumerical = 4;

struct SystemSetup {
  std::optional<BuiltinSystem> builtin;
  std::vector<TransitionSamples> files;  // one per action when the system is given by data
  std::vector<std::string> actions;
  Box domain;
  std::optional<Box> successor_domain;

  std::size_t dim() const { return domain.dim(); }
  std::size_t action_index(const std::string& name) const;
};

struct LcSection {
  LcConfig config;
  std::string action;  // empty: first action
  std::vector<CompositionalFactor> factors;
};

struct AbstractionSection {
  std::string method = "npe";
  std::optional<std::vector<double>> delta;
  std::optional<double> epsilon;  // closeness budget, with horizon and leb
  std::optional<double> horizon;
  std::optional<double> leb;
  std::optional<double> lipschitz;
  EmpiricalConfig empirical;
  std::optional<double> eps_g;
  std::optional<std::size_t> eps_g_horizon;
  bool eps_bar_given = false;
  NpeConfig npe;
  std::size_t npe_samples = 2000;
  BandwidthPolicy npe_policy = BandwidthPolicy::scott;
  std::vector<double> npe_h_x, npe_h_y;
  std::optional<std::vector<double>> representative;
};

struct SpecSection {
  std::string formula;
  std::map<std::string, std::vector<Box>> labels;
  SynthesisMode mode = SynthesisMode::paper;
  double tol = 1e-6;
  std::size_t max_iters = 100000;
  std::optional<std::filesystem::path> imdp;
};

struct RunConfig {
  nlohmann::json raw;  // the document as read, seed resolved
  std::filesystem::path base_dir;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  SystemSetup system;
  std::optional<LcSection> lc;
  std::optional<AbstractionSection> abstraction;
  std::optional<SpecSection> spec;
  std::filesystem::path out_dir = "out";
  bool csv = false;
};

/// Parses a run configuration. Relative sample paths resolve against base_dir.
/// Errors are ValidationError messages prefixed with the offending field path.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

/// Volume of the union of boxes intersected with `domain`.
double union_volume(const std::vector<Box>& boxes, const Box& domain);

/// Cell widths for the abstraction: the explicit delta, or
/// partition_size(epsilon, horizon, L, leb) rounded down to divide every domain width.
std::vector<double> resolve_delta(const RunConfig& cfg, std::optional<double> lipschitz, std::ostream* log = nullptr);

std::vector<LipschitzReport> run_estimate_lc(const RunConfig& cfg);
GridPartition make_partition(const RunConfig& cfg, const std::vector<double>& delta);
Imdp run_build_imdp(const RunConfig& cfg, std::ostream* log = nullptr);
VerificationResult run_verify(const RunConfig& cfg, const Imdp& imdp);

/// Writes the command outputs into cfg.out_dir.
std::vector<LipschitzReport> cmd_estimate_lc(const RunConfig& cfg, std::ostream& log);
void cmd_build_imdp(const RunConfig& cfg, std::ostream& log);
void cmd_verify(const RunConfig& cfg, std::ostream& log);
void write_build_outputs(const RunConfig& cfg, const Imdp& imdp, std::ostream& log);
void write_verify_outputs(const RunConfig& cfg, const Imdp& imdp, const VerificationResult& r,
                          const std::string& source, std::ostream& log);

/// Mean of p_up - p_lo over the non-sink states.
double mean_width(const VerificationResult& r, const Imdp& imdp);

struct ReproduceRow {
  std::string criterion;
  std::string value;
  bool pass = false;
};
std::vector<ReproduceRow> cmd_reproduce(const std::string& case_id, std::uint64_t seed, unsigned threads,
                                        const std::filesystem::path& out_dir, std::ostream& log);

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace npv::app
