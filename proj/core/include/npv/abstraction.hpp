#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "npv/common.hpp"
#include "npv/kde.hpp"
#include "npv/systems.hpp"

namespace npv {

/// Label carried by the sink state only.
inline constexpr const char* kOutLabel = "out";

/// Uniform axis-aligned grid over a box plus one absorbing sink state for
/// successors that leave the domain. Cells are numbered with dimension 0
/// varying fastest; the sink is state num_cells().
class GridPartition {
 public:
  GridPartition() = default;
  /// Throws ValidationError unless every domain width is an integer multiple
  /// of delta (relative tolerance 1e-9). A cell gets proposition p iff it lies
  /// inside one of p's regions; partial overlaps are reported in warnings().
  GridPartition(Box domain, std::vector<double> delta, const std::map<std::string, std::vector<Box>>& regions = {});

  const Box& domain() const noexcept { return domain_; }
  std::size_t dim() const noexcept { return domain_.dim(); }
  const std::vector<double>& delta() const noexcept { return delta_; }
  const std::vector<std::size_t>& counts() const noexcept { return counts_; }
  std::size_t num_cells() const noexcept { return num_cells_; }
  std::size_t num_states() const noexcept { return num_cells_ + 1; }
  std::size_t sink() const noexcept { return num_cells_; }

  /// Boundaries of the cells along dimension k (counts()[k] + 1 values).
  const std::vector<double>& edges(std::size_t k) const { return edges_.at(k); }
  std::vector<std::size_t> cell_digits(std::size_t cell) const;
  std::size_t cell_index(std::span<const std::size_t> digits) const;
  Box cell(std::size_t index) const;

  /// Point at fraction `representative_offset` of each cell (0.5: center).
  std::vector<double> representative(std::size_t index) const;
  void set_representative_offset(std::vector<double> fraction);
  const std::vector<double>& representative_offset() const noexcept { return rep_offset_; }

  /// Cell containing y (cells half-open, the upper domain face belongs to the
  /// last cell); nullopt outside the domain.
  std::optional<std::size_t> locate(std::span<const double> y) const;

  const std::vector<std::string>& propositions() const noexcept { return propositions_; }
  /// Sorted labels of a state (the sink carries only "out").
  const std::vector<std::string>& labels(std::size_t state) const { return labels_.at(state); }
  bool has_label(std::size_t state, const std::string& p) const;
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  /// Total volume of the labeled regions' union restricted to whole cells.
  double labeled_measure() const;

 private:
  Box domain_;
  std::vector<double> delta_;
  std::vector<std::size_t> counts_;
  std::vector<std::vector<double>> edges_;
  std::size_t num_cells_ = 0;
  std::vector<double> rep_offset_;
  std::vector<std::string> propositions_;
  std::vector<std::vector<std::string>> labels_;
  std::vector<std::string> warnings_;
};

struct ImdpEntry {
  std::size_t col = 0;
  double lo = 0.0;
  double up = 0.0;
  bool operator==(const ImdpEntry&) const = default;
};

/// Axis-aligned grid layout of the non-sink states, kept for heatmaps.
struct GridMeta {
  Box domain;
  std::vector<std::size_t> counts;
  bool operator==(const GridMeta&) const = default;
};

/// Interval MDP with sparse rows: rows[action][state] lists successor
/// columns in increasing order with [lo, up] bounds.
struct Imdp {
  std::size_t num_states = 0;
  std::vector<std::string> actions;
  std::vector<std::vector<std::vector<ImdpEntry>>> rows;
  std::vector<std::string> propositions;
  std::vector<std::vector<std::string>> labels;  // per state, sorted
  std::optional<std::size_t> sink;
  std::optional<GridMeta> grid;
  nlohmann::json provenance = nlohmann::json::object();

  Imdp() = default;
  Imdp(std::size_t states, std::vector<std::string> action_names);

  std::size_t num_actions() const noexcept { return actions.size(); }
  const std::vector<ImdpEntry>& row(std::size_t action, std::size_t state) const { return rows.at(action).at(state); }
  bool has_label(std::size_t state, const std::string& p) const;

  /// Checks 0 <= lo <= up <= 1, sum lo <= 1 <= sum up (slack tol), sorted
  /// unique columns, declared labels and an absorbing sink. Throws
  /// ValidationError describing the first violation.
  void validate(double tol = 1e-9) const;

  bool operator==(const Imdp&) const = default;
};

/// Text format (one record per line, '#' starts a comment):
///
///   npv-imdp 1
///   states <N>
///   actions <k> <name>...
///   propositions <p> <name>...
///   sink <index> | sink none
///   grid <d> <lo>... <hi>... <count>...        (optional)
///   label <state> <name>...                    (states with labels only)
///   provenance <one-line JSON>
///   entries <count>
///   <action> <row> <col> <lo> <up>
///   end
///
/// Doubles are written in shortest round-trip form, so write/read is exact.
void write_imdp(const Imdp& imdp, std::ostream& os);
void write_imdp(const Imdp& imdp, const std::filesystem::path& path);
Imdp read_imdp(std::istream& is);
Imdp read_imdp(const std::filesystem::path& path);

/// N = ceil(1 / (4 beta eps^2)).
std::size_t chebyshev_sample_size(double eps_bar, double beta_bar);
/// eps_bar = eps_g / (2 k n_Q).
double eps_bar_from_global(double eps_g, std::size_t k, std::size_t n_q);

inline constexpr std::size_t kDefaultRowBudget = 10'000'000;
inline constexpr std::size_t kDefaultTotalBudget = 100'000'000;

struct EmpiricalConfig {
  double eps_bar = 0.1;
  double beta_bar = 0.1;
  std::size_t row_budget = kDefaultRowBudget;
  std::size_t total_budget = kDefaultTotalBudget;
  unsigned threads = 0;
};

/// Interval row from N successors of the representative point of `cell`.
/// Every state gets [max(0, P - eps), min(1, P + eps)].
std::vector<ImdpEntry> empirical_row(const TransitionSampler& system, const GridPartition& partition,
                                     std::size_t cell, std::size_t action, std::size_t samples, double eps_bar,
                                     std::uint64_t seed);

/// Chebyshev-interval IMDP from sampled successors, one shared batch of
/// N = chebyshev_sample_size(eps_bar, beta_bar) draws per (cell, action).
/// Throws BudgetError when N or the total draw count exceeds its budget.
Imdp empirical_imdp(const TransitionSampler& system, const GridPartition& partition, const EmpiricalConfig& config,
                    std::uint64_t seed);

struct NpeConfig {
  std::size_t x_grid = 3;  // points per dimension inside each source cell; 1 = center only
  unsigned threads = 0;
};

/// Interval IMDP from one conditional density estimator per action: bounds
/// are the min / max of the estimated cell probabilities over an x-grid in
/// the source cell. The sink column is [max(0, 1 - sum up), 1 - sum lo].
Imdp npe_imdp(std::span<const CondDensityEstimator> estimators, const std::vector<std::string>& actions,
              const GridPartition& partition, const NpeConfig& config = {});

/// Exact transition probabilities from the representative points of a
/// builtin system with (mixtures of) diagonal Gaussian noise; point intervals.
Imdp model_based_mdp(const BuiltinSystem& system, const GridPartition& partition, unsigned threads = 0);

}  // namespace npv
