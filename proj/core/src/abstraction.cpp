#include "npv/abstraction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include <Eigen/Dense>

namespace npv {

namespace {

bool valid_name(const std::string& s) {
  if (s.empty() || s == "true" || s == "false") return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

}  // namespace

// ---------------------------------------------------------------------------
// GridPartition
// ---------------------------------------------------------------------------

GridPartition::GridPartition(Box domain, std::vector<double> delta,
                             const std::map<std::string, std::vector<Box>>& regions)
    : domain_(std::move(domain)), delta_(std::move(delta)) {
  const std::size_t d = domain_.dim();
  if (d == 0) throw ValidationError("grid: empty domain");
  if (delta_.size() == 1 && d > 1) delta_.assign(d, delta_[0]);
  if (delta_.size() != d) throw ValidationError("grid: delta has wrong dimension");
  counts_.resize(d);
  edges_.resize(d);
  num_cells_ = 1;
  for (std::size_t k = 0; k < d; ++k) {
    if (!(delta_[k] > 0.0) || !std::isfinite(delta_[k])) throw ValidationError("grid: delta must be positive");
    const double w = domain_.width(k);
    if (!std::isfinite(w)) throw ValidationError("grid: domain must be bounded");
    const double ratio = w / delta_[k];
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
      throw ValidationError("grid: domain width " + format_double(w) + " in dimension " + std::to_string(k) +
                            " is not an integer multiple of delta = " + format_double(delta_[k]));
    counts_[k] = static_cast<std::size_t>(rounded);
    if (num_cells_ > std::numeric_limits<std::size_t>::max() / counts_[k]) throw ValidationError("grid: too many cells");
    num_cells_ *= counts_[k];
    edges_[k].resize(counts_[k] + 1);
    for (std::size_t j = 0; j < counts_[k]; ++j)
      edges_[k][j] = domain_.lo(k) + static_cast<double>(j) * w / static_cast<double>(counts_[k]);
    edges_[k][counts_[k]] = domain_.hi(k);
  }
  rep_offset_.assign(d, 0.5);

  labels_.assign(num_cells_ + 1, {});
  std::set<std::string> props;
  for (const auto& [name, boxes] : regions) {
    if (name == kOutLabel) throw ValidationError("grid: proposition name 'out' is reserved for the sink");
    if (!valid_name(name)) throw ValidationError("grid: invalid proposition name '" + name + "'");
    for (const auto& b : boxes)
      if (b.dim() != d) throw ValidationError("grid: region of '" + name + "' has wrong dimension");
    props.insert(name);
  }
  propositions_.assign(props.begin(), props.end());
  propositions_.push_back(kOutLabel);

  for (const auto& [name, boxes] : regions) {
    std::size_t partial = 0;
    for (std::size_t c = 0; c < num_cells_; ++c) {
      const Box b = cell(c);
      double scale = 0.0;
      for (std::size_t k = 0; k < d; ++k) scale = std::max({scale, std::abs(b.lo(k)), std::abs(b.hi(k))});
      const double tol = 1e-9 * std::max(1.0, scale);
      bool inside = false, touches = false;
      for (const auto& r : boxes) {
        if (r.contains(b, tol)) inside = true;
        else if (r.overlaps(b)) touches = true;
      }
      if (inside) labels_[c].push_back(name);
      else if (touches) ++partial;
    }
    if (partial > 0)
      warnings_.push_back("proposition '" + name + "': " + std::to_string(partial) +
                          " cell(s) partially overlap its regions and stay unlabeled");
  }
  for (auto& l : labels_) std::sort(l.begin(), l.end());
  labels_[num_cells_] = {kOutLabel};
}

std::vector<std::size_t> GridPartition::cell_digits(std::size_t cell) const {
  if (cell >= num_cells_) throw ValidationError("grid: cell index out of range");
  std::vector<std::size_t> digits(dim());
  for (std::size_t k = 0; k < dim(); ++k) {
    digits[k] = cell % counts_[k];
    cell /= counts_[k];
  }
  return digits;
}

std::size_t GridPartition::cell_index(std::span<const std::size_t> digits) const {
  if (digits.size() != dim()) throw ValidationError("grid: digit vector has wrong dimension");
  std::size_t idx = 0, stride = 1;
  for (std::size_t k = 0; k < dim(); ++k) {
    if (digits[k] >= counts_[k]) throw ValidationError("grid: digit out of range");
    idx += digits[k] * stride;
    stride *= counts_[k];
  }
  return idx;
}

Box GridPartition::cell(std::size_t index) const {
  const auto digits = cell_digits(index);
  std::vector<double> lo(dim()), hi(dim());
  for (std::size_t k = 0; k < dim(); ++k) {
    lo[k] = edges_[k][digits[k]];
    hi[k] = edges_[k][digits[k] + 1];
  }
  return Box(std::move(lo), std::move(hi));
}

std::vector<double> GridPartition::representative(std::size_t index) const {
  const auto digits = cell_digits(index);
  std::vector<double> p(dim());
  for (std::size_t k = 0; k < dim(); ++k) {
    const double a = edges_[k][digits[k]], b = edges_[k][digits[k] + 1];
    p[k] = a + rep_offset_[k] * (b - a);
  }
  return p;
}

void GridPartition::set_representative_offset(std::vector<double> fraction) {
  if (fraction.size() != dim()) throw ValidationError("grid: representative offset has wrong dimension");
  for (double f : fraction)
    if (!(f >= 0.0 && f <= 1.0)) throw ValidationError("grid: representative offset must lie in [0, 1]");
  rep_offset_ = std::move(fraction);
}

std::optional<std::size_t> GridPartition::locate(std::span<const double> y) const {
  if (y.size() != dim()) throw ValidationError("grid: point has wrong dimension");
  std::size_t idx = 0, stride = 1;
  for (std::size_t k = 0; k < dim(); ++k) {
    const auto& e = edges_[k];
    const double v = y[k];
    if (!(v >= e.front() && v <= e.back())) return std::nullopt;
    const std::size_t count = counts_[k];
    auto j = static_cast<std::size_t>(
        std::min<double>(static_cast<double>(count - 1), std::floor((v - e.front()) / (e.back() - e.front()) * static_cast<double>(count))));
    while (j > 0 && v < e[j]) --j;
    while (j + 1 < count && v >= e[j + 1]) ++j;
    idx += j * stride;
    stride *= count;
  }
  return idx;
}

bool GridPartition::has_label(std::size_t state, const std::string& p) const {
  const auto& l = labels_.at(state);
  return std::binary_search(l.begin(), l.end(), p);
}

double GridPartition::labeled_measure() const {
  double cell_volume = 1.0;
  for (std::size_t k = 0; k < dim(); ++k) cell_volume *= domain_.width(k) / static_cast<double>(counts_[k]);
  std::size_t labeled = 0;
  for (std::size_t c = 0; c < num_cells_; ++c)
    if (!labels_[c].empty()) ++labeled;
  return cell_volume * static_cast<double>(labeled);
}

// ---------------------------------------------------------------------------
// Imdp
// ---------------------------------------------------------------------------

Imdp::Imdp(std::size_t states, std::vector<std::string> action_names)
    : num_states(states), actions(std::move(action_names)) {
  rows.assign(actions.size(), std::vector<std::vector<ImdpEntry>>(num_states));
  labels.assign(num_states, {});
}

bool Imdp::has_label(std::size_t state, const std::string& p) const {
  const auto& l = labels.at(state);
  return std::find(l.begin(), l.end(), p) != l.end();
}

void Imdp::validate(double tol) const {
  auto fail = [](const std::string& msg) { throw ValidationError("imdp: " + msg); };
  if (num_states == 0) fail("no states");
  if (actions.empty()) fail("no actions");
  if (rows.size() != actions.size()) fail("row table does not match the action list");
  if (labels.size() != num_states) fail("label table does not match the state count");
  for (const auto& a : actions)
    if (!valid_name(a)) fail("invalid action name '" + a + "'");
  for (std::size_t s = 0; s < num_states; ++s)
    for (const auto& l : labels[s])
      if (std::find(propositions.begin(), propositions.end(), l) == propositions.end())
        fail("state " + std::to_string(s) + " carries undeclared proposition '" + l + "'");
  if (sink && *sink >= num_states) fail("sink index out of range");

  for (std::size_t a = 0; a < actions.size(); ++a) {
    if (rows[a].size() != num_states) fail("action '" + actions[a] + "' has the wrong number of rows");
    for (std::size_t s = 0; s < num_states; ++s) {
      const auto& row = rows[a][s];
      const std::string where = "row (" + actions[a] + ", " + std::to_string(s) + ")";
      if (row.empty()) fail(where + " is empty");
      double sum_lo = 0.0, sum_up = 0.0;
      for (std::size_t e = 0; e < row.size(); ++e) {
        const auto& en = row[e];
        if (en.col >= num_states) fail(where + " references state " + std::to_string(en.col));
        if (e > 0 && row[e - 1].col >= en.col) fail(where + " has unsorted or repeated columns");
        if (!std::isfinite(en.lo) || !std::isfinite(en.up)) fail(where + " has a non-finite bound");
        if (en.lo < 0.0 || en.up > 1.0 + tol || en.lo > en.up + tol)
          fail(where + " violates 0 <= lo <= up <= 1 at column " + std::to_string(en.col));
        sum_lo += en.lo;
        sum_up += en.up;
      }
      if (sum_lo > 1.0 + tol || sum_up < 1.0 - tol)
        fail(where + " violates sum lo <= 1 <= sum up (" + format_double(sum_lo) + ", " + format_double(sum_up) + ")");
      if (sink && s == *sink && !(row.size() == 1 && row[0].col == s && row[0].lo == 1.0 && row[0].up == 1.0))
        fail("sink state is not absorbing under action '" + actions[a] + "'");
    }
  }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

namespace {

Imdp skeleton(const GridPartition& partition, std::vector<std::string> actions) {
  Imdp m(partition.num_states(), std::move(actions));
  m.propositions = partition.propositions();
  for (std::size_t s = 0; s < partition.num_states(); ++s) m.labels[s] = partition.labels(s);
  m.sink = partition.sink();
  m.grid = GridMeta{partition.domain(), partition.counts()};
  for (auto& per_action : m.rows) per_action[partition.sink()] = {ImdpEntry{partition.sink(), 1.0, 1.0}};
  return m;
}

// masses[c] = sum_i w_i prod_k tables[k](i, digit_k(c)); cell index with dimension 0 fastest.
void tensor_masses(const std::vector<Eigen::MatrixXd>& tables, const Eigen::VectorXd& w, Eigen::VectorXd& out) {
  const std::size_t d = tables.size();
  if (d == 1) {
    out.noalias() = tables[0].transpose() * w;
    return;
  }
  Eigen::MatrixXd kr = tables[0].array().colwise() * w.array();
  for (std::size_t k = 1; k + 1 < d; ++k) {
    const Eigen::Index cols = kr.cols(), rk = tables[k].cols();
    Eigen::MatrixXd next(kr.rows(), cols * rk);
    for (Eigen::Index b = 0; b < rk; ++b)
      for (Eigen::Index a = 0; a < cols; ++a) next.col(a + cols * b) = kr.col(a).cwiseProduct(tables[k].col(b));
    kr.swap(next);
  }
  const Eigen::MatrixXd m = kr.transpose() * tables[d - 1];
  out = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

std::vector<double> grid_points_1d(double lo, double hi, std::size_t g) {
  if (g == 1) return {0.5 * (lo + hi)};
  std::vector<double> p(g);
  for (std::size_t t = 0; t < g; ++t) p[t] = lo + static_cast<double>(t) * (hi - lo) / static_cast<double>(g - 1);
  p[g - 1] = hi;
  return p;
}

}  // namespace

std::size_t chebyshev_sample_size(double eps_bar, double beta_bar) {
  if (!(eps_bar > 0.0 && eps_bar <= 1.0)) throw ValidationError("chebyshev: eps_bar must lie in (0, 1]");
  if (!(beta_bar > 0.0 && beta_bar < 1.0)) throw ValidationError("chebyshev: beta_bar must lie in (0, 1)");
  const double n = 1.0 / (4.0 * beta_bar * eps_bar * eps_bar);
  if (!(n < 1e18)) throw BudgetError("chebyshev: required sample size " + format_double(n) + " is not representable");
  // Guard against 250.00000000000003 style rounding of exact quotients.
  const double r = std::round(n);
  if (std::abs(n - r) <= 1e-9 * r) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::ceil(n));
}

double eps_bar_from_global(double eps_g, std::size_t k, std::size_t n_q) {
  if (!(eps_g > 0.0 && eps_g < 1.0)) throw ValidationError("eps_bar: eps_g must lie in (0, 1)");
  if (k < 1) throw ValidationError("eps_bar: horizon must be at least 1");
  if (n_q < 1) throw ValidationError("eps_bar: need at least one abstract state");
  return eps_g / (2.0 * static_cast<double>(k) * static_cast<double>(n_q));
}

// ---------------------------------------------------------------------------
// Empirical abstraction
// ---------------------------------------------------------------------------

std::vector<ImdpEntry> empirical_row(const TransitionSampler& system, const GridPartition& partition,
                                     std::size_t cell, std::size_t action, std::size_t samples, double eps_bar,
                                     std::uint64_t seed) {
  if (samples == 0) throw ValidationError("empirical: need at least one sample per row");
  if (system.dim() != partition.dim()) throw ValidationError("empirical: system and grid dimensions differ");
  const auto x = partition.representative(cell);
  std::vector<std::size_t> hits(partition.num_states(), 0);
  std::vector<double> y(system.dim());
  Rng rng(seed);
  for (std::size_t s = 0; s < samples; ++s) {
    system.sample(x, action, rng, y);
    const auto c = partition.locate(y);
    ++hits[c ? *c : partition.sink()];
  }
  std::vector<ImdpEntry> row(partition.num_states());
  const double inv_n = 1.0 / static_cast<double>(samples);
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double p = static_cast<double>(hits[j]) * inv_n;
    row[j] = ImdpEntry{j, std::max(0.0, p - eps_bar), std::min(1.0, p + eps_bar)};
  }
  return row;
}

Imdp empirical_imdp(const TransitionSampler& system, const GridPartition& partition, const EmpiricalConfig& config,
                    std::uint64_t seed) {
  const std::size_t n = chebyshev_sample_size(config.eps_bar, config.beta_bar);
  if (n > config.row_budget)
    throw BudgetError("empirical abstraction needs N = " + std::to_string(n) + " samples per row (eps_bar = " +
                      format_double(config.eps_bar) + ", beta_bar = " + format_double(config.beta_bar) +
                      "), above the per-row budget of " + std::to_string(config.row_budget));
  const std::size_t rows = partition.num_cells() * system.actions().size();
  if (rows > 0 && n > config.total_budget / rows)
    throw BudgetError("empirical abstraction needs " + std::to_string(n) + " x " + std::to_string(rows) +
                      " samples, above the total budget of " + std::to_string(config.total_budget));

  Imdp m = skeleton(partition, system.actions());
  const std::size_t cells = partition.num_cells();
  parallel_for(rows, config.threads, [&](std::size_t r) {
    const std::size_t a = r / cells, c = r % cells;
    m.rows[a][c] = empirical_row(system, partition, c, a, n, config.eps_bar, derive_seed(seed, {a, c}));
  });
  m.provenance = {{"method", "empirical"},
                  {"eps_bar", config.eps_bar},
                  {"beta_bar", config.beta_bar},
                  {"samples_per_row", n},
                  {"seed", seed}};
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Kernel-density abstraction
// ---------------------------------------------------------------------------

Imdp npe_imdp(std::span<const CondDensityEstimator> estimators, const std::vector<std::string>& actions,
              const GridPartition& partition, const NpeConfig& config) {
  if (estimators.size() != actions.size()) throw ValidationError("npe: need one estimator per action");
  if (config.x_grid < 1) throw ValidationError("npe: x_grid must be at least 1");
  const std::size_t d = partition.dim();
  for (const auto& est : estimators) {
    if (est.kernel().family != KernelFamily::gaussian)
      throw ValidationError("npe: closed-form cell integral requires the gaussian kernel family");
    if (est.x_dim() != d || est.y_dim() != d) throw ValidationError("npe: estimator dimension differs from the grid");
  }

  // Per-action, per-dimension tables of each sample's kernel mass in each grid slab.
  std::vector<std::vector<Eigen::MatrixXd>> tables(estimators.size());
  for (std::size_t a = 0; a < estimators.size(); ++a) {
    const auto& est = estimators[a];
    const std::size_t n = est.samples().size();
    tables[a].resize(d);
    for (std::size_t k = 0; k < d; ++k) {
      const auto& e = partition.edges(k);
      const double h = est.kernel().h_y[k];
      auto& t = tables[a][k];
      t.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(partition.counts()[k]));
      for (std::size_t i = 0; i < n; ++i) {
        const double yi = est.samples().y(i)[k];
        for (std::size_t j = 0; j + 1 < e.size(); ++j)
          t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = normal_mass((e[j] - yi) / h, (e[j + 1] - yi) / h);
      }
    }
  }

  const std::size_t g = config.x_grid;
  std::size_t points = 1;
  for (std::size_t k = 0; k < d; ++k) points *= g;

  Imdp m = skeleton(partition, actions);
  const std::size_t cells = partition.num_cells();
  parallel_for(cells * actions.size(), config.threads, [&](std::size_t r) {
    const std::size_t a = r / cells, c = r % cells;
    const Box box = partition.cell(c);
    std::vector<std::vector<double>> axis(d);
    for (std::size_t k = 0; k < d; ++k) axis[k] = grid_points_1d(box.lo(k), box.hi(k), g);
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(cells), 2.0);
    Eigen::VectorXd up = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(cells), -1.0);
    Eigen::VectorXd mass;
    std::vector<double> x(d);
    for (std::size_t p = 0; p < points; ++p) {
      std::size_t rest = p;
      for (std::size_t k = 0; k < d; ++k) {
        x[k] = axis[k][rest % g];
        rest /= g;
      }
      const auto w = estimators[a].weights(x);
      tensor_masses(tables[a], Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())), mass);
      mass = mass.cwiseMax(0.0).cwiseMin(1.0);
      lo = lo.cwiseMin(mass);
      up = up.cwiseMax(mass);
    }
    std::vector<ImdpEntry> row;
    double sum_lo = 0.0, sum_up = 0.0;
    for (std::size_t j = 0; j < cells; ++j) {
      const auto ji = static_cast<Eigen::Index>(j);
      if (up[ji] > 0.0) {
        row.push_back(ImdpEntry{j, lo[ji], up[ji]});
        sum_lo += lo[ji];
        sum_up += up[ji];
      }
    }
    const double sink_up = std::clamp(1.0 - sum_lo, 0.0, 1.0);
    const double sink_lo = std::min(sink_up, std::max(0.0, 1.0 - sum_up));
    if (sink_up > 0.0) row.push_back(ImdpEntry{partition.sink(), sink_lo, sink_up});
    m.rows[a][c] = std::move(row);
  });

  nlohmann::json bw = nlohmann::json::array();
  nlohmann::json ns = nlohmann::json::array();
  for (const auto& est : estimators) {
    bw.push_back({{"h_x", est.kernel().h_x}, {"h_y", est.kernel().h_y}});
    ns.push_back(est.samples().size());
  }
  m.provenance = {{"method", "npe"}, {"x_grid", g}, {"samples", ns}, {"bandwidths", bw}};
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Model-based baseline
// ---------------------------------------------------------------------------

Imdp model_based_mdp(const BuiltinSystem& system, const GridPartition& partition, unsigned threads) {
  if (system.dim() != partition.dim()) throw ValidationError("model-based: system and grid dimensions differ");
  const std::size_t d = partition.dim(), cells = partition.num_cells();
  Imdp m = skeleton(partition, system.actions());
  parallel_for(cells * system.actions().size(), threads, [&](std::size_t r) {
    const std::size_t a = r / cells, c = r % cells;
    const auto comps = system.transition_law(partition.representative(c), a);
    std::vector<Eigen::MatrixXd> tables(d);
    Eigen::VectorXd w(static_cast<Eigen::Index>(comps.size()));
    for (std::size_t k = 0; k < d; ++k) {
      const auto& e = partition.edges(k);
      tables[k].resize(static_cast<Eigen::Index>(comps.size()), static_cast<Eigen::Index>(e.size() - 1));
      for (std::size_t i = 0; i < comps.size(); ++i) {
        const double mu = comps[i].mean[k], sd = comps[i].stddev[k];
        for (std::size_t j = 0; j + 1 < e.size(); ++j)
          tables[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = normal_mass((e[j] - mu) / sd, (e[j + 1] - mu) / sd);
      }
    }
    for (std::size_t i = 0; i < comps.size(); ++i) w[static_cast<Eigen::Index>(i)] = comps[i].weight;
    Eigen::VectorXd mass;
    tensor_masses(tables, w, mass);
    std::vector<ImdpEntry> row;
    double total = 0.0;
    for (std::size_t j = 0; j < cells; ++j) {
      const double p = std::clamp(mass[static_cast<Eigen::Index>(j)], 0.0, 1.0);
      if (p > 0.0) {
        row.push_back(ImdpEntry{j, p, p});
        total += p;
      }
    }
    const double out = std::max(0.0, 1.0 - total);
    if (out > 0.0) row.push_back(ImdpEntry{partition.sink(), out, out});
    m.rows[a][c] = std::move(row);
  });
  m.provenance = {{"method", "model_based"}, {"system", to_string(system.kind())}};
  m.validate();
  return m;
}

}  // namespace npv
