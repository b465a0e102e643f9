#include "npv/systems.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace npv {

// ---------------------------------------------------------------------------
// SystemSpec / TransitionSampler
// ---------------------------------------------------------------------------

void SystemSpec::validate() const {
  if (state_dim == 0) throw ValidationError("system: state_dim must be positive");
  if (actions.empty()) throw ValidationError("system: action set is empty");
  if (domain.dim() != state_dim) throw ValidationError("system: domain dimension differs from state_dim");
  if (successor_domain.dim() != state_dim)
    throw ValidationError("system: successor domain dimension differs from state_dim");
}

std::size_t SystemSpec::action_index(std::string_view name) const {
  auto it = std::find(actions.begin(), actions.end(), name);
  if (it == actions.end()) throw ValidationError("unknown action '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - actions.begin());
}

std::vector<double> TransitionSampler::sample(std::span<const double> x, std::size_t action, Rng& rng) const {
  std::vector<double> out(dim());
  sample(x, action, rng, out);
  return out;
}

std::size_t TransitionSampler::action_index(std::string_view name) const {
  const auto& acts = actions();
  auto it = std::find(acts.begin(), acts.end(), name);
  if (it == acts.end()) throw ValidationError("unknown action '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - acts.begin());
}

std::string_view to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::linear_gaussian: return "linear_gaussian";
    case SystemKind::switched_gaussian: return "switched_gaussian";
    case SystemKind::univariate_mixture: return "univariate_mixture";
    case SystemKind::bivariate_gaussian: return "bivariate_gaussian";
    case SystemKind::car7d: return "car7d";
  }
  return "unknown";
}

SystemKind system_kind_from_string(std::string_view name) {
  for (auto k : {SystemKind::linear_gaussian, SystemKind::switched_gaussian, SystemKind::univariate_mixture,
                 SystemKind::bivariate_gaussian, SystemKind::car7d})
    if (to_string(k) == name) return k;
  throw ValidationError("unknown system kind '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// BuiltinSystem
// ---------------------------------------------------------------------------

namespace {

bool is_gaussian_kind(SystemKind k) {
  return k == SystemKind::linear_gaussian || k == SystemKind::switched_gaussian ||
         k == SystemKind::bivariate_gaussian;
}

bool is_diagonal(const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (i != j && m(i, j) != 0.0) return false;
  return true;
}

double clamp_sym(double v, double bound) { return std::clamp(v, -bound, bound); }

// Drift increment tau * (a_i or b_i) of the vehicle model, coordinates 0-based.
void car_drift(const CarParams& c, std::span<const double> x, std::span<double> out) {
  const double x3 = x[2], x4 = x[3], x5 = x[4], x6 = x[5], x7 = x[6];
  const double v1 = c.v1, v2 = c.v2;
  std::array<double, 7> rate{};
  if (std::abs(x4) < 0.1) {
    rate[0] = x4 * std::cos(x5);
    rate[1] = x4 * std::sin(x5);
    rate[4] = x4 / c.l_wb * std::tan(x3);
    rate[5] = v2 / c.l_wb * std::tan(x3) + x4 / (c.l_wb * std::cos(x3) * std::cos(x3)) * v1;
    rate[6] = 0.0;
  } else {
    const double front = c.gravity * c.l_r - v2 * c.h_cg;
    const double rear = c.gravity * c.l_f + v2 * c.h_cg;
    rate[0] = x4 * std::cos(x5 + x7);
    rate[1] = x4 * std::sin(x5 + x7);
    rate[4] = x6;
    rate[5] = c.friction * c.mass / (c.inertia_z * (c.l_r + c.l_f)) *
              (c.l_f * c.c_sf * front * x3 + (c.l_r * c.c_sr * rear - c.l_f * c.c_sf * front) * x7 -
               (c.l_f * c.l_f * c.c_sf * front + c.l_r * c.l_r * c.c_sr * rear) * x6 / x4);
    rate[6] = c.friction / (x4 * (c.l_r + c.l_f)) *
                  (c.c_sf * front * x3 - (c.c_sr * rear + c.c_sf * front) * x7 -
                   (c.l_f * c.c_sf * front - c.l_r * c.c_sr * rear) * x6 / x4) -
              x6;
  }
  rate[2] = clamp_sym(v1, c.sat1_bound);
  rate[3] = clamp_sym(v2, c.sat2_bound);
  for (std::size_t i = 0; i < 7; ++i) out[i] = x[i] + c.tau * rate[i];
}

}  // namespace

BuiltinSystem::BuiltinSystem(SystemKind kind, SystemSpec spec, SystemParams params)
    : kind_(kind), spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  const std::size_t d = spec_.state_dim;
  if (is_gaussian_kind(kind_)) {
    auto* p = std::get_if<LinearGaussianParams>(&params_);
    if (!p) throw ValidationError("system: Gaussian kinds need LinearGaussianParams");
    if (p->A.size() != spec_.actions.size())
      throw ValidationError("system: need one dynamics matrix per action");
    for (const auto& A : p->A)
      if (static_cast<std::size_t>(A.rows()) != d || static_cast<std::size_t>(A.cols()) != d)
        throw ValidationError("system: dynamics matrix has wrong shape");
    if (static_cast<std::size_t>(p->mu.size()) != d) throw ValidationError("system: noise mean has wrong size");
    if (static_cast<std::size_t>(p->sigma.rows()) != d || static_cast<std::size_t>(p->sigma.cols()) != d)
      throw ValidationError("system: noise covariance has wrong shape");
    if (!p->sigma.isApprox(p->sigma.transpose(), 1e-12))
      throw ValidationError("system: noise covariance is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(p->sigma);
    if (llt.info() != Eigen::Success) throw ValidationError("system: noise covariance is not positive definite");
    chol_ = llt.matrixL();
    if (kind_ == SystemKind::bivariate_gaussian && d != 2)
      throw ValidationError("system: bivariate_gaussian must be two-dimensional");
    if (kind_ == SystemKind::bivariate_gaussian && p->A.size() != 1)
      throw ValidationError("system: bivariate_gaussian is autonomous (one action)");
  } else if (kind_ == SystemKind::univariate_mixture) {
    auto* p = std::get_if<UnivariateMixtureParams>(&params_);
    if (!p) throw ValidationError("system: univariate_mixture needs UnivariateMixtureParams");
    if (d != 1) throw ValidationError("system: univariate_mixture must be one-dimensional");
    if (!(p->p >= 0.0 && p->p <= 1.0)) throw ValidationError("system: mixture weight p must lie in [0, 1]");
    if (!(p->sigma1 > 0.0 && p->sigma2 > 0.0)) throw ValidationError("system: mixture deviations must be positive");
  } else {
    if (!std::holds_alternative<CarParams>(params_)) throw ValidationError("system: car7d needs CarParams");
    if (d != 7) throw ValidationError("system: car7d is seven-dimensional");
  }
}

std::vector<double> BuiltinSystem::drift(std::span<const double> x, std::size_t action) const {
  if (action >= spec_.actions.size()) throw ValidationError("unknown action index " + std::to_string(action));
  if (x.size() != spec_.state_dim) throw ValidationError("state has wrong dimension");
  std::vector<double> out(spec_.state_dim);
  if (is_gaussian_kind(kind_)) {
    const auto& p = std::get<LinearGaussianParams>(params_);
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size())) = p.A[action] * xv;
  } else if (kind_ == SystemKind::univariate_mixture) {
    out[0] = std::get<UnivariateMixtureParams>(params_).a * x[0];
  } else {
    car_drift(std::get<CarParams>(params_), x, out);
  }
  return out;
}

void BuiltinSystem::sample(std::span<const double> x, std::size_t action, Rng& rng, std::span<double> out) const {
  if (action >= spec_.actions.size()) throw ValidationError("unknown action index " + std::to_string(action));
  if (!spec_.domain.contains(x, 1e-12)) throw ValidationError("state outside the system domain");
  if (out.size() != spec_.state_dim) throw ValidationError("output buffer has wrong dimension");
  const std::size_t d = spec_.state_dim;
  auto mean = drift(x, action);
  std::normal_distribution<double> normal(0.0, 1.0);

  if (is_gaussian_kind(kind_)) {
    const auto& p = std::get<LinearGaussianParams>(params_);
    if (zero_noise_) {
      std::copy(mean.begin(), mean.end(), out.begin());
      return;
    }
    Eigen::VectorXd z(static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
    Eigen::VectorXd w = p.mu + chol_ * z;
    for (std::size_t i = 0; i < d; ++i) out[i] = mean[i] + w[static_cast<Eigen::Index>(i)];
  } else if (kind_ == SystemKind::univariate_mixture) {
    const auto& p = std::get<UnivariateMixtureParams>(params_);
    if (zero_noise_) {
      out[0] = mean[0];
      return;
    }
    std::bernoulli_distribution pick(p.p);
    const bool first = pick(rng);
    const double z = normal(rng);
    out[0] = mean[0] + (first ? p.mu1 + p.sigma1 * z : p.mu2 + p.sigma2 * z);
  } else {
    const auto& c = std::get<CarParams>(params_);
    for (std::size_t i = 0; i < d; ++i) out[i] = mean[i] + (zero_noise_ ? 0.0 : c.noise_scale * normal(rng));
  }
}

std::vector<GaussianComponent> BuiltinSystem::transition_law(std::span<const double> x, std::size_t action) const {
  auto mean = drift(x, action);
  const std::size_t d = spec_.state_dim;
  if (is_gaussian_kind(kind_)) {
    const auto& p = std::get<LinearGaussianParams>(params_);
    if (!is_diagonal(p.sigma))
      throw ValidationError("transition law: non-diagonal noise covariance is unsupported; "
                            "rotate the state so that the covariance becomes diagonal");
    GaussianComponent c;
    c.mean = mean;
    c.stddev.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
      c.mean[i] += p.mu[static_cast<Eigen::Index>(i)];
      c.stddev[i] = std::sqrt(p.sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
    }
    return {c};
  }
  if (kind_ == SystemKind::univariate_mixture) {
    const auto& p = std::get<UnivariateMixtureParams>(params_);
    return {GaussianComponent{p.p, {mean[0] + p.mu1}, {p.sigma1}},
            GaussianComponent{1.0 - p.p, {mean[0] + p.mu2}, {p.sigma2}}};
  }
  const auto& c = std::get<CarParams>(params_);
  return {GaussianComponent{1.0, mean, std::vector<double>(d, c.noise_scale)}};
}

// ---------------------------------------------------------------------------
// Paper benchmark systems
// ---------------------------------------------------------------------------

namespace systems {

namespace {

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
  Eigen::MatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

}  // namespace

BuiltinSystem case_study_linear() {
  SystemSpec spec{2, {"a"}, Box::cube(2, 0.0, 2.0), Box::cube(2, 0.0, 2.0)};
  LinearGaussianParams p{{mat2(0.4, 0.1, 0.0, 0.5)}, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)};
  return BuiltinSystem(SystemKind::linear_gaussian, spec, p);
}

BuiltinSystem case_study_switched() {
  SystemSpec spec{2, {"a1", "a2"}, Box::cube(2, 0.0, 2.0), Box::cube(2, 0.0, 2.0)};
  LinearGaussianParams p{{mat2(0.4, 0.1, 0.0, 0.5), mat2(0.4, 0.1, -0.2, 0.5)},
                         Eigen::VectorXd::Zero(2),
                         Eigen::MatrixXd::Identity(2, 2)};
  return BuiltinSystem(SystemKind::switched_gaussian, spec, p);
}

BuiltinSystem univariate_linear(double a, double sigma) {
  SystemSpec spec{1, {"a"}, Box({-1.0}, {1.0}), Box({-4.38}, {4.24})};
  Eigen::MatrixXd A(1, 1);
  A(0, 0) = a;
  Eigen::MatrixXd S(1, 1);
  S(0, 0) = sigma * sigma;
  return BuiltinSystem(SystemKind::linear_gaussian, spec, LinearGaussianParams{{A}, Eigen::VectorXd::Zero(1), S});
}

BuiltinSystem univariate_mixture(const UnivariateMixtureParams& params) {
  SystemSpec spec{1, {"a"}, Box({-1.0}, {1.0}), Box({-7.177}, {6.965})};
  return BuiltinSystem(SystemKind::univariate_mixture, spec, params);
}

BuiltinSystem bivariate_gaussian(int case_id) {
  if (case_id == 1) {
    SystemSpec spec{2, {"a"}, Box::cube(2, -0.2, 0.2), Box::cube(2, -0.2, 0.2)};
    LinearGaussianParams p{{Eigen::MatrixXd::Identity(2, 2)}, Eigen::VectorXd::Zero(2),
                           Eigen::MatrixXd::Identity(2, 2)};
    return BuiltinSystem(SystemKind::bivariate_gaussian, spec, p);
  }
  if (case_id == 2) {
    SystemSpec spec{2, {"a"}, Box::cube(2, 0.0, 0.2), Box::cube(2, -0.2, -0.1)};
    LinearGaussianParams p{{Eigen::MatrixXd::Identity(2, 2)}, Eigen::VectorXd::Zero(2),
                           0.2 * Eigen::MatrixXd::Identity(2, 2)};
    return BuiltinSystem(SystemKind::bivariate_gaussian, spec, p);
  }
  throw ValidationError("bivariate_gaussian: case must be 1 or 2");
}

BuiltinSystem car7d(const CarParams& params) {
  Box domain({0.8, 0.8, 0.0, 0.0, 0.0, 0.5, 0.0}, {1.2, 1.2, 0.3, 0.1, 0.1, 1.0, 0.2});
  SystemSpec spec{7, {"a"}, domain, domain};
  return BuiltinSystem(SystemKind::car7d, spec, params);
}

}  // namespace systems

// ---------------------------------------------------------------------------
// TransitionSamples
// ---------------------------------------------------------------------------

TransitionSamples::TransitionSamples(std::string action, std::size_t x_dim, std::size_t y_dim)
    : action_(std::move(action)), x_dim_(x_dim), y_dim_(y_dim) {
  if (x_dim_ == 0 || y_dim_ == 0) throw ValidationError("samples: dimensions must be positive");
}

void TransitionSamples::reserve(std::size_t n) {
  xs_.reserve(n * x_dim_);
  ys_.reserve(n * y_dim_);
}

void TransitionSamples::add(std::span<const double> x, std::span<const double> y) {
  if (x.size() != x_dim_ || y.size() != y_dim_) throw ValidationError("samples: pair has wrong dimension");
  for (double v : x)
    if (!std::isfinite(v)) throw ValidationError("samples: state value is not finite");
  for (double v : y)
    if (!std::isfinite(v)) throw ValidationError("samples: successor value is not finite");
  xs_.insert(xs_.end(), x.begin(), x.end());
  ys_.insert(ys_.end(), y.begin(), y.end());
}

TransitionSamples TransitionSamples::slice(std::size_t first, std::size_t count) const {
  if (first + count > size()) throw ValidationError("samples: slice out of range");
  TransitionSamples out(action_, x_dim_, y_dim_);
  out.xs_.assign(xs_.begin() + static_cast<std::ptrdiff_t>(first * x_dim_),
                 xs_.begin() + static_cast<std::ptrdiff_t>((first + count) * x_dim_));
  out.ys_.assign(ys_.begin() + static_cast<std::ptrdiff_t>(first * y_dim_),
                 ys_.begin() + static_cast<std::ptrdiff_t>((first + count) * y_dim_));
  return out;
}

TransitionSamples TransitionSamples::project_x(std::span<const std::size_t> coords) const {
  for (auto c : coords)
    if (c >= x_dim_) throw ValidationError("samples: projection coordinate out of range");
  TransitionSamples out(action_, coords.size(), y_dim_);
  const std::size_t n = size();
  out.xs_.reserve(n * coords.size());
  for (std::size_t i = 0; i < n; ++i)
    for (auto c : coords) out.xs_.push_back(xs_[i * x_dim_ + c]);
  out.ys_ = ys_;
  return out;
}

TransitionSamples generate_samples(const TransitionSampler& system, std::size_t action, const Box& domain,
                                   std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ValidationError("generate_samples: n must be at least 1");
  if (domain.dim() != system.dim()) throw ValidationError("generate_samples: domain dimension mismatch");
  if (action >= system.actions().size()) throw ValidationError("generate_samples: unknown action index");
  const std::size_t d = system.dim();
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  TransitionSamples out(system.actions()[action], d, d);
  out.reserve(n);
  std::vector<double> x(d), y(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) x[k] = domain.lo(k) + domain.width(k) * unit(rng);
    system.sample(x, action, rng, y);
    out.add(x, y);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sample files
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::size_t parse_count(std::string_view key, std::string_view v) {
  double d = parse_double(v);
  if (d < 1 || d != std::floor(d) || d > 1e6)
    throw ValidationError("sample file: header field '" + std::string(key) + "' must be a positive integer");
  return static_cast<std::size_t>(d);
}

}  // namespace

void save_samples(const TransitionSamples& samples, std::ostream& os) {
  if (samples.x_dim() == samples.y_dim())
    os << "d=" << samples.x_dim();
  else
    os << "dx=" << samples.x_dim() << ",dy=" << samples.y_dim();
  os << ",action=" << samples.action() << '\n';
  for (std::size_t i = 0; i < samples.size(); ++i) {
    bool first = true;
    for (double v : samples.x(i)) {
      if (!first) os << ',';
      os << format_double(v);
      first = false;
    }
    for (double v : samples.y(i)) os << ',' << format_double(v);
    os << '\n';
  }
}

void save_samples(const TransitionSamples& samples, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open '" + path.string() + "' for writing");
  save_samples(samples, os);
}

TransitionSamples load_samples(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  // header
  while (std::getline(is, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw ValidationError("sample file: missing header");
  std::size_t dx = 0, dy = 0;
  std::string action;
  bool have_action = false;
  for (auto field : split(trim(line), ',')) {
    auto eq = field.find('=');
    if (eq == std::string_view::npos)
      throw ValidationError("sample file: header field '" + std::string(field) + "' is not key=value");
    auto key = trim(field.substr(0, eq));
    auto val = trim(field.substr(eq + 1));
    if (key == "d") {
      dx = dy = parse_count(key, val);
    } else if (key == "dx") {
      dx = parse_count(key, val);
    } else if (key == "dy") {
      dy = parse_count(key, val);
    } else if (key == "action") {
      if (val.empty()) throw ValidationError("sample file: empty action name");
      action = std::string(val);
      have_action = true;
    } else {
      throw ValidationError("sample file: unknown header key '" + std::string(key) + "'");
    }
  }
  if (dx == 0 || dy == 0) throw ValidationError("sample file: header must declare the dimension");
  if (!have_action) throw ValidationError("sample file: header must declare the action");

  TransitionSamples out(action, dx, dy);
  std::vector<double> x(dx), y(dy);
  while (std::getline(is, line)) {
    ++line_no;
    auto row = trim(line);
    if (row.empty()) continue;
    auto cols = split(row, ',');
    if (cols.size() != dx + dy)
      throw ValidationError("sample file line " + std::to_string(line_no) + ": expected " +
                            std::to_string(dx + dy) + " columns, found " + std::to_string(cols.size()));
    try {
      for (std::size_t k = 0; k < dx; ++k) x[k] = parse_double(cols[k]);
      for (std::size_t k = 0; k < dy; ++k) y[k] = parse_double(cols[dx + k]);
      out.add(x, y);
    } catch (const ValidationError& e) {
      throw ValidationError("sample file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.size() == 0) throw ValidationError("sample file: no samples");
  return out;
}

TransitionSamples load_samples(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open sample file '" + path.string() + "'");
  return load_samples(is);
}

}  // namespace npv
