#include "npv/kde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace npv {

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::gaussian: return "gaussian";
    case KernelFamily::uniform: return "uniform";
    case KernelFamily::triangle: return "triangle";
    case KernelFamily::epanechnikov: return "epanechnikov";
    case KernelFamily::quartic: return "quartic";
    case KernelFamily::triweight: return "triweight";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(std::string_view name) {
  for (auto f : {KernelFamily::gaussian, KernelFamily::uniform, KernelFamily::triangle, KernelFamily::epanechnikov,
                 KernelFamily::quartic, KernelFamily::triweight})
    if (to_string(f) == name) return f;
  throw ValidationError("unknown kernel family '" + std::string(name) + "'");
}

double canonical_bandwidth(KernelFamily family) {
  switch (family) {
    case KernelFamily::uniform: return 1.3510;
    case KernelFamily::triangle: return 1.8890;
    case KernelFamily::epanechnikov: return 1.7188;
    case KernelFamily::quartic: return 2.0362;
    case KernelFamily::triweight: return 2.3122;
    case KernelFamily::gaussian: return 0.7764;
  }
  return 0.7764;
}

double equivalent_bandwidth(double h, KernelFamily from, KernelFamily to) {
  if (!(h > 0.0)) throw ValidationError("bandwidth must be positive");
  return h * canonical_bandwidth(to) / canonical_bandwidth(from);
}

double kernel_value(KernelFamily family, double u) noexcept {
  const double a = std::abs(u);
  switch (family) {
    case KernelFamily::gaussian: return kInvSqrt2Pi * std::exp(-0.5 * u * u);
    case KernelFamily::uniform: return a <= 1.0 ? 0.5 : 0.0;
    case KernelFamily::triangle: return a <= 1.0 ? 1.0 - a : 0.0;
    case KernelFamily::epanechnikov: return a <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    case KernelFamily::quartic: {
      const double t = 1.0 - u * u;
      return a <= 1.0 ? 15.0 / 16.0 * t * t : 0.0;
    }
    case KernelFamily::triweight: {
      const double t = 1.0 - u * u;
      return a <= 1.0 ? 35.0 / 32.0 * t * t * t : 0.0;
    }
  }
  return 0.0;
}

double kernel_product(std::span<const double> u, std::span<const double> h, KernelFamily family) {
  if (u.size() != h.size()) throw ValidationError("kernel_product: dimension mismatch");
  double p = 1.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    if (!(h[j] > 0.0)) throw ValidationError("kernel_product: bandwidth must be positive");
    p *= kernel_value(family, u[j] / h[j]) / h[j];
  }
  return p;
}

void KernelSpec::validate() const {
  if (h_x.empty() || h_y.empty()) throw ValidationError("kernel: bandwidth vectors must be nonempty");
  for (double h : h_x)
    if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("kernel: bandwidths must be positive");
  for (double h : h_y)
    if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("kernel: bandwidths must be positive");
}

// ---------------------------------------------------------------------------
// CondDensityEstimator
// ---------------------------------------------------------------------------

CondDensityEstimator::CondDensityEstimator(TransitionSamples samples, KernelSpec kernel, double underflow_floor)
    : samples_(std::move(samples)), kernel_(std::move(kernel)), floor_(underflow_floor) {
  kernel_.validate();
  if (samples_.size() == 0) throw ValidationError("estimator: need at least one sample");
  if (kernel_.h_x.size() != samples_.x_dim() || kernel_.h_y.size() != samples_.y_dim())
    throw ValidationError("estimator: bandwidth vector length differs from the sample dimension");
  if (!(floor_ >= 0.0)) throw ValidationError("estimator: underflow floor must be nonnegative");
  x_norm_ = 1.0;
  const double c = kernel_.family == KernelFamily::gaussian ? kInvSqrt2Pi : 1.0;
  for (double h : kernel_.h_x) x_norm_ *= c / h;
}

void CondDensityEstimator::require_gaussian(const char* what) const {
  if (kernel_.family != KernelFamily::gaussian)
    throw ValidationError(std::string(what) + " requires the gaussian kernel family");
}

double CondDensityEstimator::x_shapes(std::span<const double> x, std::vector<double>& shapes) const {
  const std::size_t n = samples_.size(), d = samples_.x_dim();
  if (x.size() != d) throw ValidationError("estimator: query x has wrong dimension");
  shapes.assign(n, 0.0);
  const auto& xs = samples_.xs();
  const auto& h = kernel_.h_x;
  double sum = 0.0;
  if (kernel_.family == KernelFamily::gaussian) {
    for (std::size_t i = 0; i < n; ++i) {
      double e = 0.0;
      bool inside = true;
      for (std::size_t k = 0; k < d; ++k) {
        const double u = (x[k] - xs[i * d + k]) / h[k];
        if (std::abs(u) > kKernelTruncation) {
          inside = false;
          break;
        }
        e += u * u;
      }
      if (inside) {
        shapes[i] = std::exp(-0.5 * e);
        sum += shapes[i];
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      double p = 1.0;
      for (std::size_t k = 0; k < d && p > 0.0; ++k) p *= kernel_value(kernel_.family, (x[k] - xs[i * d + k]) / h[k]);
      shapes[i] = p;
      sum += p;
    }
  }
  const double total = sum * x_norm_;
  if (!(total >= floor_) || sum == 0.0) throw DenominatorUnderflow(std::vector<double>(x.begin(), x.end()), total);
  return sum;
}

double CondDensityEstimator::y_kernel(std::size_t i, std::span<const double> y) const {
  const std::size_t d = samples_.y_dim();
  const auto& ys = samples_.ys();
  const auto& h = kernel_.h_y;
  if (kernel_.family == KernelFamily::gaussian) {
    double e = 0.0, norm = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double u = (y[k] - ys[i * d + k]) / h[k];
      if (std::abs(u) > kKernelTruncation) return 0.0;
      e += u * u;
      norm *= kInvSqrt2Pi / h[k];
    }
    return norm * std::exp(-0.5 * e);
  }
  double p = 1.0;
  for (std::size_t k = 0; k < d && p > 0.0; ++k)
    p *= kernel_value(kernel_.family, (y[k] - ys[i * d + k]) / h[k]) / h[k];
  return p;
}

std::vector<double> CondDensityEstimator::weights(std::span<const double> x) const {
  std::vector<double> w;
  const double sum = x_shapes(x, w);
  for (double& v : w) v /= sum;
  return w;
}

double CondDensityEstimator::density(std::span<const double> x, std::span<const double> y) const {
  if (y.size() != samples_.y_dim()) throw ValidationError("estimator: query y has wrong dimension");
  std::vector<double> s;
  const double sum = x_shapes(x, s);
  double num = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] > 0.0) num += s[i] * y_kernel(i, y);
  return num / sum;
}

double CondDensityEstimator::partial(std::span<const double> x, std::span<const double> y, std::size_t j) const {
  require_gaussian("partial derivative");
  if (j >= samples_.x_dim()) throw ValidationError("partial: dimension index out of range");
  if (y.size() != samples_.y_dim()) throw ValidationError("estimator: query y has wrong dimension");
  std::vector<double> s;
  const double den = x_shapes(x, s);
  const std::size_t d = samples_.x_dim();
  const double inv_h2 = 1.0 / (kernel_.h_x[j] * kernel_.h_x[j]);
  const auto& xs = samples_.xs();
  double num = 0.0, num_d = 0.0, den_d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == 0.0) continue;
    const double ds = -s[i] * (x[j] - xs[i * d + j]) * inv_h2;
    const double ky = y_kernel(i, y);
    num += s[i] * ky;
    num_d += ds * ky;
    den_d += ds;
  }
  return (num_d * den - num * den_d) / (den * den);
}

double CondDensityEstimator::cell_integral(std::span<const double> x, const Box& cell) const {
  require_gaussian("closed-form cell integral");
  const std::size_t d = samples_.y_dim();
  if (cell.dim() != d) throw ValidationError("cell_integral: cell dimension differs from y dimension");
  std::vector<double> s;
  const double den = x_shapes(x, s);
  const auto& ys = samples_.ys();
  const auto& h = kernel_.h_y;
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == 0.0) continue;
    double p = 1.0;
    for (std::size_t k = 0; k < d && p > 0.0; ++k) {
      const double yi = ys[i * d + k];
      p *= normal_mass((cell.lo(k) - yi) / h[k], (cell.hi(k) - yi) / h[k]);
    }
    acc += s[i] * p;
  }
  return std::clamp(acc / den, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Bandwidth selection
// ---------------------------------------------------------------------------

double theoretical_bandwidth(std::size_t n, std::size_t d) { return theoretical_bandwidth(n, d, d); }

double theoretical_bandwidth(std::size_t n, std::size_t d_x, std::size_t d_y) {
  if (n < 2) throw ValidationError("theoretical_bandwidth: need n >= 2");
  if (d_x == 0 || d_y == 0) throw ValidationError("theoretical_bandwidth: dimensions must be positive");
  return std::pow(static_cast<double>(n), -1.0 / (6.0 + static_cast<double>(d_x + d_y)));
}

std::vector<double> scott_bandwidth(std::span<const double> data, std::size_t d) {
  if (d == 0 || data.size() % d != 0) throw ValidationError("scott_bandwidth: data is not an n x d matrix");
  const std::size_t n = data.size() / d;
  if (n < 2) throw ValidationError("scott_bandwidth: need n >= 2");
  const double factor = std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(d) + 4.0));
  std::vector<double> h(d);
  std::vector<double> col(n);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < n; ++i) col[i] = data[i * d + k];
    const double mean = pairwise_sum(col) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = (col[i] - mean) * (col[i] - mean);
    const double var = pairwise_sum(col) / static_cast<double>(n);
    if (!(var > 0.0)) throw ValidationError("scott_bandwidth: zero variance in dimension " + std::to_string(k));
    h[k] = factor * std::sqrt(var);
  }
  return h;
}

double cv_objective(std::span<const double> data, std::size_t d, std::span<const double> h) {
  if (d == 0 || data.size() % d != 0) throw ValidationError("cv_objective: data is not an n x d matrix");
  if (h.size() != d) throw ValidationError("cv_objective: bandwidth has wrong dimension");
  for (double v : h)
    if (!(v > 0.0)) throw ValidationError("cv_objective: bandwidth must be positive");
  const std::size_t n = data.size() / d;
  if (n < 2) throw ValidationError("cv_objective: need n >= 2");
  double det = 1.0;
  for (double v : h) det *= v;

  const double conv_norm = std::pow(1.0 / (2.0 * std::sqrt(kPi)), static_cast<double>(d));
  const double kern_norm = std::pow(kInvSqrt2Pi, static_cast<double>(d));
  double conv_sum = 0.0, cross_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double q = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double u = (data[j * d + k] - data[i * d + k]) / h[k];
        q += u * u;
      }
      conv_sum += conv_norm * std::exp(-0.25 * q);
      if (i != j) cross_sum += kern_norm * std::exp(-0.5 * q);
    }
  }
  const double nn = static_cast<double>(n);
  return conv_sum / (nn * nn * det) - 2.0 * cross_sum / (nn * (nn - 1.0) * det);
}

double cv_grid_search(std::span<const double> data, std::size_t d, std::span<const double> candidates) {
  if (candidates.empty()) throw ValidationError("cv_grid_search: no candidate bandwidths");
  double best_h = candidates.front();
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> h(d);
  for (double c : candidates) {
    std::fill(h.begin(), h.end(), c);
    const double v = cv_objective(data, d, h);
    if (v < best) {
      best = v;
      best_h = c;
    }
  }
  return best_h;
}

}  // namespace npv
