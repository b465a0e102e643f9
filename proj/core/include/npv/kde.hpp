#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "npv/common.hpp"
#include "npv/systems.hpp"

namespace npv {

enum class KernelFamily { gaussian, uniform, triangle, epanechnikov, quartic, triweight };

std::string_view to_string(KernelFamily family);
KernelFamily kernel_family_from_string(std::string_view name);

/// Canonical bandwidth delta_0 of a univariate kernel (gaussian: 0.7764).
double canonical_bandwidth(KernelFamily family);

/// Bandwidth for kernel `to` giving the same smoothing as `h` does for `from`:
/// h_to = h * delta_0(to) / delta_0(from).
double equivalent_bandwidth(double h, KernelFamily from, KernelFamily to);

/// Univariate kernel k(u).
double kernel_value(KernelFamily family, double u) noexcept;

/// prod_j k(u_j / h_j) / h_j. Throws ValidationError for a nonpositive bandwidth.
double kernel_product(std::span<const double> u, std::span<const double> h,
                      KernelFamily family = KernelFamily::gaussian);

/// Kernel family plus diagonal bandwidths for the conditioning (x) and successor (y) variables.
struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  std::vector<double> h_x;
  std::vector<double> h_y;

  void validate() const;
};

/// Gaussian contributions beyond this many bandwidths are dropped (< 1e-14 relative).
inline constexpr double kKernelTruncation = 8.0;
inline constexpr double kDefaultUnderflowFloor = 1e-300;

/// Kernel estimator of the conditional density of Y given X:
///
///   f(y | x) = sum_i K_Hx(x - X_i) K_Hy(y - Y_i) / sum_j K_Hx(x - X_j)
///            = sum_i w_i(x) K_Hy(y - Y_i).
///
/// Immutable after construction; every query is const and thread-safe.
/// Partial derivatives and cell integrals are closed-form and need the
/// Gaussian family.
class CondDensityEstimator {
 public:
  CondDensityEstimator(TransitionSamples samples, KernelSpec kernel,
                       double underflow_floor = kDefaultUnderflowFloor);

  const TransitionSamples& samples() const noexcept { return samples_; }
  const KernelSpec& kernel() const noexcept { return kernel_; }
  std::size_t x_dim() const noexcept { return samples_.x_dim(); }
  std::size_t y_dim() const noexcept { return samples_.y_dim(); }
  double underflow_floor() const noexcept { return floor_; }

  /// Normalized weights w_i(x); they sum to one.
  std::vector<double> weights(std::span<const double> x) const;

  double density(std::span<const double> x, std::span<const double> y) const;

  /// Exact d f / d x_j by the quotient rule over the two kernel sums.
  double partial(std::span<const double> x, std::span<const double> y, std::size_t j) const;

  /// Integral of f(. | x) over `cell` (bounds may be infinite).
  double cell_integral(std::span<const double> x, const Box& cell) const;

 private:
  // Unnormalized x-kernel shapes exp(-|u|^2/2) (Gaussian) or prod k(u) (others);
  // returns the true denominator sum_j K_Hx(x - X_j) for the underflow check.
  double x_shapes(std::span<const double> x, std::vector<double>& shapes) const;
  double y_kernel(std::size_t i, std::span<const double> y) const;
  void require_gaussian(const char* what) const;

  TransitionSamples samples_;
  KernelSpec kernel_;
  double floor_;
  double x_norm_;  // prod_j 1 / (h_xj * c), the constant stripped from x shapes
};

/// Bandwidth minimizing the asymptotic error envelope of the LC estimate:
/// n^(-1 / (6 + 2d)); n^(-1/8) for d = 1. Requires n >= 2.
double theoretical_bandwidth(std::size_t n, std::size_t d);
/// Same rule when the conditioning and successor dimensions differ:
/// n^(-1 / (6 + d_x + d_y)).
double theoretical_bandwidth(std::size_t n, std::size_t d_x, std::size_t d_y);

/// Scott's rule h_j = n^(-1/(d+4)) * sigma_j with the biased (divisor n)
/// per-dimension standard deviation. `data` is an n x d row-major matrix.
std::vector<double> scott_bandwidth(std::span<const double> data, std::size_t d);

/// Least-squares cross-validation objective for a diagonal-bandwidth
/// Gaussian product kernel:
///
///   CV(H) = 1/(n^2 |H|) sum_{i,j} (K*K)(H^-1 (X_j - X_i))
///         - 2/(n (n-1) |H|) sum_{i != j} K(H^-1 (X_j - X_i)),
///
/// with K*K the N(0, 2) product density.
double cv_objective(std::span<const double> data, std::size_t d, std::span<const double> h);

/// Coarse grid search of CV over isotropic bandwidths h * (1, ..., 1).
double cv_grid_search(std::span<const double> data, std::size_t d, std::span<const double> candidates);

}  // namespace npv
