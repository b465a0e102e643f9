#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "npv/common.hpp"
#include "npv/kde.hpp"
#include "npv/systems.hpp"

namespace npv {

/// Draws y ~ f(. | x) for a conditional law with x in R^{x_dim}, y in R^{y_dim}.
class ConditionalSampler {
 public:
  virtual ~ConditionalSampler() = default;
  virtual std::size_t x_dim() const = 0;
  virtual std::size_t y_dim() const = 0;
  virtual void sample(std::span<const double> x, Rng& rng, std::span<double> y) const = 0;
};

/// Full successor of a system under one fixed action.
class ActionSampler final : public ConditionalSampler {
 public:
  ActionSampler(const TransitionSampler& system, std::size_t action);
  std::size_t x_dim() const override { return system_.dim(); }
  std::size_t y_dim() const override { return system_.dim(); }
  void sample(std::span<const double> x, Rng& rng, std::span<double> y) const override;

 private:
  const TransitionSampler& system_;
  std::size_t action_;
};

/// One successor coordinate (a factor T_i of a product-form kernel).
class CoordinateSampler final : public ConditionalSampler {
 public:
  CoordinateSampler(const TransitionSampler& system, std::size_t action, std::size_t coord);
  std::size_t x_dim() const override { return system_.dim(); }
  std::size_t y_dim() const override { return 1; }
  void sample(std::span<const double> x, Rng& rng, std::span<double> y) const override;

 private:
  const TransitionSampler& system_;
  std::size_t action_;
  std::size_t coord_;
};

enum class BandwidthPolicy { theoretical, scott, explicit_values };
enum class Eps3Variant { main_text, appendix };

std::string_view to_string(BandwidthPolicy p);
BandwidthPolicy bandwidth_policy_from_string(std::string_view s);
std::string_view to_string(Eps3Variant v);
Eps3Variant eps3_variant_from_string(std::string_view s);

/// Smoothness constants of the error envelope. c_b1 / c_b2 drive the 1-D
/// bias term, deriv_bound bounds every third-derivative term in higher
/// dimensions. a_bound, when set, replaces the computed bias factor A_i.
struct SmoothnessConstants {
  double c_f = 1.0;
  double c_b1 = 0.5;
  double c_b2 = 0.5;
  double deriv_bound = 0.5;
  std::optional<double> a_bound;
};

struct LcConfig {
  std::size_t n = 60000;
  std::size_t m = 20;
  std::size_t grid_resolution = 0;  // 0: auto_grid_resolution(d_x + d_y)
  BandwidthPolicy policy = BandwidthPolicy::theoretical;
  std::vector<double> h_x;  // explicit policy only
  std::vector<double> h_y;
  SmoothnessConstants constants;
  Eps3Variant variant = Eps3Variant::main_text;
  bool refine = false;
  unsigned threads = 0;
  double underflow_floor = kDefaultUnderflowFloor;

  void validate() const;
};

struct LipschitzReport {
  std::vector<double> per_dimension;               // L_j, mean over iterations
  double overall = 0.0;                            // max_j L_j
  std::size_t argmax_dim = 0;                      // lowest index on ties
  std::vector<std::vector<double>> per_iteration;  // [iteration][dimension]
  std::vector<double> eps3;                        // per dimension
  double interval_lo = 0.0;
  double interval_hi = 0.0;
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t grid_resolution = 0;
  std::vector<double> h_x;
  std::vector<double> h_y;
  Box x_domain;
  Box y_domain;
  std::vector<std::size_t> x_coords;  // state coordinates seen by the estimator
  std::uint64_t seed = 0;

  bool contains(double L) const noexcept { return L >= interval_lo && L <= interval_hi; }
  bool operator==(const LipschitzReport&) const = default;
};

nlohmann::json to_json(const LcConfig& config);
nlohmann::json to_json(const LipschitzReport& report);

/// Largest |d f / d x_j| over a tensor grid with `resolution` points per
/// dimension (end points included) on x_box x y_box, for every j.
struct GridMaxResult {
  std::vector<double> max_abs;
  std::vector<std::vector<double>> argmax_x;
  std::vector<std::vector<double>> argmax_y;
};

GridMaxResult grid_max_abs_partial(const CondDensityEstimator& est, const Box& x_box, const Box& y_box,
                                   std::size_t resolution);

/// Re-evaluates the 3^(dx+dy) neighbourhood of each argmax at half the grid
/// spacing, clipped to the boxes. Never decreases max_abs.
void refine_grid_max(const CondDensityEstimator& est, const Box& x_box, const Box& y_box, std::size_t resolution,
                     GridMaxResult& result);

/// Envelope for scalar x and y:
///   eps3 = C1 / (n hx^3 hy) + hx^4 A^2 / 4,  A = G12 (hy^2/hx^2 c_b1 + c_b2),
/// with C1 = vol G20 c_f (main_text) or vol G20 G22 c_f (appendix).
double asymptotic_eps3_1d(double n, double h_x, double h_y, double c_f, double c_b1, double c_b2, double vol,
                          Eps3Variant variant = Eps3Variant::main_text);

/// Envelope for coordinate i of a vector state:
///   eps3_i = C / (n hx_i^2 prod hx prod hy) + hx_i^4 A_i^2 / 4,
///   C = vol G20^(dx+dy-1) c_f,
///   A_i = G12 bound (sum_j hy_j^2 / hx_i^2 + sum_{s != i} hx_s^2 / hx_i^2).
/// `a_override` replaces A_i.
double asymptotic_eps3_multi(double n, std::span<const double> h_x, std::span<const double> h_y, double c_f,
                             double deriv_bound, double vol, std::size_t i,
                             std::optional<double> a_override = std::nullopt);

/// Lipschitz-constant estimate of the conditional density of a black-box
/// sampler. Each of the m iterations draws n fresh pairs with x uniform on
/// x_domain, fits the estimator and maximizes |d f / d x_j| over the grid.
/// `x_coords` restricts the estimator to a subset of state coordinates (the
/// sampler still receives the full state). When y_domain is absent it is
/// [min - 3 h_y, max + 3 h_y] of the first iteration's successors.
LipschitzReport estimate_lc(const ConditionalSampler& sampler, const Box& x_domain, std::optional<Box> y_domain,
                            const LcConfig& config, std::uint64_t seed, std::vector<std::size_t> x_coords = {});

/// Same estimate from fixed data: one batch per iteration (m = batches.size(),
/// n = batch size, which must agree across batches). The reported seed is 0.
LipschitzReport estimate_lc(std::span<const TransitionSamples> batches, const Box& x_domain,
                            std::optional<Box> y_domain, const LcConfig& config);

struct CompositionalFactor {
  std::size_t coord = 0;
  std::vector<std::size_t> mask;  // empty: every state coordinate
  std::optional<Box> y_domain;
};

/// One report per factor T_i(y_i | x) of a product-form transition kernel.
std::vector<LipschitzReport> compositional_lc(const TransitionSampler& system, std::size_t action,
                                              const Box& x_domain, std::span<const CompositionalFactor> factors,
                                              const LcConfig& config, std::uint64_t seed);

/// Search-grid points per dimension used when LcConfig::grid_resolution is 0:
/// 50 for a scalar state and successor, 15 up to four dimensions, then 7, then 4.
std::size_t auto_grid_resolution(std::size_t total_dim);

/// Partition parameter delta = epsilon / (T L leb).
double partition_size(double epsilon, double horizon, double L, double leb);

}  // namespace npv
