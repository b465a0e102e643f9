#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "npv/common.hpp"

namespace npv {

/// Static description of a discrete-time stochastic system: state dimension,
/// the finite action set, the state domain D_X and the successor domain D_Y.
struct SystemSpec {
  std::size_t state_dim = 0;
  std::vector<std::string> actions;
  Box domain;
  Box successor_domain;

  /// Throws ValidationError unless dimensions agree and actions is nonempty.
  void validate() const;
  std::size_t action_index(std::string_view name) const;
};

/// Black-box access to x(k+1) = f(x(k), a(k), w(k)). This is the only way
/// the data-driven pipeline touches the system.
class TransitionSampler {
 public:
  virtual ~TransitionSampler() = default;

  virtual std::size_t dim() const = 0;
  virtual const std::vector<std::string>& actions() const = 0;

  /// Writes one successor draw for state `x` under action index `action` into `out`.
  virtual void sample(std::span<const double> x, std::size_t action, Rng& rng, std::span<double> out) const = 0;

  std::vector<double> sample(std::span<const double> x, std::size_t action, Rng& rng) const;
  std::size_t action_index(std::string_view name) const;
};

/// One component of a Gaussian-mixture transition law with diagonal covariance.
struct GaussianComponent {
  double weight = 1.0;
  std::vector<double> mean;
  std::vector<double> stddev;
};

enum class SystemKind { linear_gaussian, switched_gaussian, univariate_mixture, bivariate_gaussian, car7d };

std::string_view to_string(SystemKind kind);
SystemKind system_kind_from_string(std::string_view name);

/// x+ = A_a x + w, w ~ N(mu, Sigma). One matrix per action.
struct LinearGaussianParams {
  std::vector<Eigen::MatrixXd> A;
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
};

/// y = a x + w, w = mu1 + s1 z with probability p, mu2 + s2 z otherwise.
struct UnivariateMixtureParams {
  double a = 0.5;
  double mu1 = 3.0;
  double mu2 = -3.0;
  double sigma1 = 1.0;
  double sigma2 = 1.0;
  double p = 0.8;
};

/// Seven-state single-track vehicle model (BMW 320i parameters).
/// The steering-rate and acceleration saturations are clamps to
/// [-sat1_bound, sat1_bound] and [-sat2_bound, sat2_bound].
struct CarParams {
  double l_wb = 2.5789;
  double mass = 1093.3;
  double friction = 1.0489;
  double l_f = 1.156;
  double l_r = 1.422;
  double h_cg = 0.574;
  double inertia_z = 1791.6;
  double c_sf = 20.89;
  double c_sr = 20.89;
  double tau = 0.001;
  double gravity = 9.81;
  double v1 = 0.0;
  double v2 = 0.0;
  double noise_scale = 0.5;
  double sat1_bound = 0.4;
  double sat2_bound = 11.5;
};

using SystemParams = std::variant<LinearGaussianParams, UnivariateMixtureParams, CarParams>;

/// Analytic benchmark system with known dynamics. Used both as a black-box
/// sampler and, for the model-based baseline, through its transition law.
class BuiltinSystem final : public TransitionSampler {
 public:
  BuiltinSystem(SystemKind kind, SystemSpec spec, SystemParams params);

  SystemKind kind() const noexcept { return kind_; }
  const SystemSpec& spec() const noexcept { return spec_; }
  const SystemParams& params() const noexcept { return params_; }

  std::size_t dim() const override { return spec_.state_dim; }
  const std::vector<std::string>& actions() const override { return spec_.actions; }

  /// Throws ValidationError for an unknown action or x outside the domain.
  void sample(std::span<const double> x, std::size_t action, Rng& rng, std::span<double> out) const override;
  using TransitionSampler::sample;

  /// Replaces every noise draw by zero; successors become deterministic.
  void set_zero_noise(bool on) noexcept { zero_noise_ = on; }
  bool zero_noise() const noexcept { return zero_noise_; }

  /// Successor law at (x, a) as a diagonal Gaussian mixture. Throws
  /// ValidationError when the noise covariance is not diagonal.
  std::vector<GaussianComponent> transition_law(std::span<const double> x, std::size_t action) const;

  /// Noise-free successor f(x, a, 0).
  std::vector<double> drift(std::span<const double> x, std::size_t action) const;

 private:
  SystemKind kind_;
  SystemSpec spec_;
  SystemParams params_;
  Eigen::MatrixXd chol_;  // Cholesky factor of Sigma for Gaussian kinds
  bool zero_noise_ = false;
};

namespace systems {

/// Linear case study: A = [[0.4, 0.1], [0, 0.5]], Sigma = I on [0,2]^2.
BuiltinSystem case_study_linear();
/// Switched case study: actions a1, a2 with A1 as above and A2 = [[0.4, 0.1], [-0.2, 0.5]].
BuiltinSystem case_study_switched();
/// Y = 0.5 X + N(0, 1) on D_X = [-1, 1], D_Y = [-4.38, 4.24].
BuiltinSystem univariate_linear(double a = 0.5, double sigma = 1.0);
/// Y = 0.5 X + mixture noise on D_X = [-1, 1], D_Y = [-7.177, 6.965].
BuiltinSystem univariate_mixture(const UnivariateMixtureParams& params = {});
/// Bivariate Y = A X + W. Case 1: A = Sigma = I on [-0.2, 0.2]^2.
/// Case 2: A = I, Sigma = 0.2 I, D_X = [0, 0.2]^2, D_Y = [-0.2, -0.1]^2.
BuiltinSystem bivariate_gaussian(int case_id);
/// Vehicle model on [0.8,1.2]^2 x [0,0.3] x [0,0.1]^2 x [0.5,1] x [0,0.2].
BuiltinSystem car7d(const CarParams& params = {});

}  // namespace systems

/// Paired (state, successor) observations for one action, stored row-major.
class TransitionSamples {
 public:
  TransitionSamples() = default;
  TransitionSamples(std::string action, std::size_t x_dim, std::size_t y_dim);

  const std::string& action() const noexcept { return action_; }
  std::size_t size() const noexcept { return x_dim_ ? xs_.size() / x_dim_ : 0; }
  std::size_t x_dim() const noexcept { return x_dim_; }
  std::size_t y_dim() const noexcept { return y_dim_; }

  void reserve(std::size_t n);
  void add(std::span<const double> x, std::span<const double> y);

  std::span<const double> x(std::size_t i) const { return {xs_.data() + i * x_dim_, x_dim_}; }
  std::span<const double> y(std::size_t i) const { return {ys_.data() + i * y_dim_, y_dim_}; }
  const std::vector<double>& xs() const noexcept { return xs_; }
  const std::vector<double>& ys() const noexcept { return ys_; }

  /// Consecutive rows [first, first + count).
  TransitionSamples slice(std::size_t first, std::size_t count) const;
  /// Keeps only the listed state coordinates.
  TransitionSamples project_x(std::span<const std::size_t> coords) const;

  bool operator==(const TransitionSamples&) const = default;

 private:
  std::string action_;
  std::size_t x_dim_ = 0;
  std::size_t y_dim_ = 0;
  std::vector<double> xs_;
  std::vector<double> ys_;
};

/// Draws n pairs with x uniform on `domain` and y ~ f(x, action, w).
/// Reproducible given `seed`.
TransitionSamples generate_samples(const TransitionSampler& system, std::size_t action, const Box& domain,
                                   std::size_t n, std::uint64_t seed);

/// Sample file: a header line `d=<d>,action=<name>` (or `dx=<p>,dy=<q>,action=<name>`)
/// followed by one comma-separated row `x_1,...,x_p,y_1,...,y_q` per pair.
/// Values are written in shortest round-trip form, so save/load is lossless.
void save_samples(const TransitionSamples& samples, std::ostream& os);
void save_samples(const TransitionSamples& samples, const std::filesystem::path& path);
TransitionSamples load_samples(std::istream& is);
TransitionSamples load_samples(const std::filesystem::path& path);

}  // namespace npv
