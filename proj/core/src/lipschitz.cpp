#include "npv/lipschitz.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/Dense>

namespace npv {

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

ActionSampler::ActionSampler(const TransitionSampler& system, std::size_t action) : system_(system), action_(action) {
  if (action_ >= system_.actions().size()) throw ValidationError("unknown action index " + std::to_string(action));
}

void ActionSampler::sample(std::span<const double> x, Rng& rng, std::span<double> y) const {
  system_.sample(x, action_, rng, y);
}

CoordinateSampler::CoordinateSampler(const TransitionSampler& system, std::size_t action, std::size_t coord)
    : system_(system), action_(action), coord_(coord) {
  if (action_ >= system_.actions().size()) throw ValidationError("unknown action index " + std::to_string(action));
  if (coord_ >= system_.dim()) throw ValidationError("factor coordinate " + std::to_string(coord) + " out of range");
}

void CoordinateSampler::sample(std::span<const double> x, Rng& rng, std::span<double> y) const {
  thread_local std::vector<double> full;
  full.resize(system_.dim());
  system_.sample(x, action_, rng, full);
  y[0] = full[coord_];
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

std::string_view to_string(BandwidthPolicy p) {
  switch (p) {
    case BandwidthPolicy::theoretical: return "theoretical";
    case BandwidthPolicy::scott: return "scott";
    case BandwidthPolicy::explicit_values: return "explicit";
  }
  return "theoretical";
}

BandwidthPolicy bandwidth_policy_from_string(std::string_view s) {
  if (s == "theoretical") return BandwidthPolicy::theoretical;
  if (s == "scott") return BandwidthPolicy::scott;
  if (s == "explicit") return BandwidthPolicy::explicit_values;
  throw ValidationError("unknown bandwidth policy '" + std::string(s) + "'");
}

std::string_view to_string(Eps3Variant v) { return v == Eps3Variant::appendix ? "appendix" : "main_text"; }

Eps3Variant eps3_variant_from_string(std::string_view s) {
  if (s == "main_text") return Eps3Variant::main_text;
  if (s == "appendix") return Eps3Variant::appendix;
  throw ValidationError("unknown eps3 variant '" + std::string(s) + "'");
}

void LcConfig::validate() const {
  if (n < 2) throw ValidationError("lc: need n >= 2");
  if (m < 1) throw ValidationError("lc: need m >= 1");
  if (grid_resolution == 1) throw ValidationError("lc: need grid_resolution >= 2 (or 0 for automatic)");
  const auto& c = constants;
  if (!(c.c_f > 0.0 && c.c_b1 > 0.0 && c.c_b2 > 0.0 && c.deriv_bound > 0.0))
    throw ValidationError("lc: smoothness constants must be positive");
  if (c.a_bound && !(*c.a_bound > 0.0)) throw ValidationError("lc: a_bound must be positive");
  if (policy == BandwidthPolicy::explicit_values) {
    if (h_x.empty() || h_y.empty()) throw ValidationError("lc: explicit policy needs h_x and h_y");
    for (double h : h_x)
      if (!(h > 0.0)) throw ValidationError("lc: bandwidths must be positive");
    for (double h : h_y)
      if (!(h > 0.0)) throw ValidationError("lc: bandwidths must be positive");
  }
  if (!(underflow_floor >= 0.0)) throw ValidationError("lc: underflow floor must be nonnegative");
}

namespace {

nlohmann::json box_json(const Box& b) {
  return {{"lo", std::vector<double>(b.lower().begin(), b.lower().end())},
          {"hi", std::vector<double>(b.upper().begin(), b.upper().end())}};
}

}  // namespace

nlohmann::json to_json(const LcConfig& c) {
  nlohmann::json j = {{"n", c.n},
                      {"m", c.m},
                      {"grid_resolution", c.grid_resolution},
                      {"bandwidth_policy", to_string(c.policy)},
                      {"eps3_variant", to_string(c.variant)},
                      {"refine", c.refine},
                      {"underflow_floor", c.underflow_floor},
                      {"constants",
                       {{"c_f", c.constants.c_f},
                        {"c_b1", c.constants.c_b1},
                        {"c_b2", c.constants.c_b2},
                        {"deriv_bound", c.constants.deriv_bound}}}};
  if (c.constants.a_bound) j["constants"]["a_bound"] = *c.constants.a_bound;
  if (c.policy == BandwidthPolicy::explicit_values) {
    j["h_x"] = c.h_x;
    j["h_y"] = c.h_y;
  }
  return j;
}

nlohmann::json to_json(const LipschitzReport& r) {
  return {{"per_dimension", r.per_dimension},
          {"overall", r.overall},
          {"argmax_dim", r.argmax_dim},
          {"per_iteration", r.per_iteration},
          {"eps3", r.eps3},
          {"interval", {r.interval_lo, r.interval_hi}},
          {"n", r.n},
          {"m", r.m},
          {"grid_resolution", r.grid_resolution},
          {"h_x", r.h_x},
          {"h_y", r.h_y},
          {"x_domain", box_json(r.x_domain)},
          {"y_domain", box_json(r.y_domain)},
          {"x_coords", r.x_coords},
          {"seed", r.seed}};
}

// ---------------------------------------------------------------------------
// Grid search of |d f / d x_j|
// ---------------------------------------------------------------------------

namespace {

constexpr double kBlockBudget = 4.0e6;  // doubles per GEMM operand block

std::size_t checked_pow(std::size_t base, std::size_t exp) {
  std::size_t v = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (v > std::numeric_limits<std::size_t>::max() / base) throw ValidationError("lc: search grid too large");
    v *= base;
  }
  return v;
}

double grid_coord(const Box& b, std::size_t k, std::size_t g, std::size_t r) {
  if (g + 1 == r) return b.hi(k);
  return b.lo(k) + static_cast<double>(g) * (b.hi(k) - b.lo(k)) / static_cast<double>(r - 1);
}

// Digits of a flat grid index, dimension 0 fastest.
void decode(std::size_t idx, std::size_t r, std::span<std::size_t> digits) {
  for (auto& d : digits) {
    d = idx % r;
    idx /= r;
  }
}

}  // namespace

GridMaxResult grid_max_abs_partial(const CondDensityEstimator& est, const Box& x_box, const Box& y_box,
                                   std::size_t r) {
  if (est.kernel().family != KernelFamily::gaussian)
    throw ValidationError("partial derivative requires the gaussian kernel family");
  if (r < 2) throw ValidationError("lc: need grid_resolution >= 2");
  const std::size_t dx = est.x_dim(), dy = est.y_dim(), n = est.samples().size();
  if (x_box.dim() != dx || y_box.dim() != dy) throw ValidationError("lc: search box dimension mismatch");
  const auto& hx = est.kernel().h_x;
  const auto& hy = est.kernel().h_y;
  const auto& xs = est.samples().xs();
  const auto& ys = est.samples().ys();
  const auto ni = static_cast<Eigen::Index>(n);
  const auto ri = static_cast<Eigen::Index>(r);

  // Per-dimension tables over the 1-D grids; the tensor-grid kernels are products of their columns.
  // Truncation also keeps subnormals out of the matrix products.
  std::vector<Eigen::MatrixXd> ex(dx), wx(dx), py(dy);
  for (std::size_t k = 0; k < dx; ++k) {
    ex[k].resize(ni, ri);
    wx[k].resize(ni, ri);
    const double inv_h = 1.0 / hx[k];
    for (std::size_t g = 0; g < r; ++g) {
      const double x = grid_coord(x_box, k, g, r);
      for (std::size_t i = 0; i < n; ++i) {
        const double diff = x - xs[i * dx + k];
        const double u = diff * inv_h;
        ex[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g)) =
            std::abs(u) > kKernelTruncation ? 0.0 : std::exp(-0.5 * u * u);
        wx[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g)) = -diff * inv_h * inv_h;
      }
    }
  }
  for (std::size_t k = 0; k < dy; ++k) {
    py[k].resize(ni, ri);
    const double inv_h = 1.0 / hy[k];
    for (std::size_t g = 0; g < r; ++g) {
      const double y = grid_coord(y_box, k, g, r);
      for (std::size_t i = 0; i < n; ++i) {
        const double u = (y - ys[i * dy + k]) * inv_h;
        py[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g)) =
            std::abs(u) > kKernelTruncation ? 0.0 : kInvSqrt2Pi * inv_h * std::exp(-0.5 * u * u);
      }
    }
  }

  double x_norm = 1.0;
  for (double h : hx) x_norm *= kInvSqrt2Pi / h;

  const std::size_t gx = checked_pow(r, dx), gy = checked_pow(r, dy);
  const std::size_t bx = std::clamp<std::size_t>(
      static_cast<std::size_t>(kBlockBudget / static_cast<double>((1 + dx) * n)), 1, gx);
  const std::size_t by =
      std::clamp<std::size_t>(static_cast<std::size_t>(4.0 * kBlockBudget / static_cast<double>(n)), 1, gy);

  std::vector<std::size_t> xd(dx), yd(dy);
  auto build_ky = [&](std::size_t first, std::size_t count, Eigen::MatrixXd& ky) {
    ky.resize(ni, static_cast<Eigen::Index>(count));
    for (std::size_t c = 0; c < count; ++c) {
      decode(first + c, r, yd);
      auto col = ky.col(static_cast<Eigen::Index>(c));
      col = py[0].col(static_cast<Eigen::Index>(yd[0]));
      for (std::size_t k = 1; k < dy; ++k) col.array() *= py[k].col(static_cast<Eigen::Index>(yd[k])).array();
    }
  };

  const bool full_y = by >= gy;
  Eigen::MatrixXd ky_full;
  if (full_y) build_ky(0, gy, ky_full);

  GridMaxResult res;
  res.max_abs.assign(dx, 0.0);
  res.argmax_x.assign(dx, std::vector<double>(dx, 0.0));
  res.argmax_y.assign(dx, std::vector<double>(dy, 0.0));
  std::vector<std::size_t> best_x(dx, 0), best_y(dx, 0);
  std::vector<bool> seen(dx, false);

  Eigen::MatrixXd st, ky_blk, prod;
  Eigen::VectorXd den;
  Eigen::MatrixXd den_d;
  for (std::size_t x0 = 0; x0 < gx; x0 += bx) {
    const std::size_t bcount = std::min(bx, gx - x0);
    const auto bc = static_cast<Eigen::Index>(bcount);
    st.resize(ni, static_cast<Eigen::Index>((1 + dx) * bcount));
    for (std::size_t b = 0; b < bcount; ++b) {
      decode(x0 + b, r, xd);
      auto shape = st.col(static_cast<Eigen::Index>(b));
      shape = ex[0].col(static_cast<Eigen::Index>(xd[0]));
      for (std::size_t k = 1; k < dx; ++k) shape.array() *= ex[k].col(static_cast<Eigen::Index>(xd[k])).array();
      for (std::size_t j = 0; j < dx; ++j)
        st.col(static_cast<Eigen::Index>((1 + j) * bcount + b)).array() =
            shape.array() * wx[j].col(static_cast<Eigen::Index>(xd[j])).array();
    }
    const Eigen::RowVectorXd sums = st.colwise().sum();
    den = sums.head(bc).transpose();
    den_d.resize(bc, static_cast<Eigen::Index>(dx));
    for (std::size_t j = 0; j < dx; ++j)
      den_d.col(static_cast<Eigen::Index>(j)) = sums.segment(static_cast<Eigen::Index>((1 + j) * bcount), bc).transpose();
    for (Eigen::Index b = 0; b < bc; ++b) {
      if (!(den[b] * x_norm >= est.underflow_floor()) || den[b] == 0.0) {
        decode(x0 + static_cast<std::size_t>(b), r, xd);
        std::vector<double> point(dx);
        for (std::size_t k = 0; k < dx; ++k) point[k] = grid_coord(x_box, k, xd[k], r);
        throw DenominatorUnderflow(std::move(point), den[b] * x_norm);
      }
    }

    for (std::size_t y0 = 0; y0 < gy; y0 += by) {
      const std::size_t ycount = std::min(by, gy - y0);
      const Eigen::MatrixXd* ky = &ky_full;
      if (!full_y) {
        build_ky(y0, ycount, ky_blk);
        ky = &ky_blk;
      }
      prod.noalias() = st.transpose() * (*ky);
      for (std::size_t j = 0; j < dx; ++j) {
        const auto row0 = static_cast<Eigen::Index>((1 + j) * bcount);
        for (std::size_t c = 0; c < ycount; ++c) {
          const auto ci = static_cast<Eigen::Index>(c);
          for (Eigen::Index b = 0; b < bc; ++b) {
            const double d = den[b];
            const double v = std::abs((prod(row0 + b, ci) * d - prod(b, ci) * den_d(b, static_cast<Eigen::Index>(j))) / (d * d));
            if (v > res.max_abs[j] || !seen[j]) {
              res.max_abs[j] = v;
              best_x[j] = x0 + static_cast<std::size_t>(b);
              best_y[j] = y0 + c;
              seen[j] = true;
            }
          }
        }
      }
    }
  }

  for (std::size_t j = 0; j < dx; ++j) {
    decode(best_x[j], r, xd);
    decode(best_y[j], r, yd);
    for (std::size_t k = 0; k < dx; ++k) res.argmax_x[j][k] = grid_coord(x_box, k, xd[k], r);
    for (std::size_t k = 0; k < dy; ++k) res.argmax_y[j][k] = grid_coord(y_box, k, yd[k], r);
  }
  return res;
}

void refine_grid_max(const CondDensityEstimator& est, const Box& x_box, const Box& y_box, std::size_t r,
                     GridMaxResult& result) {
  const std::size_t dx = est.x_dim(), dy = est.y_dim(), dim = dx + dy;
  const std::size_t count = checked_pow(3, dim);
  std::vector<double> step(dim);
  for (std::size_t k = 0; k < dx; ++k) step[k] = 0.5 * x_box.width(k) / static_cast<double>(r - 1);
  for (std::size_t k = 0; k < dy; ++k) step[dx + k] = 0.5 * y_box.width(k) / static_cast<double>(r - 1);
  std::vector<std::size_t> digits(dim);
  std::vector<double> x(dx), y(dy);
  for (std::size_t j = 0; j < dx; ++j) {
    const auto cx = result.argmax_x[j];
    const auto cy = result.argmax_y[j];
    for (std::size_t idx = 0; idx < count; ++idx) {
      decode(idx, 3, digits);
      for (std::size_t k = 0; k < dx; ++k)
        x[k] = std::clamp(cx[k] + (static_cast<double>(digits[k]) - 1.0) * step[k], x_box.lo(k), x_box.hi(k));
      for (std::size_t k = 0; k < dy; ++k)
        y[k] = std::clamp(cy[k] + (static_cast<double>(digits[dx + k]) - 1.0) * step[dx + k], y_box.lo(k), y_box.hi(k));
      const double v = std::abs(est.partial(x, y, j));
      if (v > result.max_abs[j]) {
        result.max_abs[j] = v;
        result.argmax_x[j] = x;
        result.argmax_y[j] = y;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Error envelopes
// ---------------------------------------------------------------------------

namespace {

constexpr double kG12 = 1.0;

double g20() { return 1.0 / (2.0 * std::sqrt(kPi)); }
double g22() { return 1.0 / (4.0 * std::sqrt(kPi)); }

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string("eps3: ") + what + " must be positive");
}

double eps3_1d_impl(double n, double hx, double hy, double c_f, double vol, Eps3Variant variant, double a) {
  const double c1 = variant == Eps3Variant::appendix ? vol * g20() * g22() * c_f : vol * g20() * c_f;
  return c1 / (n * hx * hx * hx * hy) + hx * hx * hx * hx * a * a / 4.0;
}

}  // namespace

double asymptotic_eps3_1d(double n, double h_x, double h_y, double c_f, double c_b1, double c_b2, double vol,
                          Eps3Variant variant) {
  require_positive(n, "n");
  require_positive(h_x, "h_x");
  require_positive(h_y, "h_y");
  require_positive(c_f, "C_f");
  require_positive(c_b1, "C_b1");
  require_positive(c_b2, "C_b2");
  require_positive(vol, "Vol(D_X)");
  const double a = kG12 * (h_y * h_y / (h_x * h_x) * c_b1 + c_b2);
  return eps3_1d_impl(n, h_x, h_y, c_f, vol, variant, a);
}

double asymptotic_eps3_multi(double n, std::span<const double> h_x, std::span<const double> h_y, double c_f,
                             double deriv_bound, double vol, std::size_t i, std::optional<double> a_override) {
  require_positive(n, "n");
  require_positive(c_f, "C_f");
  require_positive(deriv_bound, "derivative bound");
  require_positive(vol, "Vol(D_X)");
  if (h_x.empty() || h_y.empty()) throw ValidationError("eps3: empty bandwidth vector");
  if (i >= h_x.size()) throw ValidationError("eps3: dimension index out of range");
  for (double h : h_x) require_positive(h, "bandwidth");
  for (double h : h_y) require_positive(h, "bandwidth");
  if (a_override) require_positive(*a_override, "A bound");

  const double hi2 = h_x[i] * h_x[i];
  double prod = 1.0;
  for (double h : h_x) prod *= h;
  for (double h : h_y) prod *= h;
  const double c_hat = vol * std::pow(g20(), static_cast<double>(h_x.size() + h_y.size() - 1)) * c_f;

  double a = 0.0;
  if (a_override) {
    a = *a_override;
  } else {
    for (double h : h_y) a += h * h / hi2;
    for (std::size_t s = 0; s < h_x.size(); ++s)
      if (s != i) a += h_x[s] * h_x[s] / hi2;
    a *= kG12 * deriv_bound;
  }
  return c_hat / (n * hi2 * prod) + hi2 * hi2 * a * a / 4.0;
}

// ---------------------------------------------------------------------------
// Algorithm driver
// ---------------------------------------------------------------------------

namespace {

TransitionSamples draw_iteration(const ConditionalSampler& sampler, const Box& x_domain,
                                 std::span<const std::size_t> coords, std::size_t n, std::uint64_t seed,
                                 std::size_t iteration) {
  Rng rng = make_rng(seed, {iteration});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t dfull = x_domain.dim(), dx = coords.size(), dy = sampler.y_dim();
  TransitionSamples s("", dx, dy);
  s.reserve(n);
  std::vector<double> x(dfull), xp(dx), y(dy);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < dfull; ++k) x[k] = x_domain.lo(k) + x_domain.width(k) * unit(rng);
    sampler.sample(x, rng, y);
    for (std::size_t k = 0; k < dx; ++k) xp[k] = x[coords[k]];
    s.add(xp, y);
  }
  return s;
}

KernelSpec choose_bandwidths(const LcConfig& c, const TransitionSamples& s) {
  KernelSpec spec;
  const std::size_t dx = s.x_dim(), dy = s.y_dim();
  switch (c.policy) {
    case BandwidthPolicy::theoretical: {
      const double h = theoretical_bandwidth(s.size(), dx, dy);
      spec.h_x.assign(dx, h);
      spec.h_y.assign(dy, h);
      break;
    }
    case BandwidthPolicy::scott:
      spec.h_x = scott_bandwidth(s.xs(), dx);
      spec.h_y = scott_bandwidth(s.ys(), dy);
      break;
    case BandwidthPolicy::explicit_values:
      spec.h_x = c.h_x.size() == 1 ? std::vector<double>(dx, c.h_x[0]) : c.h_x;
      spec.h_y = c.h_y.size() == 1 ? std::vector<double>(dy, c.h_y[0]) : c.h_y;
      if (spec.h_x.size() != dx || spec.h_y.size() != dy)
        throw ValidationError("lc: explicit bandwidths do not match the estimator dimensions");
      break;
  }
  return spec;
}

LipschitzReport run_lc(const std::function<TransitionSamples(std::size_t)>& draw, const Box& x_box, std::size_t dy,
                       std::optional<Box> y_domain, const LcConfig& config, std::size_t n, std::uint64_t seed,
                       const std::vector<std::size_t>& x_coords) {
  config.validate();
  const std::size_t dx = x_box.dim();
  const std::size_t res = config.grid_resolution ? config.grid_resolution : auto_grid_resolution(dx + dy);
  TransitionSamples first = draw(0);
  const KernelSpec first_spec = choose_bandwidths(config, first);
  Box y_box;
  if (y_domain) {
    y_box = *y_domain;
  } else {
    std::vector<double> lo(dy, std::numeric_limits<double>::infinity()), hi(dy, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < first.size(); ++i)
      for (std::size_t k = 0; k < dy; ++k) {
        lo[k] = std::min(lo[k], first.y(i)[k]);
        hi[k] = std::max(hi[k], first.y(i)[k]);
      }
    for (std::size_t k = 0; k < dy; ++k) {
      lo[k] -= 3.0 * first_spec.h_y[k];
      hi[k] += 3.0 * first_spec.h_y[k];
    }
    y_box = Box(lo, hi);
  }

  LipschitzReport rep;
  rep.per_iteration.assign(config.m, std::vector<double>(dx, 0.0));
  parallel_for(config.m, config.threads, [&](std::size_t mu) {
    TransitionSamples drawn;
    if (mu != 0) drawn = draw(mu);
    const TransitionSamples& s = mu == 0 ? first : drawn;
    KernelSpec spec = mu == 0 ? first_spec : choose_bandwidths(config, s);
    CondDensityEstimator est(s, std::move(spec), config.underflow_floor);
    GridMaxResult g = grid_max_abs_partial(est, x_box, y_box, res);
    if (config.refine) refine_grid_max(est, x_box, y_box, res, g);
    rep.per_iteration[mu] = g.max_abs;
  });

  rep.per_dimension.assign(dx, 0.0);
  std::vector<double> column(config.m);
  for (std::size_t j = 0; j < dx; ++j) {
    for (std::size_t mu = 0; mu < config.m; ++mu) column[mu] = rep.per_iteration[mu][j];
    rep.per_dimension[j] = pairwise_sum(column) / static_cast<double>(config.m);
  }
  rep.argmax_dim = 0;
  for (std::size_t j = 1; j < dx; ++j)
    if (rep.per_dimension[j] > rep.per_dimension[rep.argmax_dim]) rep.argmax_dim = j;
  rep.overall = rep.per_dimension[rep.argmax_dim];

  const double nn = static_cast<double>(n);
  const double vol = x_box.volume();
  const auto& k = config.constants;
  rep.eps3.resize(dx);
  if (dx == 1 && dy == 1) {
    const double hx = first_spec.h_x[0], hy = first_spec.h_y[0];
    rep.eps3[0] = k.a_bound ? eps3_1d_impl(nn, hx, hy, k.c_f, vol, config.variant, *k.a_bound)
                            : asymptotic_eps3_1d(nn, hx, hy, k.c_f, k.c_b1, k.c_b2, vol, config.variant);
  } else {
    for (std::size_t i = 0; i < dx; ++i)
      rep.eps3[i] = asymptotic_eps3_multi(nn, first_spec.h_x, first_spec.h_y, k.c_f, k.deriv_bound, vol, i, k.a_bound);
  }
  const double half = std::sqrt(*std::max_element(rep.eps3.begin(), rep.eps3.end()));
  rep.interval_lo = std::max(0.0, rep.overall - half);
  rep.interval_hi = rep.overall + half;

  rep.n = n;
  rep.m = config.m;
  rep.grid_resolution = res;
  rep.h_x = first_spec.h_x;
  rep.h_y = first_spec.h_y;
  rep.x_domain = x_box;
  rep.y_domain = y_box;
  rep.x_coords = x_coords;
  rep.seed = seed;
  return rep;
}

}  // namespace

LipschitzReport estimate_lc(const ConditionalSampler& sampler, const Box& x_domain, std::optional<Box> y_domain,
                            const LcConfig& config, std::uint64_t seed, std::vector<std::size_t> x_coords) {
  config.validate();
  if (x_domain.dim() != sampler.x_dim()) throw ValidationError("lc: domain dimension differs from the sampler");
  if (x_coords.empty()) {
    x_coords.resize(sampler.x_dim());
    std::iota(x_coords.begin(), x_coords.end(), std::size_t{0});
  }
  for (std::size_t a = 0; a < x_coords.size(); ++a) {
    if (x_coords[a] >= sampler.x_dim())
      throw ValidationError("lc: mask coordinate " + std::to_string(x_coords[a]) + " out of range");
    for (std::size_t b = 0; b < a; ++b)
      if (x_coords[a] == x_coords[b]) throw ValidationError("lc: repeated mask coordinate");
  }
  const std::size_t dy = sampler.y_dim();
  if (y_domain && y_domain->dim() != dy) throw ValidationError("lc: successor domain has wrong dimension");
  const Box x_box = x_domain.project(x_coords);

  return run_lc(
      [&](std::size_t mu) { return draw_iteration(sampler, x_domain, x_coords, config.n, seed, mu); }, x_box, dy,
      std::move(y_domain), config, config.n, seed, x_coords);
}

LipschitzReport estimate_lc(std::span<const TransitionSamples> batches, const Box& x_domain, std::optional<Box> y_domain,
                            const LcConfig& config) {
  if (batches.empty()) throw ValidationError("lc: no sample batches");
  const std::size_t dx = batches[0].x_dim(), dy = batches[0].y_dim(), n = batches[0].size();
  for (const auto& b : batches)
    if (b.x_dim() != dx || b.y_dim() != dy || b.size() != n)
      throw ValidationError("lc: sample batches differ in size or dimension");
  if (n < 2) throw ValidationError("lc: need at least 2 samples per batch");
  if (x_domain.dim() != dx) throw ValidationError("lc: domain dimension differs from the samples");
  if (y_domain && y_domain->dim() != dy) throw ValidationError("lc: successor domain has wrong dimension");
  LcConfig c = config;
  c.m = batches.size();
  c.n = n;
  std::vector<std::size_t> coords(dx);
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  return run_lc([&](std::size_t mu) { return batches[mu]; }, x_domain, dy, std::move(y_domain), c, n, 0, coords);
}

std::vector<LipschitzReport> compositional_lc(const TransitionSampler& system, std::size_t action,
                                              const Box& x_domain, std::span<const CompositionalFactor> factors,
                                              const LcConfig& config, std::uint64_t seed) {
  std::vector<LipschitzReport> out;
  out.reserve(factors.size());
  for (std::size_t f = 0; f < factors.size(); ++f) {
    const auto& fac = factors[f];
    CoordinateSampler sampler(system, action, fac.coord);
    out.push_back(estimate_lc(sampler, x_domain, fac.y_domain, config, derive_seed(seed, {fac.coord}), fac.mask));
  }
  return out;
}

std::size_t auto_grid_resolution(std::size_t total_dim) {
  if (total_dim <= 2) return 50;
  if (total_dim <= 4) return 15;
  if (total_dim <= 6) return 7;
  return 4;
}

double partition_size(double epsilon, double horizon, double L, double leb) {
  if (!(epsilon > 0.0) || !(horizon > 0.0) || !(L > 0.0) || !(leb > 0.0))
    throw ValidationError("partition_size: arguments must be positive");
  return epsilon / (horizon * L * leb);
}

}  // namespace npv
