#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace npv {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, out-of-range parameters, inconsistent dimensions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A requested computation exceeds a configured sample or memory budget.
class BudgetError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The kernel weight sum at a query point fell below the underflow floor:
/// no sample lies within the effective kernel support of the point.
class DenominatorUnderflow : public NumericalError {
 public:
  DenominatorUnderflow(std::vector<double> point, double weight_sum);

  const std::vector<double>& point() const noexcept { return point_; }
  double weight_sum() const noexcept { return weight_sum_; }

 private:
  std::vector<double> point_;
  double weight_sum_;
};

/// An interval row violates lo <= up or sum(lo) <= 1 <= sum(up).
class InfeasibleRow : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Axis-aligned hyper-rectangle [lo_1, hi_1] x ... x [lo_d, hi_d].
/// Bounds may be infinite; lo < hi is enforced in every dimension.
class Box {
 public:
  Box() = default;
  Box(std::vector<double> lo, std::vector<double> hi);

  /// The cube [lo, hi]^d.
  static Box cube(std::size_t d, double lo, double hi);

  std::size_t dim() const noexcept { return lo_.size(); }
  double lo(std::size_t i) const { return lo_.at(i); }
  double hi(std::size_t i) const { return hi_.at(i); }
  double width(std::size_t i) const { return hi_.at(i) - lo_.at(i); }
  std::span<const double> lower() const noexcept { return lo_; }
  std::span<const double> upper() const noexcept { return hi_; }

  double volume() const noexcept;
  std::vector<double> center() const;

  /// Closed containment with an absolute slack `tol` per coordinate.
  bool contains(std::span<const double> x, double tol = 0.0) const;
  /// True if `other` lies inside this box (closed, with slack `tol`).
  bool contains(const Box& other, double tol = 0.0) const;
  /// True if the interiors intersect.
  bool overlaps(const Box& other) const;

  /// Restriction to the listed coordinates, in order.
  Box project(std::span<const std::size_t> coords) const;

  bool operator==(const Box&) const = default;

 private:
  std::vector<double> lo_;
  std::vector<double> hi_;
};

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

/// Every random stream in the library is a 64-bit Mersenne Twister seeded
/// from a root seed through SplitMix64 mixing of a path of stream indices.
/// Child streams derived from distinct paths are statistically independent
/// and do not depend on the order in which they are created.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed of the child stream reached from `seed` by following `path`.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept;

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
  return Rng(derive_seed(seed, path));
}

// ---------------------------------------------------------------------------
// Parallelism
// ---------------------------------------------------------------------------

/// Number of worker threads used when a caller passes 0.
unsigned default_threads() noexcept;
void set_default_threads(unsigned n) noexcept;

/// Runs fn(i) for i in [0, count) on up to `threads` workers (0 = default).
/// Work is statically partitioned; if several indices throw, the exception
/// from the lowest index is rethrown after all workers join.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Numerics
// ---------------------------------------------------------------------------

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934381868;

/// Standard normal density.
double normal_pdf(double z) noexcept;
/// Standard normal CDF, accurate in both tails.
double normal_cdf(double z) noexcept;
/// Phi(b) - Phi(a) for a <= b without cancellation in the tails.
double normal_mass(double a, double b) noexcept;

/// Pairwise (cascade) summation.
double pairwise_sum(std::span<const double> v) noexcept;

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
/// Strict parse of a whole token as a double; throws ValidationError.
double parse_double(std::string_view token);

}  // namespace npv
