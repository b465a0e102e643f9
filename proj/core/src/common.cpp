#include "npv/common.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

namespace npv {

namespace {

std::string describe_point(const std::vector<double>& x) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i) os << ", ";
    os << x[i];
  }
  os << ')';
  return os.str();
}

std::atomic<unsigned> g_default_threads{0};

}  // namespace

DenominatorUnderflow::DenominatorUnderflow(std::vector<double> point, double weight_sum)
    : NumericalError("kernel weight sum " + std::to_string(weight_sum) + " below underflow floor at x = " +
                     describe_point(point) + "; too few samples near this point"),
      point_(std::move(point)),
      weight_sum_(weight_sum) {}

// ---------------------------------------------------------------------------

Box::Box(std::vector<double> lo, std::vector<double> hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() != hi_.size()) throw ValidationError("box: lower and upper bounds differ in dimension");
  if (lo_.empty()) throw ValidationError("box: zero-dimensional box");
  for (std::size_t i = 0; i < lo_.size(); ++i) {
    if (std::isnan(lo_[i]) || std::isnan(hi_[i]) || !(lo_[i] < hi_[i]))
      throw ValidationError("box: need lo < hi in dimension " + std::to_string(i));
  }
}

Box Box::cube(std::size_t d, double lo, double hi) {
  return Box(std::vector<double>(d, lo), std::vector<double>(d, hi));
}

double Box::volume() const noexcept {
  double v = 1.0;
  for (std::size_t i = 0; i < lo_.size(); ++i) v *= hi_[i] - lo_[i];
  return v;
}

std::vector<double> Box::center() const {
  std::vector<double> c(lo_.size());
  for (std::size_t i = 0; i < lo_.size(); ++i) c[i] = 0.5 * (lo_[i] + hi_[i]);
  return c;
}

bool Box::contains(std::span<const double> x, double tol) const {
  if (x.size() != lo_.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] >= lo_[i] - tol && x[i] <= hi_[i] + tol)) return false;
  return true;
}

bool Box::contains(const Box& other, double tol) const {
  if (other.dim() != dim()) return false;
  for (std::size_t i = 0; i < lo_.size(); ++i)
    if (other.lo_[i] < lo_[i] - tol || other.hi_[i] > hi_[i] + tol) return false;
  return true;
}

bool Box::overlaps(const Box& other) const {
  if (other.dim() != dim()) return false;
  for (std::size_t i = 0; i < lo_.size(); ++i)
    if (other.hi_[i] <= lo_[i] || other.lo_[i] >= hi_[i]) return false;
  return true;
}

Box Box::project(std::span<const std::size_t> coords) const {
  std::vector<double> lo, hi;
  lo.reserve(coords.size());
  hi.reserve(coords.size());
  for (auto c : coords) {
    if (c >= dim()) throw ValidationError("box: projection coordinate " + std::to_string(c) + " out of range");
    lo.push_back(lo_[c]);
    hi.push_back(hi_[c]);
  }
  return Box(std::move(lo), std::move(hi));
}

// ---------------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t s = splitmix64(seed);
  for (auto p : path) s = splitmix64(s ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

// ---------------------------------------------------------------------------

unsigned default_threads() noexcept {
  unsigned n = g_default_threads.load();
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

void set_default_threads(unsigned n) noexcept { g_default_threads.store(n); }

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  if (threads == 0) threads = default_threads();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }

  std::mutex mu;
  std::size_t failed_index = count;
  std::exception_ptr failure;
  auto worker = [&](unsigned t) {
    for (std::size_t i = t; i < count; i += threads) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------

double normal_pdf(double z) noexcept { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_mass(double a, double b) noexcept {
  if (!(a < b)) return 0.0;
  // Work in the tail that keeps both terms small.
  if (a >= 0.0) return 0.5 * (std::erfc(a / std::sqrt(2.0)) - std::erfc(b / std::sqrt(2.0)));
  if (b <= 0.0) return 0.5 * (std::erfc(-b / std::sqrt(2.0)) - std::erfc(-a / std::sqrt(2.0)));
  return 1.0 - 0.5 * std::erfc(-a / std::sqrt(2.0)) - 0.5 * std::erfc(b / std::sqrt(2.0));
}

double pairwise_sum(std::span<const double> v) noexcept {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf, ptr);
}

double parse_double(std::string_view token) {
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\t' || token.back() == '\r')) token.remove_suffix(1);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (token.empty() || ec != std::errc() || ptr != token.data() + token.size())
    throw ValidationError("not a number: '" + std::string(token) + "'");
  return v;
}

}  // namespace npv
