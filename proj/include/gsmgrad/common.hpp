#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>

namespace gsmgrad {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// x in R^m, F(x) in R^K, gradient matrix is m x K with column k = grad f_k(x).
using ParamPoint = Vec;
using ObjectiveValues = Vec;
using WeightVector = Vec;
using GradientMatrix = Mat;

inline constexpr double kPi = 3.14159265358979323846;

/// Raised when an objective value or gradient evaluates to a non-finite
/// number. Carries the offending task index (0-based).
class NumericOverflowError : public std::runtime_error {
 public:
  NumericOverflowError(const std::string& what, int task)
      : std::runtime_error(what), task_(task) {}
  int task() const { return task_; }

 private:
  int task_ = -1;
};

/// Raised for requests outside the supported range (combinatorial oracles,
/// problems without known lower bounds, ...).
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform in (0, 1]; never returns 0 so it is safe under log().
inline double to_unit(std::uint64_t h) {
  return static_cast<double>((h >> 11) + 1) * 0x1.0p-53;
}

inline std::uint64_t hash_bytes(const double* data, std::size_t n) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t b = 0;
    std::memcpy(&b, data + i, sizeof(b));
    h = splitmix64(h ^ b);
  }
  return h;
}

}  // namespace detail

/// Small counter-free PRNG for sampling test points and initial weights;
/// sequential but fully deterministic for a given seed.
class SplitMix {
 public:
  explicit SplitMix(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double uniform() { return detail::to_unit(next()); }              // (0,1]
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double gaussian() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

 private:
  std::uint64_t state_;
};

/// Counter-based standard Gaussian keyed on (seed, t, draw, index): equal
/// keys reproduce the same value, distinct keys are independent draws.
inline double counter_gaussian(std::uint64_t seed, std::uint64_t t,
                               std::uint64_t draw, std::uint64_t index) {
  using detail::splitmix64;
  std::uint64_t h = splitmix64(seed ^ 0x243f6a8885a308d3ULL);
  h = splitmix64(h ^ t);
  h = splitmix64(h ^ draw);
  h = splitmix64(h ^ index);
  const double u1 = detail::to_unit(splitmix64(h ^ 0x13198a2e03707344ULL));
  const double u2 = detail::to_unit(splitmix64(h ^ 0xa4093822299f31d0ULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

}  // namespace gsmgrad
