#pragma once

#include <limits>

#include "gsmgrad/common.hpp"
#include "gsmgrad/simplex.hpp"

namespace gsmgrad {

/// Result of minimizing J(w) = 1/2 ||G w||^2 + rho/2 ||w||^2 over the
/// simplex. `converged` means the fixed-point residual
/// ||w - proj(w - step * grad J(w))|| dropped below the requested tolerance.
struct SubproblemSolution {
  WeightVector weights;
  double objective_value = 0.0;
  long iterations_used = 0;
  bool converged = false;
};

// Solver presets: the oracle mode backs diagnostics and tests, the fast mode
// is for per-iteration instrumentation.
inline constexpr double kOracleTol = 1e-12;
inline constexpr long kOracleMaxIter = 1000000;
inline constexpr double kFastTol = 1e-6;
inline constexpr long kFastMaxIter = 10000;

/// Largest eigenvalue of a small PSD matrix by 50 power iterations. The
/// start vector is seeded from a hash of the matrix bytes so repeated calls
/// are deterministic.
inline double lambda_max_psd(const Mat& gram) {
  const Eigen::Index K = gram.rows();
  if (K == 1) return gram(0, 0);
  SplitMix rng(detail::hash_bytes(gram.data(),
                                  static_cast<std::size_t>(gram.size())));
  Vec v(K);
  for (Eigen::Index i = 0; i < K; ++i) v[i] = rng.uniform(-1.0, 1.0);
  if (v.norm() < 1e-12) v.setOnes();
  v.normalize();
  for (int it = 0; it < 50; ++it) {
    Vec u = gram * v;
    const double n = u.norm();
    if (n == 0.0) return 0.0;
    v = u / n;
  }
  return v.dot(gram * v);
}

/// Projected gradient descent on the rho-regularized weight problem
///   min_{w in W} 1/2 ||G w||^2 + rho/2 ||w||^2
/// with step 1/(lambda_max(G'G) + rho). For rho > 0 the problem is
/// rho-strongly convex and the minimizer unique; for rho = 0 the solver
/// returns whichever minimizer it reaches (G w is unique either way).
inline SubproblemSolution solve_w_rho(const GradientMatrix& G, double rho,
                                      double tol, long max_iter,
                                      const WeightVector* warm_start = nullptr) {
  if (!G.allFinite())
    throw std::invalid_argument("solve_w_rho: non-finite gradient matrix");
  if (!(tol > 0.0)) throw std::invalid_argument("solve_w_rho: tol must be > 0");
  if (rho < 0.0) throw std::invalid_argument("solve_w_rho: rho must be >= 0");
  if (max_iter < 1)
    throw std::invalid_argument("solve_w_rho: max_iter must be >= 1");

  const int K = static_cast<int>(G.cols());
  const Mat gram = G.transpose() * G;
  const double step = 1.0 / std::max(lambda_max_psd(gram) + rho, 1e-30);

  SubproblemSolution sol;
  WeightVector w = warm_start ? project_simplex(*warm_start)
                              : uniform_weights(K);
  for (long it = 0; it < max_iter; ++it) {
    const Vec grad = gram * w + rho * w;
    WeightVector w_next = project_simplex(w - step * grad);
    const double residual = (w_next - w).norm();
    w = std::move(w_next);
    sol.iterations_used = it + 1;
    if (residual <= tol) {
      sol.converged = true;
      break;
    }
  }
  sol.weights = std::move(w);
  sol.objective_value = 0.5 * (G * sol.weights).squaredNorm() +
                        0.5 * rho * sol.weights.squaredNorm();
  return sol;
}

/// min_{w in W} ||G w||^2; zero exactly at Pareto stationary points. The
/// minimum value is unique even when the minimizer is not.
inline double stationarity_measure(const GradientMatrix& G,
                                   double tol = kOracleTol) {
  const SubproblemSolution sol = solve_w_rho(G, 0.0, tol, kOracleMaxIter);
  return (G * sol.weights).squaredNorm();
}

/// d = G w, the update direction induced by the weights w.
inline Vec ca_direction(const GradientMatrix& G, const WeightVector& w) {
  if (G.cols() != w.size())
    throw std::invalid_argument("ca_direction: dimension mismatch");
  return G * w;
}

/// ||G w - G w*|| with w* a minimizer of ||G w||^2 over the simplex; G w* is
/// unique, so the value is well-defined up to solver tolerance.
inline double ca_distance(const GradientMatrix& G, const WeightVector& w,
                          double tol = kOracleTol) {
  if (G.cols() != w.size())
    throw std::invalid_argument("ca_distance: dimension mismatch");
  const SubproblemSolution sol = solve_w_rho(G, 0.0, tol, kOracleMaxIter);
  return (G * w - G * sol.weights).norm();
}

}  // namespace gsmgrad
