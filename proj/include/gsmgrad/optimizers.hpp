#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gsmgrad/common.hpp"
#include "gsmgrad/objectives.hpp"
#include "gsmgrad/simplex.hpp"
#include "gsmgrad/subproblem.hpp"

namespace gsmgrad {

enum class Algorithm { kGsmgrad, kSgsmgrad, kGsmgradFa };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kGsmgrad: return "gsmgrad";
    case Algorithm::kSgsmgrad: return "sgsmgrad";
    case Algorithm::kGsmgradFa: return "gsmgrad-fa";
  }
  return "?";
}

inline Algorithm algorithm_from_string(const std::string& tag) {
  if (tag == "gsmgrad") return Algorithm::kGsmgrad;
  if (tag == "sgsmgrad") return Algorithm::kSgsmgrad;
  if (tag == "gsmgrad-fa") return Algorithm::kGsmgradFa;
  throw std::invalid_argument("unknown algorithm tag '" + tag +
                              "'; valid tags: gsmgrad, sgsmgrad, gsmgrad-fa");
}

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::kGsmgrad;
  double alpha = 0.0;        // x step size
  double beta = 0.0;         // w step size
  double beta_prime = 0.0;   // warm-start step; <= 0 means spectral auto
  double rho = 0.0;          // l2 regularizer on w
  long warm_start_iters = 0; // N
  long horizon = 0;          // T
  int batch = 1;             // stochastic mini-batch size
  std::uint64_t seed = 0;
};

struct OptimizerState {
  long t = 0;
  ParamPoint x;
  WeightVector w;
  Vec last_direction;
  ObjectiveValues cached_values;  // F(x_t), forward-only variant
  bool has_cached_values = false;
};

struct IterationRecord {
  long t = 0;
  ParamPoint x;
  WeightVector w;
  double stationarity_wt = 0.0;   // ||grad F(x_t) w_t||^2
  double stationarity_min = 0.0;  // min_w ||grad F(x_t) w||^2
  double ca_distance = 0.0;       // ||grad F(x_t) w_t - grad F(x_t) w*||
  ObjectiveValues values;
  Vec grad_norms;
};

namespace detail {

// Oracle failures surface with the iteration index attached.
template <typename Fn>
auto with_iteration(long t, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericOverflowError& e) {
    std::ostringstream os;
    os << e.what() << " at iteration " << t;
    throw NumericOverflowError(os.str(), e.task());
  }
}

inline double auto_beta_prime(const Mat& gram, double rho) {
  return 1.0 / std::max(lambda_max_psd(gram) + rho, 1e-30);
}

}  // namespace detail

/// N projected-gradient steps on the weight problem with the Gram matrix
/// frozen at x0; grad F(x0)'grad F(x0) is computed once and reused. Brings
/// w close to the regularized minimizer before the main loop.
inline WeightVector warm_start(const ObjectiveProblem& problem,
                               const ParamPoint& x0, const WeightVector& w0,
                               double rho, double beta_prime, long N) {
  if (!in_simplex(w0, 1e-9))
    throw std::invalid_argument("warm_start: w0 must lie on the simplex");
  if (rho < 0.0) throw std::invalid_argument("warm_start: rho must be >= 0");
  if (N <= 0) return w0;
  const GradientMatrix G = eval_gradients(problem, x0);
  const Mat gram = G.transpose() * G;
  const double bp =
      beta_prime > 0.0 ? beta_prime : detail::auto_beta_prime(gram, rho);
  WeightVector w = w0;
  for (long n = 0; n < N; ++n)
    w = project_simplex(w - bp * (gram * w + rho * w));
  return w;
}

/// One deterministic step: both updates read (x_t, w_t) before either
/// writes, and the single gradient evaluation is shared by the Gram product
/// and the update direction.
inline void gsmgrad_step(const ObjectiveProblem& problem, OptimizerState& s,
                         const OptimizerConfig& c) {
  const GradientMatrix G =
      detail::with_iteration(s.t, [&] { return eval_gradients(problem, s.x); });
  const Vec d = G * s.w;
  WeightVector w_next =
      project_simplex(s.w - c.beta * (G.transpose() * d + c.rho * s.w));
  s.x -= c.alpha * d;
  s.w = std::move(w_next);
  s.last_direction = d;
  ++s.t;
}

/// One stochastic step with three independent gradient estimates: G1 drives
/// the x update, G2'G3 the weight update, making the weight gradient
/// estimator unbiased.
inline void sgsmgrad_step(const ObjectiveProblem& problem, OptimizerState& s,
                          const OptimizerConfig& c, const NoiseModel& noise) {
  const auto t = static_cast<std::uint64_t>(s.t);
  const GradientMatrix G1 = detail::with_iteration(s.t, [&] {
    return stochastic_gradients(problem, s.x, noise, t, 1, c.batch);
  });
  const GradientMatrix G2 = detail::with_iteration(s.t, [&] {
    return stochastic_gradients(problem, s.x, noise, t, 2, c.batch);
  });
  const GradientMatrix G3 = detail::with_iteration(s.t, [&] {
    return stochastic_gradients(problem, s.x, noise, t, 3, c.batch);
  });
  const Vec d = G1 * s.w;
  const Vec u = G3 * s.w;
  WeightVector w_next =
      project_simplex(s.w - c.beta * (G2.transpose() * u + c.rho * s.w));
  s.x -= c.alpha * d;
  s.w = std::move(w_next);
  s.last_direction = d;
  ++s.t;
}

/// Forward-only step: the weight update replaces G'G w by the function-value
/// difference (F(x_t) - F(x_{t+1})) / alpha. F(x_t) is reused from the
/// previous step's evaluation, so each step costs one gradient and one value
/// oracle call (plus one extra value call at t = 0).
inline void gsmgrad_fa_step(const ObjectiveProblem& problem, OptimizerState& s,
                            const OptimizerConfig& c) {
  if (!(c.alpha > 0.0))
    throw std::invalid_argument("gsmgrad_fa_step: alpha must be > 0");
  const GradientMatrix G =
      detail::with_iteration(s.t, [&] { return eval_gradients(problem, s.x); });
  const Vec d = G * s.w;
  if (!s.has_cached_values) {
    s.cached_values =
        detail::with_iteration(s.t, [&] { return eval_values(problem, s.x); });
    s.has_cached_values = true;
  }
  const ParamPoint x_next = s.x - c.alpha * d;
  const ObjectiveValues f_next = detail::with_iteration(
      s.t, [&] { return eval_values(problem, x_next); });
  WeightVector w_next = project_simplex(
      s.w - c.beta * ((s.cached_values - f_next) / c.alpha + c.rho * s.w));
  s.x = x_next;
  s.w = std::move(w_next);
  s.cached_values = f_next;
  s.last_direction = d;
  ++s.t;
}

struct RunResult {
  std::vector<IterationRecord> records;
  long iterations_completed = 0;
  bool diverged = false;
  std::string error;
  ParamPoint final_x;
  WeightVector final_w;
};

/// Drives one of the three algorithms for `horizon` steps, after an optional
/// warm start. Records the state at t = 0, every record_every-th iteration,
/// t = T-1, and the final state t = T. On an oracle overflow the run stops
/// and the partial trace is returned with the diverged flag set; nothing is
/// clipped.
inline RunResult run(const ObjectiveProblem& problem, const OptimizerConfig& c,
                     const NoiseModel* noise, long record_every,
                     const ParamPoint& x0,
                     const WeightVector* w0 = nullptr) {
  if (!(c.alpha > 0.0)) throw std::invalid_argument("run: alpha must be > 0");
  if (!(c.beta > 0.0)) throw std::invalid_argument("run: beta must be > 0");
  if (c.rho < 0.0) throw std::invalid_argument("run: rho must be >= 0");
  if (c.horizon < 0) throw std::invalid_argument("run: horizon must be >= 0");
  if (c.batch < 1) throw std::invalid_argument("run: batch must be >= 1");
  if (c.warm_start_iters < 0)
    throw std::invalid_argument("run: warm_start_iters must be >= 0");
  if (record_every < 1)
    throw std::invalid_argument("run: record_every must be >= 1");
  if (static_cast<int>(x0.size()) != problem.m || !x0.allFinite())
    throw std::invalid_argument("run: x0 must be a finite point in R^m");
  const bool stochastic = c.algorithm == Algorithm::kSgsmgrad;
  if (stochastic && noise == nullptr)
    throw std::invalid_argument("run: noise model required for sgsmgrad");
  if (!stochastic && noise != nullptr)
    throw std::invalid_argument("run: noise model only valid for sgsmgrad");

  OptimizerState s;
  s.x = x0;
  s.w = w0 ? *w0 : uniform_weights(problem.K);
  if (!in_simplex(s.w, 1e-9))
    throw std::invalid_argument("run: w0 must lie on the simplex");

  RunResult result;
  WeightVector wstar_cache;  // warm start for the per-record oracle solves

  auto record = [&](long t) {
    IterationRecord rec;
    rec.t = t;
    rec.x = s.x;
    rec.w = s.w;
    rec.values =
        detail::with_iteration(t, [&] { return eval_values(problem, s.x); });
    const GradientMatrix G =
        detail::with_iteration(t, [&] { return eval_gradients(problem, s.x); });
    rec.stationarity_wt = (G * s.w).squaredNorm();
    const WeightVector* warm =
        wstar_cache.size() == problem.K ? &wstar_cache : nullptr;
    const SubproblemSolution star =
        solve_w_rho(G, 0.0, kOracleTol, kOracleMaxIter, warm);
    wstar_cache = star.weights;
    rec.stationarity_min = (G * star.weights).squaredNorm();
    rec.ca_distance = (G * s.w - G * star.weights).norm();
    rec.grad_norms = G.colwise().norm();
    result.records.push_back(std::move(rec));
  };

  try {
    if (c.warm_start_iters > 0)
      s.w = warm_start(problem, s.x, s.w, c.rho, c.beta_prime,
                       c.warm_start_iters);
    long last_recorded = -1;
    for (long t = 0; t < c.horizon; ++t) {
      if (t % record_every == 0 || t == c.horizon - 1) {
        record(t);
        last_recorded = t;
      }
      switch (c.algorithm) {
        case Algorithm::kGsmgrad: gsmgrad_step(problem, s, c); break;
        case Algorithm::kSgsmgrad: sgsmgrad_step(problem, s, c, *noise); break;
        case Algorithm::kGsmgradFa: gsmgrad_fa_step(problem, s, c); break;
      }
      result.iterations_completed = t + 1;
    }
    if (last_recorded < c.horizon) record(c.horizon);
  } catch (const NumericOverflowError& e) {
    result.diverged = true;
    result.error = e.what();
  }
  result.final_x = s.x;
  result.final_w = s.w;
  return result;
}

}  // namespace gsmgrad
