#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gsmgrad/common.hpp"

namespace gsmgrad {

/// Non-decreasing bound ell on the Hessian norm as a function of the
/// gradient norm: ||H f(x)|| <= ell(||grad f(x)||).
struct SmoothnessDescriptor {
  enum class Family { kConstant, kAffine, kPower, kComposite };

  Family family = Family::kConstant;
  double L0 = 1.0;     // constant term
  double L1 = 0.0;     // slope (affine/power)
  double gamma = 1.0;  // exponent (power)
  std::function<double(double)> composite;  // used only by kComposite

  double ell(double u) const {
    switch (family) {
      case Family::kConstant: return L0;
      case Family::kAffine: return L0 + L1 * u;
      case Family::kPower: return L0 + L1 * std::pow(u, gamma);
      case Family::kComposite: return composite(u);
    }
    return L0;
  }

  // phi(a) = a^2 / (2 ell(2a)); converts function-value gaps into
  // gradient-norm bounds.
  double phi(double a) const { return a * a / (2.0 * ell(2.0 * a)); }
};

/// Gaussian gradient noise: per-task perturbation has second moment sigma^2.
struct NoiseModel {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Oracle bundle for a K-task problem over R^m.
struct ObjectiveProblem {
  int K = 0;
  int m = 0;
  std::string name;
  std::function<ObjectiveValues(const ParamPoint&)> value_fn;
  std::function<GradientMatrix(const ParamPoint&)> gradient_fn;
  bool has_lower_bounds = false;
  Vec lower_bounds;  // size K when has_lower_bounds
  SmoothnessDescriptor smoothness;
};

namespace detail {

inline void check_dim(const ObjectiveProblem& p, const ParamPoint& x,
                      const char* where) {
  if (static_cast<int>(x.size()) != p.m) {
    std::ostringstream os;
    os << where << ": dimension mismatch, expected m=" << p.m << " got "
       << x.size();
    throw std::invalid_argument(os.str());
  }
}

}  // namespace detail

/// F(x), validated: finite entries, else the offending task is reported.
inline ObjectiveValues eval_values(const ObjectiveProblem& p,
                                   const ParamPoint& x) {
  detail::check_dim(p, x, "eval_values");
  ObjectiveValues f = p.value_fn(x);
  for (int k = 0; k < p.K; ++k) {
    if (!std::isfinite(f[k])) {
      std::ostringstream os;
      os << "numeric overflow in objective value, task " << k << " ("
         << p.name << ")";
      throw NumericOverflowError(os.str(), k);
    }
  }
  return f;
}

/// grad F(x) as an m x K matrix, column k = grad f_k(x).
inline GradientMatrix eval_gradients(const ObjectiveProblem& p,
                                     const ParamPoint& x) {
  detail::check_dim(p, x, "eval_gradients");
  GradientMatrix G = p.gradient_fn(x);
  for (int k = 0; k < p.K; ++k) {
    if (!G.col(k).allFinite()) {
      std::ostringstream os;
      os << "numeric overflow in gradient, task " << k << " (" << p.name
         << ")";
      throw NumericOverflowError(os.str(), k);
    }
  }
  return G;
}

/// grad F(x) + E with E i.i.d. zero-mean Gaussian, per-task second moment
/// sigma^2/batch. Keyed on (noise.seed, t, draw_index), so distinct keys are
/// independent and equal keys reproduce bit-identical output.
inline GradientMatrix stochastic_gradients(const ObjectiveProblem& p,
                                           const ParamPoint& x,
                                           const NoiseModel& noise,
                                           std::uint64_t t,
                                           std::uint64_t draw_index,
                                           int batch) {
  if (batch < 1)
    throw std::invalid_argument("stochastic_gradients: batch must be >= 1");
  if (noise.sigma < 0.0)
    throw std::invalid_argument("stochastic_gradients: sigma must be >= 0");
  GradientMatrix G = eval_gradients(p, x);
  if (noise.sigma == 0.0) return G;
  // Mini-batch of size n averages n unit draws; sample the average directly.
  const double scale =
      noise.sigma / std::sqrt(static_cast<double>(batch) * p.m);
  for (int k = 0; k < p.K; ++k) {
    for (int j = 0; j < p.m; ++j) {
      const std::uint64_t index =
          static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(p.m) +
          static_cast<std::uint64_t>(j);
      G(j, k) += scale * counter_gaussian(noise.seed, t, draw_index, index);
    }
  }
  return G;
}

/// Central-difference gradient oracle (test instrument), entrywise error
/// O(h^2 * third derivative).
inline GradientMatrix finite_diff_gradients(const ObjectiveProblem& p,
                                            const ParamPoint& x, double h) {
  if (!(h > 0.0))
    throw std::invalid_argument("finite_diff_gradients: h must be > 0");
  detail::check_dim(p, x, "finite_diff_gradients");
  GradientMatrix G(p.m, p.K);
  ParamPoint xp = x;
  for (int j = 0; j < p.m; ++j) {
    const double orig = x[j];
    xp[j] = orig + h;
    const ObjectiveValues fp = eval_values(p, xp);
    xp[j] = orig - h;
    const ObjectiveValues fm = eval_values(p, xp);
    xp[j] = orig;
    G.row(j) = ((fp - fm) / (2.0 * h)).transpose();
  }
  return G;
}

using ProblemParams = std::map<std::string, std::vector<double>>;

namespace detail {

inline std::vector<double> centers_or(const ProblemParams& params,
                                      std::vector<double> fallback) {
  auto it = params.find("centers");
  if (it == params.end()) return fallback;
  if (it->second.empty())
    throw std::invalid_argument("builtin_problem: empty centers list");
  return it->second;
}

inline void reject_unknown_params(const ProblemParams& params,
                                  std::initializer_list<const char*> known) {
  for (const auto& [key, _] : params) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok)
      throw std::invalid_argument("builtin_problem: unknown parameter '" +
                                  key + "'");
  }
}

inline constexpr double kEllFloor = 1e-3;  // keeps ell strictly positive at 0

}  // namespace detail

/// Built-in generalized-smooth benchmark problems with analytic gradients,
/// known per-task minima, and matching smoothness descriptors:
///   quadratic-pair  f_k(x) = 1/2 ||x - c_k 1||^2,      ell(u) = 1
///   quartic-pair    f_k(x) = 1/4 sum_j (x_j - c_k)^4,  ell(u) = e0 + 3 u^(2/3)
///   exp-pair        f_k(x) = exp(a_k' x), a_k = +-1/sqrt(m) 1, ell(u) = e0 + u
///   mixed-smooth    one quartic task and one exp task, ell = pointwise max
inline ObjectiveProblem builtin_problem(const std::string& name, int m,
                                        const ProblemParams& params = {}) {
  if (m < 1) throw std::invalid_argument("builtin_problem: m must be >= 1");
  ObjectiveProblem p;
  p.m = m;
  p.name = name;

  auto quartic_value = [](const ParamPoint& x, double c) {
    return 0.25 * (x.array() - c).pow(4).sum();
  };
  auto quartic_grad = [](const ParamPoint& x, double c) -> Vec {
    return (x.array() - c).pow(3).matrix();
  };

  if (name == "quadratic-pair") {
    detail::reject_unknown_params(params, {"centers"});
    const std::vector<double> c = detail::centers_or(params, {1.0, -1.0});
    p.K = static_cast<int>(c.size());
    p.value_fn = [c](const ParamPoint& x) {
      ObjectiveValues f(static_cast<Eigen::Index>(c.size()));
      for (std::size_t k = 0; k < c.size(); ++k)
        f[static_cast<Eigen::Index>(k)] =
            0.5 * (x.array() - c[k]).square().sum();
      return f;
    };
    p.gradient_fn = [c, m](const ParamPoint& x) {
      GradientMatrix G(m, static_cast<Eigen::Index>(c.size()));
      for (std::size_t k = 0; k < c.size(); ++k)
        G.col(static_cast<Eigen::Index>(k)) = (x.array() - c[k]).matrix();
      return G;
    };
    p.has_lower_bounds = true;
    p.lower_bounds = Vec::Zero(p.K);
    p.smoothness = {SmoothnessDescriptor::Family::kConstant, 1.0, 0.0, 1.0,
                    nullptr};
  } else if (name == "quartic-pair") {
    detail::reject_unknown_params(params, {"centers"});
    const std::vector<double> c = detail::centers_or(params, {-1.0, 1.0});
    p.K = static_cast<int>(c.size());
    p.value_fn = [c, quartic_value](const ParamPoint& x) {
      ObjectiveValues f(static_cast<Eigen::Index>(c.size()));
      for (std::size_t k = 0; k < c.size(); ++k)
        f[static_cast<Eigen::Index>(k)] = quartic_value(x, c[k]);
      return f;
    };
    p.gradient_fn = [c, m, quartic_grad](const ParamPoint& x) {
      GradientMatrix G(m, static_cast<Eigen::Index>(c.size()));
      for (std::size_t k = 0; k < c.size(); ++k)
        G.col(static_cast<Eigen::Index>(k)) = quartic_grad(x, c[k]);
      return G;
    };
    p.has_lower_bounds = true;
    p.lower_bounds = Vec::Zero(p.K);
    p.smoothness = {SmoothnessDescriptor::Family::kPower, detail::kEllFloor,
                    3.0, 2.0 / 3.0, nullptr};
  } else if (name == "exp-pair") {
    detail::reject_unknown_params(params, {});
    p.K = 2;
    const double s = 1.0 / std::sqrt(static_cast<double>(m));
    p.value_fn = [s](const ParamPoint& x) {
      const double u = s * x.sum();
      ObjectiveValues f(2);
      f << std::exp(u), std::exp(-u);
      return f;
    };
    p.gradient_fn = [s, m](const ParamPoint& x) {
      const double u = s * x.sum();
      GradientMatrix G(m, 2);
      G.col(0).setConstant(s * std::exp(u));
      G.col(1).setConstant(-s * std::exp(-u));
      return G;
    };
    p.has_lower_bounds = true;
    p.lower_bounds = Vec::Zero(2);
    p.smoothness = {SmoothnessDescriptor::Family::kAffine, detail::kEllFloor,
                    1.0, 1.0, nullptr};
  } else if (name == "mixed-smooth") {
    detail::reject_unknown_params(params, {"centers"});
    const double c = detail::centers_or(params, {1.0})[0];
    p.K = 2;
    const double s = 1.0 / std::sqrt(static_cast<double>(m));
    p.value_fn = [c, s, quartic_value](const ParamPoint& x) {
      ObjectiveValues f(2);
      f << quartic_value(x, c), std::exp(-s * x.sum());
      return f;
    };
    p.gradient_fn = [c, s, m, quartic_grad](const ParamPoint& x) {
      GradientMatrix G(m, 2);
      G.col(0) = quartic_grad(x, c);
      G.col(1).setConstant(-s * std::exp(-s * x.sum()));
      return G;
    };
    p.has_lower_bounds = true;
    p.lower_bounds = Vec::Zero(2);
    // Tasks have different descriptors; the problem-level ell is their
    // pointwise max, which stays a valid non-decreasing bound for both.
    p.smoothness.family = SmoothnessDescriptor::Family::kComposite;
    p.smoothness.composite = [](double u) {
      const double quartic = detail::kEllFloor + 3.0 * std::pow(u, 2.0 / 3.0);
      const double exp_aff = detail::kEllFloor + u;
      return std::max(quartic, exp_aff);
    };
  } else {
    throw std::invalid_argument(
        "builtin_problem: unknown name '" + name +
        "'; valid names: quadratic-pair, quartic-pair, exp-pair, "
        "mixed-smooth");
  }
  return p;
}

}  // namespace gsmgrad
