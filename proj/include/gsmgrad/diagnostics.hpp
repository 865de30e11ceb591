#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gsmgrad/common.hpp"
#include "gsmgrad/objectives.hpp"
#include "gsmgrad/optimizers.hpp"
#include "gsmgrad/subproblem.hpp"

namespace gsmgrad {

/// Per-record distance between the recorded update direction G w_t and the
/// conflict-avoidant direction G w*, recomputed with the oracle-mode solver.
/// running_avg_sq[i] is the mean of the squared distances over records 0..i.
struct CaTraceResult {
  std::vector<double> distance;
  std::vector<double> running_avg_sq;
};

inline CaTraceResult ca_trace(const ObjectiveProblem& problem,
                              const std::vector<IterationRecord>& records,
                              double tol = kOracleTol) {
  CaTraceResult out;
  out.distance.reserve(records.size());
  out.running_avg_sq.reserve(records.size());
  WeightVector cache;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const GradientMatrix G = eval_gradients(problem, records[i].x);
    const WeightVector* warm = cache.size() == problem.K ? &cache : nullptr;
    const SubproblemSolution star =
        solve_w_rho(G, 0.0, tol, kOracleMaxIter, warm);
    cache = star.weights;
    const double dist = (G * records[i].w - G * star.weights).norm();
    out.distance.push_back(dist);
    sum_sq += dist * dist;
    out.running_avg_sq.push_back(sum_sq / static_cast<double>(i + 1));
  }
  return out;
}

/// One scatter point of the local-smoothness diagnostic.
struct SmoothnessSample {
  double grad_norm = 0.0;  // ||grad f_task(x_t)||
  double local_L = 0.0;    // ||grad f_task(x_{t+1}) - grad f_task(x_t)|| / ||x_{t+1} - x_t||
  int task = 0;
  long t = 0;
};

struct ScanResult {
  std::vector<SmoothnessSample> samples;
  long skipped = 0;  // consecutive pairs with negligible movement
};

/// Local Lipschitz constant of each task gradient estimated by differencing
/// consecutive trajectory records, scattered against the gradient norm.
/// Pairs that moved less than 1e-12 are skipped and tallied.
inline ScanResult local_smoothness_scan(
    const ObjectiveProblem& problem,
    const std::vector<IterationRecord>& records) {
  ScanResult out;
  if (records.size() < 2) return out;
  GradientMatrix G_prev = eval_gradients(problem, records[0].x);
  for (std::size_t i = 0; i + 1 < records.size(); ++i) {
    const GradientMatrix G_next = eval_gradients(problem, records[i + 1].x);
    const double dx = (records[i + 1].x - records[i].x).norm();
    if (dx <= 1e-12) {
      ++out.skipped;
      G_prev = G_next;
      continue;
    }
    for (int k = 0; k < problem.K; ++k) {
      SmoothnessSample s;
      s.grad_norm = G_prev.col(k).norm();
      s.local_L = (G_next.col(k) - G_prev.col(k)).norm() / dx;
      s.task = k;
      s.t = records[i].t;
      out.samples.push_back(s);
    }
    G_prev = G_next;
  }
  return out;
}

struct RegressionSummary {
  double slope = 0.0;
  double intercept = 0.0;
  double pearson = 0.0;
  long n = 0;
};

/// Least-squares fit of local_L against grad_norm for one task (task = -1
/// pools all tasks).
inline RegressionSummary regress_scan(const ScanResult& scan, int task = -1) {
  RegressionSummary r;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (const SmoothnessSample& s : scan.samples) {
    if (task >= 0 && s.task != task) continue;
    ++r.n;
    sx += s.grad_norm;
    sy += s.local_L;
    sxx += s.grad_norm * s.grad_norm;
    syy += s.local_L * s.local_L;
    sxy += s.grad_norm * s.local_L;
  }
  if (r.n < 2) return r;
  const double n = static_cast<double>(r.n);
  const double vx = sxx - sx * sx / n;
  const double vy = syy - sy * sy / n;
  const double cov = sxy - sx * sy / n;
  if (vx <= 0.0) return r;
  r.slope = cov / vx;
  r.intercept = (sy - r.slope * sx) / n;
  r.pearson = vy > 0.0 ? cov / std::sqrt(vx * vy) : 0.0;
  return r;
}

/// Per-task Taylor remainder of one step along d = G w:
///   R_k = f_k(x - alpha d) - f_k(x) + alpha grad f_k(x)' d.
inline Vec remainder_measure(const ObjectiveProblem& problem,
                             const ParamPoint& x, const WeightVector& w,
                             double alpha) {
  if (alpha < 0.0 || !std::isfinite(alpha))
    throw std::invalid_argument("remainder_measure: alpha must be >= 0");
  if (!in_simplex(w, 1e-9))
    throw std::invalid_argument("remainder_measure: w must lie on the simplex");
  const GradientMatrix G = eval_gradients(problem, x);
  const Vec d = G * w;
  const ObjectiveValues f0 = eval_values(problem, x);
  const ObjectiveValues f1 = eval_values(problem, x - alpha * d);
  return f1 - f0 + alpha * (G.transpose() * d);
}

/// Method-by-metric score table with a designated baseline row.
struct MetricTable {
  std::vector<std::string> metric_names;
  std::vector<int> higher_is_better;  // l_k: 1 if larger is better
  std::string baseline;
  std::vector<std::pair<std::string, Vec>> rows;

  const Vec& row(const std::string& method) const {
    for (const auto& [name, vals] : rows)
      if (name == method) return vals;
    throw std::invalid_argument("MetricTable: no row for method '" + method +
                                "'");
  }
};

/// Mean signed relative per-metric change of `method` versus the baseline,
/// in percent; lower is better.
inline double delta_m(const MetricTable& table, const std::string& method) {
  const Vec& base = table.row(table.baseline);
  const Vec& m = table.row(method);
  const auto K = static_cast<std::size_t>(base.size());
  if (static_cast<std::size_t>(m.size()) != K ||
      table.higher_is_better.size() != K)
    throw std::invalid_argument("delta_m: inconsistent metric counts");
  double acc = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    if (base[i] == 0.0)
      throw std::invalid_argument(
          "delta_m: zero baseline for metric '" +
          (k < table.metric_names.size() ? table.metric_names[k]
                                         : std::to_string(k)) +
          "'");
    const double sign = table.higher_is_better[k] ? -1.0 : 1.0;
    acc += sign * (m[i] - base[i]) / base[i];
  }
  return 100.0 * acc / static_cast<double>(K);
}

struct PhiBoundEntry {
  int point = 0;
  int task = 0;
  double phi = 0.0;     // ||grad f||^2 / (2 ell(2 ||grad f||))
  double gap = 0.0;     // f(x) - f*
  double margin = 0.0;  // gap - phi
  bool pass = false;
};

struct PhiBoundReport {
  std::vector<PhiBoundEntry> entries;
  double worst_margin = std::numeric_limits<double>::infinity();
  bool pass = true;
};

/// Checks phi(||grad f_k(x)||) <= f_k(x) - f_k* at each probe point, with
/// slack -1e-9. Requires known lower bounds and a smoothness descriptor.
inline PhiBoundReport check_phi_bound(const ObjectiveProblem& problem,
                                      const std::vector<ParamPoint>& xs) {
  if (!problem.has_lower_bounds)
    throw UnsupportedError("check_phi_bound: problem has no known lower bounds");
  PhiBoundReport report;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const ObjectiveValues f = eval_values(problem, xs[i]);
    const GradientMatrix G = eval_gradients(problem, xs[i]);
    for (int k = 0; k < problem.K; ++k) {
      PhiBoundEntry e;
      e.point = static_cast<int>(i);
      e.task = k;
      e.phi = problem.smoothness.phi(G.col(k).norm());
      e.gap = f[k] - problem.lower_bounds[k];
      e.margin = e.gap - e.phi;
      e.pass = e.margin >= -1e-9;
      report.worst_margin = std::min(report.worst_margin, e.margin);
      report.pass = report.pass && e.pass;
      report.entries.push_back(e);
    }
  }
  return report;
}

}  // namespace gsmgrad
