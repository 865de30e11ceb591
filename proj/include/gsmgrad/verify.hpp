#pragma once

#include <chrono>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gsmgrad/diagnostics.hpp"
#include "gsmgrad/harness.hpp"
#include "gsmgrad/objectives.hpp"
#include "gsmgrad/optimizers.hpp"
#include "gsmgrad/simplex.hpp"
#include "gsmgrad/subproblem.hpp"

namespace gsmgrad {

struct VerifyCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyReport {
  std::string suite;
  std::vector<VerifyCheck> checks;
  bool pass = true;
  double seconds = 0.0;

  void add(const std::string& name, bool ok, const std::string& detail = "") {
    checks.push_back({name, ok, detail});
    pass = pass && ok;
  }
};

namespace detail {

inline Mat random_gradient_matrix(SplitMix& rng, int m, int K,
                                  double scale = 1.0) {
  Mat G(m, K);
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < K; ++k) G(j, k) = scale * rng.gaussian();
  return G;
}

inline std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

}  // namespace detail

inline VerifyReport verify_simplex() {
  VerifyReport rep;
  rep.suite = "simplex";
  SplitMix rng(20240901);

  {  // frozen projection examples
    bool ok = true;
    Vec v1(2); v1 << 0.5, 0.5;
    ok = ok && (project_simplex(v1) - v1).norm() == 0.0;
    Vec v2(2); v2 << 1.2, -0.2;
    Vec e2(2); e2 << 1.0, 0.0;
    ok = ok && (project_simplex(v2) - e2).norm() <= 1e-12;
    Vec v3(2); v3 << 0.4, 0.4;
    Vec e3(2); e3 << 0.5, 0.5;
    ok = ok && (project_simplex(v3) - e3).norm() <= 1e-12;
    Vec v4(3); v4 << 3.0, 1.0, 0.0;
    Vec e4(3); e4 << 1.0, 0.0, 0.0;
    ok = ok && (project_simplex(v4) - e4).norm() <= 1e-12;
    rep.add("projection-examples", ok);
  }
  {  // exact idempotence
    bool ok = true;
    for (int i = 0; i < 300 && ok; ++i) {
      const int K = 2 + static_cast<int>(rng.next() % 5);
      Vec v(K);
      for (int j = 0; j < K; ++j) v[j] = rng.uniform(-2.0, 2.0);
      const Vec p = project_simplex(v);
      const Vec pp = project_simplex(p);
      ok = (p.array() == pp.array()).all();
    }
    rep.add("idempotence-exact", ok);
  }
  {  // non-expansiveness within 1e-12
    bool ok = true;
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
      const int K = 2 + static_cast<int>(rng.next() % 5);
      Vec u(K), v(K);
      for (int j = 0; j < K; ++j) {
        u[j] = rng.uniform(-3.0, 3.0);
        v[j] = rng.uniform(-3.0, 3.0);
      }
      const double lhs = (project_simplex(u) - project_simplex(v)).norm();
      const double rhs = (u - v).norm();
      worst = std::max(worst, lhs - rhs);
      ok = ok && lhs <= rhs + 1e-12;
    }
    rep.add("non-expansiveness", ok, "worst excess " + detail::fmt(worst));
  }
  {  // projection beats every grid point; minimizers agree within spacing
    bool ok = true;
    double worst_gap = 0.0;
    const int cases = 1000;
    for (int i = 0; i < cases && ok; ++i) {
      const int K = 2 + static_cast<int>(rng.next() % 3);
      const int res = K == 2 ? 1000 : (K == 3 ? 100 : 50);
      Vec v(K);
      for (int j = 0; j < K; ++j) v[j] = rng.uniform(-1.0, 1.5);
      const Vec p = project_simplex(v);
      const Vec bf = brute_force_projection(v, res);
      ok = ok && (p - v).norm() <= (bf - v).norm() + 1e-12;
      const double gap = (p - bf).norm();
      worst_gap = std::max(worst_gap, gap);
      ok = ok && gap <= 3.0 * std::sqrt(static_cast<double>(K)) / res;
      ok = ok && in_simplex(p, 1e-12);
    }
    rep.add("brute-force-agreement", ok,
            "1000 cases, worst minimizer gap " + detail::fmt(worst_gap));
  }
  return rep;
}

inline VerifyReport verify_subproblem() {
  VerifyReport rep;
  rep.suite = "subproblem";
  SplitMix rng(77001);

  {  // closed-form solutions
    bool ok = true;
    Mat G1(2, 2); G1 << 1, 0, 0, 1;
    auto s1 = solve_w_rho(G1, 0.0, kOracleTol, kOracleMaxIter);
    Vec e1(2); e1 << 0.5, 0.5;
    ok = ok && (s1.weights - e1).norm() <= 1e-8;
    ok = ok && std::abs((G1 * s1.weights).squaredNorm() - 0.5) <= 1e-8;

    Mat G2(2, 2); G2 << 1, 1, 1, 1;  // identical columns
    auto s2 = solve_w_rho(G2, 0.1, kOracleTol, kOracleMaxIter);
    ok = ok && (s2.weights - e1).norm() <= 1e-8;

    Mat G3(2, 2); G3 << 2, 0, 0, 1;
    auto s3 = solve_w_rho(G3, 0.0, kOracleTol, kOracleMaxIter);
    Vec e3(2); e3 << 0.2, 0.8;
    ok = ok && (s3.weights - e3).norm() <= 1e-8;

    Mat G4(2, 2); G4 << 1, -1, 2, -2;  // opposite columns
    auto s4 = solve_w_rho(G4, 0.0, kOracleTol, kOracleMaxIter);
    ok = ok && (G4 * s4.weights).squaredNorm() <= 1e-12;
    rep.add("closed-forms", ok);
  }
  {  // ||G w*_0 - G w*_rho|| <= sqrt(rho)
    bool ok = true;
    double worst = -1.0;
    for (int i = 0; i < 100; ++i) {
      const int K = 2 + static_cast<int>(rng.next() % 3);
      const int m = 2 + static_cast<int>(rng.next() % 4);
      const Mat G = detail::random_gradient_matrix(rng, m, K);
      const auto s0 = solve_w_rho(G, 0.0, kOracleTol, kOracleMaxIter);
      for (const double rho : {1e-4, 1e-2, 1e-1}) {
        const auto sr = solve_w_rho(G, rho, kOracleTol, kOracleMaxIter);
        const double gap = (G * s0.weights - G * sr.weights).norm();
        worst = std::max(worst, gap - std::sqrt(rho));
        ok = ok && gap <= std::sqrt(rho) + 1e-6;
      }
    }
    rep.add("sqrt-rho-gap", ok, "worst slack use " + detail::fmt(worst));
  }
  {  // strong-convexity certificate for rho > 0
    bool ok = true;
    const double rho = 0.05;
    for (int i = 0; i < 100 && ok; ++i) {
      const int K = 2 + static_cast<int>(rng.next() % 3);
      const Mat G = detail::random_gradient_matrix(rng, 3, K);
      const auto sr = solve_w_rho(G, rho, kOracleTol, kOracleMaxIter);
      auto J = [&](const Vec& w) {
        return 0.5 * (G * w).squaredNorm() + 0.5 * rho * w.squaredNorm();
      };
      for (int r = 0; r < 5; ++r) {
        const Vec wp = random_simplex_point(K, rng);
        const double lhs = J(wp) - J(sr.weights);
        const double rhs = 0.5 * rho * (wp - sr.weights).squaredNorm();
        ok = ok && lhs >= rhs - 1e-9;
      }
    }
    rep.add("strong-convexity-certificate", ok);
  }
  {  // stationarity_measure(cG) = c^2 stationarity_measure(G)
    bool ok = true;
    for (int i = 0; i < 50 && ok; ++i) {
      const int K = 2 + static_cast<int>(rng.next() % 3);
      const Mat G = detail::random_gradient_matrix(rng, 3, K);
      const double base = stationarity_measure(G);
      for (const double c : {0.5, 2.0, 7.0}) {
        const double scaled = stationarity_measure(c * G);
        ok = ok && std::abs(scaled - c * c * base) <=
                       1e-8 * (1.0 + c * c * base);
      }
    }
    rep.add("scale-equivariance", ok);
  }
  {  // invariance to column permutations
    bool ok = true;
    for (int i = 0; i < 50 && ok; ++i) {
      const Mat G = detail::random_gradient_matrix(rng, 3, 3);
      Mat P(3, 3);
      P.col(0) = G.col(2);
      P.col(1) = G.col(0);
      P.col(2) = G.col(1);
      ok = std::abs(stationarity_measure(G) - stationarity_measure(P)) <=
           1e-9 * (1.0 + stationarity_measure(G));
    }
    rep.add("permutation-invariance", ok);
  }
  {  // agreement with exhaustive simplex-grid minimization (K <= 3)
    bool ok = true;
    const int res = 1000;
    for (int i = 0; i < 12 && ok; ++i) {
      const int K = 2 + static_cast<int>(rng.next() % 2);
      const Mat G = detail::random_gradient_matrix(rng, 3, K);
      const double stat = stationarity_measure(G);
      const Mat gram = G.transpose() * G;
      double grid_min = std::numeric_limits<double>::infinity();
      if (K == 2) {
        for (int n = 0; n <= res; ++n) {
          Vec w(2);
          w << static_cast<double>(n) / res, static_cast<double>(res - n) / res;
          grid_min = std::min(grid_min, w.dot(gram * w));
        }
      } else {
        for (int a = 0; a <= res; ++a)
          for (int b = 0; b <= res - a; ++b) {
            Vec w(3);
            w << static_cast<double>(a) / res, static_cast<double>(b) / res,
                static_cast<double>(res - a - b) / res;
            grid_min = std::min(grid_min, w.dot(gram * w));
          }
      }
      const double lip = lambda_max_psd(gram);
      const double spacing =
          std::sqrt(2.0 * static_cast<double>(K)) / static_cast<double>(res);
      ok = ok && stat <= grid_min + 1e-9;
      ok = ok && grid_min <= stat + 2.0 * lip * spacing + 1e-9;
    }
    rep.add("grid-oracle-equivalence", ok);
  }
  return rep;
}

inline std::vector<ObjectiveProblem> default_lemma_problems() {
  return {
      builtin_problem("quadratic-pair", 1), builtin_problem("quadratic-pair", 3),
      builtin_problem("quartic-pair", 1),   builtin_problem("quartic-pair", 2),
      builtin_problem("exp-pair", 1),       builtin_problem("exp-pair", 2),
      builtin_problem("mixed-smooth", 1),
  };
}

/// Smoothness/continuity/remainder checks for a set of problems; callers may
/// inject deliberately wrong descriptors to confirm the checks trip.
inline VerifyReport verify_lemmas(const std::vector<ObjectiveProblem>& problems) {
  VerifyReport rep;
  rep.suite = "lemmas";
  SplitMix rng(555001);

  for (const ObjectiveProblem& p : problems) {
    const std::string tag = p.name + "/m=" + std::to_string(p.m);
    {  // analytic vs central-difference gradients
      bool ok = true;
      double worst = 0.0;
      for (int i = 0; i < 100 && ok; ++i) {
        ParamPoint x(p.m);
        for (int j = 0; j < p.m; ++j) x[j] = rng.uniform(-2.0, 2.0);
        const Mat A = eval_gradients(p, x);
        const Mat D = finite_diff_gradients(p, x, 1e-5);
        const double err = (A - D).cwiseAbs().maxCoeff();
        const double bound = 1e-5 * (1.0 + A.norm());
        worst = std::max(worst, err / bound);
        ok = ok && err <= bound;
      }
      rep.add("gradient-consistency[" + tag + "]", ok,
              "worst ratio " + detail::fmt(worst));
    }
    {  // phi(||grad f||) <= f - f*
      std::vector<ParamPoint> xs;
      for (int i = 0; i < 100; ++i) {
        ParamPoint x(p.m);
        for (int j = 0; j < p.m; ++j) x[j] = rng.uniform(-3.0, 3.0);
        xs.push_back(x);
      }
      const PhiBoundReport pb = check_phi_bound(p, xs);
      rep.add("phi-bound[" + tag + "]", pb.pass,
              "worst margin " + detail::fmt(pb.worst_margin));
    }
    if (p.m == 1) {  // |f''| <= ell(|f'|), differenced Hessian
      bool ok = true;
      double worst = 0.0;
      for (int i = 0; i < 100 && ok; ++i) {
        ParamPoint x(1);
        x[0] = rng.uniform(-3.0, 3.0);
        const double h = 1e-5;
        ParamPoint xp(1), xm(1);
        xp[0] = x[0] + h;
        xm[0] = x[0] - h;
        const Mat Gp = eval_gradients(p, xp);
        const Mat Gm = eval_gradients(p, xm);
        const Mat G = eval_gradients(p, x);
        for (int k = 0; k < p.K; ++k) {
          const double hess = std::abs((Gp(0, k) - Gm(0, k)) / (2.0 * h));
          const double bound = p.smoothness.ell(std::abs(G(0, k)));
          worst = std::max(worst, hess - bound * (1.0 + 1e-4));
          ok = ok && hess <= bound * (1.0 + 1e-4) + 1e-6;
        }
      }
      rep.add("hessian-bound[" + tag + "]", ok,
              "worst excess " + detail::fmt(worst));
    }
    {  // Lipschitz continuity of the regularized minimizer in x.
      // The constant uses the sampled max task-gradient norm over each probed
      // pair, so the bound is certified locally, not globally.
      bool ok = true;
      const double rho = 1e-2;
      for (int i = 0; i < 40 && ok; ++i) {
        ParamPoint x(p.m);
        for (int j = 0; j < p.m; ++j) x[j] = rng.uniform(-1.5, 1.5);
        Vec dir(p.m);
        for (int j = 0; j < p.m; ++j) dir[j] = rng.gaussian();
        if (dir.norm() < 1e-12) dir.setOnes();
        dir.normalize();
        const Mat Gx = eval_gradients(p, x);
        double M = Gx.colwise().norm().maxCoeff();
        double step = std::min(0.1, 0.5 / p.smoothness.ell(M + 1.0));
        ParamPoint y = x + step * dir;
        Mat Gy = eval_gradients(p, y);
        for (int shrink = 0; shrink < 60; ++shrink) {
          M = std::max(Gx.colwise().norm().maxCoeff(),
                       Gy.colwise().norm().maxCoeff());
          if (step <= 1.0 / p.smoothness.ell(M + 1.0)) break;
          step *= 0.5;
          y = x + step * dir;
          Gy = eval_gradients(p, y);
        }
        const auto sx = solve_w_rho(Gx, rho, kOracleTol, kOracleMaxIter);
        const auto sy = solve_w_rho(Gy, rho, kOracleTol, kOracleMaxIter);
        const double lhs = (sx.weights - sy.weights).norm();
        const double bound =
            2.0 / rho * p.K * M * p.smoothness.ell(M + 1.0) * step;
        ok = ok && lhs <= bound + 2e-6;
      }
      rep.add("regularized-weights-continuity[" + tag + "]", ok,
              "observed-M constant (local certificate)");
    }
    {  // per-task Taylor remainder bound
      bool ok = true;
      const double alpha = 1e-3;
      for (int i = 0; i < 100 && ok; ++i) {
        ParamPoint x(p.m);
        for (int j = 0; j < p.m; ++j) x[j] = rng.uniform(-1.8, 1.8);
        const WeightVector w = random_simplex_point(p.K, rng);
        const Mat G = eval_gradients(p, x);
        const Vec d = G * w;
        const Vec R = remainder_measure(p, x, w, alpha);
        const ObjectiveValues f = eval_values(p, x);
        for (int k = 0; k < p.K; ++k) {
          const double ell = p.smoothness.ell(G.col(k).norm() + 1.0);
          const double bound = 0.5 * alpha * alpha * ell * d.squaredNorm();
          ok = ok && R[k] <= bound + 1e-12 * (1.0 + std::abs(f[k]));
        }
      }
      rep.add("taylor-remainder-bound[" + tag + "]", ok);
    }
  }
  return rep;
}

inline VerifyReport verify_lemmas() { return verify_lemmas(default_lemma_problems()); }

inline VerifyReport verify_optimizers() {
  VerifyReport rep;
  rep.suite = "optimizers";

  const ObjectiveProblem quad = builtin_problem("quadratic-pair", 1);
  const ObjectiveProblem quart = builtin_problem("quartic-pair", 1);

  {  // bit-identical traces under a fixed seed
    OptimizerConfig c;
    c.algorithm = Algorithm::kSgsmgrad;
    c.alpha = c.beta = 0.02;
    c.rho = 1e-3;
    c.horizon = 400;
    NoiseModel noise{0.1, 42};
    const ParamPoint x0 = ParamPoint::Constant(1, 1.5);
    const RunResult a = run(quad, c, &noise, 1, x0);
    const RunResult b = run(quad, c, &noise, 1, x0);
    bool ok = a.records.size() == b.records.size();
    for (std::size_t i = 0; ok && i < a.records.size(); ++i) {
      ok = (a.records[i].x.array() == b.records[i].x.array()).all() &&
           (a.records[i].w.array() == b.records[i].w.array()).all() &&
           a.records[i].stationarity_wt == b.records[i].stationarity_wt;
    }
    rep.add("determinism", ok);

    bool simplex_ok = true;
    for (const IterationRecord& r : a.records)
      simplex_ok = simplex_ok && in_simplex(r.w, 1e-12);
    rep.add("simplex-preservation", simplex_ok);
  }
  {  // windowed running mean of ||G w_t||^2 is non-increasing (10% slack)
    bool trend_ok = true, ca_ok = true;
    for (const char* name :
         {"quadratic-pair", "quartic-pair", "exp-pair", "mixed-smooth"}) {
      const auto p = builtin_problem(name, 1);
      OptimizerConfig c;
      c.alpha = c.beta = 0.05;
      c.rho = 1e-4;
      c.horizon = 2000;
      const RunResult r = run(p, c, nullptr, 1, ParamPoint::Constant(1, 1.5));
      double prev = std::numeric_limits<double>::infinity();
      for (std::size_t w0 = 0; w0 + 100 <= 2000; w0 += 100) {
        double mean = 0.0;
        for (std::size_t i = w0; i < w0 + 100; ++i)
          mean += r.records[i].stationarity_wt;
        mean /= 100.0;
        trend_ok = trend_ok && mean <= prev * 1.10 + 1e-18;
        prev = mean;
      }
      // exact per-record inequality behind the averaged CA guarantee
      double avg_sq_ca = 0.0, avg_stat = 0.0;
      for (const IterationRecord& rec : r.records) {
        avg_sq_ca += rec.ca_distance * rec.ca_distance;
        avg_stat += rec.stationarity_wt;
      }
      ca_ok = ca_ok && avg_sq_ca <= avg_stat +
                           1e-10 * static_cast<double>(r.records.size());
    }
    rep.add("monotone-trend", trend_ok, "4 problems, 100-step windows");
    rep.add("average-ca-bound", ca_ok);
  }
  {  // warm-start contraction toward the regularized minimizer
    const double rho = 0.05;
    const ParamPoint x0 = ParamPoint::Constant(1, 0.7);
    const Mat G = eval_gradients(quart, x0);
    const Mat gram = G.transpose() * G;
    const double bp = 1.0 / (lambda_max_psd(gram) + rho);
    const auto star = solve_w_rho(G, rho, kOracleTol, kOracleMaxIter);
    WeightVector w(2);
    w << 0.9, 0.1;
    bool ok = true;
    double dist = (w - star.weights).norm();
    for (int n = 0; n < 40; ++n) {
      w = project_simplex(w - bp * (gram * w + rho * w));
      const double next = (w - star.weights).norm();
      ok = ok && next <= (1.0 - rho * bp) * dist + 1e-12;
      dist = next;
    }
    rep.add("warm-start-contraction", ok,
            "per-step ratio <= 1 - rho*beta'");
  }
  {  // forward-only and exact weight updates stay within the remainder bound
    OptimizerConfig c;
    c.alpha = 1e-3;
    c.beta = 0.1;
    c.rho = 1e-4;
    OptimizerState s;
    s.x = ParamPoint::Constant(1, 0.3);
    s.w = uniform_weights(2);
    bool ok = true;
    for (int t = 0; t < 200 && ok; ++t) {
      OptimizerState gsm = s, fa = s;
      gsm.t = fa.t = t;
      gsmgrad_step(quart, gsm, c);
      gsmgrad_fa_step(quart, fa, c);
      const Mat G = eval_gradients(quart, s.x);
      const double M = G.colwise().norm().maxCoeff();
      const double bound = 0.5 * c.beta * c.alpha *
                           quart.smoothness.ell(M + 1.0) *
                           (G * s.w).squaredNorm();
      ok = (gsm.w - fa.w).norm() <= bound + 1e-12;
      s = gsm;
      s.t = 0;  // shadow comparison; time index is irrelevant here
    }
    rep.add("fa-exact-consistency", ok);
  }
  {  // sigma = 0 stochastic run coincides with the deterministic one
    OptimizerConfig cd;
    cd.alpha = cd.beta = 0.05;
    cd.rho = 1e-3;
    cd.horizon = 500;
    OptimizerConfig cs = cd;
    cs.algorithm = Algorithm::kSgsmgrad;
    NoiseModel zero{0.0, 7};
    const ParamPoint x0 = ParamPoint::Constant(1, 1.2);
    const RunResult rd = run(quad, cd, nullptr, 50, x0);
    const RunResult rs = run(quad, cs, &zero, 50, x0);
    bool ok = rd.records.size() == rs.records.size();
    for (std::size_t i = 0; ok && i < rd.records.size(); ++i)
      ok = (rd.records[i].x - rs.records[i].x).cwiseAbs().maxCoeff() <= 1e-12 &&
           (rd.records[i].w - rs.records[i].w).cwiseAbs().maxCoeff() <= 1e-12;
    rep.add("zero-noise-reduction", ok);
  }
  {  // K = 1 collapses to plain gradient descent
    ProblemParams params;
    params["centers"] = {2.0};
    const ObjectiveProblem single = builtin_problem("quartic-pair", 1, params);
    OptimizerConfig c;
    c.alpha = 0.05;
    c.beta = 0.1;
    c.horizon = 300;
    const RunResult r = run(single, c, nullptr, 1, ParamPoint::Constant(1, 0.0));
    double xref = 0.0;
    bool ok = true;
    for (long t = 0; t < 300; ++t) {
      ok = ok && std::abs(r.records[static_cast<std::size_t>(t)].x[0] - xref) <=
                     1e-12;
      const double g = std::pow(xref - 2.0, 3.0);
      xref -= c.alpha * g;
    }
    rep.add("k1-gd-reduction", ok);
  }
  return rep;
}

inline VerifyReport verify(const std::string& suite) {
  const auto start = std::chrono::steady_clock::now();
  VerifyReport rep;
  if (suite == "simplex") {
    rep = verify_simplex();
  } else if (suite == "subproblem") {
    rep = verify_subproblem();
  } else if (suite == "lemmas") {
    rep = verify_lemmas();
  } else if (suite == "optimizers") {
    rep = verify_optimizers();
  } else if (suite == "all") {
    rep.suite = "all";
    for (const auto* s : {"simplex", "subproblem", "lemmas", "optimizers"}) {
      VerifyReport sub = verify(s);
      for (VerifyCheck& c : sub.checks) {
        c.name = std::string(s) + "/" + c.name;
        rep.checks.push_back(std::move(c));
      }
      rep.pass = rep.pass && sub.pass;
    }
  } else {
    throw std::invalid_argument(
        "verify: unknown suite '" + suite +
        "'; valid: simplex, subproblem, lemmas, optimizers, all");
  }
  rep.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  if (suite == "all")
    rep.add("runtime-budget-soft", rep.seconds <= 300.0,
            detail::fmt(rep.seconds) + " s (soft 300 s budget)");
  return rep;
}

}  // namespace gsmgrad
