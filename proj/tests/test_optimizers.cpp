#include <catch2/catch_amalgamated.hpp>

#include "gsmgrad/optimizers.hpp"

using namespace gsmgrad;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Linear objectives f_k(x) = g_k . x: the gradient matrix is constant.
ObjectiveProblem linear_problem(const Mat& G) {
  ObjectiveProblem p;
  p.m = static_cast<int>(G.rows());
  p.K = static_cast<int>(G.cols());
  p.name = "linear";
  p.value_fn = [G](const ParamPoint& x) { return (G.transpose() * x).eval(); };
  p.gradient_fn = [G](const ParamPoint&) { return G; };
  return p;
}

}  // namespace

TEST_CASE("warm_start: N = 0 returns w0 without touching the oracle") {
  ObjectiveProblem p;
  p.m = p.K = 2;
  p.name = "poisoned";
  p.value_fn = [](const ParamPoint&) -> ObjectiveValues {
    throw std::logic_error("value oracle must not be called");
  };
  p.gradient_fn = [](const ParamPoint&) -> GradientMatrix {
    throw std::logic_error("gradient oracle must not be called");
  };
  const WeightVector w0 = v2(0.7, 0.3);
  const WeightVector w = warm_start(p, ParamPoint::Zero(2), w0, 0.1, 0.4, 0);
  CHECK((w - w0).norm() == 0.0);
}

TEST_CASE("warm_start: one projected-gradient step, hand computed") {
  Mat G(2, 2);
  G << 1, 0, 0, 1;
  const auto p = linear_problem(G);
  const WeightVector w =
      warm_start(p, ParamPoint::Zero(2), v2(1.0, 0.0), 0.1, 0.4, 1);
  CHECK(w[0] == Catch::Approx(0.78).margin(1e-12));
  CHECK(w[1] == Catch::Approx(0.22).margin(1e-12));
}

TEST_CASE("warm_start: symmetric quartic pair contracts to the center") {
  const auto p = builtin_problem("quartic-pair", 1);  // centers -1, +1
  const WeightVector w = warm_start(p, ParamPoint::Zero(1), v2(0.9, 0.1),
                                    0.01, /*beta_prime=*/0.0, 500);
  CHECK((w - v2(0.5, 0.5)).norm() <= 1e-3);
}

TEST_CASE("warm_start contracts geometrically toward the regularized optimum") {
  const auto p = builtin_problem("quadratic-pair", 1);
  const ParamPoint x0 = ParamPoint::Constant(1, 0.6);
  const double rho = 0.05;
  const Mat G = eval_gradients(p, x0);
  const Mat gram = G.transpose() * G;
  const double bp = 1.0 / (lambda_max_psd(gram) + rho);
  const auto star = solve_w_rho(G, rho, kOracleTol, kOracleMaxIter);
  WeightVector w = v2(0.95, 0.05);
  double dist = (w - star.weights).norm();
  for (int n = 0; n < 30; ++n) {
    w = warm_start(p, x0, w, rho, bp, 1);
    const double next = (w - star.weights).norm();
    REQUIRE(next <= (1.0 - rho * bp) * dist + 1e-12);
    dist = next;
  }
}

TEST_CASE("gsmgrad_step hand example") {
  // f1 = x^2/2, f2 = (x-1)^2/2 at x=0, w=(1/2,1/2), alpha=beta=0.1, rho=0
  ProblemParams params;
  params["centers"] = {0.0, 1.0};
  const auto p = builtin_problem("quadratic-pair", 1, params);
  OptimizerConfig c;
  c.alpha = c.beta = 0.1;
  c.rho = 0.0;
  c.horizon = 1;
  OptimizerState s;
  s.x = ParamPoint::Zero(1);
  s.w = v2(0.5, 0.5);
  gsmgrad_step(p, s, c);
  CHECK(s.w[0] == Catch::Approx(0.525).margin(1e-12));
  CHECK(s.w[1] == Catch::Approx(0.475).margin(1e-12));
  CHECK(s.x[0] == Catch::Approx(0.05).margin(1e-12));
  CHECK(s.last_direction[0] == Catch::Approx(-0.5).margin(1e-12));
  CHECK(s.t == 1);
}

TEST_CASE("gsmgrad_fa_step hand example and remainder gap") {
  ProblemParams params;
  params["centers"] = {0.0, 1.0};
  const auto p = builtin_problem("quadratic-pair", 1, params);
  OptimizerConfig c;
  c.alpha = c.beta = 0.1;
  c.rho = 0.0;
  OptimizerState s;
  s.x = ParamPoint::Zero(1);
  s.w = v2(0.5, 0.5);
  gsmgrad_fa_step(p, s, c);
  CHECK(s.x[0] == Catch::Approx(0.05).margin(1e-12));
  CHECK(s.w[0] == Catch::Approx(0.525).margin(1e-12));
  CHECK(s.w[1] == Catch::Approx(0.475).margin(1e-12));
  CHECK(s.has_cached_values);
  CHECK(s.cached_values[0] == Catch::Approx(0.00125).margin(1e-12));
  CHECK(s.cached_values[1] == Catch::Approx(0.45125).margin(1e-12));

  // forward-only weight-gradient estimate vs the exact one at the same state
  const GradientMatrix G = eval_gradients(p, ParamPoint::Zero(1));
  const Vec d = G * v2(0.5, 0.5);
  const Vec exact = G.transpose() * d;
  const ObjectiveValues f0 = eval_values(p, ParamPoint::Zero(1));
  const ObjectiveValues f1 = eval_values(p, (-c.alpha * d).eval());
  const Vec fa_estimate = (f0 - f1) / c.alpha;
  CHECK(exact[0] == Catch::Approx(0.0).margin(1e-15));
  CHECK(exact[1] == Catch::Approx(0.5).margin(1e-15));
  CHECK(fa_estimate[0] == Catch::Approx(-0.0125).margin(1e-12));
  CHECK(fa_estimate[1] == Catch::Approx(0.4875).margin(1e-12));
  CHECK((fa_estimate - exact).cwiseAbs().maxCoeff() ==
        Catch::Approx(0.0125).margin(1e-12));
}

TEST_CASE("forward-only weight gradient converges to the exact one at O(alpha)") {
  ProblemParams params;
  params["centers"] = {0.0, 1.0};
  const auto p = builtin_problem("quadratic-pair", 1, params);
  const ParamPoint x = ParamPoint::Zero(1);
  const WeightVector w = v2(0.5, 0.5);
  const GradientMatrix G = eval_gradients(p, x);
  const Vec d = G * w;
  const Vec exact = G.transpose() * d;
  auto err = [&](double alpha) {
    const ObjectiveValues f0 = eval_values(p, x);
    const ObjectiveValues f1 = eval_values(p, (x - alpha * d).eval());
    return ((f0 - f1) / alpha - exact).cwiseAbs().maxCoeff();
  };
  const double e1 = err(1e-1), e2 = err(1e-2), e3 = err(1e-3);
  CHECK(e1 / e2 == Catch::Approx(10.0).margin(1.0));
  CHECK(e2 / e3 == Catch::Approx(10.0).margin(1.0));
}

TEST_CASE("K = 1 keeps w = [1] and reduces to gradient descent") {
  ProblemParams params;
  params["centers"] = {2.0};
  const auto p = builtin_problem("quartic-pair", 1, params);
  OptimizerConfig c;
  c.alpha = 0.05;
  c.beta = 0.1;
  c.horizon = 200;
  const RunResult r = run(p, c, nullptr, 1, ParamPoint::Zero(1));
  double xref = 0.0;
  for (const IterationRecord& rec : r.records) {
    REQUIRE(rec.w.size() == 1);
    REQUIRE(rec.w[0] == 1.0);
    if (rec.t < 200) {
      REQUIRE(std::abs(rec.x[0] - xref) <= 1e-12);
      xref -= c.alpha * std::pow(xref - 2.0, 3.0);
    }
  }
}

TEST_CASE("sgsmgrad with sigma = 0 matches gsmgrad bitwise") {
  const auto p = builtin_problem("quadratic-pair", 1);
  const ParamPoint x0 = ParamPoint::Constant(1, 1.3);
  OptimizerConfig cd;
  cd.alpha = cd.beta = 0.05;
  cd.rho = 1e-3;
  cd.horizon = 300;
  OptimizerConfig cs = cd;
  cs.algorithm = Algorithm::kSgsmgrad;
  NoiseModel zero{0.0, 5};
  const RunResult rd = run(p, cd, nullptr, 1, x0);
  const RunResult rs = run(p, cs, &zero, 1, x0);
  REQUIRE(rd.records.size() == rs.records.size());
  for (std::size_t i = 0; i < rd.records.size(); ++i) {
    REQUIRE((rd.records[i].x.array() == rs.records[i].x.array()).all());
    REQUIRE((rd.records[i].w.array() == rs.records[i].w.array()).all());
  }
}

TEST_CASE("fixed seed reproduces the stochastic trajectory exactly") {
  const auto p = builtin_problem("quadratic-pair", 2);
  OptimizerConfig c;
  c.algorithm = Algorithm::kSgsmgrad;
  c.alpha = c.beta = 0.02;
  c.rho = 1e-3;
  c.horizon = 200;
  NoiseModel noise{0.2, 2024};
  const ParamPoint x0 = ParamPoint::Constant(2, 0.8);
  const RunResult a = run(p, c, &noise, 10, x0);
  const RunResult b = run(p, c, &noise, 10, x0);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    REQUIRE((a.records[i].x.array() == b.records[i].x.array()).all());
    REQUIRE((a.records[i].w.array() == b.records[i].w.array()).all());
  }
}

TEST_CASE("stochastic weight-update increment is unbiased") {
  const auto p = builtin_problem("quadratic-pair", 1);
  const ParamPoint x = ParamPoint::Constant(1, 0.5);
  const WeightVector w = v2(0.5, 0.5);
  const double beta = 0.01, rho = 0.0;

  const GradientMatrix G = eval_gradients(p, x);
  const Vec det_inc =
      project_simplex(w - beta * (G.transpose() * (G * w) + rho * w)) - w;

  NoiseModel noise{0.1, 31415};
  const int n = 10000;
  Vec mean = Vec::Zero(2), msq = Vec::Zero(2);
  for (int k = 0; k < n; ++k) {
    const GradientMatrix G2 =
        stochastic_gradients(p, x, noise, static_cast<std::uint64_t>(k), 2, 1);
    const GradientMatrix G3 =
        stochastic_gradients(p, x, noise, static_cast<std::uint64_t>(k), 3, 1);
    const Vec inc =
        project_simplex(w - beta * (G2.transpose() * (G3 * w) + rho * w)) - w;
    mean += inc;
    msq += inc.cwiseProduct(inc);
  }
  mean /= n;
  msq /= n;
  for (int i = 0; i < 2; ++i) {
    const double se = std::sqrt((msq[i] - mean[i] * mean[i]) / n);
    REQUIRE(std::abs(mean[i] - det_inc[i]) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("run: horizon 0 leaves only the initial record") {
  const auto p = builtin_problem("quadratic-pair", 1);
  OptimizerConfig c;
  c.alpha = c.beta = 0.1;
  c.horizon = 0;
  c.warm_start_iters = 100;
  c.rho = 0.01;
  const RunResult r = run(p, c, nullptr, 1, ParamPoint::Constant(1, 0.5));
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].t == 0);
  CHECK(in_simplex(r.records[0].w, 1e-12));
}

TEST_CASE("run validates configuration before stepping") {
  const auto p = builtin_problem("quadratic-pair", 1);
  const ParamPoint x0 = ParamPoint::Constant(1, 0.5);
  OptimizerConfig c;
  c.alpha = c.beta = 0.1;
  c.horizon = 10;
  OptimizerConfig bad = c;
  bad.alpha = -1;
  CHECK_THROWS_AS(run(p, bad, nullptr, 1, x0), std::invalid_argument);
  bad = c;
  bad.algorithm = Algorithm::kSgsmgrad;  // noise required
  CHECK_THROWS_AS(run(p, bad, nullptr, 1, x0), std::invalid_argument);
  NoiseModel noise{0.1, 1};
  CHECK_THROWS_AS(run(p, c, &noise, 1, x0), std::invalid_argument);
  CHECK_THROWS_AS(run(p, c, nullptr, 0, x0), std::invalid_argument);
  CHECK_THROWS_AS(run(p, c, nullptr, 1, ParamPoint::Zero(3)),
                  std::invalid_argument);
}

TEST_CASE("run stops cleanly on oracle overflow and keeps the partial trace") {
  const auto p = builtin_problem("exp-pair", 1);
  OptimizerConfig c;
  c.alpha = 200.0;  // force blow-up
  c.beta = 0.1;
  c.horizon = 50;
  const RunResult r = run(p, c, nullptr, 1, ParamPoint::Constant(1, 3.0));
  CHECK(r.diverged);
  CHECK(!r.error.empty());
  CHECK(r.error.find("iteration") != std::string::npos);
  CHECK(r.records.size() >= 1);
  CHECK(r.iterations_completed < 50);
}

TEST_CASE("forward-only run costs one value and one gradient call per step") {
  int value_calls = 0, gradient_calls = 0;
  const auto base = builtin_problem("quadratic-pair", 1);
  ObjectiveProblem counted = base;
  counted.value_fn = [&, base](const ParamPoint& x) {
    ++value_calls;
    return base.value_fn(x);
  };
  counted.gradient_fn = [&, base](const ParamPoint& x) {
    ++gradient_calls;
    return base.gradient_fn(x);
  };
  OptimizerConfig c;
  c.alpha = c.beta = 0.05;
  OptimizerState s;
  s.x = ParamPoint::Constant(1, 0.7);
  s.w = uniform_weights(2);
  const int T = 25;
  for (int t = 0; t < T; ++t) gsmgrad_fa_step(counted, s, c);
  CHECK(gradient_calls == T);
  CHECK(value_calls == T + 1);  // one extra evaluation at t = 0
}
