#include <catch2/catch_amalgamated.hpp>

#include "gsmgrad/objectives.hpp"
#include "gsmgrad/simplex.hpp"

using namespace gsmgrad;

namespace {
ParamPoint scalar_point(double x) { return ParamPoint::Constant(1, x); }
}  // namespace

TEST_CASE("quadratic pair values and gradients, hand evaluation") {
  // f1 = (x-1)^2/2, f2 = (x+1)^2/2
  const auto p = builtin_problem("quadratic-pair", 1);

  ObjectiveValues f = eval_values(p, scalar_point(0.0));
  CHECK(f[0] == Catch::Approx(0.5).margin(1e-15));
  CHECK(f[1] == Catch::Approx(0.5).margin(1e-15));
  f = eval_values(p, scalar_point(1.0));
  CHECK(f[0] == Catch::Approx(0.0).margin(1e-15));
  CHECK(f[1] == Catch::Approx(2.0).margin(1e-15));
  f = eval_values(p, scalar_point(-1.0));
  CHECK(f[0] == Catch::Approx(2.0).margin(1e-15));
  CHECK(f[1] == Catch::Approx(0.0).margin(1e-15));

  GradientMatrix G = eval_gradients(p, scalar_point(0.0));
  CHECK(G(0, 0) == Catch::Approx(-1.0).margin(1e-15));
  CHECK(G(0, 1) == Catch::Approx(1.0).margin(1e-15));
  G = eval_gradients(p, scalar_point(1.0));
  CHECK(G(0, 0) == Catch::Approx(0.0).margin(1e-15));
  CHECK(G(0, 1) == Catch::Approx(2.0).margin(1e-15));
}

TEST_CASE("single quartic task gradient") {
  ProblemParams params;
  params["centers"] = {0.0};  // f = x^4/4
  const auto p = builtin_problem("quartic-pair", 1, params);
  const GradientMatrix G = eval_gradients(p, scalar_point(2.0));
  CHECK(G(0, 0) == Catch::Approx(8.0).margin(1e-12));
}

TEST_CASE("dimension mismatch raises invalid-argument") {
  const auto p = builtin_problem("quadratic-pair", 2);
  CHECK_THROWS_AS(eval_values(p, scalar_point(0.0)), std::invalid_argument);
  CHECK_THROWS_AS(eval_gradients(p, scalar_point(0.0)), std::invalid_argument);
}

TEST_CASE("overflow names the failing task") {
  const auto p = builtin_problem("exp-pair", 1);
  try {
    eval_values(p, scalar_point(1000.0));
    FAIL("expected overflow");
  } catch (const NumericOverflowError& e) {
    CHECK(e.task() == 0);  // exp(+x) blows up first
  }
}

TEST_CASE("finite differences agree with analytic gradients") {
  const auto quad = builtin_problem("quadratic-pair", 1);
  GradientMatrix D = finite_diff_gradients(quad, scalar_point(0.0), 1e-4);
  CHECK(std::abs(D(0, 0) - (-1.0)) <= 1e-7);
  CHECK(std::abs(D(0, 1) - 1.0) <= 1e-7);

  ProblemParams params;
  params["centers"] = {0.0};
  const auto quart = builtin_problem("quartic-pair", 1, params);
  D = finite_diff_gradients(quart, scalar_point(2.0), 1e-4);
  CHECK(std::abs(D(0, 0) - 8.0) <= 1e-5);

  const auto ex = builtin_problem("exp-pair", 1);
  D = finite_diff_gradients(ex, scalar_point(0.0), 1e-5);
  CHECK(std::abs(D(0, 0) - 1.0) <= 1e-9);

  CHECK_THROWS_AS(finite_diff_gradients(quad, scalar_point(0.0), 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(finite_diff_gradients(quad, scalar_point(0.0), -1e-4),
                  std::invalid_argument);
}

TEST_CASE("gradient consistency across builtins") {
  SplitMix rng(9001);
  for (const char* name :
       {"quadratic-pair", "quartic-pair", "exp-pair", "mixed-smooth"}) {
    for (const int m : {1, 3}) {
      const auto p = builtin_problem(name, m);
      for (int i = 0; i < 25; ++i) {
        ParamPoint x(m);
        for (int j = 0; j < m; ++j) x[j] = rng.uniform(-2.0, 2.0);
        const GradientMatrix A = eval_gradients(p, x);
        const GradientMatrix D = finite_diff_gradients(p, x, 1e-5);
        REQUIRE((A - D).cwiseAbs().maxCoeff() <= 1e-5 * (1.0 + A.norm()));
      }
    }
  }
}

TEST_CASE("builtin problem properties") {
  SECTION("quartic-pair minima sit at the centers") {
    const auto p = builtin_problem("quartic-pair", 1);  // centers -1, +1
    CHECK(eval_values(p, scalar_point(-1.0))[0] == 0.0);
    CHECK(eval_values(p, scalar_point(1.0))[1] == 0.0);
    CHECK(p.has_lower_bounds);
    CHECK(p.lower_bounds.isZero());
  }
  SECTION("exp-pair smoothness is affine with unit slope and a floor") {
    const auto p = builtin_problem("exp-pair", 1);
    CHECK(p.smoothness.ell(0.0) > 0.0);
    CHECK(p.smoothness.ell(2.0) == Catch::Approx(2.0 + 1e-3));
    // 1-D identity: second derivative equals the gradient for exp(x)
    const double g = eval_gradients(p, scalar_point(0.7))(0, 0);
    CHECK(p.smoothness.ell(g) >= g);
  }
  SECTION("unknown name lists the valid ones") {
    try {
      builtin_problem("bogus", 1);
      FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
      const std::string msg = e.what();
      CHECK(msg.find("quadratic-pair") != std::string::npos);
      CHECK(msg.find("mixed-smooth") != std::string::npos);
    }
  }
  SECTION("unknown problem parameter is rejected") {
    ProblemParams params;
    params["wat"] = {1.0};
    CHECK_THROWS_AS(builtin_problem("quadratic-pair", 1, params),
                    std::invalid_argument);
  }
}

TEST_CASE("stochastic oracle: zero noise is exact and bit-reproducible") {
  const auto p = builtin_problem("quadratic-pair", 2);
  const ParamPoint x = ParamPoint::Constant(2, 0.3);
  NoiseModel noise{0.0, 99};
  const GradientMatrix G = eval_gradients(p, x);
  const GradientMatrix S = stochastic_gradients(p, x, noise, 5, 1, 1);
  CHECK((G.array() == S.array()).all());

  noise.sigma = 0.5;
  const GradientMatrix A = stochastic_gradients(p, x, noise, 5, 1, 1);
  const GradientMatrix B = stochastic_gradients(p, x, noise, 5, 1, 1);
  CHECK((A.array() == B.array()).all());
  const GradientMatrix C = stochastic_gradients(p, x, noise, 5, 2, 1);
  CHECK((A - C).cwiseAbs().maxCoeff() > 0.0);
  const GradientMatrix D = stochastic_gradients(p, x, noise, 6, 1, 1);
  CHECK((A - D).cwiseAbs().maxCoeff() > 0.0);

  CHECK_THROWS_AS(stochastic_gradients(p, x, noise, 0, 1, 0),
                  std::invalid_argument);
}

TEST_CASE("stochastic oracle: sample mean concentrates on the gradient") {
  const auto p = builtin_problem("quadratic-pair", 1);
  const ParamPoint x = scalar_point(0.4);
  const GradientMatrix G = eval_gradients(p, x);
  NoiseModel noise{1.0, 1234};
  const int n = 100000;
  GradientMatrix acc = GradientMatrix::Zero(1, 2);
  for (int t = 0; t < n; ++t)
    acc += stochastic_gradients(p, x, noise, static_cast<std::uint64_t>(t), 1,
                                1);
  acc /= static_cast<double>(n);
  // CLT: 3 sigma / sqrt(n) < 0.02 at sigma = 1
  CHECK((acc - G).cwiseAbs().maxCoeff() <= 0.02);
}

TEST_CASE("stochastic oracle: mini-batch variance scales as sigma^2/batch") {
  const auto p = builtin_problem("quadratic-pair", 2);
  const ParamPoint x = ParamPoint::Constant(2, -0.7);
  const GradientMatrix G = eval_gradients(p, x);
  NoiseModel noise{1.0, 777};
  const int n = 10000, batch = 100;
  double sum_sq = 0.0;  // per-task squared perturbation, pooled over tasks
  for (int t = 0; t < n; ++t) {
    const GradientMatrix S = stochastic_gradients(
        p, x, noise, static_cast<std::uint64_t>(t), 1, batch);
    sum_sq += (S - G).colwise().squaredNorm().sum();
  }
  const double avg = sum_sq / static_cast<double>(n * p.K);
  const double target = 1.0 / batch;  // sigma^2 / batch
  CHECK(avg >= 0.8 * target);
  CHECK(avg <= 1.2 * target);
}
