#pragma once

#include <algorithm>
#include <functional>
#include <stdexcept>
#include <vector>

#include "gsmgrad/common.hpp"

namespace gsmgrad {

/// Membership test for the probability simplex W = {w : w_k >= 0, sum w = 1}.
inline bool in_simplex(const WeightVector& w, double tol = 1e-12) {
  if (w.size() == 0) return false;
  return w.minCoeff() >= -tol && std::abs(w.sum() - 1.0) <= tol;
}

/// Euclidean projection onto the probability simplex, sort-based threshold
/// method, O(K log K). Inputs already on W are returned unchanged, which
/// also makes the projection exactly idempotent.
inline WeightVector project_simplex(const WeightVector& v) {
  const Eigen::Index K = v.size();
  if (K == 0) throw std::invalid_argument("project_simplex: K must be >= 1");
  if (!v.allFinite())
    throw std::invalid_argument("project_simplex: non-finite input");
  if (v.minCoeff() >= 0.0 && std::abs(v.sum() - 1.0) <= 1e-12) return v;

  std::vector<double> u(v.data(), v.data() + K);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (Eigen::Index j = 0; j < K; ++j) {
    cumsum += u[static_cast<std::size_t>(j)];
    const double th = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - th > 0.0) theta = th;
  }
  WeightVector w = (v.array() - theta).cwiseMax(0.0);
  // Renormalize so the sum-to-one invariant holds at strict tolerance.
  w /= w.sum();
  return w;
}

/// w_k = 1/K for every k.
inline WeightVector uniform_weights(int K) {
  if (K < 1) throw std::invalid_argument("uniform_weights: K must be >= 1");
  return WeightVector::Constant(K, 1.0 / static_cast<double>(K));
}

/// Test oracle: nearest point to v among the lattice {n/resolution : n in
/// Z^K_{>=0}, sum n = resolution}. Exhaustive, so K is capped at 4.
inline WeightVector brute_force_projection(const WeightVector& v,
                                           int resolution) {
  const int K = static_cast<int>(v.size());
  if (K < 1)
    throw std::invalid_argument("brute_force_projection: K must be >= 1");
  if (K > 4)
    throw UnsupportedError("brute_force_projection: K > 4 is unsupported");
  if (resolution < 10)
    throw std::invalid_argument("brute_force_projection: resolution < 10");
  if (!v.allFinite())
    throw std::invalid_argument("brute_force_projection: non-finite input");

  WeightVector best = WeightVector::Zero(K);
  double best_dist = std::numeric_limits<double>::infinity();
  std::vector<int> counts(static_cast<std::size_t>(K), 0);
  const double inv = 1.0 / static_cast<double>(resolution);

  std::function<void(int, int)> enumerate = [&](int coord, int remaining) {
    if (coord == K - 1) {
      counts[static_cast<std::size_t>(coord)] = remaining;
      double dist = 0.0;
      for (int i = 0; i < K; ++i) {
        const double diff = counts[static_cast<std::size_t>(i)] * inv - v[i];
        dist += diff * diff;
      }
      if (dist < best_dist) {
        best_dist = dist;
        for (int i = 0; i < K; ++i)
          best[i] = counts[static_cast<std::size_t>(i)] * inv;
      }
      return;
    }
    for (int n = 0; n <= remaining; ++n) {
      counts[static_cast<std::size_t>(coord)] = n;
      enumerate(coord + 1, remaining - n);
    }
  };
  enumerate(0, resolution);
  return best;
}

/// Uniform (flat Dirichlet) sample from the simplex interior.
inline WeightVector random_simplex_point(int K, SplitMix& rng) {
  if (K < 1)
    throw std::invalid_argument("random_simplex_point: K must be >= 1");
  WeightVector w(K);
  for (int i = 0; i < K; ++i) w[i] = -std::log(rng.uniform());
  w /= w.sum();
  return w;
}

}  // namespace gsmgrad
