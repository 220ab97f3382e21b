#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "plr/errors.hpp"

namespace plr {

/// Quadrature nodes over [0,1] x {0,1}: the q-point Gauss-Legendre rule
/// replicated once per label value. Per-slice weights sum to one, so the
/// grid integrates a function of (x,z) as sum_z int_0^1 f(x,z) dx.
struct QuadGrid {
  std::vector<double> x;
  std::vector<int> z;
  std::vector<double> w;
  int resolution = 0;  // nodes per z-slice

  std::size_t size() const { return x.size(); }

  template <typename F>
  double integrate(F&& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * f(x[i], z[i]);
    return s;
  }
};

/// Gauss-Legendre rule on [0,1]. Nodes are found by Newton iteration on the
/// Legendre polynomial (tolerance 1e-15), then mapped affinely from [-1,1].
/// Exact for polynomials of degree <= 2q-1.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre_01(int q) {
  if (q < 1) throw ConfigError("gauss_legendre_01: need at least one node");
  std::vector<double> nodes(static_cast<std::size_t>(q));
  std::vector<double> weights(static_cast<std::size_t>(q));
  const double pi = 3.14159265358979323846;
  // Roots come in +/- pairs on [-1,1]; compute the upper half.
  for (int i = 0; i < (q + 1) / 2; ++i) {
    double t = std::cos(pi * (i + 0.75) / (q + 0.5));
    double deriv = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Legendre recurrence: (j+1) P_{j+1} = (2j+1) t P_j - j P_{j-1}
      double p0 = 1.0, p1 = t;
      for (int j = 1; j < q; ++j) {
        double p2 = ((2 * j + 1) * t * p1 - j * p0) / (j + 1);
        p0 = p1;
        p1 = p2;
      }
      deriv = q * (t * p1 - p0) / (t * t - 1.0);
      double step = p1 / deriv;
      t -= step;
      if (std::abs(step) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - t * t) * deriv * deriv);
    nodes[std::size_t(q - 1 - i)] = 0.5 * (1.0 + t);
    nodes[std::size_t(i)] = 0.5 * (1.0 - t);
    weights[std::size_t(i)] = 0.5 * w;
    weights[std::size_t(q - 1 - i)] = 0.5 * w;
  }
  return {std::move(nodes), std::move(weights)};
}

/// The joint grid over [0,1] x {0,1}: 2q nodes, one [0,1] rule per label.
inline QuadGrid joint_grid(int q) {
  auto [nodes, weights] = gauss_legendre_01(q);
  QuadGrid grid;
  grid.resolution = q;
  grid.x.reserve(2 * std::size_t(q));
  grid.z.reserve(2 * std::size_t(q));
  grid.w.reserve(2 * std::size_t(q));
  for (int zv : {0, 1}) {
    for (int i = 0; i < q; ++i) {
      grid.x.push_back(nodes[std::size_t(i)]);
      grid.z.push_back(zv);
      grid.w.push_back(weights[std::size_t(i)]);
    }
  }
  return grid;
}

}  // namespace plr
