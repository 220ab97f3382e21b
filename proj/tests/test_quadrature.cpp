#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "plr/quadrature.hpp"

using namespace plr;

TEST_CASE("one-point rule is the midpoint rule") {
  auto [nodes, weights] = gauss_legendre_01(1);
  REQUIRE(nodes.size() == 1);
  CHECK(nodes[0] == Catch::Approx(0.5).margin(1e-15));
  CHECK(weights[0] == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("two-point rule integrates x^3 exactly") {
  auto [nodes, weights] = gauss_legendre_01(2);
  double integral = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    integral += weights[i] * nodes[i] * nodes[i] * nodes[i];
  CHECK(integral == Catch::Approx(0.25).margin(1e-14));
}

TEST_CASE("weights sum to one and nodes stay interior") {
  for (int q : {1, 2, 3, 5, 8, 16, 33, 64, 128}) {
    auto [nodes, weights] = gauss_legendre_01(q);
    double sum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      sum += weights[i];
      CHECK(weights[i] > 0.0);
      CHECK(nodes[i] > 0.0);
      CHECK(nodes[i] < 1.0);
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("polynomial exactness up to degree 2q-1") {
  for (int q : {2, 4, 8, 16}) {
    auto [nodes, weights] = gauss_legendre_01(q);
    for (int p = 0; p <= 2 * q - 1; ++p) {
      double integral = 0.0;
      for (std::size_t i = 0; i < nodes.size(); ++i)
        integral += weights[i] * std::pow(nodes[i], p);
      CHECK(integral == Catch::Approx(1.0 / (p + 1)).margin(1e-12));
    }
  }
}

TEST_CASE("zero-node rule is a configuration error") {
  CHECK_THROWS_AS(gauss_legendre_01(0), ConfigError);
}

TEST_CASE("joint grid covers both labels with unit slice mass") {
  QuadGrid g = joint_grid(1);
  REQUIRE(g.size() == 2);
  CHECK(g.x[0] == Catch::Approx(0.5));
  CHECK(g.x[1] == Catch::Approx(0.5));
  CHECK(g.z[0] == 0);
  CHECK(g.z[1] == 1);
  CHECK(g.w[0] == Catch::Approx(1.0));
  CHECK(g.w[1] == Catch::Approx(1.0));

  QuadGrid g64 = joint_grid(64);
  CHECK(g64.integrate([](double, int) { return 1.0; }) == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("joint grid integrates x restricted to one slice") {
  QuadGrid g = joint_grid(2);
  double v = g.integrate([](double x, int z) { return z == 1 ? x : 0.0; });
  CHECK(v == Catch::Approx(0.5).margin(1e-14));
}

TEST_CASE("refinement plateau for a smooth integrand") {
  auto f = [](double x, int) { return std::exp(std::sin(3.0 * x) - x * x); };
  double v64 = joint_grid(64).integrate(f);
  double v128 = joint_grid(128).integrate(f);
  CHECK(std::abs(v64 - v128) < 1e-9);
}
