#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "plr/baselines.hpp"
#include "plr/estimator.hpp"
#include "plr/rng.hpp"

using namespace plr;

namespace {

Dataset random_dataset(std::size_t n, RngStream& rng, double unbalance = 0.5) {
  std::vector<double> x(n);
  std::vector<int> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.uniform01();
    z[i] = rng.uniform01() < unbalance ? 1 : 0;
  }
  z[0] = 0;
  z[1] = 1;
  return Dataset(x, z);
}

}  // namespace

TEST_CASE("mmd vanishes for paired identical groups") {
  KernelConfig cfg;
  std::vector<double> x;
  std::vector<int> z;
  for (int i = 0; i < 15; ++i) {
    double t = double(i + 1) / 16.0;
    x.push_back(t);
    z.push_back(0);
    x.push_back(t);
    z.push_back(1);
  }
  CHECK(std::abs(mmd_biased(Dataset(x, z), cfg)) < 1e-12);
}

TEST_CASE("mmd is nonnegative") {
  KernelConfig cfg;
  RngStream rng(15);
  for (int trial = 0; trial < 30; ++trial) {
    Dataset d = random_dataset(6 + rng.next_below(80), rng, 0.3 + 0.4 * rng.uniform01());
    CHECK(mmd_biased(d, cfg) >= -1e-12);
  }
  std::vector<double> x{0.1, 0.2, 0.3};
  std::vector<int> z{0, 0, 0};
  CHECK_THROWS_AS(mmd_biased(Dataset(x, z), cfg), DomainError);
}

TEST_CASE("score and mmd coincide on balanced designs") {
  KernelConfig cfg;
  RngStream rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t half = 3 + rng.next_below(40);
    std::vector<double> x(2 * half);
    std::vector<int> z(2 * half);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = rng.uniform01();
      z[i] = i < half ? 0 : 1;
    }
    Dataset d(x, z);
    CHECK(score_statistic(d, cfg) == Catch::Approx(mmd_biased(d, cfg)).margin(1e-10));
  }
}

TEST_CASE("scaled score equals mmd on unbalanced designs") {
  KernelConfig cfg;
  RngStream rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    Dataset d = random_dataset(8 + rng.next_below(100), rng, 0.25 + 0.5 * rng.uniform01());
    double n0 = double(d.count(0)), n1 = double(d.count(1)), n = double(d.n());
    double scaled = 4.0 * n0 * n1 / (n * n) * score_statistic(d, cfg);
    CHECK(scaled == Catch::Approx(mmd_biased(d, cfg)).margin(1e-10));
  }
}

TEST_CASE("score vanishes for degenerate labels") {
  KernelConfig cfg;
  std::vector<double> x{0.2, 0.4, 0.6, 0.8};
  std::vector<int> z{1, 1, 1, 1};
  CHECK(std::abs(score_statistic(Dataset(x, z), cfg)) < 1e-14);
}

TEST_CASE("ks statistic on hand-computed envelopes") {
  CHECK(ks_statistic({0.1, 0.2}, {0.3, 0.4}) == Catch::Approx(1.0));
  CHECK(ks_statistic({0.1, 0.3}, {0.2, 0.4}) == Catch::Approx(0.5));
  std::vector<double> same{0.2, 0.5, 0.9};
  CHECK(ks_statistic(same, same) == Catch::Approx(0.0));
  CHECK_THROWS_AS(ks_statistic({}, {0.1}), DomainError);
}

TEST_CASE("ks statistic is invariant under monotone transforms") {
  RngStream rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x0(20), x1(25);
    for (auto& v : x0) v = rng.uniform01();
    for (auto& v : x1) v = rng.uniform01() * rng.uniform01();
    auto r0 = ks_test(x0, x1);
    std::vector<double> t0 = x0, t1 = x1;
    for (auto& v : t0) v = std::exp(3.0 * v);
    for (auto& v : t1) v = std::exp(3.0 * v);
    auto r1 = ks_test(t0, t1);
    CHECK(r0.statistic == Catch::Approx(r1.statistic).margin(1e-15));
    CHECK(r0.statistic >= 0.0);
    CHECK(r0.statistic <= 1.0);
    CHECK(r0.p_value >= 0.0);
    CHECK(r0.p_value <= 1.0);
  }
}

TEST_CASE("ks permutation mode is deterministic") {
  RngStream rng(35);
  std::vector<double> x0(15), x1(18);
  for (auto& v : x0) v = rng.uniform01();
  for (auto& v : x1) v = rng.uniform01();
  auto a = ks_test(x0, x1, true, 99, 5);
  auto b = ks_test(x0, x1, true, 99, 5);
  CHECK(a.p_value == b.p_value);
  CHECK(a.method == BaselineMethod::ks_perm);
  CHECK(a.n_permutations == 99);
}

TEST_CASE("baseline permutation tail formula") {
  KernelConfig cfg;
  RngStream rng(37);
  Dataset d = random_dataset(30, rng);
  // a statistic that only depends on x is permutation-invariant, so the
  // observed value ties every replicate and p = 1
  auto const_stat = [](const Dataset&) { return 1.0; };
  CHECK(baseline_permutation(d, const_stat, 39, 2) == Catch::Approx(1.0));
  // strictly larger observed value than any replicate => p = 1/(B+1)
  int calls = 0;
  auto decreasing = [&calls](const Dataset&) { return calls++ == 0 ? 10.0 : 0.0; };
  CHECK(baseline_permutation(d, decreasing, 39, 2) == Catch::Approx(1.0 / 40.0));
}

TEST_CASE("fast mmd permutation path agrees with the generic one") {
  KernelConfig cfg;
  RngStream rng(39);
  Dataset d = random_dataset(40, rng, 0.4);
  BaselineResult fast = mmd_test(d, 99, 123, cfg);
  CHECK(fast.statistic == Catch::Approx(mmd_biased(d, cfg)).margin(1e-12));
  double generic = baseline_permutation(
      d, [&](const Dataset& dd) { return mmd_biased(dd, cfg); }, 99, 123);
  CHECK(fast.p_value == Catch::Approx(generic));
}
