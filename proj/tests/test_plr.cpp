#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "plr/plr.hpp"
#include "plr/rng.hpp"
#include "plr/simulate.hpp"

using namespace plr;

namespace {

Dataset h0_dataset(std::size_t n, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<double> raw(n);
  std::vector<int> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    raw[i] = sample_normal(rng);
    z[i] = rng.uniform01() < 0.5 ? 0 : 1;
  }
  z[0] = 0;
  z[1] = 1;
  return Dataset(rank_map(raw), z);
}

}  // namespace

TEST_CASE("separation rate values") {
  CHECK(separation_rate(1024, 2, 1) ==
        Catch::Approx(std::exp(-(4.0 / 9.0) * std::log(1024.0))).margin(1e-12));
  CHECK(separation_rate(1, 2, 1) == 1.0);
  CHECK(separation_rate(1, 1, 3) == 1.0);
  double prev = 1.0;
  for (std::size_t n : {2, 8, 64, 512, 4096}) {
    double r = separation_rate(n, 2, 1);
    CHECK(r < prev);
    prev = r;
  }
  CHECK_THROWS_AS(separation_rate(0, 2, 1), DomainError);
}

TEST_CASE("null params closed forms") {
  // identical eigenvalues: theta = n g/(g+n lambda), sigma^2 = n (g/(g+n lambda))^2
  const std::size_t n = 40;
  const double g = 3.7, lam = 0.013;
  Vector spec = Vector::Constant(Eigen::Index(n), g);
  NullParams np = null_params_from_spectrum(spec, lam, n, RhoMode::inverse);
  double t = g / (g + double(n) * lam);
  CHECK(np.theta_hat == Catch::Approx(double(n) * t).epsilon(1e-12));
  CHECK(np.sigma_hat == Catch::Approx(std::sqrt(double(n)) * t).epsilon(1e-12));
  CHECK(np.sigma_hat * np.sigma_hat <= np.theta_hat + 1e-12);
}

TEST_CASE("null params limits in lambda") {
  Vector spec(4);
  spec << 5.0, 2.0, 1.0, 0.0;
  NullParams huge = null_params_from_spectrum(spec, 1e12, 10, RhoMode::inverse);
  CHECK(huge.theta_hat < 1e-6);
  NullParams tiny = null_params_from_spectrum(spec, 1e-13, 10, RhoMode::inverse);
  CHECK(tiny.theta_hat == Catch::Approx(3.0).margin(1e-6));  // numerical rank
}

TEST_CASE("null params are monotone in lambda and match the ridge trace") {
  KernelConfig cfg;
  Dataset data = h0_dataset(60, 99);
  GramSet grams = build_grams(data, cfg);
  Vector spec = interaction_spectrum(grams.q_interaction);

  double prev_theta = std::numeric_limits<double>::infinity();
  double prev_sigma = std::numeric_limits<double>::infinity();
  for (double lg = -6.0; lg <= 2.0; lg += 1.0) {
    double lam = std::pow(10.0, lg);
    NullParams np = null_params_from_spectrum(spec, lam, data.n(), RhoMode::inverse);
    CHECK(np.theta_hat < prev_theta - 1e-12);
    CHECK(np.sigma_hat < prev_sigma - 1e-12);
    prev_theta = np.theta_hat;
    prev_sigma = np.sigma_hat;

    // second route: trace of Q11 (Q11 + n lambda I)^-1
    const auto n = Eigen::Index(data.n());
    Matrix shifted = grams.q_interaction + double(data.n()) * lam * Matrix::Identity(n, n);
    double trace = (shifted.ldlt().solve(grams.q_interaction)).trace();
    CHECK(np.theta_hat == Catch::Approx(trace).margin(1e-8));
  }
}

TEST_CASE("degenerate spectrum raises a calibration error") {
  Vector spec = Vector::Zero(5);
  CHECK_THROWS_AS(null_params_from_spectrum(spec, 0.1, 5, RhoMode::inverse),
                  CalibrationError);
  Matrix zero = Matrix::Zero(4, 4);
  CHECK_THROWS_AS(adaptive_lambda(zero, 4), CalibrationError);
}

TEST_CASE("literal mode plugs eigenvalues straight into the eigen-sums") {
  Vector spec(3);
  spec << 4.0, 1.0, 0.0;
  double lam = 0.5;
  NullParams np = null_params_from_spectrum(spec, lam, 3, RhoMode::literal);
  double expect_theta = 1.0 / 3.0 + 1.0 / 1.5 + 1.0;
  CHECK(np.theta_hat == Catch::Approx(expect_theta).epsilon(1e-12));
}

TEST_CASE("adaptive lambda matches the constant-spectrum closed form") {
  const std::size_t n = 50;
  const double g = 2.5;
  Vector spec = Vector::Constant(Eigen::Index(n), g);
  double lam = adaptive_lambda_from_spectrum(spec, n);
  double rn = std::sqrt(double(n));
  double closed = (-g * rn + std::sqrt(g * g * n + 4.0 * g * n * rn)) /
                  (2.0 * n * rn);
  CHECK(lam == Catch::Approx(closed).epsilon(1e-6));
  // root condition
  double sigma = std::sqrt(double(n)) * g / (g + double(n) * lam);
  CHECK(std::abs(lam - sigma / double(n)) <= 1e-8 * std::max(lam, 1e-12));
}

TEST_CASE("adaptive lambda grows with the spectrum scale") {
  const std::size_t n = 30;
  Vector spec(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < spec.size(); ++i) spec(i) = 10.0 / double(i + 1);
  double lam1 = adaptive_lambda_from_spectrum(spec, n);
  double lam10 = adaptive_lambda_from_spectrum((10.0 * spec).eval(), n);
  CHECK(lam10 > lam1);
  // closed-form comparison on constant spectra
  double a = adaptive_lambda_from_spectrum(Vector::Constant(10, 1.0).eval(), 10);
  double b = adaptive_lambda_from_spectrum(Vector::Constant(10, 10.0).eval(), 10);
  CHECK(b > a);
}

TEST_CASE("plr vanishes when the labels are degenerate") {
  KernelConfig cfg;
  std::vector<double> x;
  std::vector<int> z;
  for (int i = 0; i < 20; ++i) {
    x.push_back(double(i + 1) / 21.0);
    z.push_back(0);
  }
  auto stat = plr_statistic(Dataset(x, z), 1e-2, cfg);
  CHECK(std::abs(stat.value) < 1e-8);
}

TEST_CASE("plr is nonnegative and label-reindexing invariant") {
  KernelConfig cfg;
  RngStream rng(321);
  for (int trial = 0; trial < 5; ++trial) {
    Dataset data = h0_dataset(40, 1000 + std::uint64_t(trial));
    double lam = 5e-3;
    auto stat = plr_statistic(data, lam, cfg);
    CHECK(stat.value >= -1e-8);

    // jointly permute (x, z) pairs
    std::vector<std::size_t> order(data.n());
    std::iota(order.begin(), order.end(), std::size_t(0));
    shuffle(order, rng);
    std::vector<double> xp(data.n());
    std::vector<int> zp(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) {
      xp[i] = data.x[order[i]];
      zp[i] = data.z[order[i]];
    }
    auto stat2 = plr_statistic(Dataset(xp, zp), lam, cfg);
    CHECK(stat2.value == Catch::Approx(stat.value).margin(1e-10));
  }
}

TEST_CASE("duplicating every observation preserves the fit") {
  KernelConfig cfg;
  Dataset data = h0_dataset(24, 77);
  double lam = 1e-2;
  auto stat = plr_statistic(data, lam, cfg);

  std::vector<double> x2;
  std::vector<int> z2;
  for (std::size_t i = 0; i < data.n(); ++i) {
    x2.insert(x2.end(), 2, data.x[i]);
    z2.insert(z2.end(), 2, data.z[i]);
  }
  auto stat2 = plr_statistic(Dataset(x2, z2), lam, cfg);
  CHECK(stat2.value >= -1e-8);
  for (double xq : {0.1, 0.37, 0.62, 0.9})
    for (int zq : {0, 1}) {
      CHECK(eval_density(stat2.fit_full, xq, zq) ==
            Catch::Approx(eval_density(stat.fit_full, xq, zq)).margin(1e-6));
      CHECK(eval_density(stat2.fit_reduced, xq, zq) ==
            Catch::Approx(eval_density(stat.fit_reduced, xq, zq)).margin(1e-6));
    }
}

TEST_CASE("z-score centering at the null mean") {
  CHECK(z_score_of(1.0, 50, 100.0, 3.0) == Catch::Approx(0.0).margin(1e-15));
  CHECK(normal_two_sided_p(0.0) == Catch::Approx(1.0));
  // constructed: 2n*plr == theta  =>  z = 0, p = 1, never rejects
  PlrResult r;
  r.z_score = z_score_of(0.5, 100, 100.0, 2.0);
  r.p_value = normal_two_sided_p(r.z_score);
  CHECK(r.p_value == Catch::Approx(1.0));
  CHECK_FALSE(r.p_value <= 0.99);
}

TEST_CASE("test wraps the pieces consistently") {
  KernelConfig cfg;
  Dataset data = h0_dataset(60, 2024);
  PlrResult r = test(data, 0.05, std::nullopt, Calibration::asymptotic, cfg, 7);
  GramSet grams = build_grams(data, cfg);
  double lam = adaptive_lambda(grams.q_interaction, data.n(), cfg);
  CHECK(r.lambda == Catch::Approx(lam));
  NullParams np = null_params(grams.q_interaction, lam, data.n(), RhoMode::inverse, cfg);
  CHECK(r.theta_hat == Catch::Approx(np.theta_hat));
  CHECK(r.z_score ==
        Catch::Approx(z_score_of(r.plr, data.n(), np.theta_hat, np.sigma_hat)));
  CHECK(r.p_value == Catch::Approx(normal_two_sided_p(r.z_score)));
  CHECK(r.reject == (r.p_value <= 0.05));
  CHECK(r.plr >= -1e-8);
}

TEST_CASE("test rejects single-group data") {
  KernelConfig cfg;
  std::vector<double> x{0.1, 0.5, 0.9};
  std::vector<int> z{0, 0, 0};
  CHECK_THROWS_AS(test(Dataset(x, z), 0.05, 1e-3, Calibration::asymptotic, cfg),
                  DomainError);
  CHECK_THROWS_AS(test(h0_dataset(20, 5), 1.5, 1e-3), DomainError);
}

TEST_CASE("permutation calibrate edge values") {
  KernelConfig cfg;
  Dataset data = h0_dataset(30, 404);
  double obs = 0.0;
  double p = permutation_calibrate(data, 5e-3, 19, 11, cfg, &obs);
  CHECK(p >= 1.0 / 20.0);
  CHECK(p <= 1.0);
  CHECK(obs >= -1e-8);
  double p2 = permutation_calibrate(data, 5e-3, 19, 11, cfg);
  CHECK(p == p2);  // determinism
  CHECK_THROWS_AS(permutation_calibrate(data, 5e-3, 10, 11, cfg), DomainError);
}

TEST_CASE("split test is deterministic and records its seed") {
  KernelConfig cfg;
  RngStream rng(808);
  std::vector<double> raw(60);
  std::vector<int> z(60);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = sample_normal(rng);
    z[i] = rng.uniform01() < 0.5 ? 0 : 1;
  }
  PlrResult a = split_test(raw, z, 0.05, 42, cfg);
  PlrResult b = split_test(raw, z, 0.05, 42, cfg);
  CHECK(a.plr == b.plr);
  CHECK(a.lambda == b.lambda);
  CHECK(a.p_value == b.p_value);
  CHECK(a.seed == 42);
  CHECK_THROWS_AS(split_test({1, 2, 3}, {0, 1, 0}, 0.05, 1, cfg), DomainError);
}

TEST_CASE("split test fails cleanly when one label is absent") {
  KernelConfig cfg;
  std::vector<double> raw(20, 0.0);
  std::vector<int> z(20, 0);
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = double(i);
  CHECK_THROWS_AS(split_test(raw, z, 0.05, 3, cfg), CalibrationError);
}
