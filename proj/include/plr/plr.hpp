#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "plr/errors.hpp"
#include "plr/estimator.hpp"
#include "plr/kernels.hpp"
#include "plr/quadrature.hpp"
#include "plr/rng.hpp"

namespace plr {

/// How the eigenvalues of the interaction gram enter the null calibration.
/// `inverse` (default) reads them through the kernel-ridge effective
/// dimension traces; `literal` plugs them directly into the eigen-sums.
enum class RhoMode { inverse, literal };

enum class Calibration { asymptotic, permutation };

/// Null-calibration quantities: theta and sigma at a given lambda plus the
/// interaction spectrum they were computed from.
struct NullParams {
  double theta_hat = 0.0;
  double sigma_hat = 0.0;
  RhoMode rho_mode = RhoMode::inverse;
  Vector spectrum;  // eigenvalues of q_interaction, nonincreasing, floored at 0
};

struct PlrResult {
  double plr = 0.0;
  double lambda = 0.0;
  double theta_hat = 0.0;
  double sigma_hat = 0.0;
  double z_score = 0.0;
  double p_value = 1.0;
  bool reject = false;
  double alpha = 0.05;
  Calibration calibration = Calibration::asymptotic;
  int n_permutations = 0;
  bool degenerate_fallback = false;
  std::uint64_t seed = 0;
};

struct PlrStatistic {
  double value = 0.0;
  FittedDensity fit_full;
  FittedDensity fit_reduced;
};

/// Eigenvalues of a symmetric gram, nonincreasing, negatives clipped to 0.
inline Vector interaction_spectrum(const Matrix& q_interaction) {
  if (q_interaction.rows() != q_interaction.cols())
    throw DomainError("interaction_spectrum: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Matrix> es(q_interaction, Eigen::EigenvaluesOnly);
  Vector ev = es.eigenvalues();
  Vector out(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    out(i) = std::max(0.0, ev(ev.size() - 1 - i));
  return out;
}

/// theta and sigma from a precomputed spectrum (nonincreasing, nonnegative).
inline NullParams null_params_from_spectrum(const Vector& spectrum, double lambda,
                                            std::size_t n, RhoMode mode,
                                            double eig_floor = 1e-10) {
  if (!(lambda > 0.0)) throw DomainError("null_params: lambda must be positive");
  NullParams np;
  np.rho_mode = mode;
  np.spectrum = spectrum;
  double theta = 0.0, sigma_sq = 0.0;
  bool any = false;
  const double nl = double(n) * lambda;
  for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
    double g = spectrum(i);
    if (mode == RhoMode::inverse) {
      if (g <= eig_floor) continue;
      any = true;
      double t = g / (g + nl);
      theta += t;
      sigma_sq += t * t;
    } else {
      any = any || g > eig_floor;
      double t = 1.0 / (1.0 + lambda * g);
      theta += t;
      sigma_sq += t * t;
    }
  }
  if (!any)
    throw CalibrationError(
        "null_params: interaction spectrum is numerically zero; use permutation "
        "calibration");
  np.theta_hat = theta;
  np.sigma_hat = std::sqrt(sigma_sq);
  return np;
}

inline NullParams null_params(const Matrix& q_interaction, double lambda, std::size_t n,
                              RhoMode mode = RhoMode::inverse,
                              const KernelConfig& cfg = {}) {
  return null_params_from_spectrum(interaction_spectrum(q_interaction), lambda, n, mode,
                                   cfg.eig_floor);
}

/// PLR statistic: difference of optimized penalized likelihood objectives,
/// reduced minus full, both fit on the same grams, grid, and lambda.
inline PlrStatistic plr_statistic(const Dataset& data, const GramSet& grams,
                                  double lambda, const KernelConfig& cfg,
                                  const QuadGrid& grid) {
  PlrStatistic s;
  s.fit_full = fit(data, grams, ModelKind::full, lambda, grid, cfg);
  s.fit_reduced = fit(data, grams, ModelKind::reduced, lambda, grid, cfg);
  s.value = s.fit_reduced.objective - s.fit_full.objective;
  return s;
}

inline PlrStatistic plr_statistic(const Dataset& data, double lambda,
                                  const KernelConfig& cfg = {}) {
  GramSet grams = build_grams(data, cfg);
  return plr_statistic(data, grams, lambda, cfg, joint_grid(cfg.quad_points));
}

/// Standardized statistic of the null limit: (2n PLR - theta) / (sqrt(2) sigma).
inline double z_score_of(double plr_value, std::size_t n, double theta, double sigma) {
  return (2.0 * double(n) * plr_value - theta) / (std::sqrt(2.0) * sigma);
}

/// Two-sided normal p-value.
inline double normal_two_sided_p(double z) {
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

/// Theoretical separation rate n^{-2m/(4m+d)}.
inline double separation_rate(std::size_t n, int m, int d) {
  if (n < 1 || m < 1 || d < 1)
    throw DomainError("separation_rate: n, m, d must be positive");
  return std::pow(double(n), -2.0 * m / (4.0 * m + d));
}

/// Data-adaptive smoothing: the root of lambda = sigma_lambda / n, located
/// by bisection on [1e-12, 1e3]. sigma_lambda / n - lambda is strictly
/// decreasing, so the root is unique.
inline double adaptive_lambda_from_spectrum(const Vector& spectrum, std::size_t n,
                                            double eig_floor = 1e-10) {
  auto sigma_at = [&](double lam) {
    double s = 0.0;
    const double nl = double(n) * lam;
    for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
      double g = spectrum(i);
      if (g <= eig_floor) continue;
      double t = g / (g + nl);
      s += t * t;
    }
    return std::sqrt(s);
  };
  double lo = 1e-12, hi = 1e3;
  auto f = [&](double lam) { return sigma_at(lam) / double(n) - lam; };
  double flo = f(lo), fhi = f(hi);
  if (!(flo > 0.0) || !(fhi < 0.0)) {
    std::ostringstream msg;
    msg << "adaptive_lambda: root not bracketed on [1e-12, 1e3]; f(lo)=" << flo
        << " f(hi)=" << fhi << " top eigenvalue="
        << (spectrum.size() ? spectrum(0) : 0.0) << " n=" << n;
    throw CalibrationError(msg.str());
  }
  for (int it = 0; it < 300; ++it) {
    double mid = 0.5 * (lo + hi);
    if (f(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
    if ((hi - lo) <= 1e-12 * std::max(0.5 * (hi + lo), 1e-12)) break;
  }
  return 0.5 * (lo + hi);
}

inline double adaptive_lambda(const Matrix& q_interaction, std::size_t n,
                              const KernelConfig& cfg = {}) {
  Vector spec = interaction_spectrum(q_interaction);
  if (spec.size() == 0 || spec(0) <= cfg.eig_floor)
    throw CalibrationError("adaptive_lambda: interaction spectrum is numerically zero");
  return adaptive_lambda_from_spectrum(spec, n, cfg.eig_floor);
}

/// Permutation calibration: p = (1 + #{b : plr_b >= plr_obs}) / (B + 1) over
/// B seeded label permutations at fixed lambda. Replicates draw independent
/// streams from (seed, b), so execution order never matters.
inline double permutation_calibrate(const Dataset& data, double lambda, int B,
                                    std::uint64_t seed, const KernelConfig& cfg = {},
                                    double* plr_obs_out = nullptr) {
  if (B < 19) throw DomainError("permutation_calibrate: need at least 19 permutations");
  GramSet grams = build_grams(data, cfg);
  QuadGrid grid = joint_grid(cfg.quad_points);
  double obs = plr_statistic(data, grams, lambda, cfg, grid).value;
  if (plr_obs_out) *plr_obs_out = obs;

  RngStream root(seed);
  int exceed = 0, failures = 0, successes = 0;
  std::vector<int> zperm = data.z;
  for (int b = 0; b < B; ++b) {
    RngStream rep = root.split(std::uint64_t(b) + 1);
    zperm = data.z;
    shuffle(zperm, rep);
    try {
      Dataset perm(data.x, zperm);
      GramSet pg = build_grams(perm, cfg);
      double v = plr_statistic(perm, pg, lambda, cfg, grid).value;
      ++successes;
      if (v >= obs) ++exceed;
    } catch (const FitError&) {
      ++failures;
    }
  }
  if (failures > B / 20)
    throw CalibrationError("permutation_calibrate: more than 5% of replicate fits failed");
  return double(1 + exceed) / double(successes + 1);
}

/// The decision rule at level alpha. With lambda unset, the smoothing
/// parameter is chosen by the data-adaptive rule on the same data (see
/// split_test for the sample-splitting variant). Degenerate asymptotic
/// calibration falls back to permutation with a flag in the result.
inline PlrResult test(const Dataset& data, double alpha,
                      std::optional<double> lambda = std::nullopt,
                      Calibration calibration = Calibration::asymptotic,
                      const KernelConfig& cfg = {}, std::uint64_t seed = 0,
                      int n_permutations = 199) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("test: alpha must be in (0,1)");
  if (!data.both_groups_nonempty())
    throw DomainError("test: both groups must be nonempty");

  GramSet grams = build_grams(data, cfg);
  QuadGrid grid = joint_grid(cfg.quad_points);

  PlrResult r;
  r.alpha = alpha;
  r.seed = seed;
  double lam;
  if (lambda) {
    lam = *lambda;
    if (!(lam > 0.0)) throw DomainError("test: lambda must be positive");
  } else {
    lam = adaptive_lambda(grams.q_interaction, data.n(), cfg);
  }
  r.lambda = lam;
  r.plr = plr_statistic(data, grams, lam, cfg, grid).value;

  if (calibration == Calibration::asymptotic) {
    try {
      NullParams np = null_params(grams.q_interaction, lam, data.n(),
                                  RhoMode::inverse, cfg);
      r.theta_hat = np.theta_hat;
      r.sigma_hat = np.sigma_hat;
      r.z_score = z_score_of(r.plr, data.n(), np.theta_hat, np.sigma_hat);
      r.p_value = normal_two_sided_p(r.z_score);
      r.calibration = Calibration::asymptotic;
      r.reject = r.p_value <= alpha;
      return r;
    } catch (const CalibrationError&) {
      r.degenerate_fallback = true;
    }
  }

  r.calibration = Calibration::permutation;
  r.n_permutations = n_permutations;
  r.p_value = permutation_calibrate(data, lam, n_permutations, seed, cfg);
  r.reject = r.p_value <= alpha;
  return r;
}

/// Sample-splitting pipeline: a seeded shuffle assigns the first half of the
/// raw data to smoothing selection and the second half to testing. Each half
/// is rank-mapped independently.
inline PlrResult split_test(const std::vector<double>& raw_x, const std::vector<int>& raw_z,
                            double alpha, std::uint64_t seed, const KernelConfig& cfg = {},
                            Calibration calibration = Calibration::asymptotic,
                            int n_permutations = 199) {
  const std::size_t n = raw_x.size();
  if (n != raw_z.size()) throw DomainError("split_test: x and z lengths differ");
  if (n < 8) throw DomainError("split_test: need at least 8 observations");

  const std::size_t n_tune = (n + 1) / 2;
  std::vector<std::size_t> order(n);
  bool ok = false;
  for (int attempt = 0; attempt < 20 && !ok; ++attempt) {
    std::iota(order.begin(), order.end(), std::size_t(0));
    RngStream rng = RngStream(seed).split(std::uint64_t(attempt));
    shuffle(order, rng);
    std::size_t ones_tune = 0, ones_test = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (raw_z[order[i]] == 1) (i < n_tune ? ones_tune : ones_test) += 1;
    }
    ok = ones_tune > 0 && ones_tune < n_tune && ones_test > 0 &&
         ones_test < n - n_tune;
  }
  if (!ok)
    throw CalibrationError("split_test: could not form two-group halves in 20 shuffles");

  std::vector<double> x_tune, x_test;
  std::vector<int> z_tune, z_test;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_tune) {
      x_tune.push_back(raw_x[order[i]]);
      z_tune.push_back(raw_z[order[i]]);
    } else {
      x_test.push_back(raw_x[order[i]]);
      z_test.push_back(raw_z[order[i]]);
    }
  }

  Dataset tune(rank_map(x_tune), z_tune);
  GramSet tune_grams = build_grams(tune, cfg);
  double lam = adaptive_lambda(tune_grams.q_interaction, tune.n(), cfg);

  Dataset hold(rank_map(x_test), z_test);
  PlrResult r = test(hold, alpha, lam, calibration, cfg, seed, n_permutations);
  r.seed = seed;
  return r;
}

}  // namespace plr
