#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "plr/errors.hpp"

namespace plr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Configuration shared by all kernel and fit computations.
struct KernelConfig {
  int m = 2;                 // Sobolev smoothness order, 1 or 2
  double eig_floor = 1e-10;  // eigenvalues below this count as zero
  double psd_tol = 1e-8;     // tolerated negative drift in gram spectra
  int quad_points = 64;      // Gauss-Legendre nodes per z-slice

  void validate() const {
    if (m != 1 && m != 2)
      throw ConfigError("KernelConfig: smoothness order must be 1 or 2");
    if (!(eig_floor > 0.0)) throw ConfigError("KernelConfig: eig_floor must be positive");
    if (eig_floor < 0.0 || psd_tol < 0.0)
      throw ConfigError("KernelConfig: tolerances must be nonnegative");
    if (quad_points < 1) throw ConfigError("KernelConfig: quad_points must be >= 1");
  }
};

/// Paired observations (x_i in [0,1], z_i in {0,1}) with empirical group
/// weights. x is expected on [0,1] already; see rank_map / minmax_map for
/// bringing raw data onto the unit interval.
struct Dataset {
  std::vector<double> x;
  std::vector<int> z;
  std::array<double, 2> omega_hat{0.0, 0.0};

  Dataset() = default;
  Dataset(std::vector<double> xs, std::vector<int> zs)
      : x(std::move(xs)), z(std::move(zs)) {
    if (x.size() != z.size()) throw DomainError("Dataset: x and z lengths differ");
    if (x.size() < 2) throw DomainError("Dataset: need at least two observations");
    std::size_t n1 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!(x[i] >= 0.0 && x[i] <= 1.0))
        throw DomainError("Dataset: x values must lie in [0,1]");
      if (z[i] != 0 && z[i] != 1) throw DomainError("Dataset: labels must be 0 or 1");
      n1 += std::size_t(z[i]);
    }
    omega_hat[1] = double(n1) / double(x.size());
    omega_hat[0] = 1.0 - omega_hat[1];
  }

  std::size_t n() const { return x.size(); }
  std::size_t count(int label) const {
    std::size_t c = 0;
    for (int zi : z) c += std::size_t(zi == label);
    return c;
  }
  bool both_groups_nonempty() const {
    return omega_hat[0] > 0.0 && omega_hat[1] > 0.0;
  }
};

/// Scaled Bernoulli polynomial k_r = B_r(t)/r! for r in {2,4}.
inline double bernoulli_k(int r, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("bernoulli_k: argument outside [0,1]");
  if (r == 2) return (t * t - t + 1.0 / 6.0) / 2.0;
  if (r == 4) {
    double s = t - 0.5;
    double s2 = s * s;
    return (s2 * s2 - 0.5 * s2 + 7.0 / 240.0) / 24.0;
  }
  throw ConfigError("bernoulli_k: only orders 2 and 4 are implemented");
}

/// Homogeneous Sobolev kernel on [0,1]:
///   K(x, x~) = 1 + (-1)^{m-1} k_{2m}(|x - x~|).
/// For m=2 this is the homogeneous cubic spline kernel. Evaluation at the
/// absolute difference coincides with the fractional-part convention since
/// k_{2m}(t) = k_{2m}(1-t).
inline double sobolev_kernel(double x, double x_tilde, const KernelConfig& cfg) {
  if (!(x >= 0.0 && x <= 1.0) || !(x_tilde >= 0.0 && x_tilde <= 1.0))
    throw DomainError("sobolev_kernel: inputs must lie in [0,1]");
  double sign = (cfg.m % 2 == 1) ? 1.0 : -1.0;
  return 1.0 + sign * bernoulli_k(2 * cfg.m, std::abs(x - x_tilde));
}

/// Indicator kernel on {0,1}.
inline double discrete_kernel(int z, int z_tilde) {
  return z == z_tilde ? 1.0 : 0.0;
}

/// Mean/main-effect split of the indicator kernel under weights omega. The
/// mean space is the span of the weight embedding, so its kernel is the
/// projection form
///   K0(z, z~) = w_z w_z~ / sum_l w_l^2,   K1 = indicator - K0.
/// Both components are positive semidefinite and sum back to the indicator
/// exactly; at balanced weights K0 is constant 1/2, matching the additive
/// row+column form, which is indefinite once the weights are unequal.
inline std::pair<Eigen::Matrix2d, Eigen::Matrix2d> decompose_discrete(
    const std::array<double, 2>& omega) {
  if (omega[0] < 0.0 || omega[1] < 0.0 || std::abs(omega[0] + omega[1] - 1.0) > 1e-12)
    throw DomainError("decompose_discrete: weights must be nonnegative and sum to 1");
  const double s = omega[0] * omega[0] + omega[1] * omega[1];
  Eigen::Matrix2d k0, k1;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      k0(a, b) = omega[std::size_t(a)] * omega[std::size_t(b)] / s;
      k1(a, b) = discrete_kernel(a, b) - k0(a, b);
    }
  return {k0, k1};
}

/// Mean/main-effect split of a continuous gram with plug-in (sample mean)
/// expectations. With r the row means and g the grand mean, the mean-space
/// kernel is the projection form q0 = r r^T / g (a Schur complement, so
/// q1 = q - q0 is positive semidefinite whenever q is) and rows of q1 sum
/// to zero exactly. q0 + q1 = q holds entrywise by construction.
inline std::pair<Matrix, Matrix> decompose_continuous_gram(const Matrix& q_x) {
  if (q_x.rows() != q_x.cols())
    throw DomainError("decompose_continuous_gram: matrix must be square");
  const auto n = q_x.rows();
  Vector rowmean = q_x.rowwise().mean();
  double grand = rowmean.mean();
  Matrix q0;
  if (std::abs(grand) < 1e-300)
    q0 = Matrix::Zero(n, n);  // trivial mean embedding
  else
    q0 = rowmean * rowmean.transpose() / grand;
  Matrix q1 = q_x - q0;
  return {std::move(q0), std::move(q1)};
}

/// Marginal, decomposed, and product gram matrices for one dataset.
struct GramSet {
  Matrix q_x, q_z;                         // marginal grams
  Matrix q0_x, q1_x, q0_z, q1_z;           // decomposed marginals
  Matrix q_full, q_reduced, q_interaction; // product grams
};

/// All gram matrices used by the full and reduced fits. The product kernel
/// is K(Y_i, Y_j) = K_x(x_i, x_j) K_z(z_i, z_j); the reduced gram drops the
/// interaction component q1_x o q1_z, so q_reduced + q_interaction = q_full
/// holds entrywise by construction.
inline GramSet build_grams(const Dataset& data, const KernelConfig& cfg) {
  cfg.validate();
  const auto n = Eigen::Index(data.n());
  GramSet g;
  g.q_x.resize(n, n);
  g.q_z.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      double kx = sobolev_kernel(data.x[std::size_t(i)], data.x[std::size_t(j)], cfg);
      g.q_x(i, j) = g.q_x(j, i) = kx;
      double kz = discrete_kernel(data.z[std::size_t(i)], data.z[std::size_t(j)]);
      g.q_z(i, j) = g.q_z(j, i) = kz;
    }
  }
  auto [q0x, q1x] = decompose_continuous_gram(g.q_x);
  g.q0_x = std::move(q0x);
  g.q1_x = std::move(q1x);

  auto [k0, k1] = decompose_discrete(data.omega_hat);
  g.q0_z.resize(n, n);
  g.q1_z.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      g.q0_z(i, j) = k0(data.z[std::size_t(i)], data.z[std::size_t(j)]);
      g.q1_z(i, j) = k1(data.z[std::size_t(i)], data.z[std::size_t(j)]);
    }

  g.q_full = g.q_x.cwiseProduct(g.q_z);
  g.q_interaction = g.q1_x.cwiseProduct(g.q1_z);
  g.q_reduced = g.q0_x.cwiseProduct(g.q0_z) + g.q1_x.cwiseProduct(g.q0_z) +
                g.q0_x.cwiseProduct(g.q1_z);
  return g;
}

}  // namespace plr
