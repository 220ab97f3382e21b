#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numeric>
#include <utility>
#include <vector>

#include "plr/errors.hpp"
#include "plr/kernels.hpp"
#include "plr/quadrature.hpp"

namespace plr {

enum class ModelKind { full, reduced };

/// Pooled-rank transform onto (0,1): x -> rank(x)/(n+1), average ranks for
/// ties. Monotone and distribution-free, so it preserves any two-sample
/// alternative while placing the data on the kernel's domain.
inline std::vector<double> rank_map(const std::vector<double>& raw) {
  const std::size_t n = raw.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return raw[a] < raw[b]; });
  std::vector<double> mapped(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && raw[order[j + 1]] == raw[order[i]]) ++j;
    double avg_rank = 0.5 * double(i + 1 + j + 1);  // ranks are 1-based
    for (std::size_t k = i; k <= j; ++k) mapped[order[k]] = avg_rank / double(n + 1);
    i = j + 1;
  }
  return mapped;
}

/// Affine rescale of raw data onto [eps, 1-eps].
inline std::vector<double> minmax_map(const std::vector<double>& raw, double eps = 0.05) {
  auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  double lo = *lo_it, hi = *hi_it;
  std::vector<double> mapped(raw.size(), 0.5);
  if (hi > lo)
    for (std::size_t i = 0; i < raw.size(); ++i)
      mapped[i] = eps + (1.0 - 2.0 * eps) * (raw[i] - lo) / (hi - lo);
  return mapped;
}

namespace detail {

// Reduced-model kernel pieces shared by gram construction and off-sample
// evaluation: expectations are plug-in sample means over the observed x and
// the empirical label weights, matching build_grams at in-sample points.
struct KernelEvaluator {
  std::vector<double> x;
  std::vector<int> z;
  std::array<double, 2> omega;
  double omega_sq_sum;
  Vector kx_rowmean;  // (1/n) sum_j Kx(x_i, x_j)
  double kx_grand;
  KernelConfig cfg;

  KernelEvaluator() = default;
  KernelEvaluator(const Dataset& data, const Matrix& q_x, const KernelConfig& config)
      : x(data.x),
        z(data.z),
        omega(data.omega_hat),
        omega_sq_sum(data.omega_hat[0] * data.omega_hat[0] +
                     data.omega_hat[1] * data.omega_hat[1]),
        kx_rowmean(q_x.rowwise().mean()),
        kx_grand(q_x.mean()),
        cfg(config) {}

  double mean_kx(double xq) const {
    double s = 0.0;
    for (double xi : x) s += sobolev_kernel(xi, xq, cfg);
    return s / double(x.size());
  }

  double k0_z(int zi, int zq) const {
    return omega[std::size_t(zi)] * omega[std::size_t(zq)] / omega_sq_sum;
  }
  double k1_z(int zi, int zq) const { return discrete_kernel(zi, zq) - k0_z(zi, zq); }

  // K(Y_i, (xq,zq)) under the full product kernel.
  double k_full(std::size_t i, double xq, int zq, double /*mean_kx_q*/) const {
    if (z[i] != zq) return 0.0;
    return sobolev_kernel(x[i], xq, cfg);
  }

  // K0(Y_i, (xq,zq)) under the reduced (no-interaction) kernel:
  //   Kx * K0z + K0x * K1z   with K0x(xi,xq) = m_i m(xq) / grand.
  double k_reduced(std::size_t i, double xq, int zq, double mean_kx_q) const {
    double kx = sobolev_kernel(x[i], xq, cfg);
    double k0x = kx_rowmean(Eigen::Index(i)) * mean_kx_q / kx_grand;
    return kx * k0_z(z[i], zq) + k0x * k1_z(z[i], zq);
  }

  double k_model(std::size_t i, double xq, int zq, ModelKind model, double mean_kx_q) const {
    return model == ModelKind::full ? k_full(i, xq, zq, mean_kx_q)
                                    : k_reduced(i, xq, zq, mean_kx_q);
  }

  // n x grid.size() matrix of kernel sections evaluated at the grid nodes.
  Matrix eval_matrix(ModelKind model, const QuadGrid& grid) const {
    const auto n = Eigen::Index(x.size());
    const auto m = Eigen::Index(grid.size());
    Matrix zeta(n, m);
    for (Eigen::Index q = 0; q < m; ++q) {
      double xq = grid.x[std::size_t(q)];
      int zq = grid.z[std::size_t(q)];
      double mq = mean_kx(xq);
      for (Eigen::Index i = 0; i < n; ++i)
        zeta(i, q) = k_model(std::size_t(i), xq, zq, model, mq);
    }
    return zeta;
  }
};

// One penalized-likelihood subproblem over a coefficient block:
//   f(c) = -b^T c + sum_q w_q exp((Z^T c)_q) + (lambda/2) c^T M c.
struct NewtonProblem {
  const Matrix* M = nullptr;  // penalty gram
  Matrix Z;                   // n x m kernel sections at quadrature nodes
  Vector w;                   // m positive quadrature weights
  Vector b;                   // empirical linear term, (1/n_total) M 1
  double lambda = 0.0;
};

struct NewtonResult {
  Vector c;
  int iterations = 0;
  double grad_norm = 0.0;
  double objective = 0.0;
  double mass = 0.0;  // sum_q w_q exp(eta_q) at the optimum
  std::vector<double> objective_trace;
};

inline double problem_objective(const NewtonProblem& p, const Vector& c, Vector* eta_out) {
  Vector eta = p.Z.transpose() * c;
  double integral = 0.0;
  for (Eigen::Index q = 0; q < eta.size(); ++q) integral += p.w(q) * std::exp(eta(q));
  if (eta_out) *eta_out = std::move(eta);
  return -p.b.dot(c) + integral + 0.5 * p.lambda * c.dot(*p.M * c);
}

// Damped Newton from c = 0 with halving line search. The linear system
// (H + jitter I) delta = -g is solved either densely or, when the
// quadrature rank is small relative to n, through the Woodbury identity
// with a single factorization of lambda M + jitter I per fit.
inline NewtonResult newton_minimize(const NewtonProblem& p, int max_iter = 100) {
  const auto n = Eigen::Index(p.M->rows());
  const auto m = Eigen::Index(p.w.size());
  const double step_floor = std::ldexp(1.0, -30);

  NewtonResult res;
  res.c = Vector::Zero(n);
  Vector eta = Vector::Zero(m);
  double obj = problem_objective(p, res.c, &eta);
  res.objective_trace.push_back(obj);

  // Jitter measured at the initial iterate (eta = 0).
  double trace_h = p.lambda * p.M->trace();
  for (Eigen::Index q = 0; q < m; ++q) trace_h += p.w(q) * p.Z.col(q).squaredNorm();
  const double jitter = 1e-10 * trace_h / double(n);

  const bool low_rank = m <= n / 2;
  Eigen::LDLT<Matrix> base;
  if (low_rank) base.compute(p.lambda * (*p.M) + jitter * Matrix::Identity(n, n));

  Vector grad(n), delta(n);
  bool converged = false;
  for (int iter = 0; iter <= max_iter; ++iter) {
    Vector we = p.w.array() * eta.array().exp();
    grad = -p.b + p.Z * we + p.lambda * (*p.M * res.c);
    res.grad_norm = grad.norm();
    res.objective = obj;
    res.iterations = iter;
    if (res.grad_norm < 1e-8 * std::max(1.0, std::abs(obj))) {
      converged = true;
      break;
    }
    if (iter == max_iter) break;

    if (low_rank) {
      // H = Z diag(we) Z^T + lambda M; solve via (A + U U^T)^-1 with
      // U = Z diag(sqrt(we)) and A the prefactored base matrix.
      Matrix u = p.Z * we.cwiseSqrt().asDiagonal();
      Matrix y = base.solve(u);
      Matrix s = Matrix::Identity(m, m) + u.transpose() * y;
      Vector ag = base.solve(grad);
      delta = -(ag - y * s.ldlt().solve(y.transpose() * grad));
    } else {
      Matrix hess = p.Z * we.asDiagonal() * p.Z.transpose() + p.lambda * (*p.M);
      hess.diagonal().array() += jitter;
      delta = -hess.ldlt().solve(grad);
    }

    double alpha = 1.0;
    bool accepted = false;
    while (alpha >= step_floor) {
      Vector cand = res.c + alpha * delta;
      Vector eta_cand;
      double obj_cand = problem_objective(p, cand, &eta_cand);
      if (std::isfinite(obj_cand) && obj_cand < obj) {
        res.c = std::move(cand);
        eta = std::move(eta_cand);
        obj = obj_cand;
        res.objective_trace.push_back(obj);
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // Near the optimum the remaining decrease can fall below the floating
      // point resolution of the objective while the gradient still exceeds
      // its tolerance; the full Newton step is then accepted as long as it
      // does not increase the objective beyond ulp-level slack.
      const double fp_slack =
          16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(obj));
      if (-grad.dot(delta) < fp_slack) {
        Vector cand = res.c + delta;
        Vector eta_cand;
        double obj_cand = problem_objective(p, cand, &eta_cand);
        if (std::isfinite(obj_cand) && obj_cand <= obj + fp_slack) {
          res.c = std::move(cand);
          eta = std::move(eta_cand);
          obj = obj_cand;
          res.objective_trace.push_back(obj);
          accepted = true;
        }
      }
    }
    if (!accepted) {
      std::vector<double> it(res.c.data(), res.c.data() + res.c.size());
      throw FitError("newton_minimize: no decreasing step at minimal step size",
                     std::move(it), iter, res.grad_norm);
    }
  }

  if (!converged) {
    std::vector<double> it(res.c.data(), res.c.data() + res.c.size());
    throw FitError("newton_minimize: gradient tolerance not reached", std::move(it),
                   res.iterations, res.grad_norm);
  }
  res.mass = 0.0;
  for (Eigen::Index q = 0; q < m; ++q) res.mass += p.w(q) * std::exp(eta(q));
  return res;
}

inline NewtonProblem make_problem(const Dataset& data, const Matrix& gram,
                                  const KernelEvaluator& ev, ModelKind model,
                                  double lambda, const QuadGrid& grid) {
  NewtonProblem p;
  p.M = &gram;
  p.Z = ev.eval_matrix(model, grid);
  p.w = Eigen::Map<const Vector>(grid.w.data(), Eigen::Index(grid.w.size()));
  p.b = gram * Vector::Ones(gram.rows()) / double(data.n());
  p.lambda = lambda;
  return p;
}

}  // namespace detail

/// A fitted log-density: representer coefficients against the model's gram,
/// plus the diagnostics of the Newton solve. Immutable after construction.
struct FittedDensity {
  Vector coeffs;
  ModelKind model = ModelKind::full;
  std::shared_ptr<const Matrix> gram;
  Dataset data;
  QuadGrid grid;
  double lambda = 0.0;
  double final_grad_norm = 0.0;
  int iterations = 0;
  double objective = 0.0;
  double mass = 0.0;  // quadrature integral of exp(eta)
  std::vector<double> objective_trace;
  detail::KernelEvaluator evaluator;
};

/// Penalized likelihood objective at coefficients c:
///   -(1/n) 1^T M c + sum_q w_q exp(zeta_q^T c) + (lambda/2) c^T M c
/// with M the model's gram and zeta_q the kernel section at grid node q.
inline double objective(const Vector& c, const Dataset& data, const GramSet& grams,
                        ModelKind model, double lambda, const QuadGrid& grid,
                        const KernelConfig& cfg = {}) {
  if (!(lambda > 0.0)) throw DomainError("objective: lambda must be positive");
  const Matrix& gram = model == ModelKind::full ? grams.q_full : grams.q_reduced;
  detail::KernelEvaluator ev(data, grams.q_x, cfg);
  auto p = detail::make_problem(data, gram, ev, model, lambda, grid);
  double v = detail::problem_objective(p, c, nullptr);
  if (!std::isfinite(v)) {
    std::vector<double> it(c.data(), c.data() + c.size());
    throw FitError("objective: overflow in exp term", std::move(it), 0,
                   std::numeric_limits<double>::quiet_NaN());
  }
  return v;
}

inline Vector gradient(const Vector& c, const Dataset& data, const GramSet& grams,
                       ModelKind model, double lambda, const QuadGrid& grid,
                       const KernelConfig& cfg = {}) {
  const Matrix& gram = model == ModelKind::full ? grams.q_full : grams.q_reduced;
  detail::KernelEvaluator ev(data, grams.q_x, cfg);
  auto p = detail::make_problem(data, gram, ev, model, lambda, grid);
  Vector eta = p.Z.transpose() * c;
  Vector we = p.w.array() * eta.array().exp();
  if (!we.allFinite()) {
    std::vector<double> it(c.data(), c.data() + c.size());
    throw FitError("gradient: overflow in exp term", std::move(it), 0,
                   std::numeric_limits<double>::quiet_NaN());
  }
  return -p.b + p.Z * we + lambda * (gram * c);
}

inline Matrix hessian(const Vector& c, const Dataset& data, const GramSet& grams,
                      ModelKind model, double lambda, const QuadGrid& grid,
                      const KernelConfig& cfg = {}) {
  const Matrix& gram = model == ModelKind::full ? grams.q_full : grams.q_reduced;
  detail::KernelEvaluator ev(data, grams.q_x, cfg);
  auto p = detail::make_problem(data, gram, ev, model, lambda, grid);
  Vector eta = p.Z.transpose() * c;
  Vector we = p.w.array() * eta.array().exp();
  if (!we.allFinite()) {
    std::vector<double> it(c.data(), c.data() + c.size());
    throw FitError("hessian: overflow in exp term", std::move(it), 0,
                   std::numeric_limits<double>::quiet_NaN());
  }
  return p.Z * we.asDiagonal() * p.Z.transpose() + lambda * gram;
}

/// Fit the penalized maximum-likelihood log-density under the chosen model.
/// Damped Newton from c = 0; the objective trace is nonincreasing across
/// accepted iterations. The full model decouples into independent per-group
/// blocks (the indicator kernel zeroes all cross-group entries), which the
/// solver exploits.
inline FittedDensity fit(const Dataset& data, const GramSet& grams, ModelKind model,
                         double lambda, const QuadGrid& grid, const KernelConfig& cfg = {}) {
  if (!(lambda > 0.0)) throw DomainError("fit: lambda must be positive");
  cfg.validate();
  const auto n = Eigen::Index(data.n());

  FittedDensity out;
  out.model = model;
  out.data = data;
  out.grid = grid;
  out.lambda = lambda;
  out.evaluator = detail::KernelEvaluator(data, grams.q_x, cfg);
  out.gram = std::make_shared<Matrix>(model == ModelKind::full ? grams.q_full
                                                               : grams.q_reduced);

  if (model == ModelKind::reduced) {
    auto p = detail::make_problem(data, *out.gram, out.evaluator, model, lambda, grid);
    auto r = detail::newton_minimize(p);
    out.coeffs = std::move(r.c);
    out.final_grad_norm = r.grad_norm;
    out.iterations = r.iterations;
    out.objective = r.objective;
    out.mass = r.mass;
    out.objective_trace = std::move(r.objective_trace);
    return out;
  }

  // Full model: solve each label block against its own slice of the grid.
  out.coeffs = Vector::Zero(n);
  out.objective = 0.0;
  out.mass = 0.0;
  double grad_sq = 0.0;
  for (int zv : {0, 1}) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; ++i)
      if (data.z[std::size_t(i)] == zv) idx.push_back(i);
    const auto nb = Eigen::Index(idx.size());
    if (nb == 0) {
      out.mass += 1.0;  // eta = 0 on an unoccupied slice
      out.objective += 1.0;
      continue;
    }
    Matrix mb(nb, nb);
    for (Eigen::Index a = 0; a < nb; ++a)
      for (Eigen::Index bcol = 0; bcol < nb; ++bcol)
        mb(a, bcol) = grams.q_full(idx[std::size_t(a)], idx[std::size_t(bcol)]);

    detail::NewtonProblem p;
    p.M = &mb;
    p.lambda = lambda;
    std::vector<Eigen::Index> cols;
    for (std::size_t q = 0; q < grid.size(); ++q)
      if (grid.z[q] == zv) cols.push_back(Eigen::Index(q));
    const auto m = Eigen::Index(cols.size());
    p.Z.resize(nb, m);
    p.w.resize(m);
    for (Eigen::Index qc = 0; qc < m; ++qc) {
      auto q = std::size_t(cols[std::size_t(qc)]);
      p.w(qc) = grid.w[q];
      for (Eigen::Index a = 0; a < nb; ++a)
        p.Z(a, qc) = sobolev_kernel(data.x[std::size_t(idx[std::size_t(a)])], grid.x[q], cfg);
    }
    p.b = mb * Vector::Ones(nb) / double(data.n());

    try {
      auto r = detail::newton_minimize(p);
      for (Eigen::Index a = 0; a < nb; ++a) out.coeffs(idx[std::size_t(a)]) = r.c(a);
      out.objective += r.objective;
      out.mass += r.mass;
      grad_sq += r.grad_norm * r.grad_norm;
      out.iterations = std::max(out.iterations, r.iterations);
      if (out.objective_trace.empty())
        out.objective_trace = std::move(r.objective_trace);
    } catch (FitError& e) {
      // Re-map the block iterate into full-length coordinates.
      std::vector<double> full_it(std::size_t(n), 0.0);
      for (Eigen::Index a = 0; a < nb && a < Eigen::Index(e.iterate.size()); ++a)
        full_it[std::size_t(idx[std::size_t(a)])] = e.iterate[std::size_t(a)];
      throw FitError(e.what(), std::move(full_it), e.iterations, e.gradient_norm);
    }
  }
  out.final_grad_norm = std::sqrt(grad_sq);
  return out;
}

/// Fitted log-density at (x,z).
inline double eval_eta(const FittedDensity& f, double x, int z) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("eval_eta: x outside [0,1]");
  if (z != 0 && z != 1) throw DomainError("eval_eta: label must be 0 or 1");
  double mq = f.evaluator.mean_kx(x);
  double s = 0.0;
  for (std::size_t i = 0; i < f.data.n(); ++i)
    s += f.evaluator.k_model(i, x, z, f.model, mq) * f.coeffs(Eigen::Index(i));
  return s;
}

/// Fitted joint density exp(eta)/mass, normalized by the quadrature mass.
inline double eval_density(const FittedDensity& f, double x, int z) {
  return std::exp(eval_eta(f, x, z)) / f.mass;
}

/// Four-way functional ANOVA split of the fitted log-density at (x,z) under
/// plug-in averaging measures: the sample mean over x_i and the empirical
/// label weights. Components sum back to eval_eta exactly.
struct AnovaComponents {
  double grand_mean = 0.0;
  double main_x = 0.0;
  double main_z = 0.0;
  double interaction = 0.0;
  double sum() const { return grand_mean + main_x + main_z + interaction; }
};

inline AnovaComponents anova_components(const FittedDensity& f, double x, int z) {
  const std::size_t n = f.data.n();
  const auto& om = f.data.omega_hat;
  double avg_x[2] = {0.0, 0.0};  // (1/n) sum_i eta(x_i, zv)
  for (std::size_t i = 0; i < n; ++i) {
    avg_x[0] += eval_eta(f, f.data.x[i], 0);
    avg_x[1] += eval_eta(f, f.data.x[i], 1);
  }
  avg_x[0] /= double(n);
  avg_x[1] /= double(n);

  AnovaComponents c;
  double eta = eval_eta(f, x, z);
  c.grand_mean = om[0] * avg_x[0] + om[1] * avg_x[1];
  c.main_x = om[0] * eval_eta(f, x, 0) + om[1] * eval_eta(f, x, 1) - c.grand_mean;
  c.main_z = avg_x[std::size_t(z)] - c.grand_mean;
  c.interaction = eta - c.grand_mean - c.main_x - c.main_z;
  return c;
}

}  // namespace plr
