#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "plr/errors.hpp"
#include "plr/kernels.hpp"
#include "plr/rng.hpp"

namespace plr {

enum class BaselineMethod { mmd_perm, ks_asymptotic, ks_perm };

inline const char* to_string(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::mmd_perm: return "mmd_perm";
    case BaselineMethod::ks_asymptotic: return "ks_asymptotic";
    case BaselineMethod::ks_perm: return "ks_perm";
  }
  return "?";
}

struct BaselineResult {
  double statistic = 0.0;
  double p_value = 1.0;
  BaselineMethod method = BaselineMethod::ks_asymptotic;
  int n_permutations = 0;
};

/// Biased squared MMD between the two groups under the centered marginal
/// kernel (plug-in sample-mean centering, matching the gram decomposition).
/// The three group sums are combined with the scaling under which the
/// balanced design coincides with the score statistic's grand-sum form;
/// permutation calibration is invariant to that choice.
inline double mmd_biased(const Dataset& data, const KernelConfig& cfg = {}) {
  if (!data.both_groups_nonempty()) throw DomainError("mmd_biased: a group is empty");
  GramSet g = build_grams(data, cfg);
  const auto n = Eigen::Index(data.n());
  double s00 = 0.0, s11 = 0.0, s_cross = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      double v = g.q1_x(i, j);
      int zi = data.z[std::size_t(i)], zj = data.z[std::size_t(j)];
      if (zi == 0 && zj == 0)
        s00 += v;
      else if (zi == 1 && zj == 1)
        s11 += v;
      else
        s_cross += v;
    }
  const double n0 = double(data.count(0)), n1 = double(data.count(1));
  const double nn = double(n);
  const double w0 = n0 / nn, w1 = n1 / nn;
  const double s = w0 * w0 + w1 * w1;
  return n0 * n1 / (s * nn * nn * nn * nn) * (s00 + s11 - s_cross);
}

/// Squared norm of the score of the unpenalized likelihood ratio:
/// the grand sum of the interaction gram over n^2.
inline double score_statistic(const Dataset& data, const KernelConfig& cfg = {}) {
  GramSet g = build_grams(data, cfg);
  const double nn = double(data.n());
  return g.q_interaction.sum() / (nn * nn);
}

/// Two-sample Kolmogorov-Smirnov statistic: sup over pooled points of the
/// ECDF gap. Inputs must be sorted ascending.
inline double ks_statistic(const std::vector<double>& x0_sorted,
                           const std::vector<double>& x1_sorted) {
  if (x0_sorted.empty() || x1_sorted.empty())
    throw DomainError("ks_statistic: both samples must be nonempty");
  const std::size_t n0 = x0_sorted.size(), n1 = x1_sorted.size();
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < n0 && j < n1) {
    double t = std::min(x0_sorted[i], x1_sorted[j]);
    while (i < n0 && x0_sorted[i] <= t) ++i;
    while (j < n1 && x1_sorted[j] <= t) ++j;
    d = std::max(d, std::abs(double(i) / double(n0) - double(j) / double(n1)));
  }
  return d;
}

/// Asymptotic Kolmogorov tail probability, series truncated at 100 terms.
inline double kolmogorov_tail(double t) {
  if (t <= 0.0) return 1.0;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    double term = 2.0 * std::exp(-2.0 * double(k) * double(k) * t * t);
    p += (k % 2 == 1) ? term : -term;
  }
  return std::clamp(p, 0.0, 1.0);
}

/// Generic permutation p-value for a two-sample statistic of (x, z):
/// p = (1 + #{b : stat_b >= stat_obs}) / (B + 1) over seeded label shuffles.
inline double permutation_p(const std::vector<double>& x, const std::vector<int>& z,
                            const std::function<double(const std::vector<double>&,
                                                       const std::vector<int>&)>& stat,
                            int B, std::uint64_t seed) {
  if (B < 19) throw DomainError("permutation_p: need at least 19 permutations");
  double obs = stat(x, z);
  RngStream root(seed);
  int exceed = 0;
  std::vector<int> zperm;
  for (int b = 0; b < B; ++b) {
    RngStream rep = root.split(std::uint64_t(b) + 1);
    zperm = z;
    shuffle(zperm, rep);
    if (stat(x, zperm) >= obs) ++exceed;
  }
  return double(1 + exceed) / double(B + 1);
}

/// Spec'd wrapper of permutation_p for Dataset-valued statistics.
inline double baseline_permutation(const Dataset& data,
                                   const std::function<double(const Dataset&)>& stat,
                                   int B, std::uint64_t seed) {
  return permutation_p(
      data.x, data.z,
      [&](const std::vector<double>& x, const std::vector<int>& z) {
        return stat(Dataset(x, z));
      },
      B, seed);
}

/// Permutation-calibrated MMD with the centered gram built once; label
/// shuffles only rearrange the group sums, so each replicate costs one
/// matrix-vector product.
inline BaselineResult mmd_test(const Dataset& data, int B, std::uint64_t seed,
                               const KernelConfig& cfg = {}) {
  if (!data.both_groups_nonempty()) throw DomainError("mmd_test: a group is empty");
  if (B < 19) throw DomainError("mmd_test: need at least 19 permutations");
  GramSet g = build_grams(data, cfg);
  const auto n = Eigen::Index(data.n());
  const Vector rowsum = g.q1_x.rowwise().sum();
  const double total = rowsum.sum();
  const double n0 = double(data.count(0)), n1 = double(data.count(1));
  const double nn = double(n);
  const double w0 = n0 / nn, w1 = n1 / nn;
  const double scale = n0 * n1 / ((w0 * w0 + w1 * w1) * nn * nn * nn * nn);

  auto stat_for = [&](const std::vector<int>& z) {
    Vector chi0(n);
    for (Eigen::Index i = 0; i < n; ++i) chi0(i) = z[std::size_t(i)] == 0 ? 1.0 : 0.0;
    Vector s = g.q1_x * chi0;
    double s00 = chi0.dot(s);
    double s01 = chi0.dot(rowsum) - s00;   // cross sum, group-0 rows
    double s11 = total - s00 - 2.0 * s01;
    return scale * (s00 + s11 - 2.0 * s01);
  };

  BaselineResult r;
  r.method = BaselineMethod::mmd_perm;
  r.n_permutations = B;
  r.statistic = stat_for(data.z);
  RngStream root(seed);
  int exceed = 0;
  std::vector<int> zperm;
  for (int b = 0; b < B; ++b) {
    RngStream rep = root.split(std::uint64_t(b) + 1);
    zperm = data.z;
    shuffle(zperm, rep);
    if (stat_for(zperm) >= r.statistic) ++exceed;
  }
  r.p_value = double(1 + exceed) / double(B + 1);
  return r;
}

/// Two-sample KS test on raw (pre-mapping) samples. Asymptotic mode uses the
/// Kolmogorov series with effective size n0 n1 / (n0 + n1); permutation mode
/// relabels the pooled sample.
inline BaselineResult ks_test(const std::vector<double>& x0, const std::vector<double>& x1,
                              bool use_permutation = false, int B = 199,
                              std::uint64_t seed = 0) {
  if (x0.empty() || x1.empty()) throw DomainError("ks_test: both samples must be nonempty");
  auto sorted = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  BaselineResult r;
  r.statistic = ks_statistic(sorted(x0), sorted(x1));
  if (!use_permutation) {
    r.method = BaselineMethod::ks_asymptotic;
    double ne = double(x0.size()) * double(x1.size()) / double(x0.size() + x1.size());
    r.p_value = kolmogorov_tail(std::sqrt(ne) * r.statistic);
    return r;
  }
  r.method = BaselineMethod::ks_perm;
  r.n_permutations = B;
  std::vector<double> pooled = x0;
  pooled.insert(pooled.end(), x1.begin(), x1.end());
  std::vector<int> labels(pooled.size(), 0);
  for (std::size_t i = x0.size(); i < pooled.size(); ++i) labels[i] = 1;
  r.p_value = permutation_p(
      pooled, labels,
      [&](const std::vector<double>& x, const std::vector<int>& z) {
        std::vector<double> a, b;
        for (std::size_t i = 0; i < x.size(); ++i) (z[i] == 0 ? a : b).push_back(x[i]);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        return ks_statistic(a, b);
      },
      B, seed);
  return r;
}

}  // namespace plr
