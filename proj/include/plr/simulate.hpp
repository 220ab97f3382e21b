#pragma once

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "plr/baselines.hpp"
#include "plr/detail/parallel.hpp"
#include "plr/errors.hpp"
#include "plr/plr.hpp"
#include "plr/rng.hpp"

namespace plr {

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

/// Standard normal draw by the Marsaglia polar method.
inline double sample_normal(RngStream& rng) {
  for (;;) {
    double u = 2.0 * rng.uniform01() - 1.0;
    double v = 2.0 * rng.uniform01() - 1.0;
    double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

/// Gamma(shape, 1) draw by the Marsaglia-Tsang squeeze method; shapes below
/// one are boosted through Gamma(shape+1) U^{1/shape}.
inline double sample_gamma(double shape, RngStream& rng) {
  if (!(shape > 0.0)) throw DomainError("sample_gamma: shape must be positive");
  if (shape < 1.0) {
    double u = rng.uniform_open01();
    return sample_gamma(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = sample_normal(rng);
    double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    double v = t * t * t;
    double u = rng.uniform_open01();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

/// Beta(a, b) draw as X/(X+Y) of two gamma variates.
inline double sample_beta(double a, double b, RngStream& rng) {
  double x = sample_gamma(a, rng);
  double y = sample_gamma(b, rng);
  return x / (x + y);
}

// ---------------------------------------------------------------------------
// Simulation settings
// ---------------------------------------------------------------------------

/// One cell of the simulation grid. `n_per_group` is the averaged group
/// size: labels are iid Bernoulli(1/2) over 2 n_per_group total draws.
struct SettingSpec {
  int id = 1;
  double delta = 0.0;
  int n_per_group = 125;

  void validate() const {
    if (id < 1 || id > 6) throw DomainError("SettingSpec: id must be 1..6");
    if (delta < 0.0) throw DomainError("SettingSpec: delta must be nonnegative");
    if ((id == 3 || id == 4) && delta >= 1.0)
      throw DomainError("SettingSpec: settings 3-4 need delta < 1");
    if (n_per_group < 2) throw DomainError("SettingSpec: n_per_group too small");
  }
};

/// Draw one sample (raw x on its natural scale, labels in {0,1}).
inline std::pair<std::vector<double>, std::vector<int>> generate(const SettingSpec& spec,
                                                                 std::uint64_t seed) {
  spec.validate();
  RngStream rng(seed);
  const std::size_t total = 2 * std::size_t(spec.n_per_group);
  std::vector<double> x(total);
  std::vector<int> z(total);
  const double d = spec.delta;
  for (std::size_t i = 0; i < total; ++i) {
    int zi = rng.uniform01() < 0.5 ? 0 : 1;
    z[i] = zi;
    double ind = double(zi);
    switch (spec.id) {
      case 1:
        x[i] = (1.0 + d * ind) * sample_normal(rng);
        break;
      case 2: {
        double mean = (rng.uniform01() < 0.5 ? -1.0 : 1.0) * d * ind;
        double sd = std::sqrt(1.0 + d * d * (1.0 - ind));
        x[i] = mean + sd * sample_normal(rng);
        break;
      }
      case 3:
        if (rng.uniform01() < 0.5)
          x[i] = 2.0 + sample_normal(rng);
        else
          x[i] = -2.0 + (1.0 - d * ind) * sample_normal(rng);
        break;
      case 4: {
        double mean = rng.uniform01() < 0.5 ? 2.0 : -2.0;
        x[i] = mean + (1.0 - d * ind) * sample_normal(rng);
        break;
      }
      case 5: {
        double a = 2.0 * (1.0 + d * ind);
        x[i] = sample_beta(a, a, rng);
        break;
      }
      case 6: {
        double s = 1.0 + d * ind;
        if (rng.uniform01() < 0.5)
          x[i] = sample_beta(2.0 * s, 6.0 * s, rng);
        else
          x[i] = sample_beta(6.0 * s, 2.0 * s, rng);
        break;
      }
      default:
        throw DomainError("generate: unknown setting");
    }
  }
  return {std::move(x), std::move(z)};
}

// ---------------------------------------------------------------------------
// Experiment harness
// ---------------------------------------------------------------------------

enum class Method { plr_asymptotic, plr_permutation, plr_split, mmd_perm, ks };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::plr_asymptotic: return "plr_asymptotic";
    case Method::plr_permutation: return "plr_permutation";
    case Method::plr_split: return "plr_split";
    case Method::mmd_perm: return "mmd_perm";
    case Method::ks: return "ks";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  if (s == "plr_asymptotic") return Method::plr_asymptotic;
  if (s == "plr_permutation") return Method::plr_permutation;
  if (s == "plr_split") return Method::plr_split;
  if (s == "mmd_perm") return Method::mmd_perm;
  if (s == "ks") return Method::ks;
  throw ConfigError("unknown method: " + s);
}

struct PowerRow {
  int setting = 0;
  double delta = 0.0;
  int n = 0;  // per-group averaged size
  std::string method;
  int trials = 0;
  int rejections = 0;
  double rate = 0.0;
  double mean_runtime_ms = 0.0;
  int failures = 0;  // trials whose fit or calibration failed (not serialized)

  bool valid() const { return failures * 20 <= trials; }
};

struct PowerTable {
  std::vector<PowerRow> rows;
  std::uint64_t master_seed = 0;
};

namespace detail {

struct TrialOutcome {
  // per-method: -1 failure, 0 accept, 1 reject
  std::vector<int> decision;
  std::vector<double> runtime_ms;
};

inline std::uint64_t delta_bits(double d) { return std::bit_cast<std::uint64_t>(d); }

// All requested methods on one generated sample. PLR variants share the rank
// mapping, grams, adaptive lambda, and the observed statistic.
inline TrialOutcome run_trial(const SettingSpec& spec, std::uint64_t trial_seed,
                              const std::vector<Method>& methods, double alpha,
                              int n_permutations, const KernelConfig& cfg) {
  TrialOutcome out;
  out.decision.assign(methods.size(), -1);
  out.runtime_ms.assign(methods.size(), 0.0);
  auto [raw_x, z] = generate(spec, trial_seed);

  bool need_plain_plr = false, need_perm_plr = false;
  for (Method m : methods) {
    need_plain_plr |= (m == Method::plr_asymptotic || m == Method::plr_permutation);
    need_perm_plr |= (m == Method::plr_permutation);
  }

  // Shared PLR pipeline: rank map -> grams -> adaptive lambda -> statistic.
  bool plr_ok = false;
  double p_asym = 1.0, p_perm = 1.0;
  double shared_ms = 0.0, perm_ms = 0.0;
  if (need_plain_plr) {
    auto t0 = std::chrono::steady_clock::now();
    try {
      Dataset data(rank_map(raw_x), z);
      if (!data.both_groups_nonempty()) throw DomainError("single group");
      GramSet grams = build_grams(data, cfg);
      QuadGrid grid = joint_grid(cfg.quad_points);
      Vector spec_ev = interaction_spectrum(grams.q_interaction);
      double lam = adaptive_lambda_from_spectrum(spec_ev, data.n(), cfg.eig_floor);
      double obs = plr_statistic(data, grams, lam, cfg, grid).value;
      NullParams np = null_params_from_spectrum(spec_ev, lam, data.n(),
                                                RhoMode::inverse, cfg.eig_floor);
      p_asym = normal_two_sided_p(z_score_of(obs, data.n(), np.theta_hat, np.sigma_hat));
      shared_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
      if (need_perm_plr) {
        auto t1 = std::chrono::steady_clock::now();
        RngStream root(derive_seed(trial_seed, {0x706572756D75ULL}));
        int exceed = 0, successes = 0, failures = 0;
        std::vector<int> zperm;
        for (int b = 0; b < n_permutations; ++b) {
          RngStream rep = root.split(std::uint64_t(b) + 1);
          zperm = data.z;
          shuffle(zperm, rep);
          try {
            Dataset perm(data.x, zperm);
            GramSet pgrams = build_grams(perm, cfg);
            double v = plr_statistic(perm, pgrams, lam, cfg, grid).value;
            ++successes;
            if (v >= obs) ++exceed;
          } catch (const FitError&) {
            ++failures;
          }
        }
        if (failures > n_permutations / 20)
          throw CalibrationError("permutation replicates unreliable");
        p_perm = double(1 + exceed) / double(successes + 1);
        perm_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t1)
                      .count();
      }
      plr_ok = true;
    } catch (const std::exception&) {
      plr_ok = false;
    }
  }

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&]() {
      return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                       t0)
          .count();
    };
    try {
      switch (methods[mi]) {
        case Method::plr_asymptotic:
          if (!plr_ok) break;
          out.decision[mi] = p_asym <= alpha ? 1 : 0;
          out.runtime_ms[mi] = shared_ms;
          break;
        case Method::plr_permutation:
          if (!plr_ok) break;
          out.decision[mi] = p_perm <= alpha ? 1 : 0;
          out.runtime_ms[mi] = shared_ms + perm_ms;
          break;
        case Method::plr_split: {
          PlrResult r = split_test(raw_x, z, alpha,
                                   derive_seed(trial_seed, {0x73706C6974ULL}), cfg);
          out.decision[mi] = r.reject ? 1 : 0;
          out.runtime_ms[mi] = elapsed();
          break;
        }
        case Method::mmd_perm: {
          Dataset data(rank_map(raw_x), z);
          BaselineResult r = mmd_test(data, n_permutations,
                                      derive_seed(trial_seed, {0x6D6D64ULL}), cfg);
          out.decision[mi] = r.p_value <= alpha ? 1 : 0;
          out.runtime_ms[mi] = elapsed();
          break;
        }
        case Method::ks: {
          std::vector<double> x0, x1;
          for (std::size_t i = 0; i < raw_x.size(); ++i)
            (z[i] == 0 ? x0 : x1).push_back(raw_x[i]);
          BaselineResult r = ks_test(x0, x1);
          out.decision[mi] = r.p_value <= alpha ? 1 : 0;
          out.runtime_ms[mi] = elapsed();
          break;
        }
      }
    } catch (const std::exception&) {
      out.decision[mi] = -1;
    }
  }
  return out;
}

}  // namespace detail

/// Run the seeded size/power grid. Deterministic for a fixed master seed,
/// grid, and method set: per-trial seeds derive from (master_seed, cell,
/// trial) and trial outcomes reduce by counting, so thread scheduling cannot
/// change the table.
inline PowerTable run_experiment(const std::vector<int>& settings,
                                 const std::vector<double>& deltas,
                                 const std::vector<int>& sizes,
                                 const std::vector<Method>& methods, int trials,
                                 std::uint64_t master_seed,
                                 const KernelConfig& cfg = {}, double alpha = 0.05,
                                 int n_permutations = 199,
                                 int threads = detail::default_threads()) {
  if (trials < 1) throw ConfigError("run_experiment: trials must be >= 1");
  PowerTable table;
  table.master_seed = master_seed;
  for (int sid : settings) {
    for (double delta : deltas) {
      for (int nsize : sizes) {
        SettingSpec spec{sid, delta, nsize};
        spec.validate();
        std::vector<detail::TrialOutcome> outcomes(static_cast<std::size_t>(trials));
        detail::parallel_for(
            std::size_t(trials),
            [&](std::size_t t) {
              std::uint64_t ts = derive_seed(
                  master_seed, {std::uint64_t(sid), detail::delta_bits(delta),
                                std::uint64_t(nsize), std::uint64_t(t)});
              outcomes[t] = detail::run_trial(spec, ts, methods, alpha,
                                              n_permutations, cfg);
            },
            threads);
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
          PowerRow row;
          row.setting = sid;
          row.delta = delta;
          row.n = nsize;
          row.method = to_string(methods[mi]);
          row.trials = trials;
          double ms = 0.0;
          for (const auto& oc : outcomes) {
            if (oc.decision[mi] < 0)
              ++row.failures;
            else {
              row.rejections += oc.decision[mi];
              ms += oc.runtime_ms[mi];
            }
          }
          row.rate = double(row.rejections) / double(row.trials);
          int succ = row.trials - row.failures;
          row.mean_runtime_ms = succ > 0 ? ms / double(succ) : 0.0;
          table.rows.push_back(std::move(row));
        }
      }
    }
  }
  return table;
}

/// CSV serialization, one row per cell. `with_timings` keeps the measured
/// runtime column; otherwise it prints zeros so repeated runs with the same
/// master seed are byte-identical.
inline void write_csv(const PowerTable& table, std::ostream& os, bool with_timings = false) {
  os << "setting,delta,n,method,trials,rejections,rate,mean_runtime_ms\n";
  char buf[256];
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%d,%s,%d,%d,%.6f,%.3f\n", r.setting, r.delta,
                  r.n, r.method.c_str(), r.trials, r.rejections, r.rate,
                  with_timings ? r.mean_runtime_ms : 0.0);
    os << buf;
  }
}

/// Minimal SVG line chart: rejection rate vs per-group size, one polyline
/// per method, for the (setting, delta) pairs present in the table.
inline std::string render_svg(const PowerTable& table, int setting, double delta) {
  std::vector<std::string> methods;
  std::vector<int> sizes;
  for (const auto& r : table.rows) {
    if (r.setting != setting || r.delta != delta) continue;
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
      methods.push_back(r.method);
    if (std::find(sizes.begin(), sizes.end(), r.n) == sizes.end()) sizes.push_back(r.n);
  }
  std::sort(sizes.begin(), sizes.end());
  const double w = 640, h = 420, ml = 60, mr = 160, mt = 40, mb = 50;
  const double pw = w - ml - mr, ph = h - mt - mb;
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  auto xpos = [&](int n) {
    if (sizes.size() < 2) return ml + pw / 2;
    double lo = sizes.front(), hi = sizes.back();
    return ml + pw * (double(n) - lo) / (hi - lo);
  };
  auto ypos = [&](double rate) { return mt + ph * (1.0 - rate); };

  std::string svg;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns='http://www.w3.org/2000/svg' width='%g' height='%g' "
                "viewBox='0 0 %g %g'>\n<rect width='%g' height='%g' fill='white'/>\n",
                w, h, w, h, w, h);
  svg += buf;
  std::snprintf(buf, sizeof buf,
                "<text x='%g' y='24' font-family='sans-serif' font-size='16'>setting %d, "
                "delta %.4g</text>\n",
                ml, setting, delta);
  svg += buf;
  // axes and rate gridlines
  for (int i = 0; i <= 4; ++i) {
    double rate = 0.25 * i, y = ypos(rate);
    std::snprintf(buf, sizeof buf,
                  "<line x1='%g' y1='%g' x2='%g' y2='%g' stroke='#ddd'/>\n"
                  "<text x='%g' y='%g' font-family='sans-serif' font-size='11' "
                  "text-anchor='end'>%.2f</text>\n",
                  ml, y, ml + pw, y, ml - 6, y + 4, rate);
    svg += buf;
  }
  for (int n : sizes) {
    std::snprintf(buf, sizeof buf,
                  "<text x='%g' y='%g' font-family='sans-serif' font-size='11' "
                  "text-anchor='middle'>%d</text>\n",
                  xpos(n), mt + ph + 18, n);
    svg += buf;
  }
  std::snprintf(buf, sizeof buf,
                "<line x1='%g' y1='%g' x2='%g' y2='%g' stroke='black'/>\n"
                "<line x1='%g' y1='%g' x2='%g' y2='%g' stroke='black'/>\n",
                ml, mt, ml, mt + ph, ml, mt + ph, ml + pw, mt + ph);
  svg += buf;

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    std::string points;
    for (int n : sizes) {
      for (const auto& r : table.rows)
        if (r.setting == setting && r.delta == delta && r.n == n && r.method == methods[mi]) {
          std::snprintf(buf, sizeof buf, "%g,%g ", xpos(n), ypos(r.rate));
          points += buf;
        }
    }
    const char* color = palette[mi % 6];
    std::snprintf(buf, sizeof buf,
                  "<polyline points='%s' fill='none' stroke='%s' stroke-width='2'/>\n",
                  points.c_str(), color);
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1='%g' y1='%g' x2='%g' y2='%g' stroke='%s' stroke-width='2'/>\n"
                  "<text x='%g' y='%g' font-family='sans-serif' font-size='12'>%s</text>\n",
                  ml + pw + 12, mt + 16.0 * double(mi) + 8, ml + pw + 34,
                  mt + 16.0 * double(mi) + 8, color, ml + pw + 40,
                  mt + 16.0 * double(mi) + 12, methods[mi].c_str());
    svg += buf;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace plr
