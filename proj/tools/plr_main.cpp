// Command-line front end: run the two-sample test on a CSV file, sweep the
// simulation grid, or inspect the interaction spectrum.

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "plr/baselines.hpp"
#include "plr/plr.hpp"
#include "plr/report.hpp"
#include "plr/simulate.hpp"
#include "plr/version.hpp"

namespace {

struct CsvInput {
  std::vector<double> x;
  std::vector<int> z;
};

CsvInput read_xz_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw plr::DomainError("cannot open input file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw plr::DomainError("empty input file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x,z") throw plr::DomainError("expected header 'x,z', got '" + line + "'");
  CsvInput out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw plr::DomainError("line " + std::to_string(lineno) + ": expected 'x,z'");
    try {
      std::size_t used = 0;
      double xv = std::stod(line.substr(0, comma), &used);
      int zv = std::stoi(line.substr(comma + 1));
      if (!std::isfinite(xv)) throw std::invalid_argument("x not finite");
      if (zv != 0 && zv != 1) throw std::invalid_argument("z not in {0,1}");
      out.x.push_back(xv);
      out.z.push_back(zv);
    } catch (const std::exception& e) {
      throw plr::DomainError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.x.size() < 2) throw plr::DomainError("need at least two rows");
  return out;
}

std::vector<double> apply_mapping(const std::vector<double>& raw, const std::string& mode) {
  if (mode == "rank") return plr::rank_map(raw);
  if (mode == "minmax") return plr::minmax_map(raw);
  throw plr::ConfigError("unknown mapping: " + mode);
}

int run_test_command(const std::string& path, const std::string& mapping,
                     const std::string& lambda_arg, bool no_split,
                     const std::string& calibration_arg, int permutations, double alpha,
                     std::uint64_t seed, int m_order, int quad_points, bool as_json,
                     bool exit_code_signal) {
  plr::KernelConfig cfg;
  cfg.m = m_order;
  cfg.quad_points = quad_points;
  cfg.validate();

  CsvInput input = read_xz_csv(path);
  std::size_t ones = 0;
  for (int z : input.z) ones += std::size_t(z);
  if (ones == 0 || ones == input.z.size()) throw plr::DomainError("single group");

  plr::Calibration calib = plr::Calibration::asymptotic;
  if (calibration_arg == "permutation")
    calib = plr::Calibration::permutation;
  else if (calibration_arg != "asymptotic")
    throw plr::ConfigError("unknown calibration: " + calibration_arg);

  std::optional<double> lambda;
  if (lambda_arg != "auto") {
    try {
      lambda = std::stod(lambda_arg);
    } catch (const std::exception&) {
      throw plr::ConfigError("--lambda must be 'auto' or a positive number");
    }
  }

  plr::PlrResult result;
  bool used_split = false;
  if (!lambda && !no_split) {
    result = plr::split_test(input.x, input.z, alpha, seed, cfg, calib, permutations);
    used_split = true;
  } else {
    plr::Dataset data(apply_mapping(input.x, mapping), input.z);
    result = plr::test(data, alpha, lambda, calib, cfg, seed, permutations);
  }

  plr::TestReport report = plr::TestReport::from_result(result);
  report.input_path = path;
  report.mapping = mapping;
  report.split = used_split;
  report.m = cfg.m;
  report.quad_points = cfg.quad_points;
  report.seed = seed;

  if (as_json) {
    nlohmann::json j = report;
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << report.to_text();
  }
  if (exit_code_signal && report.reject) return 2;
  return 0;
}

int run_simulate_command(std::vector<int> settings, std::vector<double> deltas,
                         std::vector<int> sizes, std::vector<std::string> method_names,
                         int trials, std::uint64_t seed, const std::string& out_path,
                         bool full_grid, bool svg, bool timings, int m_order,
                         int quad_points, int permutations, double alpha) {
  plr::KernelConfig cfg;
  cfg.m = m_order;
  cfg.quad_points = quad_points;
  cfg.validate();

  if (full_grid) {
    sizes = {125, 250, 375, 500, 625, 750, 875, 1000};
    trials = 1000;
  }
  std::vector<plr::Method> methods;
  for (const auto& name : method_names) methods.push_back(plr::method_from_string(name));

  plr::PowerTable table = plr::run_experiment(settings, deltas, sizes, methods, trials,
                                              seed, cfg, alpha, permutations);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    std::cerr << "error: cannot write " << out_path << '\n';
    return 1;
  }
  plr::write_csv(table, out, timings);
  out.close();

  if (svg) {
    std::filesystem::path base(out_path);
    base.replace_extension();
    for (int sid : settings)
      for (double d : deltas) {
        std::ostringstream name;
        name << base.string() << "_s" << sid << "_d" << d << ".svg";
        std::ofstream sv(name.str(), std::ios::binary);
        sv << plr::render_svg(table, sid, d);
      }
  }
  for (const auto& row : table.rows)
    if (!row.valid())
      std::cerr << "warning: cell setting=" << row.setting << " delta=" << row.delta
                << " n=" << row.n << " method=" << row.method << " had " << row.failures
                << " failed trials\n";
  return 0;
}

int run_spectrum_command(const std::string& path, const std::string& mapping, int m_order,
                         int quad_points, const std::string& csv_out) {
  plr::KernelConfig cfg;
  cfg.m = m_order;
  cfg.quad_points = quad_points;
  cfg.validate();

  CsvInput input = read_xz_csv(path);
  plr::Dataset data(apply_mapping(input.x, mapping), input.z);
  plr::GramSet grams = plr::build_grams(data, cfg);
  plr::Vector spec = plr::interaction_spectrum(grams.q_interaction);

  std::cout << "eigenvalues (nonincreasing):\n";
  std::cout.precision(10);
  for (Eigen::Index i = 0; i < spec.size(); ++i) std::cout << "  " << spec(i) << '\n';

  std::cout << "lambda theta_hat sigma_hat\n";
  std::ostringstream csv;
  csv << "lambda,theta_hat,sigma_hat\n";
  for (double lg = -6.0; lg <= 2.0 + 1e-9; lg += 1.0) {
    double lam = std::pow(10.0, lg);
    try {
      plr::NullParams np = plr::null_params_from_spectrum(spec, lam, data.n(),
                                                          plr::RhoMode::inverse,
                                                          cfg.eig_floor);
      std::cout << "  " << lam << ' ' << np.theta_hat << ' ' << np.sigma_hat << '\n';
      csv << lam << ',' << np.theta_hat << ',' << np.sigma_hat << '\n';
    } catch (const plr::CalibrationError&) {
      std::cout << "  " << lam << " degenerate degenerate\n";
      csv << lam << ",nan,nan\n";
    }
  }

  if (spec.size() == 0 || spec(0) <= cfg.eig_floor) {
    std::cout << "adaptive_lambda: degenerate calibration (spectrum is numerically zero)\n";
  } else {
    double lam = plr::adaptive_lambda_from_spectrum(spec, data.n(), cfg.eig_floor);
    std::cout << "adaptive_lambda: " << lam << '\n';
    csv << "adaptive_lambda," << lam << ",\n";
  }
  if (!csv_out.empty()) {
    std::ofstream out(csv_out, std::ios::binary);
    if (!out) {
      std::cerr << "error: cannot write " << csv_out << '\n';
      return 1;
    }
    out << csv.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalized likelihood ratio two-sample test"};
  app.set_version_flag("--version", PLR_VERSION);
  app.require_subcommand(1);

  // test
  std::string test_path, mapping = "rank", lambda_arg = "auto", calibration = "asymptotic";
  bool no_split = false, as_json = false, exit_code_signal = false;
  int permutations = 199, m_order = 2, quad_points = 64;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  auto* t = app.add_subcommand("test", "Run the test on a CSV file with header x,z");
  t->add_option("path", test_path, "input CSV")->required();
  t->add_option("--map", mapping, "domain mapping: rank|minmax");
  t->add_option("--lambda", lambda_arg, "smoothing parameter: auto|<value>");
  t->add_flag("--no-split", no_split, "tune lambda on the full sample instead of splitting");
  t->add_option("--calibration", calibration, "asymptotic|permutation");
  t->add_option("--permutations", permutations, "permutation replicates");
  t->add_option("--alpha", alpha, "significance level");
  t->add_option("--seed", seed, "RNG seed");
  t->add_option("--m", m_order, "Sobolev order (1 or 2)");
  t->add_option("--quad", quad_points, "quadrature nodes per label");
  t->add_flag("--json", as_json, "structured JSON report");
  t->add_flag("--exit-code-signal", exit_code_signal, "exit 2 when the test rejects");

  // simulate
  std::vector<int> settings{1}, sizes{125, 250, 500, 1000};
  std::vector<double> deltas{0.0};
  std::vector<std::string> method_names{"plr_asymptotic"};
  int trials = 200;
  std::string out_path = "power.csv";
  bool full_grid = false, svg = false, timings = false;
  auto* s = app.add_subcommand("simulate", "Run a seeded size/power grid");
  s->add_option("--settings", settings, "settings 1..6");
  s->add_option("--deltas", deltas, "heterogeneity levels");
  s->add_option("--sizes", sizes, "per-group sample sizes");
  s->add_option("--methods", method_names,
                "plr_asymptotic plr_permutation plr_split mmd_perm ks");
  s->add_option("--trials", trials, "trials per cell");
  s->add_option("--seed", seed, "master seed");
  s->add_option("--out", out_path, "output CSV path");
  s->add_flag("--full", full_grid, "use sizes 125..1000 step 125 with 1000 trials");
  s->add_flag("--svg", svg, "emit SVG line plots beside the CSV");
  s->add_flag("--timings", timings,
              "record measured runtimes (breaks byte-identical reruns)");
  s->add_option("--permutations", permutations, "permutation replicates");
  s->add_option("--alpha", alpha, "significance level");
  s->add_option("--m", m_order, "Sobolev order (1 or 2)");
  s->add_option("--quad", quad_points, "quadrature nodes per label");

  // spectrum
  std::string spec_path, spec_csv;
  auto* sp = app.add_subcommand("spectrum", "Interaction spectrum and adaptive lambda");
  sp->add_option("path", spec_path, "input CSV")->required();
  sp->add_option("--map", mapping, "domain mapping: rank|minmax");
  sp->add_option("--m", m_order, "Sobolev order (1 or 2)");
  sp->add_option("--quad", quad_points, "quadrature nodes per label");
  sp->add_option("--csv", spec_csv, "also write the listing as CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (t->parsed())
      return run_test_command(test_path, mapping, lambda_arg, no_split, calibration,
                              permutations, alpha, seed, m_order, quad_points, as_json,
                              exit_code_signal);
    if (s->parsed())
      return run_simulate_command(settings, deltas, sizes, method_names, trials, seed,
                                  out_path, full_grid, svg, timings, m_order, quad_points,
                                  permutations, alpha);
    if (sp->parsed())
      return run_spectrum_command(spec_path, mapping, m_order, quad_points, spec_csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
