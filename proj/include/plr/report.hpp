#pragma once

#include <cstdint>
#include <sstream>
#include <string>

#include <json.hpp>

#include "plr/plr.hpp"
#include "plr/version.hpp"

namespace plr {

/// Serializable record of one test run: the PlrResult plus provenance.
struct TestReport {
  // result
  double plr = 0.0;
  double lambda = 0.0;
  double theta_hat = 0.0;
  double sigma_hat = 0.0;
  double z_score = 0.0;
  double p_value = 1.0;
  double alpha = 0.05;
  bool reject = false;
  std::string calibration = "asymptotic";
  int n_permutations = 0;
  bool degenerate_fallback = false;
  // provenance
  std::string input_path;
  std::string mapping = "rank";
  bool split = true;
  int m = 2;
  int quad_points = 64;
  std::uint64_t seed = 0;
  std::string version = PLR_VERSION;

  bool operator==(const TestReport&) const = default;

  static TestReport from_result(const PlrResult& r) {
    TestReport t;
    t.plr = r.plr;
    t.lambda = r.lambda;
    t.theta_hat = r.theta_hat;
    t.sigma_hat = r.sigma_hat;
    t.z_score = r.z_score;
    t.p_value = r.p_value;
    t.alpha = r.alpha;
    t.reject = r.reject;
    t.calibration = r.calibration == Calibration::asymptotic ? "asymptotic" : "permutation";
    t.n_permutations = r.n_permutations;
    t.degenerate_fallback = r.degenerate_fallback;
    t.seed = r.seed;
    return t;
  }

  std::string to_text() const {
    std::ostringstream os;
    os.precision(10);
    os << "plr: " << plr << '\n'
       << "lambda: " << lambda << '\n'
       << "theta_hat: " << theta_hat << '\n'
       << "sigma_hat: " << sigma_hat << '\n'
       << "z_score: " << z_score << '\n'
       << "p_value: " << p_value << '\n'
       << "alpha: " << alpha << '\n'
       << "reject: " << (reject ? "true" : "false") << '\n'
       << "calibration: " << calibration << '\n'
       << "n_permutations: " << n_permutations << '\n'
       << "degenerate_fallback: " << (degenerate_fallback ? "true" : "false") << '\n'
       << "input: " << input_path << '\n'
       << "mapping: " << mapping << '\n'
       << "split: " << (split ? "true" : "false") << '\n'
       << "m: " << m << '\n'
       << "quad_points: " << quad_points << '\n'
       << "seed: " << seed << '\n'
       << "version: " << version << '\n';
    return os.str();
  }
};

inline void to_json(nlohmann::json& j, const TestReport& t) {
  j = nlohmann::json{{"plr", t.plr},
                     {"lambda", t.lambda},
                     {"theta_hat", t.theta_hat},
                     {"sigma_hat", t.sigma_hat},
                     {"z_score", t.z_score},
                     {"p_value", t.p_value},
                     {"alpha", t.alpha},
                     {"reject", t.reject},
                     {"calibration", t.calibration},
                     {"n_permutations", t.n_permutations},
                     {"degenerate_fallback", t.degenerate_fallback},
                     {"input", t.input_path},
                     {"mapping", t.mapping},
                     {"split", t.split},
                     {"m", t.m},
                     {"quad_points", t.quad_points},
                     {"seed", t.seed},
                     {"version", t.version}};
}

inline void from_json(const nlohmann::json& j, TestReport& t) {
  j.at("plr").get_to(t.plr);
  j.at("lambda").get_to(t.lambda);
  j.at("theta_hat").get_to(t.theta_hat);
  j.at("sigma_hat").get_to(t.sigma_hat);
  j.at("z_score").get_to(t.z_score);
  j.at("p_value").get_to(t.p_value);
  j.at("alpha").get_to(t.alpha);
  j.at("reject").get_to(t.reject);
  j.at("calibration").get_to(t.calibration);
  j.at("n_permutations").get_to(t.n_permutations);
  j.at("degenerate_fallback").get_to(t.degenerate_fallback);
  j.at("input").get_to(t.input_path);
  j.at("mapping").get_to(t.mapping);
  j.at("split").get_to(t.split);
  j.at("m").get_to(t.m);
  j.at("quad_points").get_to(t.quad_points);
  j.at("seed").get_to(t.seed);
  j.at("version").get_to(t.version);
}

}  // namespace plr
