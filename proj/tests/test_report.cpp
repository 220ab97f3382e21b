#include <catch2/catch_amalgamated.hpp>

#include "plr/report.hpp"

using namespace plr;

TEST_CASE("report round-trips through JSON losslessly") {
  TestReport r;
  r.plr = 0.012345678901234567;
  r.lambda = 3.7e-4;
  r.theta_hat = 12.25;
  r.sigma_hat = 2.5;
  r.z_score = -1.9599639845400545;
  r.p_value = 0.05000000000000001;
  r.alpha = 0.05;
  r.reject = true;
  r.calibration = "permutation";
  r.n_permutations = 199;
  r.degenerate_fallback = false;
  r.input_path = "data/sample.csv";
  r.mapping = "minmax";
  r.split = false;
  r.m = 1;
  r.quad_points = 48;
  r.seed = 0xDEADBEEFCAFEBABEULL;

  nlohmann::json j = r;
  TestReport back = j.get<TestReport>();
  CHECK(back == r);

  // and through a printed string
  TestReport again = nlohmann::json::parse(j.dump()).get<TestReport>();
  CHECK(again == r);
}

TEST_CASE("report text output lists every field") {
  TestReport r;
  std::string text = r.to_text();
  for (const char* key :
       {"plr:", "lambda:", "p_value:", "reject:", "calibration:", "mapping:", "seed:",
        "version:", "quad_points:"})
    CHECK(text.find(key) != std::string::npos);
}

TEST_CASE("report captures a result") {
  PlrResult res;
  res.plr = 0.5;
  res.lambda = 0.01;
  res.p_value = 0.2;
  res.calibration = Calibration::permutation;
  res.n_permutations = 99;
  TestReport r = TestReport::from_result(res);
  CHECK(r.plr == 0.5);
  CHECK(r.calibration == "permutation");
  CHECK(r.n_permutations == 99);
}
