#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "plume/metrics.hpp"
#include "plume/random.hpp"

using namespace plume;

TEST_CASE("normalized error on published release estimates") {
  std::vector<double> actual = {24, 56, 43, 35};
  std::vector<double> est = {23.61, 56.88, 42.52, 35.16};
  CHECK(ne_percent(actual, est) == Catch::Approx(1.21).margin(0.01));
  CHECK(ne_percent(actual, actual) == 0.0);

  std::vector<double> actual8 = {35, 90, 65, 47, 24, 56, 43, 35};
  std::vector<double> est8 = {35, 89.2, 64.9, 47.3, 23.6, 58.3, 42.1, 35};
  CHECK(ne_percent(actual8, est8) == Catch::Approx(1.22).margin(0.01));

  CHECK_THROWS(ne_percent({0.0, 0.0}, {1.0, 1.0}));
  CHECK_THROWS(ne_percent({1.0}, {1.0, 2.0}));
}

TEST_CASE("per-value percent error on published estimates") {
  CHECK(paee_percent(24, 23.61) == Catch::Approx(1.63).margin(0.005));
  CHECK(paee_percent(47, 49.29) == Catch::Approx(4.87).margin(0.005));
  CHECK(paee_percent(42, 42) == 0.0);
  CHECK_THROWS(paee_percent(0.0, 1.0));
}

TEST_CASE("per-unknown spread over realizations") {
  CHECK(sd_t({{1.0}, {3.0}})[0] == Catch::Approx(std::sqrt(2.0)));
  CHECK(sd_t({{5.0}, {5.0}, {5.0}})[0] == 0.0);
  CHECK(sd_t({{1.0}, {2.0}, {3.0}, {4.0}})[0] ==
        Catch::Approx(1.2910).margin(5e-5));

  auto cols = sd_t({{1.0, 5.0}, {3.0, 5.0}});
  CHECK(cols[0] == Catch::Approx(std::sqrt(2.0)));
  CHECK(cols[1] == 0.0);

  CHECK_THROWS(sd_t({{1.0}}));
  CHECK_THROWS(sd_t({{1.0}, {1.0, 2.0}}));
}

TEST_CASE("summary error statistics") {
  std::vector<double> actual = {1.0, 1.0};
  std::vector<double> est = {0.0, 2.0};
  CHECK(mean_error(actual, est) == 0.0);
  CHECK(mean_absolute_error(actual, est) == 1.0);
  CHECK(rmse(actual, est) == 1.0);

  CHECK(mean_error(actual, actual) == 0.0);
  CHECK(mean_absolute_error(actual, actual) == 0.0);
  CHECK(rmse(actual, actual) == 0.0);
  CHECK(nrmse_percent({1.0, 3.0}, {1.0, 3.0}) == 0.0);

  CHECK_THROWS(nrmse_percent({2.0, 2.0}, {1.0, 3.0}));
}

TEST_CASE("range-normalized rmse matches the published magnitude") {
  // rmse 0.55 against actual values spanning [24, 56]
  std::vector<double> actual = {24, 56, 43, 35};
  std::vector<double> est = actual;
  const double shift = 0.55;
  for (double& v : est) v += shift;  // constant shift keeps rmse = 0.55
  CHECK(rmse(actual, est) == Catch::Approx(0.55));
  CHECK(nrmse_percent(actual, est) == Catch::Approx(1.72).margin(0.005));
}

TEST_CASE("error statistics obey the mean inequalities") {
  Rng rng(404);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(12));
    std::vector<double> actual(n), est(n);
    for (int i = 0; i < n; ++i) {
      actual[i] = rng.uniform(-10.0, 10.0);
      est[i] = rng.uniform(-10.0, 10.0);
    }
    const double me = mean_error(actual, est);
    const double mae = mean_absolute_error(actual, est);
    const double rm = rmse(actual, est);
    CHECK(mae >= std::abs(me) - 1e-12);
    CHECK(rm >= mae - 1e-12);
  }
}

TEST_CASE("aggregate errors ignore pair ordering") {
  std::vector<double> actual = {4.0, 9.0, 2.0, 7.0};
  std::vector<double> est = {3.5, 10.0, 2.5, 6.0};
  std::vector<double> actual_r = {7.0, 2.0, 9.0, 4.0};
  std::vector<double> est_r = {6.0, 2.5, 10.0, 3.5};
  CHECK(ne_percent(actual, est) == Catch::Approx(ne_percent(actual_r, est_r)));
  CHECK(nrmse_percent(actual, est) ==
        Catch::Approx(nrmse_percent(actual_r, est_r)));
}

TEST_CASE("metric report bundles the full suite") {
  std::vector<double> actual = {24, 56, 43, 35};
  std::vector<double> est = {23.61, 56.88, 42.52, 35.16};
  auto r = evaluate_metrics(actual, est, {{1.0, 2.0, 3.0, 4.0},
                                          {3.0, 2.0, 3.0, 4.0}},
                            "g/s");
  CHECK(r.ne == Catch::Approx(1.21).margin(0.01));
  REQUIRE(r.paee.size() == 4);
  CHECK(r.paee[0] == Catch::Approx(1.63).margin(0.005));
  CHECK(r.rmse_value == Catch::Approx(rmse(actual, est)));
  CHECK(r.nrmse == Catch::Approx(nrmse_percent(actual, est)));
  REQUIRE(r.spread.size() == 4);
  CHECK(r.spread[0] == Catch::Approx(std::sqrt(2.0)));
  CHECK(r.spread[1] == 0.0);
  CHECK(r.units == "g/s");

  auto bare = evaluate_metrics(actual, est);
  CHECK(bare.spread.empty());
}
