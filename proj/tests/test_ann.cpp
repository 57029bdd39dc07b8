#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "plume/ann.hpp"
#include "plume/io.hpp"
#include "plume/random.hpp"

using namespace plume;

namespace {

NetworkParams scalar_net(double w1, double b1, double w2, double b2) {
  NetworkParams p = NetworkParams::zeros({1, 1, 1});
  p.w1(0, 0) = w1;
  p.b1[0] = b1;
  p.w2(0, 0) = w2;
  p.b2[0] = b2;
  return p;
}

NetworkParams random_params(const NetworkShape& s, Rng& rng) {
  NetworkParams p = NetworkParams::zeros(s);
  Eigen::VectorXd v(s.n_params());
  for (int i = 0; i < v.size(); ++i) v[i] = rng.uniform(-1.0, 1.0);
  return NetworkParams::unflatten(s, v);
}

Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-1.0, 1.0);
  return m;
}

/// Identity scaler on [-1, 1] for hand-built networks.
ScalingSpec identity_scaler(int dims) {
  ScalingSpec s;
  s.lo.assign(dims, -1.0);
  s.hi.assign(dims, 1.0);
  return s;
}

TrainedNetwork constant_member(double value) {
  TrainedNetwork m;
  m.shape = {1, 1, 1};
  m.params = scalar_net(0.0, 0.0, 0.0, value);
  m.input_scaler = identity_scaler(1);
  m.target_scaler = identity_scaler(1);
  return m;
}

/// x on a uniform grid over [-3, 3], y = sin(x).
void sine_data(int n, std::vector<std::vector<double>>& x,
               std::vector<std::vector<double>>& y) {
  for (int i = 0; i < n; ++i) {
    double xi = -3.0 + 6.0 * i / (n - 1);
    x.push_back({xi});
    y.push_back({std::sin(xi)});
  }
}

}  // anonymous namespace

TEST_CASE("parameter count follows the shape") {
  CHECK(NetworkShape{1, 1, 1}.n_params() == 4);
  CHECK(NetworkShape{8, 10, 35}.n_params() == 475);
  CHECK(NetworkShape{26, 10, 8}.n_params() == 358);
  CHECK(NetworkShape{7, 10, 6}.n_params() == 146);
  CHECK_THROWS(NetworkShape{0, 1, 1}.validate());
}

TEST_CASE("flattening orders W1 row-major, b1, W2 row-major, b2") {
  NetworkParams p = NetworkParams::zeros({2, 2, 1});
  p.w1 << 1, 2, 3, 4;
  p.b1 << 5, 6;
  p.w2 << 7, 8;
  p.b2 << 9;
  Eigen::VectorXd v = p.flatten();
  REQUIRE(v.size() == 9);
  for (int i = 0; i < 9; ++i) CHECK(v[i] == i + 1);

  auto back = NetworkParams::unflatten({2, 2, 1}, v);
  CHECK(back.flatten() == v);

  Rng rng(3);
  auto q = random_params({3, 5, 2}, rng);
  CHECK(NetworkParams::unflatten({3, 5, 2}, q.flatten()).flatten() ==
        q.flatten());
}

TEST_CASE("scaler maps extremes to -1 and 1 and the midpoint to 0") {
  auto s = fit_scaler({{0.0}, {5.0}, {10.0}});
  CHECK(s.lo[0] == 0.0);
  CHECK(s.hi[0] == 10.0);
  CHECK(apply_scaler(s, {0.0})[0] == -1.0);
  CHECK(apply_scaler(s, {10.0})[0] == 1.0);
  CHECK(apply_scaler(s, {5.0})[0] == 0.0);

  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    double x = rng.uniform(0.0, 10.0);
    CHECK(invert_scaler(s, apply_scaler(s, {x}))[0] ==
          Catch::Approx(x).margin(1e-12));
  }
}

TEST_CASE("constant components scale to zero and invert to the constant") {
  auto s = fit_scaler({{2.0, 1.0}, {2.0, 3.0}});
  auto scaled = apply_scaler(s, {2.0, 2.0});
  CHECK(scaled[0] == 0.0);
  CHECK(scaled[1] == 0.0);
  auto back = invert_scaler(s, {0.7, 0.0});
  CHECK(back[0] == 2.0);
  CHECK(back[1] == 2.0);
  CHECK_THROWS(apply_scaler(s, {1.0}));
}

TEST_CASE("forward pass computes the two-layer map") {
  SECTION("all-zero parameters always give zero") {
    NetworkParams p = NetworkParams::zeros({3, 4, 2});
    Eigen::VectorXd x(3);
    x << 1.0, -2.0, 0.5;
    CHECK(forward(p, x).isZero(0.0));
  }

  SECTION("hand-computed scalar chain") {
    auto p = scalar_net(1.0, 0.0, 2.0, 1.0);
    Eigen::VectorXd x(1);
    x << 1.0;
    double y = forward(p, x)[0];
    CHECK(y == Catch::Approx(2.5232).margin(5e-5));
    CHECK(y == Catch::Approx(2.0 * std::tanh(1.0) + 1.0).epsilon(1e-12));
  }

  SECTION("large inputs saturate strictly inside (-1, 1)") {
    auto p = scalar_net(1.0, 0.0, 1.0, 0.0);
    Eigen::VectorXd hi(1), lo(1);
    hi << 15.0;
    lo << -15.0;
    double up = forward(p, hi)[0];
    double down = forward(p, lo)[0];
    CHECK(up < 1.0);
    CHECK(up > 0.999);
    CHECK(down > -1.0);
    CHECK(down < -0.999);
  }
}

TEST_CASE("loss is the squared error averaged over samples and outputs") {
  auto p = scalar_net(0.0, 0.0, 0.0, 1.0);  // constant output 1

  Eigen::MatrixXd x(1, 1), y(1, 1);
  x << 0.3;
  y << 1.0;
  CHECK(loss(p, x, y) == 0.0);

  y << -1.0;  // error 2
  CHECK(loss(p, x, y) == 4.0);

  Eigen::MatrixXd x2(2, 1), y2(2, 1);
  x2 << 0.3, 0.3;
  y2 << -1.0, -1.0;
  CHECK(loss(p, x2, y2) == 4.0);
}

TEST_CASE("residual vector is sample-major then output component") {
  NetworkParams p = NetworkParams::zeros({1, 1, 2});
  p.b2 << 1.0, 2.0;
  Eigen::MatrixXd x(2, 1), y(2, 2);
  x << 0.0, 0.0;
  y << 0.0, 0.0, 10.0, 10.0;
  auto rj = residuals_and_jacobian(p, x, y);
  REQUIRE(rj.e.size() == 4);
  CHECK(rj.e[0] == 1.0);
  CHECK(rj.e[1] == 2.0);
  CHECK(rj.e[2] == -9.0);
  CHECK(rj.e[3] == -8.0);
}

TEST_CASE("jacobian matches central finite differences") {
  Rng rng(2024);
  double worst = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    NetworkShape s{1 + static_cast<int>(rng.below(8)),
                   1 + static_cast<int>(rng.below(8)),
                   1 + static_cast<int>(rng.below(8))};
    const int n = 1 + static_cast<int>(rng.below(16));
    auto p = random_params(s, rng);
    auto x = random_matrix(n, s.d1, rng);
    auto y = random_matrix(n, s.d3, rng);

    auto rj = residuals_and_jacobian(p, x, y);
    const Eigen::VectorXd theta = p.flatten();
    const double h = 1e-6;
    for (int c = 0; c < s.n_params(); ++c) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp[c] += h;
      tm[c] -= h;
      auto ep = residuals_and_jacobian(NetworkParams::unflatten(s, tp), x, y).e;
      auto em = residuals_and_jacobian(NetworkParams::unflatten(s, tm), x, y).e;
      for (int r = 0; r < rj.e.size(); ++r) {
        double fd = (ep[r] - em[r]) / (2.0 * h);
        double rel = std::abs(rj.j(r, c) - fd) / std::max(1.0, std::abs(fd));
        worst = std::max(worst, rel);
      }
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("zero output weights cut the first-layer sensitivities") {
  NetworkShape s{2, 3, 2};
  Rng rng(5);
  auto p = random_params(s, rng);
  p.w2.setZero();
  auto x = random_matrix(4, 2, rng);
  auto y = random_matrix(4, 2, rng);
  auto rj = residuals_and_jacobian(p, x, y);
  CHECK(rj.j.leftCols(s.d1 * s.d2 + s.d2).isZero(0.0));
}

TEST_CASE("single-output networks have a unit bias column") {
  NetworkShape s{3, 4, 1};
  Rng rng(6);
  auto p = random_params(s, rng);
  auto x = random_matrix(5, 3, rng);
  auto y = random_matrix(5, 1, rng);
  auto rj = residuals_and_jacobian(p, x, y);
  CHECK(rj.j.col(s.n_params() - 1).isOnes(0.0));
}

TEST_CASE("accumulated normal equations match the explicit jacobian") {
  Rng rng(77);
  for (auto s : {NetworkShape{3, 4, 2}, NetworkShape{1, 1, 1},
                 NetworkShape{5, 2, 6}}) {
    auto p = random_params(s, rng);
    auto x = random_matrix(7, s.d1, rng);
    auto y = random_matrix(7, s.d3, rng);
    auto rj = residuals_and_jacobian(p, x, y);
    auto ne = normal_equations(p, x, y);
    Eigen::MatrixXd jtj = rj.j.transpose() * rj.j;
    Eigen::VectorXd jte = rj.j.transpose() * rj.e;
    CHECK((ne.jtj - jtj).cwiseAbs().maxCoeff() <
          1e-12 * (1.0 + jtj.cwiseAbs().maxCoeff()));
    CHECK((ne.jte - jte).cwiseAbs().maxCoeff() <
          1e-12 * (1.0 + jte.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("damped step solves the scalar problem by hand") {
  Eigen::VectorXd theta(1), e(1);
  Eigen::MatrixXd jac(1, 1);
  theta << 0.0;
  jac << 1.0;
  e << -5.0;  // residual of theta - 5 at theta = 0

  CHECK(lm_step(theta, jac, e, 0.0)[0] == Catch::Approx(5.0));
  CHECK(lm_step(theta, jac, e, 1.0)[0] == Catch::Approx(2.5));

  const double mu = 1e8;
  CHECK(lm_step(theta, jac, e, mu)[0] ==
        Catch::Approx(5.0 / (1.0 + mu)).epsilon(1e-9));
}

TEST_CASE("undamped step rejects a singular system") {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd jac(1, 2);
  jac << 1.0, 1.0;  // rank-deficient normal equations
  Eigen::VectorXd e(1);
  e << -5.0;
  CHECK_THROWS(lm_step(theta, jac, e, 0.0));
  CHECK_NOTHROW(lm_step(theta, jac, e, 0.1));
}

TEST_CASE("damped step on network parameters matches the flat form") {
  NetworkShape s{2, 2, 1};
  Rng rng(8);
  auto p = random_params(s, rng);
  auto x = random_matrix(6, 2, rng);
  auto y = random_matrix(6, 1, rng);
  auto rj = residuals_and_jacobian(p, x, y);
  auto next = lm_step(p, rj.j, rj.e, 0.01);
  CHECK(next.flatten() == lm_step(p.flatten(), rj.j, rj.e, 0.01));
}

TEST_CASE("training fits a sine curve") {
  std::vector<std::vector<double>> x, y;
  sine_data(200, x, y);
  auto net = train(x, y, {1, 10, 1}, {}, 7);

  double mse = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double err = net.predict(x[i])[0] - y[i][0];
    mse += err * err;
  }
  mse /= x.size();
  CHECK(mse < 1e-3);

  CHECK(net.log.epochs >= 1);
  CHECK(!net.log.stop_reason.empty());
  CHECK(net.log.scaler_fit == "full dataset");
  REQUIRE(!net.log.train_loss_history.empty());
  for (size_t i = 1; i < net.log.train_loss_history.size(); ++i)
    CHECK(net.log.train_loss_history[i] < net.log.train_loss_history[i - 1]);
}

TEST_CASE("training is deterministic in the seed") {
  std::vector<std::vector<double>> x, y;
  sine_data(60, x, y);
  auto a = train(x, y, {1, 4, 1}, {}, 21);
  auto b = train(x, y, {1, 4, 1}, {}, 21);
  auto c = train(x, y, {1, 4, 1}, {}, 22);
  CHECK(a.params.flatten() == b.params.flatten());
  CHECK(a.log.epochs == b.log.epochs);
  CHECK(a.log.stop_reason == b.log.stop_reason);
  CHECK(a.params.flatten() != c.params.flatten());
}

TEST_CASE("constant targets are learned exactly through the scaler") {
  std::vector<std::vector<double>> x, y;
  for (int i = 0; i < 40; ++i) {
    x.push_back({static_cast<double>(i)});
    y.push_back({4.2});
  }
  auto net = train(x, y, {1, 3, 1}, {}, 3);
  CHECK(net.log.best_validation_loss == Catch::Approx(0.0).margin(1e-12));
  CHECK(net.predict({17.0})[0] == 4.2);
}

TEST_CASE("training rejects undersized datasets") {
  std::vector<std::vector<double>> x, y;
  sine_data(9, x, y);
  CHECK_THROWS(train(x, y, {1, 4, 1}, {}, 1));
}

TEST_CASE("ensemble members differ by split and initialization") {
  std::vector<std::vector<double>> x, y;
  sine_data(60, x, y);
  auto ens = train_ensemble(x, y, {1, 4, 1}, {}, 10, 42);
  REQUIRE(ens.size() == 10);

  for (int r = 1; r < ens.size(); ++r)
    CHECK(ens.members[r].log.seed != ens.members[0].log.seed);
  CHECK(ens.members[0].predict({0.5}) != ens.members[1].predict({0.5}));

  CHECK_THROWS(train_ensemble(x, y, {1, 4, 1}, {}, 1, 42));
}

TEST_CASE("parallel ensemble training gives the serial result") {
  std::vector<std::vector<double>> x, y;
  sine_data(60, x, y);
  auto serial = train_ensemble(x, y, {1, 4, 1}, {}, 4, 9, 1);
  auto parallel = train_ensemble(x, y, {1, 4, 1}, {}, 4, 9, 2);
  for (int r = 0; r < 4; ++r)
    CHECK(serial.members[r].params.flatten() ==
          parallel.members[r].params.flatten());
}

TEST_CASE("ensemble prediction averages members in physical units") {
  SECTION("two members at 1 and 3") {
    Ensemble ens;
    ens.members = {constant_member(1.0), constant_member(3.0)};
    auto pred = predict_ensemble(ens, {0.0});
    CHECK(pred.mean[0] == Catch::Approx(2.0));
    CHECK(pred.sd_t[0] == Catch::Approx(std::sqrt(2.0)));
  }

  SECTION("identical members have zero spread") {
    Ensemble ens;
    ens.members = {constant_member(2.5), constant_member(2.5),
                   constant_member(2.5)};
    auto pred = predict_ensemble(ens, {0.0});
    CHECK(pred.mean[0] == Catch::Approx(2.5));
    CHECK(pred.sd_t[0] == 0.0);
  }

  SECTION("ten members average exactly") {
    Ensemble ens;
    double sum = 0.0;
    for (int r = 0; r < 10; ++r) {
      ens.members.push_back(constant_member(r));
      sum += r;
    }
    auto pred = predict_ensemble(ens, {0.0});
    CHECK(pred.mean[0] == Catch::Approx(sum / 10.0).epsilon(1e-12));
  }
}

TEST_CASE("persisted ensembles restore bit-identical predictions") {
  std::vector<std::vector<double>> x, y;
  sine_data(60, x, y);
  auto ens = train_ensemble(x, y, {1, 4, 1}, {}, 3, 17);

  auto path = (std::filesystem::temp_directory_path() /
               "plume_ensemble_test.json").string();
  save_ensemble(ens, path);
  auto loaded = load_ensemble(path);

  REQUIRE(loaded.size() == ens.size());
  Rng rng(31);
  for (int i = 0; i < 5; ++i) {
    std::vector<double> probe = {rng.uniform(-3.0, 3.0)};
    CHECK(loaded.members[i % 3].predict(probe) ==
          ens.members[i % 3].predict(probe));
    auto a = predict_ensemble(loaded, probe);
    auto b = predict_ensemble(ens, probe);
    CHECK(a.mean == b.mean);
    CHECK(a.sd_t == b.sd_t);
  }
  CHECK(loaded.members[0].log.stop_reason == ens.members[0].log.stop_reason);
  CHECK(loaded.members[0].log.train_loss_history ==
        ens.members[0].log.train_loss_history);

  std::filesystem::remove(path);
}
