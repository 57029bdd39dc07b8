#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "plume/config.hpp"
#include "plume/flow.hpp"
#include "plume/transport.hpp"

using namespace plume;

namespace {

AquiferModel default_model() {
  return load_model(std::string(PLUME_DATA_DIR) + "/default_aquifer.json");
}

ReleaseHistory golden_releases(const AquiferModel& m) {
  ReleaseHistory r = ReleaseHistory::zeros(m);
  r.rates[0] = {35.0, 90.0, 65.0, 47.0};
  r.rates[1] = {24.0, 56.0, 43.0, 35.0};
  return r;
}

/// 3-row corridor with zero transverse dispersivity and uniform flow, so
/// the middle row behaves as an exact 1D column.
struct Corridor {
  AquiferModel model;
  double velocity;        // effective velocity [m/s]
  double plateau;         // steady injection concentration [g/m^3]
  double obs_distance;    // source cell center to well cell center [m]
};

Corridor make_corridor(double obs_time, double early_time) {
  Corridor cor;
  AquiferModel& m = cor.model;
  const int n_cols = 100;
  const double dx = 10.0;
  m.grid = {3, n_cols, dx, dx, 5.0};
  m.base_zone = 1;
  const double hk = 1e-4, phi = 0.25;
  m.zones.hk_of_zone[1] = hk;
  m.rasterize_zones();
  const double dh = 6.1875;  // gives u = 2.5e-6 m/s over 99 faces
  for (int r = 0; r < 3; ++r) {
    m.boundaries.fixed_heads.push_back({{r, 0}, 10.0 + dh});
    m.boundaries.fixed_heads.push_back({{r, n_cols - 1}, 10.0});
  }
  m.sources.push_back({"SRC", {1, 2}, {0}});
  m.wells.push_back({"OBS", {1, 62}});
  m.schedule.n_periods = 1;
  m.schedule.period_length = obs_time;
  m.schedule.observation_times = {early_time, obs_time};
  m.transport = {phi, 5.0, 0.0, 0.0};

  cor.velocity = hk * dh / ((n_cols - 1) * dx * phi);
  m.solver.max_substep = 0.25 * dx / cor.velocity;  // Courant 0.25
  m.solver.courant_limit = 1.0;

  const double row_flow = cor.velocity * phi * m.grid.thickness * m.grid.delta_eta;
  const double rate = 2e-3;  // g/s
  cor.plateau = rate / row_flow;
  cor.obs_distance = (62 - 2) * dx;
  return cor;
}

ReleaseHistory corridor_release(const Corridor& cor, double rate) {
  ReleaseHistory r = ReleaseHistory::zeros(cor.model);
  r.rates[0] = {rate};
  return r;
}

}  // namespace

TEST_CASE("dispersion tensor for axis-aligned, zero, and diagonal flow") {
  VelocityField vel;
  vel.zeta = {1.0, 0.0, 1.0 / std::sqrt(2.0)};
  vel.eta = {0.0, 0.0, 1.0 / std::sqrt(2.0)};
  auto d = dispersion_tensor(vel, 40.0, 4.0);

  CHECK(d.dxx[0] == Catch::Approx(40.0));
  CHECK(d.dyy[0] == Catch::Approx(4.0));
  CHECK(d.dxy[0] == 0.0);

  CHECK(d.dxx[1] == 0.0);
  CHECK(d.dyy[1] == 0.0);
  CHECK(d.dxy[1] == 0.0);

  // |u| = 1: eigenvalues are the dispersivities, eigenvector along u.
  double trace = d.dxx[2] + d.dyy[2];
  double det = d.dxx[2] * d.dyy[2] - d.dxy[2] * d.dxy[2];
  double disc = std::sqrt(trace * trace / 4.0 - det);
  CHECK(trace / 2.0 + disc == Catch::Approx(40.0));
  CHECK(trace / 2.0 - disc == Catch::Approx(4.0));
  double ex = 1.0, ey = (40.0 - d.dxx[2]) / d.dxy[2];
  CHECK(ey == Catch::Approx(1.0));  // eigenvector (1, 1) direction
  (void)ex;
}

TEST_CASE("zero releases give identically zero observations") {
  auto m = default_model();
  auto flow = solve_steady_flow(m);
  auto res = simulate_transport(m, flow, ReleaseHistory::zeros(m));
  for (double v : res.observations.values) CHECK(v == 0.0);
  CHECK(res.mass_injected == 0.0);
}

TEST_CASE("mass audit closes on the golden releases") {
  auto m = default_model();
  auto flow = solve_steady_flow(m);
  auto res = simulate_transport(m, flow, golden_releases(m));
  CHECK(res.mass_injected > 0.0);
  CHECK(res.mass_balance_error() < 5e-3);
  // The implicit conservative scheme should close far tighter than 0.5%.
  CHECK(res.mass_balance_error() < 1e-10);
}

TEST_CASE("concentrations never fall meaningfully below zero") {
  auto m = default_model();
  auto flow = solve_steady_flow(m);
  auto res = simulate_transport(m, flow, golden_releases(m));
  CHECK(res.max_concentration > 0.0);
  CHECK(res.min_concentration >= -1e-9 * res.max_concentration);
}

TEST_CASE("mass audit closes with boundary outflow present") {
  // Long simulation: the front crosses the whole corridor and a large
  // share of the injected mass exits through the downstream boundary.
  auto cor = make_corridor(5.0e8, 1.0e6);
  auto flow = solve_steady_flow(cor.model);
  auto res = simulate_transport(cor.model, flow, corridor_release(cor, 2e-3));
  CHECK(res.mass_outflow > 0.1 * res.mass_injected);
  CHECK(res.mass_balance_error() < 1e-10);
}

TEST_CASE("quasi-1D breakthrough matches the analytic mid-breakthrough value") {
  // Observation exactly when the advective front reaches the well:
  // the analytic solution gives very nearly half the plateau.
  auto cor = make_corridor(0.0, 0.0);
  double t_mid = cor.obs_distance / cor.velocity;
  cor = make_corridor(t_mid, 0.1 * t_mid * 0.5);
  auto flow = solve_steady_flow(cor.model);
  CHECK(flow.velocity.zeta[cor.model.grid.idx(1, 20)] ==
        Catch::Approx(cor.velocity).epsilon(1e-9));

  auto res = simulate_transport(cor.model, flow, corridor_release(cor, 2e-3));

  // The source is an interior mass-rate injection into flowing water, so the
  // matching analytic solution is a continuous point release in an unbounded
  // 1D column: the superposition of drifting Gaussians of every age. At
  // x = v*t this evaluates to 0.4744 of the plateau (not exactly one half:
  // early releases still near the origin pull the profile back slightly).
  const double d_coef = cor.model.transport.alpha_l * cor.velocity;
  const double x = cor.obs_distance, v = cor.velocity;
  auto analytic = [&](double t) {
    const int n = 4000;  // Simpson quadrature over release age
    double h = t / n, sum = 0.0;
    for (int i = 0; i <= n; ++i) {
      double age = i * h;
      double f = 0.0;
      if (age > 0.0) {
        double spread = 4.0 * d_coef * age;
        f = v * std::exp(-(x - v * age) * (x - v * age) / spread) /
            std::sqrt(std::numbers::pi * spread);
      }
      sum += ((i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0)) * f;
    }
    return cor.plateau * sum * h / 3.0;
  };
  double expected = analytic(t_mid);
  CHECK(expected == Catch::Approx(0.4744 * cor.plateau).epsilon(1e-3));
  double simulated = res.observations.at(0, 1);
  CHECK(simulated == Catch::Approx(expected).epsilon(0.10));
}

TEST_CASE("downstream well is silent before the advective front can arrive") {
  auto cor = make_corridor(0.0, 0.0);
  double t_adv = cor.obs_distance / cor.velocity;
  cor = make_corridor(t_adv, 0.1 * t_adv * 0.5);  // early obs at 0.05 t_adv
  auto flow = solve_steady_flow(cor.model);
  auto res = simulate_transport(cor.model, flow, corridor_release(cor, 2e-3));
  CHECK(std::abs(res.observations.at(0, 0)) < 1e-12 * res.max_concentration);
}

TEST_CASE("observation ordering is well-major then time-ascending") {
  auto m = default_model();
  auto flow = solve_steady_flow(m);
  auto res = simulate_transport(m, flow, golden_releases(m));
  const auto& obs = res.observations;
  REQUIRE(obs.n_wells == 7);
  REQUIRE(obs.n_times == 5);
  REQUIRE(obs.values.size() == 35);
  for (int w = 0; w < obs.n_wells; ++w)
    for (int k = 0; k < obs.n_times; ++k)
      CHECK(obs.at(w, k) == obs.values[w * 5 + k]);
  // Concentrations rise over the early years at a near well while the
  // source is active: time must be the fast-varying axis.
  CHECK(obs.at(0, 1) > obs.at(0, 0));
}

TEST_CASE("superposition and scaling hold for the observation map") {
  auto m = default_model();
  auto flow = solve_steady_flow(m);

  ReleaseHistory r1 = ReleaseHistory::zeros(m);
  r1.rates[0] = {50.0, 0.0, 0.0, 0.0};
  ReleaseHistory r2 = ReleaseHistory::zeros(m);
  r2.rates[1] = {0.0, 0.0, 30.0, 10.0};

  CHECK(superposition_check(m, flow, r1, r2));
  CHECK(superposition_check(m, flow, r1, ReleaseHistory::zeros(m)));

  TransportOperator op(m, flow);
  TransportOperator::Workspace ws;
  auto once = op.simulate(golden_releases(m), ws);
  ReleaseHistory doubled = golden_releases(m);
  for (auto& sr : doubled.rates)
    for (auto& v : sr) v *= 2.0;
  auto twice = op.simulate(doubled, ws);
  double scale = twice.observations.values[0];
  for (double v : twice.observations.values) scale = std::max(scale, std::abs(v));
  for (size_t i = 0; i < once.observations.values.size(); ++i)
    CHECK(std::abs(2.0 * once.observations.values[i] -
                   twice.observations.values[i]) <= 1e-8 * scale);
}

TEST_CASE("overriding the source cell moves the plume") {
  auto m = default_model();
  auto flow = solve_steady_flow(m);
  TransportOperator op(m, flow);
  TransportOperator::Workspace ws;

  ReleaseHistory r = ReleaseHistory::zeros(m);
  r.rates[1] = {24.0, 56.0, 43.0, 35.0};
  auto base = op.simulate(r, ws);
  std::vector<Cell> moved{m.sources[0].cell, {m.sources[1].cell.row + 1,
                                              m.sources[1].cell.col}};
  auto shifted = op.simulate(r, ws, &moved);
  double diff = 0.0;
  for (size_t i = 0; i < base.observations.values.size(); ++i)
    diff = std::max(diff, std::abs(base.observations.values[i] -
                                   shifted.observations.values[i]));
  CHECK(diff > 0.0);
  CHECK(shifted.mass_balance_error() < 1e-10);
}

TEST_CASE("release histories are validated") {
  auto m = default_model();
  auto flow = solve_steady_flow(m);
  TransportOperator op(m, flow);

  ReleaseHistory too_short = ReleaseHistory::zeros(m);
  too_short.rates[0].pop_back();
  CHECK_THROWS_WITH(op.simulate(too_short),
                    Catch::Matchers::ContainsSubstring("length mismatch"));

  ReleaseHistory negative = ReleaseHistory::zeros(m);
  negative.rates[0][0] = -1.0;
  CHECK_THROWS_WITH(op.simulate(negative),
                    Catch::Matchers::ContainsSubstring("non-negative"));
}

TEST_CASE("snapshots are recorded at observation times on request") {
  auto m = default_model();
  auto flow = solve_steady_flow(m);
  TransportOperator op(m, flow);
  TransportOperator::Workspace ws;
  auto res = op.simulate(golden_releases(m), ws, nullptr, true);
  REQUIRE(res.snapshots.size() == m.schedule.observation_times.size());
  for (size_t k = 0; k < res.snapshots.size(); ++k) {
    CHECK(res.snapshots[k].first ==
          Catch::Approx(m.schedule.observation_times[k]));
    CHECK(res.snapshots[k].second.size() ==
          static_cast<size_t>(m.grid.cell_count()));
  }
  // Well samples must agree with the snapshot field.
  const auto& field = res.snapshots[2].second;
  CHECK(res.observations.at(3, 2) ==
        Catch::Approx(field[m.grid.idx(m.wells[3].cell)]));
}
