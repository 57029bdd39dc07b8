#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "plume/flow.hpp"
#include "plume/model.hpp"

namespace plume {

/// Mass release rates per source, one entry per active stress period of
/// that source, in g/s. All rates must be non-negative.
struct ReleaseHistory {
  std::vector<std::vector<double>> rates;

  static ReleaseHistory zeros(const AquiferModel& model) {
    ReleaseHistory r;
    for (const auto& s : model.sources)
      r.rates.emplace_back(s.active_periods.size(), 0.0);
    return r;
  }
};

/// Concentrations at (well, observation time) pairs, flattened well-major
/// then time-ascending: values[w * n_times + k].
struct ObservationVector {
  std::vector<double> values;
  int n_wells = 0;
  int n_times = 0;

  double at(int well, int time_index) const {
    return values[well * n_times + time_index];
  }
};

/// Per-cell symmetric dispersion tensor [m^2/s].
struct DispersionTensorField {
  std::vector<double> dxx, dyy, dxy;
};

/// Velocity-dependent dispersion: eigenvalues alpha_l*|u| along the flow
/// direction and alpha_t*|u| normal to it; zero tensor where |u| = 0.
inline DispersionTensorField dispersion_tensor(const VelocityField& vel,
                                               double alpha_l, double alpha_t) {
  size_t n = vel.zeta.size();
  DispersionTensorField d;
  d.dxx.assign(n, 0.0);
  d.dyy.assign(n, 0.0);
  d.dxy.assign(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double ux = vel.zeta[i], uy = vel.eta[i];
    double speed = std::hypot(ux, uy);
    if (speed == 0.0) continue;
    d.dxx[i] = (alpha_l * ux * ux + alpha_t * uy * uy) / speed;
    d.dyy[i] = (alpha_l * uy * uy + alpha_t * ux * ux) / speed;
    d.dxy[i] = (alpha_l - alpha_t) * ux * uy / speed;
  }
  return d;
}

struct TransportResult {
  ObservationVector observations;
  double mass_injected = 0;   // [g]
  double mass_stored = 0;     // [g] in the domain at the final time
  double mass_outflow = 0;    // [g] through fixed-head cells
  double min_concentration = 0;
  double max_concentration = 0;
  std::vector<std::pair<double, std::vector<double>>> snapshots;

  double mass_balance_error() const {
    double scale = std::max(mass_injected, 1e-300);
    return std::abs(mass_injected - mass_stored - mass_outflow) / scale;
  }
};

/**
 * Finite-volume advection-dispersion integrator bound to one (model,
 * flow) pair. The spatial operator is assembled once: upwind advection
 * from the steady face fluxes, central dispersion with the full tensor
 * (cross terms use corner-averaged transverse gradients), and a sink at
 * fixed-head cells that export water. Time integration is implicit
 * Euler on sub-steps bounded by the configured maximum and the advective
 * Courant limit, so the system matrix depends only on the step size; the
 * factorization is cached in a Workspace and shared by every simulation,
 * which makes dataset generation cheap. Workspaces are not thread-safe:
 * use one per worker.
 */
class TransportOperator {
 public:
  struct Workspace {
    std::map<double, std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>>>
        factorizations;
  };

  TransportOperator(const AquiferModel& model, const FlowField& flow)
      : model_(model), flow_(flow) {
    validate_or_throw(model);
    build_operator();
    build_time_grid();
  }

  TransportResult simulate(const ReleaseHistory& releases) const {
    Workspace ws;
    return simulate(releases, ws);
  }

  TransportResult simulate(const ReleaseHistory& releases, Workspace& ws,
                           const std::vector<Cell>* source_cells = nullptr,
                           bool record_snapshots = false) const {
    check_releases(releases);
    const auto& g = model_.grid;
    const int n = g.cell_count();
    const double pore_volume = g.cell_volume() * model_.transport.porosity;

    std::vector<int> src_cell(model_.sources.size());
    for (size_t s = 0; s < model_.sources.size(); ++s) {
      Cell cell = source_cells ? (*source_cells)[s] : model_.sources[s].cell;
      require(g.contains(cell), "source cell outside the grid");
      src_cell[s] = g.idx(cell);
    }

    Eigen::VectorXd c =
        Eigen::VectorXd::Constant(n, model_.transport.initial_concentration);
    TransportResult result;
    result.observations.n_wells = static_cast<int>(model_.wells.size());
    result.observations.n_times =
        static_cast<int>(model_.schedule.observation_times.size());
    result.observations.values.assign(
        result.observations.n_wells * result.observations.n_times, 0.0);
    result.mass_stored = c.sum() * pore_volume;
    result.min_concentration = c.minCoeff();
    result.max_concentration = c.maxCoeff();

    Eigen::VectorXd rhs(n);
    for (const auto& step : steps_) {
      auto* lu = factorization(step.dt, ws);

      // Source density over this step; rates are constant per period.
      rhs = c;
      double rate_total = 0.0;
      for (size_t s = 0; s < model_.sources.size(); ++s) {
        const auto& periods = model_.sources[s].active_periods;
        for (size_t k = 0; k < periods.size(); ++k)
          if (periods[k] == step.period) {
            double rate = releases.rates[s][k];
            rhs[src_cell[s]] += step.dt * rate / pore_volume;
            rate_total += rate;
          }
      }

      c = lu->solve(rhs);
      if (lu->info() != Eigen::Success || !c.allFinite() ||
          c.cwiseAbs().maxCoeff() > 1e12)
        fail("transport sub-step instability at t = " +
             fmt_g17(step.t1 / kSecondsPerMonth) + " months");

      result.mass_injected += rate_total * step.dt;
      double out = 0.0;
      for (const auto& [cell, q_out] : outflow_cells_) out += q_out * c[cell];
      result.mass_outflow += out * step.dt;
      result.min_concentration = std::min(result.min_concentration, c.minCoeff());
      result.max_concentration = std::max(result.max_concentration, c.maxCoeff());

      if (step.obs_index >= 0) {
        for (size_t w = 0; w < model_.wells.size(); ++w)
          result.observations.values[w * result.observations.n_times +
                                     step.obs_index] =
              c[g.idx(model_.wells[w].cell)];
        if (record_snapshots)
          result.snapshots.emplace_back(
              step.t1, std::vector<double>(c.data(), c.data() + n));
      }
    }
    result.mass_stored = c.sum() * pore_volume;
    return result;
  }

  int step_count() const { return static_cast<int>(steps_.size()); }

 private:
  struct Step {
    double t0, t1, dt;
    int period;
    int obs_index;  // observation recorded at t1, -1 if none
  };

  void check_releases(const ReleaseHistory& r) const {
    require(r.rates.size() == model_.sources.size(),
            "release history must cover every source");
    for (size_t s = 0; s < r.rates.size(); ++s) {
      require(r.rates[s].size() == model_.sources[s].active_periods.size(),
              "release history length mismatch for source " +
                  model_.sources[s].id);
      for (double v : r.rates[s])
        require(v >= 0, "release rates must be non-negative");
    }
  }

  /// Weighted stencil for the transverse gradient dC/d(eta) evaluated at
  /// a zeta-face (or dC/d(zeta) at an eta-face): the mean of the two
  /// adjacent cells' central differences, one-sided at grid edges.
  void transverse_gradient(int row, int col, bool zeta_face,
                           std::vector<std::pair<int, double>>& out) const {
    const auto& g = model_.grid;
    auto add_cell_gradient = [&](int r, int c) {
      if (zeta_face) {  // d/d(eta) at cell (r, c)
        int lo = std::max(r - 1, 0), hi = std::min(r + 1, g.n_rows - 1);
        double h = (hi - lo) * g.delta_eta;
        out.emplace_back(g.idx(hi, c), 0.5 / h);
        out.emplace_back(g.idx(lo, c), -0.5 / h);
      } else {  // d/d(zeta) at cell (r, c)
        int lo = std::max(c - 1, 0), hi = std::min(c + 1, g.n_cols - 1);
        double h = (hi - lo) * g.delta_zeta;
        out.emplace_back(g.idx(r, hi), 0.5 / h);
        out.emplace_back(g.idx(r, lo), -0.5 / h);
      }
    };
    out.clear();
    if (zeta_face) {
      add_cell_gradient(row, col);
      add_cell_gradient(row, col + 1);
    } else {
      add_cell_gradient(row, col);
      add_cell_gradient(row + 1, col);
    }
  }

  void build_operator() {
    const auto& g = model_.grid;
    const int n = g.cell_count();
    const double phi = model_.transport.porosity;
    const double pore_volume = g.cell_volume() * phi;

    DispersionTensorField disp = dispersion_tensor(
        flow_.velocity, model_.transport.alpha_l, model_.transport.alpha_t);

    // rate_matrix * C = dC/dt from advection, dispersion, and boundary
    // outflow; assembled from per-face mass fluxes divided by pore volume.
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<std::pair<int, double>> grad;

    auto add = [&](int cell, int other, double mass_rate_coeff) {
      // d(mass_cell)/dt += coeff * C_other
      trip.emplace_back(cell, other, mass_rate_coeff / pore_volume);
    };

    for (int r = 0; r < g.n_rows; ++r)
      for (int c = 0; c < g.n_cols; ++c) {
        int me = g.idx(r, c);
        if (c + 1 < g.n_cols) {  // face toward +zeta
          int nb = g.idx(r, c + 1);
          double q_vol = flow_.face_flux_zeta[flow_.zface(r, c)] * g.delta_eta;
          double area = g.delta_eta * g.thickness;
          int up = q_vol >= 0 ? me : nb;
          add(me, up, -q_vol);
          add(nb, up, q_vol);

          double dxx_f = 0.5 * (disp.dxx[me] + disp.dxx[nb]);
          double dxy_f = 0.5 * (disp.dxy[me] + disp.dxy[nb]);
          double diff = phi * area * dxx_f / g.delta_zeta;
          add(me, nb, diff);
          add(me, me, -diff);
          add(nb, me, diff);
          add(nb, nb, -diff);
          if (dxy_f != 0.0) {
            transverse_gradient(r, c, true, grad);
            for (auto& [cell, w] : grad) {
              double coeff = phi * area * dxy_f * w;
              add(me, cell, coeff);
              add(nb, cell, -coeff);
            }
          }
        }
        if (r + 1 < g.n_rows) {  // face toward +eta
          int nb = g.idx(r + 1, c);
          double q_vol = flow_.face_flux_eta[flow_.eface(r, c)] * g.delta_zeta;
          double area = g.delta_zeta * g.thickness;
          int up = q_vol >= 0 ? me : nb;
          add(me, up, -q_vol);
          add(nb, up, q_vol);

          double dyy_f = 0.5 * (disp.dyy[me] + disp.dyy[nb]);
          double dxy_f = 0.5 * (disp.dxy[me] + disp.dxy[nb]);
          double diff = phi * area * dyy_f / g.delta_eta;
          add(me, nb, diff);
          add(me, me, -diff);
          add(nb, me, diff);
          add(nb, nb, -diff);
          if (dxy_f != 0.0) {
            transverse_gradient(r, c, false, grad);
            for (auto& [cell, w] : grad) {
              double coeff = phi * area * dxy_f * w;
              add(me, cell, coeff);
              add(nb, cell, -coeff);
            }
          }
        }
      }

    // Fixed-head cells that export water carry dissolved mass out of the
    // domain; cells that import water receive it solute-free.
    for (int i = 0; i < n; ++i) {
      double bx = flow_.boundary_exchange[i];
      if (bx < 0) {
        outflow_cells_.emplace_back(i, -bx);
        add(i, i, bx);
      }
    }

    rate_matrix_.resize(n, n);
    rate_matrix_.setFromTriplets(trip.begin(), trip.end());
    rate_matrix_.makeCompressed();
  }

  void build_time_grid() {
    const auto& g = model_.grid;
    double u_max = 0.0;
    for (size_t i = 0; i < flow_.velocity.zeta.size(); ++i) {
      u_max = std::max(u_max, std::abs(flow_.velocity.zeta[i]) / g.delta_zeta);
      u_max = std::max(u_max, std::abs(flow_.velocity.eta[i]) / g.delta_eta);
    }
    double dt_max = model_.solver.max_substep;
    if (u_max > 0)
      dt_max = std::min(dt_max, model_.solver.courant_limit / u_max);

    const auto& sched = model_.schedule;
    size_t next_obs = 0;
    for (int p = 0; p < sched.n_periods; ++p) {
      double p0 = p * sched.period_length;
      double p1 = p0 + sched.period_length;
      // Split the period at observation times so each lands on a step end.
      std::vector<double> marks{p0};
      while (next_obs < sched.observation_times.size() &&
             sched.observation_times[next_obs] <= p1 * (1 + 1e-12)) {
        marks.push_back(sched.observation_times[next_obs]);
        ++next_obs;
      }
      if (marks.back() < p1 * (1 - 1e-12)) marks.push_back(p1);
      for (size_t k = 0; k + 1 < marks.size(); ++k) {
        double a = marks[k], b = marks[k + 1];
        int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / dt_max - 1e-9)));
        double dt = (b - a) / pieces;
        for (int j = 0; j < pieces; ++j) {
          Step st;
          st.t0 = a + j * dt;
          st.t1 = j + 1 == pieces ? b : a + (j + 1) * dt;
          st.dt = dt;
          st.period = p;
          st.obs_index = -1;
          steps_.push_back(st);
        }
        // Mark the step ending at an observation time.
        for (size_t oi = 0; oi < sched.observation_times.size(); ++oi)
          if (std::abs(steps_.back().t1 - sched.observation_times[oi]) <
              1e-6 * sched.period_length)
            steps_.back().obs_index = static_cast<int>(oi);
      }
    }
  }

  Eigen::SparseLU<Eigen::SparseMatrix<double>>* factorization(
      double dt, Workspace& ws) const {
    auto it = ws.factorizations.find(dt);
    if (it != ws.factorizations.end()) return it->second.get();
    Eigen::SparseMatrix<double> m(rate_matrix_.rows(), rate_matrix_.cols());
    m.setIdentity();
    m -= dt * rate_matrix_;
    auto lu = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    lu->compute(m);
    if (lu->info() != Eigen::Success)
      fail("transport system factorization failed");
    return ws.factorizations.emplace(dt, std::move(lu)).first->second.get();
  }

  AquiferModel model_;
  FlowField flow_;
  Eigen::SparseMatrix<double> rate_matrix_;
  std::vector<std::pair<int, double>> outflow_cells_;  // (cell, m^3/s out)
  std::vector<Step> steps_;
};

/// One-shot convenience wrapper around TransportOperator.
inline TransportResult simulate_transport(const AquiferModel& model,
                                          const FlowField& flow,
                                          const ReleaseHistory& releases) {
  return TransportOperator(model, flow).simulate(releases);
}

/// True iff observations respond linearly to release superposition:
/// observe(r1 + r2) = observe(r1) + observe(r2) within 1e-8 relative.
inline bool superposition_check(const AquiferModel& model, const FlowField& flow,
                                const ReleaseHistory& r1,
                                const ReleaseHistory& r2) {
  TransportOperator op(model, flow);
  TransportOperator::Workspace ws;
  ReleaseHistory sum = r1;
  for (size_t s = 0; s < sum.rates.size(); ++s)
    for (size_t k = 0; k < sum.rates[s].size(); ++k)
      sum.rates[s][k] += r2.rates[s][k];
  auto a = op.simulate(r1, ws);
  auto b = op.simulate(r2, ws);
  auto c = op.simulate(sum, ws);
  double scale = 1e-300;
  for (double v : c.observations.values) scale = std::max(scale, std::abs(v));
  for (size_t i = 0; i < c.observations.values.size(); ++i) {
    double lhs = a.observations.values[i] + b.observations.values[i];
    if (std::abs(lhs - c.observations.values[i]) > 1e-8 * scale) return false;
  }
  return true;
}

}  // namespace plume
