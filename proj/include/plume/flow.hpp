#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "plume/model.hpp"

namespace plume {

struct VelocityField {
  std::vector<double> zeta;  // u_zeta per cell [m/s]
  std::vector<double> eta;   // u_eta per cell [m/s]
};

/**
 * Steady-state flow solution on the block-centered grid.
 *
 * face_flux_* store the Darcy flux per unit face width [m^2/s], positive
 * toward increasing column (zeta) / increasing row (eta). The zeta array
 * has one entry per vertical face, indexed row*(n_cols-1)+col for the
 * face between (row,col) and (row,col+1); eta analogously with
 * row*n_cols+col for the face between (row,col) and (row+1,col).
 * boundary_exchange is the net volumetric inflow [m^3/s] a fixed-head
 * cell receives from its boundary condition (zero for interior cells).
 */
struct FlowField {
  int n_rows = 0, n_cols = 0;
  std::vector<double> head;            // [m]
  std::vector<double> face_flux_zeta;  // [m^2/s per unit width]
  std::vector<double> face_flux_eta;
  std::vector<double> boundary_exchange;  // [m^3/s]
  VelocityField velocity;

  int zface(int row, int col) const { return row * (n_cols - 1) + col; }
  int eface(int row, int col) const { return row * n_cols + col; }
};

/// Cell-centered effective velocity: face Darcy fluxes averaged to the
/// cell center and divided by porosity (u = q / phi).
inline VelocityField effective_velocity(const FlowField& flow,
                                        const AquiferModel& model) {
  const auto& g = model.grid;
  const double phi_b = model.transport.porosity * g.thickness;
  VelocityField v;
  v.zeta.assign(g.cell_count(), 0.0);
  v.eta.assign(g.cell_count(), 0.0);
  for (int r = 0; r < g.n_rows; ++r)
    for (int c = 0; c < g.n_cols; ++c) {
      double qw = c > 0 ? flow.face_flux_zeta[flow.zface(r, c - 1)] : 0.0;
      double qe = c < g.n_cols - 1 ? flow.face_flux_zeta[flow.zface(r, c)] : 0.0;
      double qn = r > 0 ? flow.face_flux_eta[flow.eface(r - 1, c)] : 0.0;
      double qs = r < g.n_rows - 1 ? flow.face_flux_eta[flow.eface(r, c)] : 0.0;
      v.zeta[g.idx(r, c)] = 0.5 * (qw + qe) / phi_b;
      v.eta[g.idx(r, c)] = 0.5 * (qn + qs) / phi_b;
    }
  return v;
}

/**
 * Solves the steady-state head distribution with a five-point
 * finite-difference scheme. Intercell transmissivity is the harmonic
 * mean of the adjacent cells' HK*b; fixed-head cells are eliminated from
 * the symmetric positive-definite system and solved by sparse Cholesky.
 */
inline FlowField solve_steady_flow(const AquiferModel& model) {
  validate_or_throw(model);
  const auto& g = model.grid;
  const int n = g.cell_count();

  std::vector<double> fixed(n, std::numeric_limits<double>::quiet_NaN());
  for (const auto& fh : model.boundaries.fixed_heads)
    fixed[g.idx(fh.cell)] = fh.head;
  auto is_fixed = [&](int cell) { return !std::isnan(fixed[cell]); };

  // Unknown numbering skips fixed-head cells.
  std::vector<int> unknown_of(n, -1);
  int n_unknown = 0;
  for (int i = 0; i < n; ++i)
    if (!is_fixed(i)) unknown_of[i] = n_unknown++;

  // Volumetric conductance [m^2/s] of the face between two cells.
  auto conductance = [&](int a, int b, double spacing, double width) {
    double ta = model.transmissivity(a), tb = model.transmissivity(b);
    double th = 2.0 * ta * tb / (ta + tb);
    return th * width / spacing;
  };

  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(std::max(n_unknown, 1));
  std::vector<double> diag(std::max(n_unknown, 1), 0.0);

  auto couple = [&](int a, int b, double cond) {
    // Adds the conductance between cells a and b to the reduced system.
    if (!is_fixed(a)) {
      int ua = unknown_of[a];
      diag[ua] += cond;
      if (is_fixed(b))
        rhs[ua] += cond * fixed[b];
      else
        trip.emplace_back(ua, unknown_of[b], -cond);
    }
  };

  for (int r = 0; r < g.n_rows; ++r)
    for (int c = 0; c < g.n_cols; ++c) {
      int me = g.idx(r, c);
      if (c + 1 < g.n_cols) {
        int nb = g.idx(r, c + 1);
        double cond = conductance(me, nb, g.delta_zeta, g.delta_eta);
        couple(me, nb, cond);
        couple(nb, me, cond);
      }
      if (r + 1 < g.n_rows) {
        int nb = g.idx(r + 1, c);
        double cond = conductance(me, nb, g.delta_eta, g.delta_zeta);
        couple(me, nb, cond);
        couple(nb, me, cond);
      }
    }
  for (int i = 0; i < n_unknown; ++i) trip.emplace_back(i, i, diag[i]);

  Eigen::VectorXd h_unknown;
  if (n_unknown > 0) {
    Eigen::SparseMatrix<double> a(n_unknown, n_unknown);
    a.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
    solver.compute(a);
    if (solver.info() != Eigen::Success)
      fail("flow system factorization failed (grid disconnected from fixed heads?)");
    h_unknown = solver.solve(rhs);
    if (solver.info() != Eigen::Success) fail("flow linear solve failed");
    double rhs_scale = std::max(rhs.cwiseAbs().maxCoeff(), 1e-300);
    double resid = (a * h_unknown - rhs).cwiseAbs().maxCoeff() / rhs_scale;
    if (!(resid < 1e-10))
      fail("flow solve did not reach the 1e-10 relative residual tolerance");
  }

  FlowField flow;
  flow.n_rows = g.n_rows;
  flow.n_cols = g.n_cols;
  flow.head.resize(n);
  for (int i = 0; i < n; ++i)
    flow.head[i] = is_fixed(i) ? fixed[i] : h_unknown[unknown_of[i]];

  flow.face_flux_zeta.assign(g.n_rows * (g.n_cols - 1), 0.0);
  flow.face_flux_eta.assign((g.n_rows - 1) * g.n_cols, 0.0);
  for (int r = 0; r < g.n_rows; ++r)
    for (int c = 0; c + 1 < g.n_cols; ++c) {
      int me = g.idx(r, c), nb = g.idx(r, c + 1);
      double cond = conductance(me, nb, g.delta_zeta, g.delta_eta);
      // per unit width: volumetric / face width
      flow.face_flux_zeta[flow.zface(r, c)] =
          cond * (flow.head[me] - flow.head[nb]) / g.delta_eta;
    }
  for (int r = 0; r + 1 < g.n_rows; ++r)
    for (int c = 0; c < g.n_cols; ++c) {
      int me = g.idx(r, c), nb = g.idx(r + 1, c);
      double cond = conductance(me, nb, g.delta_eta, g.delta_zeta);
      flow.face_flux_eta[flow.eface(r, c)] =
          cond * (flow.head[me] - flow.head[nb]) / g.delta_zeta;
    }

  // Net volumetric imbalance per cell; nonzero only where a boundary
  // supplies or removes water.
  flow.boundary_exchange.assign(n, 0.0);
  for (int r = 0; r < g.n_rows; ++r)
    for (int c = 0; c < g.n_cols; ++c) {
      double net = 0.0;
      if (c > 0) net += flow.face_flux_zeta[flow.zface(r, c - 1)] * g.delta_eta;
      if (c + 1 < g.n_cols)
        net -= flow.face_flux_zeta[flow.zface(r, c)] * g.delta_eta;
      if (r > 0) net += flow.face_flux_eta[flow.eface(r - 1, c)] * g.delta_zeta;
      if (r + 1 < g.n_rows)
        net -= flow.face_flux_eta[flow.eface(r, c)] * g.delta_zeta;
      // net = inflow - outflow through internal faces; a fixed-head cell
      // balances it through the boundary.
      flow.boundary_exchange[g.idx(r, c)] = is_fixed(g.idx(r, c)) ? -net : 0.0;
    }

  flow.velocity = effective_velocity(flow, model);
  return flow;
}

/// Largest interior cell imbalance relative to the largest face flux.
inline double interior_mass_balance_error(const FlowField& flow,
                                          const AquiferModel& model) {
  const auto& g = model.grid;
  double max_flux = 1e-300, worst = 0.0;
  for (double q : flow.face_flux_zeta)
    max_flux = std::max(max_flux, std::abs(q) * g.delta_eta);
  for (double q : flow.face_flux_eta)
    max_flux = std::max(max_flux, std::abs(q) * g.delta_zeta);
  std::vector<char> is_fixed(g.cell_count(), 0);
  for (const auto& fh : model.boundaries.fixed_heads)
    is_fixed[g.idx(fh.cell)] = 1;
  for (int r = 0; r < g.n_rows; ++r)
    for (int c = 0; c < g.n_cols; ++c) {
      if (is_fixed[g.idx(r, c)]) continue;
      double net = 0.0;
      if (c > 0) net += flow.face_flux_zeta[flow.zface(r, c - 1)] * g.delta_eta;
      if (c + 1 < g.n_cols)
        net -= flow.face_flux_zeta[flow.zface(r, c)] * g.delta_eta;
      if (r > 0) net += flow.face_flux_eta[flow.eface(r - 1, c)] * g.delta_zeta;
      if (r + 1 < g.n_rows)
        net -= flow.face_flux_eta[flow.eface(r, c)] * g.delta_zeta;
      worst = std::max(worst, std::abs(net) / max_flux);
    }
  return worst;
}

/// Writes head and velocity as delimited-text grids (one row per grid row).
inline void export_flow_grids(const FlowField& flow, const AquiferModel& model,
                              const std::string& path_prefix) {
  auto dump = [&](const std::string& suffix, const std::vector<double>& field) {
    std::ofstream out(path_prefix + suffix);
    if (!out) fail("cannot write file: " + path_prefix + suffix);
    for (int r = 0; r < model.grid.n_rows; ++r) {
      for (int c = 0; c < model.grid.n_cols; ++c) {
        if (c) out << ",";
        out << fmt_g17(field[model.grid.idx(r, c)]);
      }
      out << "\n";
    }
  };
  dump("_head.csv", flow.head);
  dump("_velocity_zeta.csv", flow.velocity.zeta);
  dump("_velocity_eta.csv", flow.velocity.eta);
}

}  // namespace plume
