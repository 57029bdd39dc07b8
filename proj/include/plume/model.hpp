#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "plume/common.hpp"

namespace plume {

// Spatial conventions used throughout: zeta runs along columns (index
// `col`), eta runs along rows (index `row`), both 0-based. Cells are
// stored row-major: cell = row * n_cols + col. Internal units are
// meters, seconds, grams; concentrations are g/m^3 (numerically equal
// to mg/L).

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct GridSpec {
  int n_rows = 0;
  int n_cols = 0;
  double delta_zeta = 0;  // cell size along zeta [m]
  double delta_eta = 0;   // cell size along eta [m]
  double thickness = 0;   // saturated thickness [m]

  int cell_count() const { return n_rows * n_cols; }
  int idx(int row, int col) const { return row * n_cols + col; }
  int idx(const Cell& c) const { return idx(c.row, c.col); }
  bool contains(const Cell& c) const {
    return c.row >= 0 && c.row < n_rows && c.col >= 0 && c.col < n_cols;
  }
  double cell_area() const { return delta_zeta * delta_eta; }
  double cell_volume() const { return cell_area() * thickness; }
};

/// Rectangular patch of uniform hydraulic conductivity, end rows/cols
/// inclusive. Later patches override earlier ones and the base zone.
struct ZonePatch {
  int zone = 0;
  int row0 = 0, row1 = 0, col0 = 0, col1 = 0;
};

struct ZoneMap {
  std::vector<int> zone_of_cell;          // per cell
  std::map<int, double> hk_of_zone;       // zone id -> HK [m/s]

  double hk_at(int cell) const { return hk_of_zone.at(zone_of_cell[cell]); }
};

struct FixedHead {
  Cell cell;
  double head = 0;  // [m]
  friend bool operator==(const FixedHead&, const FixedHead&) = default;
};

struct BoundaryConditions {
  std::vector<FixedHead> fixed_heads;
};

struct SourceSpec {
  std::string id;
  Cell cell;
  std::vector<int> active_periods;  // stress period indices, 0-based
  friend bool operator==(const SourceSpec&, const SourceSpec&) = default;
};

struct WellSpec {
  std::string id;
  Cell cell;
  friend bool operator==(const WellSpec&, const WellSpec&) = default;
};

struct StressSchedule {
  int n_periods = 0;
  double period_length = 0;               // [s]
  std::vector<double> observation_times;  // [s], strictly ascending

  double total_time() const { return n_periods * period_length; }
  int period_of(double t) const {
    int p = static_cast<int>(std::floor(t / period_length));
    return std::clamp(p, 0, n_periods - 1);
  }
};

struct TransportParams {
  double porosity = 0;
  double alpha_l = 0;  // longitudinal dispersivity [m]
  double alpha_t = 0;  // transverse dispersivity [m]
  double initial_concentration = 0;
};

struct SolverSettings {
  double max_substep = 0.5 * kSecondsPerMonth;  // [s]
  double courant_limit = 1.0;
  friend bool operator==(const SolverSettings&, const SolverSettings&) = default;
};

struct AquiferModel {
  GridSpec grid;
  int base_zone = 0;
  std::vector<ZonePatch> zone_patches;
  ZoneMap zones;
  BoundaryConditions boundaries;
  std::vector<SourceSpec> sources;
  std::vector<WellSpec> wells;
  StressSchedule schedule;
  TransportParams transport;
  SolverSettings solver;
  double storativity_s = 0;  // housed for completeness; steady-state flow never reads it

  double transmissivity(int cell) const {
    return zones.hk_at(cell) * grid.thickness;
  }

  /// Rebuilds zones.zone_of_cell from base_zone and zone_patches.
  void rasterize_zones() {
    zones.zone_of_cell.assign(grid.cell_count(), base_zone);
    for (const auto& p : zone_patches)
      for (int r = p.row0; r <= p.row1; ++r)
        for (int c = p.col0; c <= p.col1; ++c)
          if (grid.contains({r, c})) zones.zone_of_cell[grid.idx(r, c)] = p.zone;
  }

  /// Collects every violated requirement; empty means valid.
  std::vector<std::string> validate() const;
};

inline std::vector<std::string> AquiferModel::validate() const {
  std::vector<std::string> issues;
  auto bad = [&](const std::string& m) { issues.push_back(m); };

  if (grid.n_rows < 2 || grid.n_cols < 2)
    bad("grid must have at least 2 rows and 2 columns");
  if (!(grid.delta_zeta > 0) || !(grid.delta_eta > 0))
    bad("cell sizes must be positive");
  if (!(grid.thickness > 0)) bad("aquifer thickness must be positive");

  if (zones.zone_of_cell.size() != static_cast<size_t>(grid.cell_count()))
    bad("zone map does not cover the grid");
  for (const auto& [zone, hk] : zones.hk_of_zone)
    if (!(hk > 0))
      bad("hydraulic conductivity of zone " + std::to_string(zone) +
          " must be positive");
  for (int z : zones.zone_of_cell)
    if (!zones.hk_of_zone.count(z)) {
      bad("zone " + std::to_string(z) + " has no hydraulic conductivity");
      break;
    }

  if (boundaries.fixed_heads.empty())
    bad("at least one fixed-head cell is required");
  std::vector<char> seen(std::max(grid.cell_count(), 1), 0);
  for (const auto& fh : boundaries.fixed_heads) {
    if (!grid.contains(fh.cell)) {
      bad("fixed-head cell outside the grid");
      continue;
    }
    if (seen[grid.idx(fh.cell)]++)
      bad("duplicate fixed-head cell at row " + std::to_string(fh.cell.row) +
          ", col " + std::to_string(fh.cell.col));
    if (!std::isfinite(fh.head)) bad("fixed head value must be finite");
  }

  if (schedule.n_periods < 1) bad("at least one stress period is required");
  if (!(schedule.period_length > 0)) bad("period length must be positive");
  for (size_t i = 0; i < schedule.observation_times.size(); ++i) {
    double t = schedule.observation_times[i];
    if (!(t > 0) || t > schedule.total_time() * (1 + 1e-12)) {
      bad("observation times must lie in (0, total simulated time]");
      break;
    }
    if (i > 0 && t <= schedule.observation_times[i - 1]) {
      bad("observation times must be strictly ascending");
      break;
    }
  }

  if (sources.empty()) bad("at least one source is required");
  for (const auto& s : sources) {
    if (!grid.contains(s.cell))
      bad("source " + s.id + " lies outside the grid");
    if (s.active_periods.empty())
      bad("source " + s.id + " has no active stress periods");
    for (size_t i = 0; i < s.active_periods.size(); ++i) {
      int p = s.active_periods[i];
      if (p < 0 || p >= schedule.n_periods) {
        bad("source " + s.id + " references stress period " +
            std::to_string(p) + " outside the schedule");
        break;
      }
      if (i > 0 && p <= s.active_periods[i - 1]) {
        bad("source " + s.id + " active periods must be strictly ascending");
        break;
      }
    }
  }

  if (wells.empty()) bad("at least one observation well is required");
  for (const auto& w : wells)
    if (!grid.contains(w.cell)) bad("well " + w.id + " lies outside the grid");

  if (!(transport.porosity > 0) || !(transport.porosity < 1))
    bad("porosity must lie in (0, 1)");
  if (transport.alpha_l < 0 || transport.alpha_t < 0)
    bad("dispersivities must be non-negative");
  if (transport.alpha_t > transport.alpha_l)
    bad("transverse dispersivity must not exceed longitudinal");
  if (transport.initial_concentration < 0)
    bad("initial concentration must be non-negative");

  if (!(solver.max_substep > 0)) bad("max substep must be positive");
  if (!(solver.courant_limit > 0)) bad("courant limit must be positive");

  return issues;
}

/// Validates and throws a single Error listing every violation.
inline void validate_or_throw(const AquiferModel& model) {
  auto issues = model.validate();
  if (issues.empty()) return;
  std::string msg = "invalid aquifer model:";
  for (const auto& m : issues) msg += "\n  - " + m;
  fail(msg);
}

}  // namespace plume
