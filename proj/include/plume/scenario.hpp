#pragma once

// Scenario orchestration: builds the five supervised learning layouts
// (forward surrogate FWD1 and inverse problems INV1-INV4), applies
// observation corruption and near-zero column reduction, trains the
// network ensemble, evaluates the golden test, and assembles a report.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "plume/ann.hpp"
#include "plume/common.hpp"
#include "plume/flow.hpp"
#include "plume/metrics.hpp"
#include "plume/model.hpp"
#include "plume/random.hpp"
#include "plume/sampling.hpp"
#include "plume/transport.hpp"

namespace plume {

enum class ScenarioKind { fwd1, inv1, inv2, inv3, inv4 };

inline std::string scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::fwd1: return "FWD1";
    case ScenarioKind::inv1: return "INV1";
    case ScenarioKind::inv2: return "INV2";
    case ScenarioKind::inv3: return "INV3";
    case ScenarioKind::inv4: return "INV4";
  }
  fail("unknown scenario kind");
}

inline ScenarioKind scenario_from_name(const std::string& name) {
  std::string u = name;
  std::transform(u.begin(), u.end(), u.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  if (u == "FWD1") return ScenarioKind::fwd1;
  if (u == "INV1") return ScenarioKind::inv1;
  if (u == "INV2") return ScenarioKind::inv2;
  if (u == "INV3") return ScenarioKind::inv3;
  if (u == "INV4") return ScenarioKind::inv4;
  fail("unknown scenario '" + name + "' (expected FWD1, INV1, INV2, INV3 or INV4)");
}

/// Reference release histories and source location the trained surrogate is
/// judged against. Rates align with the scenario model's source order.
struct GoldenTest {
  std::vector<std::vector<double>> rates;  // [g/s], one history per source
  Cell true_cell;                          // location of the inverse source
};

/// Full configuration of one scenario run. Every random choice flows from
/// `seed`; reruns with identical settings produce identical artifacts.
struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::fwd1;
  int n_samples = 0;   // 0 picks the per-kind default; INV2: per candidate cell
  double alpha = 0.0;  // multiplicative-relative observation noise level
  int n_hidden = 10;
  int n_members = 10;
  std::uint64_t seed = 1;
  int n_jobs = 1;
  double reference_rate = 50.0;       // constant rate used to calibrate bounds
  double bound_safety = 1.2;          // head-room factor on the sampling upper bound
  double threshold_fraction = 1e-4;   // near-zero column cut, fraction of global max
  std::string inverse_source;         // source id for INV1/INV2; empty = last source
  std::vector<Cell> candidate_cells;  // INV2; empty = 3x3 block around the truth
  std::vector<double> alpha_levels = {0.0, 0.001, 0.01, 0.1};  // INV4 draw set
  std::vector<std::vector<double>> golden_rates;  // empty = standard test release
  TrainingOptions training;

  int default_samples() const {
    switch (kind) {
      case ScenarioKind::inv1:
      case ScenarioKind::inv2: return 256;
      default: return 500;
    }
  }
  int samples() const { return n_samples > 0 ? n_samples : default_samples(); }

  void validate() const {
    require(alpha >= 0.0, "noise level alpha must be nonnegative");
    require(n_hidden >= 1, "hidden width must be at least 1");
    require(n_members >= 2, "ensemble needs at least 2 members");
    require(samples() >= 1, "sample count must be positive");
    require(n_jobs >= 1, "job count must be at least 1");
    require(reference_rate > 0.0, "reference rate must be positive");
    require(bound_safety > 0.0, "bound safety factor must be positive");
    require(threshold_fraction >= 0.0, "threshold fraction must be nonnegative");
    require(!alpha_levels.empty(), "alpha level set must not be empty");
    for (double a : alpha_levels)
      require(a >= 0.0, "alpha levels must be nonnegative");
  }
};

namespace seed_stream {
// Sub-stream indices hung off ScenarioConfig::seed. Keeping them distinct
// makes every stage independently reproducible.
constexpr std::uint64_t lhs = 1;           // design matrix (INV2: per-cell offset)
constexpr std::uint64_t sample_alpha = 2;  // INV4 per-sample noise draw
constexpr std::uint64_t corruption = 3;    // run-time dataset corruption
constexpr std::uint64_t golden = 4;        // golden-test input corruption
constexpr std::uint64_t training = 5;      // ensemble member seeds
}  // namespace seed_stream

// ---------------------------------------------------------------------------
// Observation corruption
// ---------------------------------------------------------------------------

/// Multiplicative-relative noise: C_err = C + alpha * eps * C with one
/// standard-normal eps per component, supplied by `epsilon` so tests can pin
/// the draw.
inline std::vector<double> corrupt_values(const std::vector<double>& values,
                                          double alpha,
                                          const std::function<double()>& epsilon) {
  require(alpha >= 0.0, "noise level alpha must be nonnegative");
  std::vector<double> out(values.size());
  for (size_t i = 0; i < values.size(); ++i)
    out[i] = values[i] + alpha * epsilon() * values[i];
  return out;
}

inline std::vector<double> corrupt_values(const std::vector<double>& values,
                                          double alpha, std::uint64_t seed) {
  Rng rng(seed);
  return corrupt_values(values, alpha, [&rng] { return rng.gaussian(); });
}

inline ObservationVector corrupt_observations(const ObservationVector& obs,
                                              double alpha, std::uint64_t seed) {
  ObservationVector out = obs;
  out.values = corrupt_values(obs.values, alpha, seed);
  return out;
}

// ---------------------------------------------------------------------------
// Near-zero input column reduction
// ---------------------------------------------------------------------------

/// Dataset with structurally silent input columns removed, keeping the mask
/// so test inputs can be reduced identically.
struct ReducedDataset {
  Dataset dataset;
  std::vector<bool> kept;  // per original input column
  int dropped() const {
    return static_cast<int>(std::count(kept.begin(), kept.end(), false));
  }
};

/// Drops every input column whose maximum over all samples falls below
/// threshold_fraction times the global maximum input value.
inline ReducedDataset reduce_near_zero_columns(const Dataset& ds,
                                               double threshold_fraction) {
  ds.validate();
  require(ds.size() > 0, "cannot reduce an empty dataset");
  require(threshold_fraction >= 0.0, "threshold fraction must be nonnegative");
  const int n_cols = ds.n_inputs();

  std::vector<double> col_max(n_cols, -std::numeric_limits<double>::infinity());
  double global_max = -std::numeric_limits<double>::infinity();
  for (const auto& row : ds.inputs)
    for (int c = 0; c < n_cols; ++c) {
      col_max[c] = std::max(col_max[c], row[c]);
      global_max = std::max(global_max, row[c]);
    }

  ReducedDataset out;
  out.kept.assign(n_cols, true);
  for (int c = 0; c < n_cols; ++c)
    out.kept[c] = col_max[c] > 0.0 &&
                  col_max[c] >= threshold_fraction * global_max;
  require(std::count(out.kept.begin(), out.kept.end(), true) > 0,
          "column reduction dropped every input column");

  out.dataset = ds;
  out.dataset.inputs.clear();
  out.dataset.input_names.clear();
  for (int c = 0; c < n_cols; ++c)
    if (out.kept[c]) out.dataset.input_names.push_back(ds.input_names[c]);
  for (const auto& row : ds.inputs) {
    std::vector<double> r;
    r.reserve(out.dataset.input_names.size());
    for (int c = 0; c < n_cols; ++c)
      if (out.kept[c]) r.push_back(row[c]);
    out.dataset.inputs.push_back(std::move(r));
  }
  return out;
}

inline std::vector<double> apply_column_mask(const std::vector<bool>& kept,
                                             const std::vector<double>& row) {
  require(kept.size() == row.size(), "column mask size mismatch");
  std::vector<double> out;
  out.reserve(row.size());
  for (size_t i = 0; i < row.size(); ++i)
    if (kept[i]) out.push_back(row[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Candidate source cells and location decoding
// ---------------------------------------------------------------------------

/// The 3x3 block of cells centered on `center`, row-major. Errors if the
/// block leaves the grid.
inline std::vector<Cell> inv2_candidates(const AquiferModel& model, Cell center) {
  std::vector<Cell> cells;
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc) {
      Cell c{center.row + dr, center.col + dc};
      require(model.grid.contains(c),
              "candidate block around the source leaves the grid");
      cells.push_back(c);
    }
  return cells;
}

/// Maps a real-valued (zeta, eta) estimate to the nearest candidate cell in
/// Euclidean index distance; ties break toward smaller (zeta, eta)
/// lexicographically. zeta indexes columns, eta indexes rows.
inline Cell decode_location(double raw_zeta, double raw_eta,
                            const std::vector<Cell>& candidates) {
  require(!candidates.empty(), "location decoding needs candidate cells");
  const Cell* best = nullptr;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    const double dz = raw_zeta - c.col;
    const double de = raw_eta - c.row;
    const double d2 = dz * dz + de * de;
    const bool closer =
        d2 < best_d2 ||
        (d2 == best_d2 && best != nullptr &&
         (c.col < best->col || (c.col == best->col && c.row < best->row)));
    if (best == nullptr || closer) {
      best = &c;
      best_d2 = d2;
    }
  }
  return *best;
}

// ---------------------------------------------------------------------------
// Scenario model and golden test resolution
// ---------------------------------------------------------------------------

/// The source whose release (and, for INV2, location) is treated as unknown
/// in the single-source inverse scenarios.
inline const SourceSpec& inverse_source(const AquiferModel& model,
                                        const ScenarioConfig& cfg) {
  require(!model.sources.empty(), "model has no sources");
  if (cfg.inverse_source.empty()) return model.sources.back();
  for (const auto& s : model.sources)
    if (s.id == cfg.inverse_source) return s;
  fail("inverse source '" + cfg.inverse_source + "' not found in the model");
}

/// Golden release rates aligned with the full model's sources. Defaults to
/// the standard two-source test release when the model matches its shape.
inline std::vector<std::vector<double>> resolve_golden_rates(
    const AquiferModel& model, const ScenarioConfig& cfg) {
  if (!cfg.golden_rates.empty()) {
    require(cfg.golden_rates.size() == model.sources.size(),
            "golden rates must cover every model source");
    for (size_t s = 0; s < model.sources.size(); ++s)
      require(cfg.golden_rates[s].size() ==
                  model.sources[s].active_periods.size(),
              "golden rate history length must match the source's periods");
    return cfg.golden_rates;
  }
  const bool standard_shape =
      model.sources.size() == 2 &&
      model.sources[0].active_periods.size() == 4 &&
      model.sources[1].active_periods.size() == 4;
  require(standard_shape,
          "no default golden release for this source layout; configure rates");
  return {{35.0, 90.0, 65.0, 47.0}, {24.0, 56.0, 43.0, 35.0}};
}

/// The model a scenario actually simulates: INV1/INV2 keep only the inverse
/// source; the other kinds use the model unchanged.
inline AquiferModel scenario_model(const AquiferModel& model,
                                   const ScenarioConfig& cfg) {
  if (cfg.kind != ScenarioKind::inv1 && cfg.kind != ScenarioKind::inv2)
    return model;
  const SourceSpec& keep = inverse_source(model, cfg);
  AquiferModel out = model;
  out.sources.clear();
  out.sources.push_back(keep);
  return out;
}

/// Golden test aligned with scenario_model(model, cfg)'s source order.
inline GoldenTest golden_test(const AquiferModel& model,
                              const ScenarioConfig& cfg) {
  const auto full_rates = resolve_golden_rates(model, cfg);
  const SourceSpec& inv = inverse_source(model, cfg);
  GoldenTest g;
  g.true_cell = inv.cell;
  if (cfg.kind == ScenarioKind::inv1 || cfg.kind == ScenarioKind::inv2) {
    for (size_t s = 0; s < model.sources.size(); ++s)
      if (model.sources[s].id == inv.id) g.rates.push_back(full_rates[s]);
  } else {
    g.rates = full_rates;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

/// Column names for observation inputs/targets: well id plus 1-based
/// observation time index, well-major then time-ascending.
inline std::vector<std::string> observation_names(const AquiferModel& model,
                                                  bool last_time_only) {
  const int n_times = static_cast<int>(model.schedule.observation_times.size());
  std::vector<std::string> names;
  for (const auto& w : model.wells) {
    if (last_time_only) {
      names.push_back(w.id + "@t" + std::to_string(n_times));
      continue;
    }
    for (int k = 0; k < n_times; ++k)
      names.push_back(w.id + "@t" + std::to_string(k + 1));
  }
  return names;
}

namespace detail {

/// Runs fn(thread, index) for index in [0, n) across min(n_jobs, n) threads.
/// Work must depend only on the index so results are schedule-independent.
inline void parallel_indexed(int n, int n_jobs,
                             const std::function<void(int, int)>& fn) {
  const int n_threads = std::max(1, std::min(n_jobs, n));
  if (n_threads == 1) {
    for (int i = 0; i < n; ++i) fn(0, i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t)
    pool.emplace_back([&, t] {
      for (int i = next++; i < n; i = next++) fn(t, i);
    });
  for (auto& th : pool) th.join();
}

/// Concentrations at every well at the last observation time only.
inline std::vector<double> last_time_values(const ObservationVector& obs) {
  std::vector<double> out(obs.n_wells);
  for (int w = 0; w < obs.n_wells; ++w)
    out[w] = obs.at(w, obs.n_times - 1);
  return out;
}

}  // namespace detail

/// Builds the supervised dataset for cfg.kind on the given model. One flow
/// solve is shared by all transport runs; simulations parallelize over
/// samples under cfg.n_jobs with byte-identical results for any job count.
inline Dataset generate_dataset(const AquiferModel& model,
                                const ScenarioConfig& cfg) {
  cfg.validate();
  const AquiferModel base = scenario_model(model, cfg);
  validate_or_throw(base);
  const FlowField flow = solve_steady_flow(base);
  const GoldenTest golden = golden_test(model, cfg);

  TransportOperator op(base, flow);
  ReleaseHistory golden_releases;
  golden_releases.rates = golden.rates;
  const ObservationVector golden_obs = op.simulate(golden_releases).observations;

  const Bounds bounds = release_bounds(base, flow, cfg.reference_rate,
                                       golden_obs, cfg.bound_safety);
  const int dims = release_dims(base);
  const int per_block = cfg.samples();

  Dataset ds;
  ds.scenario = scenario_name(cfg.kind);
  ds.seed = cfg.seed;

  const auto simulate_block =
      [&](const std::vector<std::vector<double>>& design,
          const Cell* source_cell, std::vector<ObservationVector>& out) {
        out.resize(design.size());
        std::vector<Cell> cells;
        if (source_cell != nullptr) cells.assign(base.sources.size(), *source_cell);
        detail::parallel_indexed(
            static_cast<int>(design.size()), cfg.n_jobs, [&](int, int i) {
              TransportOperator::Workspace ws;
              const ReleaseHistory r = releases_from_vector(base, design[i]);
              out[i] = op.simulate(r, ws, source_cell ? &cells : nullptr)
                           .observations;
            });
      };

  if (cfg.kind == ScenarioKind::inv2) {
    const std::vector<Cell> cells =
        cfg.candidate_cells.empty()
            ? inv2_candidates(base, golden.true_cell)
            : cfg.candidate_cells;
    require(!cells.empty(), "INV2 needs at least one candidate cell");
    ds.input_names = observation_names(base, true);
    ds.target_names = release_names(base);
    ds.target_names.push_back("zeta");
    ds.target_names.push_back("eta");
    const std::uint64_t lhs_base = derive_seed(cfg.seed, seed_stream::lhs);
    for (size_t j = 0; j < cells.size(); ++j) {
      const auto design = lhs(per_block, dims, bounds,
                              derive_seed(lhs_base, static_cast<std::uint64_t>(j)));
      std::vector<ObservationVector> sims;
      simulate_block(design, &cells[j], sims);
      for (int i = 0; i < per_block; ++i) {
        ds.inputs.push_back(detail::last_time_values(sims[i]));
        std::vector<double> t = design[i];
        t.push_back(static_cast<double>(cells[j].col));
        t.push_back(static_cast<double>(cells[j].row));
        ds.targets.push_back(std::move(t));
      }
    }
    ds.validate();
    return ds;
  }

  const auto design =
      lhs(per_block, dims, bounds, derive_seed(cfg.seed, seed_stream::lhs));
  std::vector<ObservationVector> sims;
  simulate_block(design, nullptr, sims);

  switch (cfg.kind) {
    case ScenarioKind::fwd1: {
      ds.input_names = release_names(base);
      ds.target_names = observation_names(base, false);
      for (int i = 0; i < per_block; ++i) {
        ds.inputs.push_back(design[i]);
        ds.targets.push_back(sims[i].values);
      }
      break;
    }
    case ScenarioKind::inv1: {
      ds.input_names = observation_names(base, true);
      ds.target_names = release_names(base);
      for (int i = 0; i < per_block; ++i) {
        ds.inputs.push_back(detail::last_time_values(sims[i]));
        ds.targets.push_back(design[i]);
      }
      break;
    }
    case ScenarioKind::inv3: {
      ds.input_names = observation_names(base, false);
      ds.target_names = release_names(base);
      for (int i = 0; i < per_block; ++i) {
        ds.inputs.push_back(sims[i].values);
        ds.targets.push_back(design[i]);
      }
      ds = reduce_near_zero_columns(ds, cfg.threshold_fraction).dataset;
      break;
    }
    case ScenarioKind::inv4: {
      ds.input_names = observation_names(base, false);
      ds.target_names = release_names(base);
      ds.target_names.push_back("alpha");
      const std::uint64_t alpha_base =
          derive_seed(cfg.seed, seed_stream::sample_alpha);
      for (int i = 0; i < per_block; ++i) {
        Rng rng(derive_seed(alpha_base, static_cast<std::uint64_t>(i)));
        const double a =
            cfg.alpha_levels[rng.below(cfg.alpha_levels.size())];
        ds.inputs.push_back(corrupt_values(sims[i].values, a,
                                           [&rng] { return rng.gaussian(); }));
        std::vector<double> t = design[i];
        t.push_back(a);
        ds.targets.push_back(std::move(t));
      }
      ds = reduce_near_zero_columns(ds, cfg.threshold_fraction).dataset;
      break;
    }
    default:
      fail("unhandled scenario kind");
  }
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Scenario run
// ---------------------------------------------------------------------------

struct MemberSummary {
  std::uint64_t seed = 0;
  int epochs = 0;
  double best_validation_loss = 0;
  std::string stop_reason;
};

/// Everything a scenario run produced: golden-test recovery, metrics, and
/// per-member training summaries. Timing fields are informational and kept
/// out of the byte-stable report files.
struct ScenarioReport {
  ScenarioKind kind = ScenarioKind::fwd1;
  double alpha = 0;
  std::uint64_t seed = 0;
  int n_samples = 0;
  int dropped_inputs = 0;
  std::vector<std::string> input_names;   // post-reduction
  std::vector<std::string> target_names;
  std::vector<double> actual;     // golden targets
  std::vector<double> estimated;  // ensemble mean
  std::vector<double> spread;     // ensemble standard deviation (SD_t)
  MetricReport metrics;           // over the release block (FWD1: observations)
  std::vector<std::pair<std::string, double>> ne_per_source;
  double alpha_actual = std::numeric_limits<double>::quiet_NaN();    // INV4
  double alpha_estimate = std::numeric_limits<double>::quiet_NaN();  // INV4
  double raw_zeta = std::numeric_limits<double>::quiet_NaN();  // INV2
  double raw_eta = std::numeric_limits<double>::quiet_NaN();   // INV2
  Cell decoded_cell{-1, -1};                                   // INV2
  Cell true_cell{-1, -1};
  bool located = false;  // INV2: decoded cell equals the truth
  std::vector<MemberSummary> members;
  Ensemble ensemble;  // the trained members behind the estimates
  std::string units = "g/s";
  double dataset_seconds = 0;
  double training_seconds = 0;
  double simulate_seconds = 0;  // one transport simulation (FWD1 comparison)
  double predict_seconds = 0;   // one ensemble prediction
};

namespace detail {

inline double seconds_since(
    const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

/// Number of release-rate components at the front of the target vector.
inline int release_block_size(ScenarioKind kind, const AquiferModel& base) {
  switch (kind) {
    case ScenarioKind::fwd1: return 0;
    case ScenarioKind::inv1: return release_dims(base);
    case ScenarioKind::inv2: return release_dims(base);
    case ScenarioKind::inv3: return release_dims(base);
    case ScenarioKind::inv4: return release_dims(base);
  }
  fail("unhandled scenario kind");
}

}  // namespace detail

/// Runs one scenario end to end on a pre-generated dataset (which must match
/// cfg.kind's layout). Corruption at cfg.alpha is applied here, once, shared
/// by all ensemble members; FWD1 and INV4 datasets are never re-corrupted
/// (INV4 embeds its per-sample corruption at generation time).
inline ScenarioReport run_scenario(const AquiferModel& model,
                                   const ScenarioConfig& cfg,
                                   const Dataset& dataset) {
  cfg.validate();
  dataset.validate();
  require(dataset.scenario == scenario_name(cfg.kind),
          "dataset was generated for a different scenario");

  const AquiferModel base = scenario_model(model, cfg);
  const FlowField flow = solve_steady_flow(base);
  const GoldenTest golden = golden_test(model, cfg);
  TransportOperator op(base, flow);
  ReleaseHistory golden_releases;
  golden_releases.rates = golden.rates;

  ScenarioReport report;
  report.kind = cfg.kind;
  report.alpha = cfg.alpha;
  report.seed = cfg.seed;
  report.n_samples = dataset.size();
  report.input_names = dataset.input_names;
  report.target_names = dataset.target_names;
  report.true_cell = golden.true_cell;

  const auto sim_start = std::chrono::steady_clock::now();
  const ObservationVector golden_obs = op.simulate(golden_releases).observations;
  report.simulate_seconds = detail::seconds_since(sim_start);

  // Reduction bookkeeping: the dataset's input names record which
  // observation columns survived generation-time reduction.
  const bool observation_inputs = cfg.kind != ScenarioKind::fwd1;
  std::vector<bool> kept;
  if (observation_inputs) {
    const bool last_only =
        cfg.kind == ScenarioKind::inv1 || cfg.kind == ScenarioKind::inv2;
    const auto full_names = observation_names(base, last_only);
    kept.assign(full_names.size(), false);
    size_t cursor = 0;
    for (size_t c = 0; c < full_names.size(); ++c)
      if (cursor < dataset.input_names.size() &&
          dataset.input_names[cursor] == full_names[c]) {
        kept[c] = true;
        ++cursor;
      }
    require(cursor == dataset.input_names.size(),
            "dataset input columns do not match the model's observations");
    report.dropped_inputs =
        static_cast<int>(kept.size()) - dataset.n_inputs();
  }

  // Run-time corruption of training inputs (INV1/INV2/INV3 only; INV4
  // corrupts per sample at generation time and FWD1 inputs are releases).
  Dataset train = dataset;
  const bool corrupt_training =
      cfg.alpha > 0.0 && observation_inputs && cfg.kind != ScenarioKind::inv4;
  if (corrupt_training) {
    const std::uint64_t base_seed =
        derive_seed(cfg.seed, seed_stream::corruption);
    for (int i = 0; i < train.size(); ++i)
      train.inputs[i] = corrupt_values(
          train.inputs[i], cfg.alpha,
          derive_seed(base_seed, static_cast<std::uint64_t>(i)));
  }

  NetworkShape shape{train.n_inputs(), cfg.n_hidden, train.n_targets()};
  const auto train_start = std::chrono::steady_clock::now();
  const Ensemble ens = train_ensemble(
      train.inputs, train.targets, shape, cfg.training, cfg.n_members,
      derive_seed(cfg.seed, seed_stream::training), cfg.n_jobs);
  report.training_seconds = detail::seconds_since(train_start);
  report.ensemble = ens;
  for (const auto& m : ens.members)
    report.members.push_back({m.log.seed, m.log.epochs,
                              m.log.best_validation_loss, m.log.stop_reason});

  // Golden-test input in the dataset's layout.
  std::vector<double> golden_input;
  if (cfg.kind == ScenarioKind::fwd1) {
    golden_input = vector_from_releases(base, golden_releases);
  } else {
    const bool last_only =
        cfg.kind == ScenarioKind::inv1 || cfg.kind == ScenarioKind::inv2;
    std::vector<double> full = last_only
                                   ? detail::last_time_values(golden_obs)
                                   : golden_obs.values;
    golden_input = apply_column_mask(kept, full);
    if (cfg.alpha > 0.0)
      golden_input =
          corrupt_values(golden_input, cfg.alpha,
                         derive_seed(cfg.seed, seed_stream::golden));
  }

  const auto predict_start = std::chrono::steady_clock::now();
  const EnsemblePrediction pred = predict_ensemble(ens, golden_input);
  report.predict_seconds = detail::seconds_since(predict_start);
  report.estimated = pred.mean;
  report.spread = pred.sd_t;

  // Actual targets in the same layout.
  if (cfg.kind == ScenarioKind::fwd1) {
    report.actual = golden_obs.values;
    report.units = "g/m^3";
  } else {
    report.actual = vector_from_releases(base, golden_releases);
    if (cfg.kind == ScenarioKind::inv2) {
      report.actual.push_back(static_cast<double>(golden.true_cell.col));
      report.actual.push_back(static_cast<double>(golden.true_cell.row));
    }
    if (cfg.kind == ScenarioKind::inv4) {
      report.alpha_actual = cfg.alpha;
      report.actual.push_back(cfg.alpha);
    }
  }
  require(report.actual.size() == report.estimated.size(),
          "golden target layout mismatch");

  // Metrics over the release block (FWD1: over all observations).
  const int block = cfg.kind == ScenarioKind::fwd1
                        ? static_cast<int>(report.actual.size())
                        : detail::release_block_size(cfg.kind, base);
  const auto head = [&](const std::vector<double>& v) {
    return std::vector<double>(v.begin(), v.begin() + block);
  };
  std::vector<std::vector<double>> member_blocks;
  for (const auto& m : ens.members)
    member_blocks.push_back(head(m.predict(golden_input)));
  report.metrics = evaluate_metrics(head(report.actual),
                                    head(report.estimated), member_blocks,
                                    report.units);

  if (cfg.kind != ScenarioKind::fwd1) {
    int offset = 0;
    for (const auto& s : base.sources) {
      const int n = static_cast<int>(s.active_periods.size());
      const std::vector<double> a(report.actual.begin() + offset,
                                  report.actual.begin() + offset + n);
      const std::vector<double> e(report.estimated.begin() + offset,
                                  report.estimated.begin() + offset + n);
      report.ne_per_source.emplace_back(s.id, ne_percent(a, e));
      offset += n;
    }
  }

  if (cfg.kind == ScenarioKind::inv2) {
    const std::vector<Cell> cells =
        cfg.candidate_cells.empty() ? inv2_candidates(base, golden.true_cell)
                                    : cfg.candidate_cells;
    report.raw_zeta = report.estimated[block];
    report.raw_eta = report.estimated[block + 1];
    report.decoded_cell =
        decode_location(report.raw_zeta, report.raw_eta, cells);
    report.located = report.decoded_cell == golden.true_cell;
  }
  if (cfg.kind == ScenarioKind::inv4)
    report.alpha_estimate = report.estimated[report.estimated.size() - 1];

  return report;
}

/// Generates the dataset and runs the scenario in one call.
inline ScenarioReport run_scenario(const AquiferModel& model,
                                   const ScenarioConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const Dataset ds = generate_dataset(model, cfg);
  const double gen_seconds = detail::seconds_since(start);
  ScenarioReport report = run_scenario(model, cfg, ds);
  report.dataset_seconds = gen_seconds;
  return report;
}

/// Observations produced by driving the transport solver with a recovered
/// release vector; used to check forward consistency of inverse estimates.
inline ObservationVector resimulate_releases(
    const AquiferModel& model, const ScenarioConfig& cfg,
    const std::vector<double>& release_vector) {
  const AquiferModel base = scenario_model(model, cfg);
  const FlowField flow = solve_steady_flow(base);
  const ReleaseHistory r = releases_from_vector(base, release_vector);
  return simulate_transport(base, flow, r).observations;
}

}  // namespace plume
