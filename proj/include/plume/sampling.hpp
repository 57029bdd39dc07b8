#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "plume/common.hpp"
#include "plume/flow.hpp"
#include "plume/model.hpp"
#include "plume/random.hpp"
#include "plume/transport.hpp"

namespace plume {

/// Per-dimension sampling box for release rates. Lower limits are fixed at
/// zero: a source can at most be switched off.
struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;

  int dims() const { return static_cast<int>(lower.size()); }

  static Bounds zero_to(const std::vector<double>& upper_limits) {
    Bounds b;
    b.lower.assign(upper_limits.size(), 0.0);
    b.upper = upper_limits;
    b.validate();
    return b;
  }

  void validate() const {
    require(lower.size() == upper.size(), "bounds dimensions mismatch");
    require(!lower.empty(), "bounds must have at least one dimension");
    for (size_t d = 0; d < lower.size(); ++d) {
      require(lower[d] == 0.0, "lower bound must be 0");
      require(upper[d] > lower[d], "upper bound must exceed lower bound");
    }
  }
};

/// Latin hypercube sample: for every dimension the n_samples values occupy
/// each of the n_samples equal-width strata exactly once, uniformly within
/// the stratum, with independent permutations per dimension.
inline std::vector<std::vector<double>> lhs(int n_samples, int n_dims,
                                            const Bounds& bounds,
                                            std::uint64_t seed) {
  require(n_samples >= 1, "lhs requires n_samples >= 1");
  require(n_dims >= 1, "lhs requires n_dims >= 1");
  require(bounds.dims() == n_dims, "bounds dimension mismatch");

  std::vector<std::vector<double>> samples(
      n_samples, std::vector<double>(n_dims, 0.0));
  for (int d = 0; d < n_dims; ++d) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(d)));
    std::vector<int> strata(n_samples);
    std::iota(strata.begin(), strata.end(), 0);
    for (int i = n_samples - 1; i > 0; --i) {
      int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(strata[i], strata[j]);
    }
    const double width =
        (bounds.upper[d] - bounds.lower[d]) / static_cast<double>(n_samples);
    for (int i = 0; i < n_samples; ++i)
      samples[i][d] = bounds.lower[d] + (strata[i] + rng.uniform01()) * width;
  }
  return samples;
}

/// Order for flattening a ReleaseHistory into a sample vector: sources in
/// model order, each source's active periods ascending.
inline int release_dims(const AquiferModel& model) {
  int n = 0;
  for (const auto& s : model.sources)
    n += static_cast<int>(s.active_periods.size());
  return n;
}

inline std::vector<std::string> release_names(const AquiferModel& model) {
  std::vector<std::string> names;
  for (const auto& s : model.sources)
    for (int p : s.active_periods)
      names.push_back(s.id + "@period" + std::to_string(p));
  return names;
}

inline std::vector<double> vector_from_releases(const AquiferModel& model,
                                                const ReleaseHistory& r) {
  require(r.rates.size() == model.sources.size(), "release history mismatch");
  std::vector<double> v;
  for (size_t s = 0; s < model.sources.size(); ++s) {
    require(r.rates[s].size() == model.sources[s].active_periods.size(),
            "release history length mismatch");
    for (double rate : r.rates[s]) v.push_back(rate);
  }
  return v;
}

inline ReleaseHistory releases_from_vector(const AquiferModel& model,
                                           const std::vector<double>& v) {
  require(static_cast<int>(v.size()) == release_dims(model),
          "release vector dimension mismatch");
  ReleaseHistory r = ReleaseHistory::zeros(model);
  size_t k = 0;
  for (size_t s = 0; s < model.sources.size(); ++s)
    for (double& rate : r.rates[s]) rate = v[k++];
  return r;
}

/// Upper release bound from a reference run: simulate a constant rate M0 on
/// every source-period, compare per-well concentration maxima against the
/// observed (true) ones, and scale M0 by the worst-case ratio plus a safety
/// factor. Wells the M0 run never reaches are excluded.
inline Bounds release_bounds(const AquiferModel& model, const FlowField& flow,
                             double m0, const ObservationVector& c_true,
                             double safety = 1.2) {
  require(m0 > 0.0, "reference rate M0 must be positive");
  require(safety > 0.0, "safety factor must be positive");
  require(c_true.n_wells == static_cast<int>(model.wells.size()) &&
              c_true.n_times ==
                  static_cast<int>(model.schedule.observation_times.size()),
          "true observations do not match the model layout");
  bool any_positive = false;
  for (double v : c_true.values) any_positive |= v > 0.0;
  require(any_positive, "true observations must have a positive entry");

  ReleaseHistory constant = ReleaseHistory::zeros(model);
  for (auto& rates : constant.rates)
    for (double& rate : rates) rate = m0;
  auto reference = simulate_transport(model, flow, constant);

  double ratio = 0.0;
  bool any_well = false;
  for (int w = 0; w < c_true.n_wells; ++w) {
    double sim_max = 0.0, true_max = 0.0;
    for (int k = 0; k < c_true.n_times; ++k) {
      sim_max = std::max(sim_max, reference.observations.at(w, k));
      true_max = std::max(true_max, c_true.at(w, k));
    }
    if (sim_max <= 0.0) continue;
    any_well = true;
    ratio = std::max(ratio, true_max / sim_max);
  }
  require(any_well, "reference run produced zero concentration at every well");
  require(ratio > 0.0, "true observations are zero at every reachable well");

  return Bounds::zero_to(
      std::vector<double>(release_dims(model), safety * m0 * ratio));
}

/// A supervised dataset: paired input/target rows with named columns.
struct Dataset {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> targets;
  std::vector<std::string> input_names;
  std::vector<std::string> target_names;
  std::string scenario;
  std::uint64_t seed = 0;

  int n_inputs() const { return static_cast<int>(input_names.size()); }
  int n_targets() const { return static_cast<int>(target_names.size()); }
  int size() const { return static_cast<int>(inputs.size()); }

  void validate() const {
    require(inputs.size() == targets.size(),
            "dataset inputs and targets must pair up");
    for (const auto& row : inputs)
      require(static_cast<int>(row.size()) == n_inputs(),
              "dataset input row width mismatch");
    for (const auto& row : targets)
      require(static_cast<int>(row.size()) == n_targets(),
              "dataset target row width mismatch");
  }
};

}  // namespace plume
