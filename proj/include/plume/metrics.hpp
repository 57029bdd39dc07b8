#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "plume/common.hpp"

namespace plume {

/// Total absolute error as a percentage of the total actual value.
inline double ne_percent(const std::vector<double>& actual,
                         const std::vector<double>& estimated) {
  require(actual.size() == estimated.size() && !actual.empty(),
          "metric vectors must have equal nonzero length");
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < actual.size(); ++i) {
    num += std::abs(estimated[i] - actual[i]);
    den += actual[i];
  }
  require(den > 0.0, "actual values must sum to a positive total");
  return num / den * 100.0;
}

/// Absolute error of one estimate as a percentage of its actual value.
inline double paee_percent(double actual, double estimated) {
  require(actual != 0.0, "actual value must be nonzero");
  return std::abs(estimated - actual) / actual * 100.0;
}

/// Sample standard deviation per column of an N_R x M realization matrix.
inline std::vector<double> sd_t(
    const std::vector<std::vector<double>>& realizations) {
  const size_t nr = realizations.size();
  require(nr >= 2, "spread needs at least 2 realizations");
  const size_t m = realizations[0].size();
  for (const auto& row : realizations)
    require(row.size() == m, "realization rows must have equal width");

  std::vector<double> mean(m, 0.0), out(m, 0.0);
  for (const auto& row : realizations)
    for (size_t c = 0; c < m; ++c) mean[c] += row[c];
  for (double& v : mean) v /= static_cast<double>(nr);
  for (const auto& row : realizations)
    for (size_t c = 0; c < m; ++c) {
      const double dev = row[c] - mean[c];
      out[c] += dev * dev;
    }
  for (double& v : out) v = std::sqrt(v / static_cast<double>(nr - 1));
  return out;
}

inline double mean_error(const std::vector<double>& actual,
                         const std::vector<double>& estimated) {
  require(actual.size() == estimated.size() && !actual.empty(),
          "metric vectors must have equal nonzero length");
  double sum = 0.0;
  for (size_t i = 0; i < actual.size(); ++i) sum += estimated[i] - actual[i];
  return sum / static_cast<double>(actual.size());
}

inline double mean_absolute_error(const std::vector<double>& actual,
                                  const std::vector<double>& estimated) {
  require(actual.size() == estimated.size() && !actual.empty(),
          "metric vectors must have equal nonzero length");
  double sum = 0.0;
  for (size_t i = 0; i < actual.size(); ++i)
    sum += std::abs(estimated[i] - actual[i]);
  return sum / static_cast<double>(actual.size());
}

inline double rmse(const std::vector<double>& actual,
                   const std::vector<double>& estimated) {
  require(actual.size() == estimated.size() && !actual.empty(),
          "metric vectors must have equal nonzero length");
  double sum = 0.0;
  for (size_t i = 0; i < actual.size(); ++i) {
    const double d = estimated[i] - actual[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(actual.size()));
}

/// RMSE as a percentage of the actual vector's range.
inline double nrmse_percent(const std::vector<double>& actual,
                            const std::vector<double>& estimated) {
  double lo = actual[0], hi = actual[0];
  for (double v : actual) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  require(hi > lo, "actual values must span a nonzero range");
  return rmse(actual, estimated) / (hi - lo) * 100.0;
}

/// The full metric suite for one actual/estimated pair, with per-unknown
/// spreads when ensemble realizations are supplied.
struct MetricReport {
  double ne = 0.0;       // percent
  std::vector<double> paee;  // percent, one per unknown
  double me = 0.0;
  double mae = 0.0;
  double rmse_value = 0.0;
  double nrmse = 0.0;    // percent
  std::vector<double> spread;  // sd_t per unknown; empty without realizations
  std::string units;
};

inline MetricReport evaluate_metrics(
    const std::vector<double>& actual, const std::vector<double>& estimated,
    const std::vector<std::vector<double>>& realizations = {},
    const std::string& units = "") {
  MetricReport r;
  r.ne = ne_percent(actual, estimated);
  for (size_t i = 0; i < actual.size(); ++i)
    r.paee.push_back(paee_percent(actual[i], estimated[i]));
  r.me = mean_error(actual, estimated);
  r.mae = mean_absolute_error(actual, estimated);
  r.rmse_value = rmse(actual, estimated);
  r.nrmse = nrmse_percent(actual, estimated);
  if (!realizations.empty()) r.spread = sd_t(realizations);
  r.units = units;
  return r;
}

}  // namespace plume
