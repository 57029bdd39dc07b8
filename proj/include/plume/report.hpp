#pragma once

// Rendering of scenario reports: an aligned text table for reading, a
// key/value metrics file and a per-unknown series file for machines. All
// three are byte-stable for identical runs; wall-clock timings stay out.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "plume/common.hpp"
#include "plume/io.hpp"
#include "plume/scenario.hpp"

namespace plume {

namespace detail {

inline std::string fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

inline std::string aligned_table(const std::vector<std::string>& headers,
                                 const std::vector<std::vector<std::string>>& rows) {
  std::vector<size_t> width(headers.size());
  for (size_t c = 0; c < headers.size(); ++c) width[c] = headers[c].size();
  for (const auto& row : rows)
    for (size_t c = 0; c < row.size(); ++c)
      width[c] = std::max(width[c], row[c].size());

  std::string out;
  const auto emit = [&](const std::vector<std::string>& row) {
    for (size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out += "  ";
      const size_t pad = width[c] - row[c].size();
      if (c == 0) {
        out += row[c];
        if (c + 1 < row.size()) out.append(pad, ' ');
      } else {
        out.append(pad, ' ');
        out += row[c];
      }
    }
    out += '\n';
  };
  emit(headers);
  for (const auto& row : rows) emit(row);
  return out;
}

}  // namespace detail

/// Human-readable report: run settings, per-unknown recovery table,
/// scenario-specific extras, metric summary, and member training log.
inline std::string scenario_report_text(const ScenarioReport& r) {
  std::string out;
  out += "scenario " + scenario_name(r.kind) + "\n";
  out += "alpha    " + fmt_g17(r.alpha) + "\n";
  out += "seed     " + std::to_string(r.seed) + "\n";
  out += "samples  " + std::to_string(r.n_samples) + "\n";
  out += "inputs   " + std::to_string(r.input_names.size());
  if (r.dropped_inputs > 0)
    out += " (" + std::to_string(r.dropped_inputs) +
           " near-zero observation columns dropped)";
  out += "\n";
  out += "targets  " + std::to_string(r.target_names.size()) + "\n";
  out += "ensemble " + std::to_string(r.members.size()) + " members\n\n";

  const size_t n_paee = r.metrics.paee.size();
  const bool show_paee = r.kind != ScenarioKind::fwd1;
  std::vector<std::string> headers{"unknown", "actual", "estimated", "sd_t"};
  if (show_paee) headers.push_back("paee_pct");
  std::vector<std::vector<std::string>> rows;
  for (size_t i = 0; i < r.target_names.size(); ++i) {
    std::vector<std::string> row{r.target_names[i],
                                 detail::fixed(r.actual[i], 4),
                                 detail::fixed(r.estimated[i], 4),
                                 detail::fixed(r.spread[i], 4)};
    if (show_paee)
      row.push_back(i < n_paee ? detail::fixed(r.metrics.paee[i], 3) : "-");
    rows.push_back(std::move(row));
  }
  out += detail::aligned_table(headers, rows);

  if (r.kind == ScenarioKind::inv2) {
    out += "\nlocation raw (zeta " + detail::fixed(r.raw_zeta, 3) + ", eta " +
           detail::fixed(r.raw_eta, 3) + ")";
    out += " decoded (zeta " + std::to_string(r.decoded_cell.col) + ", eta " +
           std::to_string(r.decoded_cell.row) + ")";
    out += " actual (zeta " + std::to_string(r.true_cell.col) + ", eta " +
           std::to_string(r.true_cell.row) + ")";
    out += r.located ? " [match]\n" : " [miss]\n";
  }
  if (r.kind == ScenarioKind::inv4)
    out += "\nnoise level actual " + fmt_g17(r.alpha_actual) + " estimated " +
           detail::fixed(r.alpha_estimate, 5) + "\n";

  if (!r.ne_per_source.empty()) {
    out += "\nNE per source [%]:";
    for (const auto& [id, ne] : r.ne_per_source)
      out += " " + id + " " + detail::fixed(ne, 3);
    out += "\n";
  }

  out += "\nNE " + detail::fixed(r.metrics.ne, 3) + " %\n";
  out += "ME " + detail::fixed(r.metrics.me, 4) + " " + r.units + "\n";
  out += "MAE " + detail::fixed(r.metrics.mae, 4) + " " + r.units + "\n";
  out += "RMSE " + detail::fixed(r.metrics.rmse_value, 4) + " " + r.units + "\n";
  out += "NRMSE " + detail::fixed(r.metrics.nrmse, 3) + " %\n";

  out += "\n";
  std::vector<std::vector<std::string>> member_rows;
  for (size_t m = 0; m < r.members.size(); ++m)
    member_rows.push_back({std::to_string(m + 1),
                           std::to_string(r.members[m].seed),
                           std::to_string(r.members[m].epochs),
                           fmt_g17(r.members[m].best_validation_loss),
                           r.members[m].stop_reason});
  out += detail::aligned_table(
      {"member", "seed", "epochs", "best_val_loss", "stop_reason"},
      member_rows);
  return out;
}

/// Flat key,value file with full-precision numbers.
inline std::string scenario_metrics_csv(const ScenarioReport& r) {
  std::string out = "key,value\n";
  const auto put = [&](const std::string& k, const std::string& v) {
    out += k + "," + v + "\n";
  };
  put("format_version", "1");
  put("scenario", scenario_name(r.kind));
  put("alpha", fmt_g17(r.alpha));
  put("seed", std::to_string(r.seed));
  put("samples", std::to_string(r.n_samples));
  put("inputs", std::to_string(r.input_names.size()));
  put("targets", std::to_string(r.target_names.size()));
  put("dropped_inputs", std::to_string(r.dropped_inputs));
  put("units", r.units);
  put("ne_pct", fmt_g17(r.metrics.ne));
  put("me", fmt_g17(r.metrics.me));
  put("mae", fmt_g17(r.metrics.mae));
  put("rmse", fmt_g17(r.metrics.rmse_value));
  put("nrmse_pct", fmt_g17(r.metrics.nrmse));
  for (const auto& [id, ne] : r.ne_per_source)
    put("ne_pct[" + id + "]", fmt_g17(ne));
  if (r.kind == ScenarioKind::inv2) {
    put("raw_zeta", fmt_g17(r.raw_zeta));
    put("raw_eta", fmt_g17(r.raw_eta));
    put("decoded_zeta", std::to_string(r.decoded_cell.col));
    put("decoded_eta", std::to_string(r.decoded_cell.row));
    put("true_zeta", std::to_string(r.true_cell.col));
    put("true_eta", std::to_string(r.true_cell.row));
    put("located", r.located ? "1" : "0");
  }
  if (r.kind == ScenarioKind::inv4) {
    put("alpha_actual", fmt_g17(r.alpha_actual));
    put("alpha_estimate", fmt_g17(r.alpha_estimate));
  }
  return out;
}

/// Per-unknown series for bar charts: estimate with a +/- 1 SD_t band.
inline std::string scenario_plot_csv(const ScenarioReport& r) {
  std::string out = "unknown,actual,estimated,sd_t\n";
  for (size_t i = 0; i < r.target_names.size(); ++i)
    out += r.target_names[i] + "," + fmt_g17(r.actual[i]) + "," +
           fmt_g17(r.estimated[i]) + "," + fmt_g17(r.spread[i]) + "\n";
  return out;
}

struct ReportPaths {
  std::string text;
  std::string metrics;
  std::string plot;
};

inline ReportPaths write_scenario_report(const ScenarioReport& r,
                                         const std::string& dir) {
  std::filesystem::create_directories(dir);
  ReportPaths paths;
  paths.text = (std::filesystem::path(dir) / "report.txt").string();
  paths.metrics = (std::filesystem::path(dir) / "metrics.csv").string();
  paths.plot = (std::filesystem::path(dir) / "plot.csv").string();
  write_file_atomic(paths.text, scenario_report_text(r));
  write_file_atomic(paths.metrics, scenario_metrics_csv(r));
  write_file_atomic(paths.plot, scenario_plot_csv(r));
  return paths;
}

}  // namespace plume
