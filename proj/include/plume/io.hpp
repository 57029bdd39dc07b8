#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plume/ann.hpp"
#include "plume/config.hpp"
#include "plume/sampling.hpp"
#include "plume/model.hpp"
#include "plume/transport.hpp"

namespace plume {

// File formats. Everything numeric is written with %.17g so artifacts
// are byte-stable across reruns and round-trip doubles exactly. All
// structured files carry format_version = 1.

/// Writes a file atomically: content lands under the final name only
/// when complete.
inline void write_file_atomic(const std::string& path,
                              const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail("cannot write file: " + tmp);
    out << content;
    if (!out) fail("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- release histories ----

inline ReleaseHistory load_releases(const std::string& path,
                                    const AquiferModel& model) {
  auto j = detail::load_json_file(path);
  if (!j.contains("releases")) fail("missing 'releases' section in " + path);
  ReleaseHistory r;
  for (const auto& s : model.sources) {
    if (!j["releases"].contains(s.id))
      fail("releases file lacks source '" + s.id + "'");
    std::vector<double> rates;
    try {
      rates = j["releases"][s.id].get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      fail("bad release list for source '" + s.id + "': " + e.what());
    }
    if (rates.size() != s.active_periods.size())
      fail("source '" + s.id + "' needs " +
           std::to_string(s.active_periods.size()) + " rates, got " +
           std::to_string(rates.size()));
    r.rates.push_back(std::move(rates));
  }
  return r;
}

inline void save_releases(const ReleaseHistory& r, const AquiferModel& model,
                          const std::string& path) {
  nlohmann::json j;
  j["format_version"] = 1;
  for (size_t s = 0; s < model.sources.size(); ++s)
    j["releases"][model.sources[s].id] = r.rates[s];
  write_file_atomic(path, j.dump(2) + "\n");
}

// ---- observations ----

/// One row of %.17g values per simulation, well-major then
/// time-ascending within each row; sidecar descriptor names the columns.
inline void save_observations(const std::vector<ObservationVector>& rows,
                              const AquiferModel& model,
                              const std::string& path) {
  std::ostringstream out;
  for (const auto& obs : rows) {
    for (size_t i = 0; i < obs.values.size(); ++i) {
      if (i) out << ",";
      out << fmt_g17(obs.values[i]);
    }
    out << "\n";
  }
  write_file_atomic(path, out.str());

  nlohmann::json d;
  d["format_version"] = 1;
  d["units"] = "g/m^3 (= mg/L)";
  d["ordering"] = "well-major, time-ascending";
  d["n_wells"] = model.wells.size();
  d["n_times"] = model.schedule.observation_times.size();
  std::vector<std::string> columns;
  for (const auto& w : model.wells)
    for (double t : model.schedule.observation_times)
      columns.push_back(w.id + "@" + fmt_g17(t / kSecondsPerMonth) + "mo");
  d["columns"] = columns;
  write_file_atomic(path + ".descriptor.json", d.dump(2) + "\n");
}

inline std::vector<std::vector<double>> load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        row.push_back(std::stod(tok));
      } catch (const std::exception&) {
        fail("bad number '" + tok + "' in " + path);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---- datasets ----

/// One row per sample: input columns then target columns. A sidecar
/// descriptor names every column and records provenance.
inline void save_dataset(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::string body;
  for (int i = 0; i < ds.size(); ++i) {
    std::string row;
    for (double v : ds.inputs[i]) {
      if (!row.empty()) row += ',';
      row += fmt_g17(v);
    }
    for (double v : ds.targets[i]) {
      if (!row.empty()) row += ',';
      row += fmt_g17(v);
    }
    body += row + "\n";
  }
  write_file_atomic(path, body);

  nlohmann::json d;
  d["format_version"] = 1;
  d["kind"] = "dataset";
  d["scenario"] = ds.scenario;
  d["seed"] = ds.seed;
  d["n_samples"] = ds.size();
  d["input_columns"] = ds.input_names;
  d["target_columns"] = ds.target_names;
  d["units"] = {{"releases", "g/s"}, {"concentrations", "g/m^3 (= mg/L)"}};
  write_file_atomic(path + ".descriptor.json", d.dump(2) + "\n");
}

inline Dataset load_dataset(const std::string& path) {
  auto d = detail::load_json_file(path + ".descriptor.json");
  Dataset ds;
  ds.scenario = detail::get_req<std::string>(d, "scenario", "dataset descriptor");
  ds.seed = detail::get_req<std::uint64_t>(d, "seed", "dataset descriptor");
  for (const auto& name : d.at("input_columns"))
    ds.input_names.push_back(name.get<std::string>());
  for (const auto& name : d.at("target_columns"))
    ds.target_names.push_back(name.get<std::string>());

  auto rows = load_csv(path);
  const size_t width = ds.input_names.size() + ds.target_names.size();
  for (auto& row : rows) {
    if (row.size() != width)
      fail("dataset row width " + std::to_string(row.size()) +
           " does not match descriptor width " + std::to_string(width));
    ds.inputs.emplace_back(row.begin(), row.begin() + ds.n_inputs());
    ds.targets.emplace_back(row.begin() + ds.n_inputs(), row.end());
  }
  ds.validate();
  if (ds.size() != d.at("n_samples").get<int>())
    fail("dataset sample count does not match descriptor");
  return ds;
}

// ---- trained ensembles ----

namespace detail {

inline nlohmann::json scaler_to_json(const ScalingSpec& s) {
  return {{"min", s.lo}, {"max", s.hi}};
}

inline ScalingSpec scaler_from_json(const nlohmann::json& j) {
  ScalingSpec s;
  s.lo = j.at("min").get<std::vector<double>>();
  s.hi = j.at("max").get<std::vector<double>>();
  s.validate();
  return s;
}

}  // namespace detail

/// Everything needed to restore bit-identical predictions: shape, per-member
/// scalers, flat parameters, and training logs. Doubles are stored as JSON
/// numbers, which round-trip exactly.
inline void save_ensemble(const Ensemble& ens, const std::string& path) {
  ens.validate();
  nlohmann::json j;
  j["format_version"] = 1;
  j["kind"] = "ensemble";
  const NetworkShape s = ens.members[0].shape;
  j["shape"] = {{"d1", s.d1}, {"d2", s.d2}, {"d3", s.d3}};
  for (const auto& m : ens.members) {
    const Eigen::VectorXd theta = m.params.flatten();
    nlohmann::json jm;
    jm["params"] = std::vector<double>(theta.data(), theta.data() + theta.size());
    jm["input_scaler"] = detail::scaler_to_json(m.input_scaler);
    jm["target_scaler"] = detail::scaler_to_json(m.target_scaler);
    jm["log"] = {{"epochs", m.log.epochs},
                 {"final_train_loss", m.log.final_train_loss},
                 {"best_validation_loss", m.log.best_validation_loss},
                 {"stop_reason", m.log.stop_reason},
                 {"scaler_fit", m.log.scaler_fit},
                 {"seed", m.log.seed},
                 {"train_loss_history", m.log.train_loss_history}};
    j["members"].push_back(std::move(jm));
  }
  write_file_atomic(path, j.dump(2) + "\n");
}

inline Ensemble load_ensemble(const std::string& path) {
  auto j = detail::load_json_file(path);
  if (j.value("kind", "") != "ensemble")
    fail("not an ensemble file: " + path);
  NetworkShape shape{detail::get_req<int>(j.at("shape"), "d1", "shape"),
                     detail::get_req<int>(j.at("shape"), "d2", "shape"),
                     detail::get_req<int>(j.at("shape"), "d3", "shape")};
  shape.validate();
  Ensemble ens;
  for (const auto& jm : j.at("members")) {
    TrainedNetwork m;
    m.shape = shape;
    auto theta = jm.at("params").get<std::vector<double>>();
    m.params = NetworkParams::unflatten(
        shape, Eigen::Map<const Eigen::VectorXd>(theta.data(), theta.size()));
    m.input_scaler = detail::scaler_from_json(jm.at("input_scaler"));
    m.target_scaler = detail::scaler_from_json(jm.at("target_scaler"));
    const auto& jl = jm.at("log");
    m.log.epochs = jl.at("epochs").get<int>();
    m.log.final_train_loss = jl.at("final_train_loss").get<double>();
    m.log.best_validation_loss = jl.at("best_validation_loss").get<double>();
    m.log.stop_reason = jl.at("stop_reason").get<std::string>();
    m.log.scaler_fit = jl.at("scaler_fit").get<std::string>();
    m.log.seed = jl.at("seed").get<std::uint64_t>();
    m.log.train_loss_history =
        jl.at("train_loss_history").get<std::vector<double>>();
    ens.members.push_back(std::move(m));
  }
  ens.validate();
  return ens;
}

// ---- run manifests ----

/// Record of one CLI run: inputs, seeds, and produced artifacts. The
/// manifest carries the wall-clock data and is therefore the single
/// artifact that is not byte-stable across reruns.
struct RunManifest {
  std::string command;
  nlohmann::json inputs = nlohmann::json::object();
  nlohmann::json outputs = nlohmann::json::object();
  double elapsed_seconds = 0;
  std::string timestamp_utc;
};

inline void save_manifest(const RunManifest& m, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["tool_version"] = kVersion;
  j["command"] = m.command;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["elapsed_seconds"] = m.elapsed_seconds;
  j["timestamp_utc"] = m.timestamp_utc;
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace plume
