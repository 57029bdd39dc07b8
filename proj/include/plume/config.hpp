#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "plume/model.hpp"

namespace plume {

// Model configuration schema (JSON, format_version 1). Months are the
// time unit in configuration files; they are converted to seconds on
// load using the mean Gregorian month. See README for the full schema.

namespace detail {

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail("parse error in " + path + ": " + e.what());
  }
  return j;
}

template <typename T>
T get_req(const nlohmann::json& j, const std::string& key,
          const std::string& where) {
  if (!j.contains(key)) fail("missing key '" + key + "' in " + where);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail("bad value for '" + key + "' in " + where + ": " + e.what());
  }
}

template <typename T>
T get_opt(const nlohmann::json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

inline Cell get_cell(const nlohmann::json& j, const std::string& where) {
  return Cell{get_req<int>(j, "row", where), get_req<int>(j, "col", where)};
}

inline const nlohmann::json& section(const nlohmann::json& j,
                                     const std::string& key) {
  if (!j.contains(key)) fail("missing section '" + key + "' in model config");
  return j.at(key);
}

}  // namespace detail

inline AquiferModel model_from_json(const nlohmann::json& j) {
  using detail::get_cell;
  using detail::get_opt;
  using detail::get_req;

  AquiferModel m;
  const auto& jg = detail::section(j, "grid");
  m.grid.n_rows = get_req<int>(jg, "n_rows", "grid");
  m.grid.n_cols = get_req<int>(jg, "n_cols", "grid");
  m.grid.delta_zeta = get_req<double>(jg, "delta_zeta", "grid");
  m.grid.delta_eta = get_req<double>(jg, "delta_eta", "grid");
  m.grid.thickness = get_req<double>(jg, "thickness", "grid");

  const auto& jz = detail::section(j, "zones");
  m.base_zone = get_req<int>(jz, "base_zone", "zones");
  for (const auto& [key, val] : detail::section(jz, "hk").items())
    m.zones.hk_of_zone[std::stoi(key)] = val.get<double>();
  if (jz.contains("patches"))
    for (const auto& jp : jz.at("patches"))
      m.zone_patches.push_back(ZonePatch{
          get_req<int>(jp, "zone", "zone patch"),
          get_req<int>(jp, "row0", "zone patch"),
          get_req<int>(jp, "row1", "zone patch"),
          get_req<int>(jp, "col0", "zone patch"),
          get_req<int>(jp, "col1", "zone patch")});
  m.rasterize_zones();

  const auto& jb = detail::section(j, "boundaries");
  if (jb.contains("head_segments"))
    for (const auto& js : jb.at("head_segments")) {
      int r0 = get_req<int>(js, "row0", "head segment");
      int r1 = get_req<int>(js, "row1", "head segment");
      int c0 = get_req<int>(js, "col0", "head segment");
      int c1 = get_req<int>(js, "col1", "head segment");
      double head = get_req<double>(js, "head", "head segment");
      for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c)
          m.boundaries.fixed_heads.push_back({{r, c}, head});
    }
  if (jb.contains("fixed_heads"))
    for (const auto& jf : jb.at("fixed_heads"))
      m.boundaries.fixed_heads.push_back(
          {get_cell(jf, "fixed head"), get_req<double>(jf, "head", "fixed head")});

  for (const auto& js : detail::section(j, "sources")) {
    SourceSpec s;
    s.id = get_req<std::string>(js, "id", "source");
    s.cell = get_cell(js, "source " + s.id);
    s.active_periods =
        get_req<std::vector<int>>(js, "active_periods", "source " + s.id);
    m.sources.push_back(std::move(s));
  }
  for (const auto& jw : detail::section(j, "wells")) {
    WellSpec w;
    w.id = get_req<std::string>(jw, "id", "well");
    w.cell = get_cell(jw, "well " + w.id);
    m.wells.push_back(std::move(w));
  }

  const auto& js = detail::section(j, "schedule");
  m.schedule.n_periods = get_req<int>(js, "n_periods", "schedule");
  m.schedule.period_length =
      get_req<double>(js, "period_length_months", "schedule") * kSecondsPerMonth;
  for (double t :
       get_req<std::vector<double>>(js, "observation_times_months", "schedule"))
    m.schedule.observation_times.push_back(t * kSecondsPerMonth);

  const auto& jt = detail::section(j, "transport");
  m.transport.porosity = get_req<double>(jt, "porosity", "transport");
  m.transport.alpha_l = get_req<double>(jt, "alpha_l", "transport");
  m.transport.alpha_t = get_req<double>(jt, "alpha_t", "transport");
  m.transport.initial_concentration =
      get_opt<double>(jt, "initial_concentration", 0.0);

  m.storativity_s = get_opt<double>(j, "storativity_s", 0.0);

  if (j.contains("solver")) {
    const auto& jv = j.at("solver");
    m.solver.max_substep =
        get_opt<double>(jv, "max_substep_months", 0.5) * kSecondsPerMonth;
    m.solver.courant_limit = get_opt<double>(jv, "courant_limit", 1.0);
  }
  return m;
}

inline nlohmann::json model_to_json(const AquiferModel& m) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["grid"] = {{"n_rows", m.grid.n_rows},
               {"n_cols", m.grid.n_cols},
               {"delta_zeta", m.grid.delta_zeta},
               {"delta_eta", m.grid.delta_eta},
               {"thickness", m.grid.thickness}};
  nlohmann::json hk = nlohmann::json::object();
  for (const auto& [zone, v] : m.zones.hk_of_zone) hk[std::to_string(zone)] = v;
  nlohmann::json patches = nlohmann::json::array();
  for (const auto& p : m.zone_patches)
    patches.push_back({{"zone", p.zone},
                       {"row0", p.row0},
                       {"row1", p.row1},
                       {"col0", p.col0},
                       {"col1", p.col1}});
  j["zones"] = {{"base_zone", m.base_zone}, {"hk", hk}, {"patches", patches}};
  nlohmann::json fixed = nlohmann::json::array();
  for (const auto& f : m.boundaries.fixed_heads)
    fixed.push_back(
        {{"row", f.cell.row}, {"col", f.cell.col}, {"head", f.head}});
  j["boundaries"] = {{"fixed_heads", fixed}};
  j["sources"] = nlohmann::json::array();
  for (const auto& s : m.sources)
    j["sources"].push_back({{"id", s.id},
                            {"row", s.cell.row},
                            {"col", s.cell.col},
                            {"active_periods", s.active_periods}});
  j["wells"] = nlohmann::json::array();
  for (const auto& w : m.wells)
    j["wells"].push_back({{"id", w.id}, {"row", w.cell.row}, {"col", w.cell.col}});
  std::vector<double> obs_months;
  for (double t : m.schedule.observation_times)
    obs_months.push_back(t / kSecondsPerMonth);
  j["schedule"] = {{"n_periods", m.schedule.n_periods},
                   {"period_length_months",
                    m.schedule.period_length / kSecondsPerMonth},
                   {"observation_times_months", obs_months}};
  j["transport"] = {{"porosity", m.transport.porosity},
                    {"alpha_l", m.transport.alpha_l},
                    {"alpha_t", m.transport.alpha_t},
                    {"initial_concentration", m.transport.initial_concentration}};
  j["storativity_s"] = m.storativity_s;
  j["solver"] = {{"max_substep_months", m.solver.max_substep / kSecondsPerMonth},
                 {"courant_limit", m.solver.courant_limit}};
  return j;
}

/// Loads, rasterizes, and validates a model configuration. Throws Error
/// naming every violated requirement.
inline AquiferModel load_model(const std::string& path) {
  AquiferModel m = model_from_json(detail::load_json_file(path));
  validate_or_throw(m);
  return m;
}

inline void save_model(const AquiferModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write file: " + path);
  out << model_to_json(m).dump(2) << "\n";
}

}  // namespace plume
