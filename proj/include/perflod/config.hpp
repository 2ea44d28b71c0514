#pragma once

#include <algorithm>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "perflod/dyadic.hpp"
#include "perflod/errors.hpp"
#include "perflod/experiment.hpp"

namespace perflod {

namespace detail {

inline double json_length(const nlohmann::json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return parse_length(j.get<std::string>());
  throw ConfigError("field '" + field + "' must be a number or a \"2^-p\" string");
}

inline std::vector<double> json_lengths(const nlohmann::json& j, const std::string& field) {
  std::vector<double> out;
  if (!j.is_array()) return {json_length(j, field)};
  for (const auto& v : j) out.push_back(json_length(v, field));
  return out;
}

template <class T>
T json_get(const nlohmann::json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("field '" + field + "' has the wrong type");
  }
}

} // namespace detail

/// Reads an experiment description. Unknown keys are rejected so that typos
/// do not silently fall back to defaults. Paper-scale overrides are applied
/// before the explicit fields.
inline ExperimentConfig parse_config(const nlohmann::json& j, std::optional<Command> command = std::nullopt) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> known{"command",  "geometry",  "h_fine",      "H_list",  "k_policy",
                                              "k_list",   "eta_list",  "interp",      "output",  "seed",
                                              "forcing",  "threads",   "cache_dir",   "paper_scale",
                                              "record_timing", "reference_tolerance"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key '" + key + "'");

  ExperimentConfig cfg;
  if (j.contains("command")) cfg.command = parse_command(detail::json_get<std::string>(j["command"], "command"));
  if (command) cfg.command = *command;
  if (j.contains("geometry")) {
    const auto& g = j["geometry"];
    if (g.is_string()) {
      cfg.geometry.kind = parse_geometry_kind(g.get<std::string>());
    } else if (g.is_object()) {
      if (g.contains("kind")) cfg.geometry.kind = parse_geometry_kind(detail::json_get<std::string>(g["kind"], "geometry.kind"));
      if (g.contains("eta")) cfg.geometry.eta = detail::json_length(g["eta"], "geometry.eta");
      if (g.contains("fixed_period")) cfg.geometry.fixed_period = detail::json_length(g["fixed_period"], "geometry.fixed_period");
    } else {
      throw ConfigError("field 'geometry' must be a string or an object");
    }
  }
  if (j.contains("paper_scale") && detail::json_get<bool>(j["paper_scale"], "paper_scale")) apply_paper_scale(cfg);
  if (j.contains("h_fine")) cfg.h_fine = detail::json_length(j["h_fine"], "h_fine");
  if (j.contains("H_list")) cfg.H_list = detail::json_lengths(j["H_list"], "H_list");
  if (j.contains("k_policy")) {
    const auto& k = j["k_policy"];
    if (k.is_string() && (k.get<std::string>() == "log" || k.get<std::string>() == "logH")) cfg.k_fixed.reset();
    else if (k.is_number_integer()) cfg.k_fixed = k.get<int>();
    else throw ConfigError("field 'k_policy' must be \"log\" or an integer");
  }
  if (j.contains("k_list")) cfg.k_list = detail::json_get<std::vector<int>>(j["k_list"], "k_list");
  if (j.contains("eta_list")) cfg.eta_list = detail::json_lengths(j["eta_list"], "eta_list");
  if (j.contains("interp")) {
    cfg.interp.clear();
    const auto& v = j["interp"];
    if (v.is_string()) {
      cfg.interp.push_back(parse_interp_kind(v.get<std::string>()));
    } else if (v.is_array()) {
      for (const auto& s : v) cfg.interp.push_back(parse_interp_kind(detail::json_get<std::string>(s, "interp")));
    } else {
      throw ConfigError("field 'interp' must be a string or a list");
    }
  }
  if (j.contains("output")) cfg.output = detail::json_get<std::string>(j["output"], "output");
  if (j.contains("seed")) cfg.seed = detail::json_get<std::uint64_t>(j["seed"], "seed");
  if (j.contains("forcing")) cfg.forcing = parse_forcing(detail::json_get<std::string>(j["forcing"], "forcing"));
  if (j.contains("threads")) cfg.threads = detail::json_get<int>(j["threads"], "threads");
  if (j.contains("cache_dir")) cfg.cache_dir = detail::json_get<std::string>(j["cache_dir"], "cache_dir");
  if (j.contains("record_timing")) cfg.record_timing = detail::json_get<bool>(j["record_timing"], "record_timing");
  if (j.contains("reference_tolerance"))
    cfg.reference_tolerance = detail::json_get<double>(j["reference_tolerance"], "reference_tolerance");
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text, std::optional<Command> command = std::nullopt) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j, command);
}

inline ExperimentConfig load_config(const std::string& path, std::optional<Command> command = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text, command);
}

} // namespace perflod
