#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "isoline/errors.hpp"
#include "isoline/field.hpp"
#include "isoline/simulator.hpp"
#include "isoline/stability.hpp"
#include "isoline/text.hpp"

namespace isoline {

enum class FieldKind { Circular, LinearRadial, GaussianMixture, Gridded };

/// A scenario parsed from a flat `key = value` document, plus the metric
/// options that ride along with it.
struct ScenarioConfig {
  Scenario scenario;
  FieldKind field_kind = FieldKind::Circular;
  double tail_fraction = 0.1;
  std::optional<double> band;
};

namespace detail {

struct RawConfig {
  std::map<std::string, std::pair<std::string, std::size_t>> entries;  // key -> (value, line)
  std::set<std::string> consumed;

  const std::string* find(const std::string& key) {
    auto it = entries.find(key);
    if (it == entries.end()) return nullptr;
    consumed.insert(key);
    return &it->second.first;
  }

  std::string require(const std::string& key) {
    const std::string* v = find(key);
    if (!v) throw ConfigError("missing required key '" + key + "'");
    return *v;
  }

  double require_number(const std::string& key) {
    double out = 0;
    if (!parse_double(require(key), out))
      throw ConfigError("key '" + key + "' is not a number");
    return out;
  }

  std::optional<double> optional_number(const std::string& key) {
    const std::string* v = find(key);
    if (!v) return std::nullopt;
    double out = 0;
    if (!parse_double(*v, out)) throw ConfigError("key '" + key + "' is not a number");
    return out;
  }

  void reject_unconsumed() const {
    for (const auto& [key, entry] : entries)
      if (!consumed.count(key))
        throw ConfigError("unknown or inapplicable key '" + key + "' (line " +
                          std::to_string(entry.second) + ")");
  }
};

inline RawConfig read_raw_config(std::istream& in) {
  RawConfig raw;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    std::string key(trim(t.substr(0, eq)));
    std::string value(trim(t.substr(eq + 1)));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (raw.entries.count(key))
      throw ConfigError("duplicate key '" + key + "' (line " + std::to_string(lineno) + ")");
    raw.entries[key] = {value, lineno};
  }
  return raw;
}

inline Vec2 read_center(RawConfig& raw) {
  const double cx = raw.optional_number("field.center_x").value_or(0.0);
  const double cy = raw.optional_number("field.center_y").value_or(0.0);
  return {cx, cy};
}

/// Mixture spec: semicolon-separated components, each
/// "amplitude, cx, cy, sxx, sxy, syy" (covariance row-major upper part).
inline GaussianMixtureField parse_components(const std::string& text) {
  std::vector<GaussianComponent> comps;
  for (const auto& part : split(text, ';')) {
    if (trim(part).empty()) continue;
    const auto nums = split(part, ',');
    if (nums.size() != 6)
      throw ConfigError("field.components: each component needs 6 numbers "
                        "(amplitude,cx,cy,sxx,sxy,syy)");
    double v[6];
    for (int i = 0; i < 6; ++i)
      if (!parse_double(nums[i], v[i]))
        throw ConfigError("field.components: bad number '" + nums[i] + "'");
    Mat2 cov;
    cov << v[3], v[4], v[4], v[5];
    try {
      comps.emplace_back(v[0], Vec2(v[1], v[2]), cov);
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(std::string("field.components: ") + ex.what());
    }
  }
  if (comps.empty()) throw ConfigError("field.components: no components given");
  return GaussianMixtureField(std::move(comps));
}

}  // namespace detail

/**
 * Parses a scenario document. Recognized keys (exhaustive):
 *   field.kind, field.i0, field.sigma, field.alpha, field.rd, field.sd,
 *   field.center_x, field.center_y, field.grid_path, field.components,
 *   sd, v, kp, ki, c1, c2, derivative_mode, tau_f, sigma_limit,
 *   omega_limit, init_x, init_y, init_theta, sim_dt, controller_dt,
 *   duration, noise_std, seed, tail_fraction, band.
 * Unknown keys (and field.* keys that do not belong to the chosen
 * field.kind) are rejected. `base_dir` anchors relative grid paths.
 */
inline ScenarioConfig parse_scenario_config(std::istream& in, const std::string& base_dir = "") {
  auto raw = detail::read_raw_config(in);

  ScenarioConfig cfg;
  const std::string kind = raw.require("field.kind");
  try {
    if (kind == "circular") {
      cfg.field_kind = FieldKind::Circular;
      cfg.scenario.field = CircularField(raw.require_number("field.i0"),
                                         raw.require_number("field.sigma"),
                                         detail::read_center(raw));
    } else if (kind == "linear_radial") {
      cfg.field_kind = FieldKind::LinearRadial;
      cfg.scenario.field = LinearRadialField(raw.require_number("field.sd"),
                                             raw.require_number("field.alpha"),
                                             raw.require_number("field.rd"),
                                             detail::read_center(raw));
    } else if (kind == "gaussian_mixture") {
      cfg.field_kind = FieldKind::GaussianMixture;
      cfg.scenario.field = detail::parse_components(raw.require("field.components"));
    } else if (kind == "gridded") {
      cfg.field_kind = FieldKind::Gridded;
      std::filesystem::path p(raw.require("field.grid_path"));
      if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
      cfg.scenario.field = load_grid_file(p.string());
    } else {
      throw ConfigError("field.kind must be one of circular, linear_radial, "
                        "gaussian_mixture, gridded (got '" + kind + "')");
    }
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("field: ") + ex.what());
  }

  cfg.scenario.s_d = raw.require_number("sd");
  cfg.scenario.v = raw.require_number("v");
  cfg.scenario.initial.x = raw.require_number("init_x");
  cfg.scenario.initial.y = raw.require_number("init_y");
  cfg.scenario.initial.heading = wrap_angle(raw.require_number("init_theta"));
  cfg.scenario.sim_dt = raw.require_number("sim_dt");
  cfg.scenario.controller_dt = raw.require_number("controller_dt");
  cfg.scenario.duration = raw.require_number("duration");
  cfg.scenario.noise_std = raw.optional_number("noise_std").value_or(0.0);
  cfg.scenario.seed =
      static_cast<std::uint64_t>(raw.optional_number("seed").value_or(0.0));

  auto& params = cfg.scenario.params;
  params.kp = raw.require_number("kp");
  params.ki = raw.optional_number("ki").value_or(0.0);
  params.c1 = raw.require_number("c1");
  params.c2 = raw.require_number("c2");
  if (const std::string* mode = raw.find("derivative_mode")) {
    if (*mode == "oracle") params.derivative_mode = DerivativeMode::Oracle;
    else if (*mode == "dirty") params.derivative_mode = DerivativeMode::DirtyDerivative;
    else throw ConfigError("derivative_mode must be 'oracle' or 'dirty' (got '" + *mode + "')");
  }
  params.tau_f =
      raw.optional_number("tau_f").value_or(5.0 * cfg.scenario.controller_dt);
  if (auto lim = raw.optional_number("sigma_limit")) params.sigma_limit = *lim;
  if (auto lim = raw.optional_number("omega_limit")) params.omega_limit = *lim;

  cfg.tail_fraction = raw.optional_number("tail_fraction").value_or(0.1);
  if (!(cfg.tail_fraction > 0.0) || cfg.tail_fraction > 1.0)
    throw ConfigError("tail_fraction must be in (0, 1]");
  if (auto band = raw.optional_number("band")) {
    if (!(*band > 0.0)) throw ConfigError("band must be > 0");
    cfg.band = *band;
  }

  raw.reject_unconsumed();
  return cfg;
}

inline ScenarioConfig load_scenario_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  return parse_scenario_config(in, std::filesystem::path(path).parent_path().string());
}

/**
 * Closed-loop constants implied by a radial-field scenario: the tangent
 * slope and orbit radius of the desired isoline. Empty for field kinds
 * with no single source (mixtures, grids). The lower slope bound is the
 * slope itself (nothing tighter is known from a config).
 */
inline std::optional<CircularLoopParams> derive_loop_params(const ScenarioConfig& cfg) {
  CircularLoopParams lp;
  lp.kp = cfg.scenario.params.kp;
  lp.ki = cfg.scenario.params.ki;
  lp.c1 = cfg.scenario.params.c1;
  lp.c2 = cfg.scenario.params.c2;
  lp.v = cfg.scenario.v;
  if (cfg.field_kind == FieldKind::Circular) {
    const auto& f = std::get<CircularField>(cfg.scenario.field);
    lp.r_d = circular_isoline_radius(f.peak, f.decay, cfg.scenario.s_d);
    lp.alpha = f.decay * cfg.scenario.s_d;  // slope of the level at the isoline
  } else if (cfg.field_kind == FieldKind::LinearRadial) {
    const auto& f = std::get<LinearRadialField>(cfg.scenario.field);
    lp.alpha = f.slope;
    lp.r_d = f.radius + (f.level - cfg.scenario.s_d) / f.slope;
    if (!(lp.r_d > 0.0))
      throw ConfigError("sd lies beyond the linear_radial field's source");
  } else {
    return std::nullopt;
  }
  lp.alpha_lower = lp.alpha;
  return lp;
}

}  // namespace isoline
