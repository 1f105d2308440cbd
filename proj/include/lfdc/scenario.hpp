#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "lfdc/agent_sim.hpp"
#include "lfdc/error.hpp"
#include "lfdc/feasibility.hpp"
#include "lfdc/io.hpp"
#include "lfdc/pde_sim.hpp"

namespace lfdc::scenario {

using json = nlohmann::json;

inline constexpr int schema_version = 1;

// ---------------------------------------------------------------------------
// Name matching

inline std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline std::string nearest_match(const std::string& name, const std::vector<std::string>& candidates) {
  std::string best;
  std::size_t best_d = std::numeric_limits<std::size_t>::max();
  for (const auto& c : candidates) {
    const std::size_t d = levenshtein(name, c);
    if (d < best_d) best_d = d, best = c;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Built-in scenarios

struct BuiltIn {
  std::string name;
  std::string description;
  json config;
};

namespace detail {

inline json base_pde() {
  return json{{"schema_version", schema_version},
              {"kind", "pde"},
              {"seed", 1},
              {"dim", 1},
              {"n", 500},
              {"dt", 1e-3},
              {"steps", 150000},
              {"D", 0.05},
              {"kernel", json::array({{{"weight", 1.0}, {"L", pi}}})},
              {"truncation_K", 10},
              {"plant_kernel", nullptr},
              {"K_L", 1.0},
              {"scheme", "feed_forward"},
              {"alpha_rule", "conservative"},
              {"epsilon", 0.01},
              {"disturbance_amplitude", 0.0},
              {"disturbance_onset_fraction", 0.5},
              {"kappa", 1.8},
              {"mu", 0.0},
              {"kappa2", 0.0},
              {"mu2", 0.0},
              {"M_L", 0.4},
              {"record_every", 100},
              {"gauge", "minimum_energy"},
              {"leader_floor", -1.0},
              {"allow_infeasible", false},
              {"monitor_lyapunov", true}};
}

inline json axis(const std::string& name, double lo, double hi, int count) {
  return json{{"name", name}, {"min", lo}, {"max", hi}, {"count", count}};
}

}  // namespace detail

inline const std::vector<BuiltIn>& builtins() {
  static const std::vector<BuiltIn> list = [] {
    std::vector<BuiltIn> v;
    {
      json c{{"schema_version", schema_version},
             {"kind", "sweep"},
             {"n", 500},
             {"panels", json::array({
                            {{"name", "a"}, {"fixed", {{"L", pi}}}, {"p1", detail::axis("kappa", 0.1, 5.0, 41)},
                             {"p2", detail::axis("D", 0.01, 0.5, 41)}},
                            {{"name", "b"}, {"fixed", {{"D", 0.05}}}, {"p1", detail::axis("kappa", 0.1, 5.0, 41)},
                             {"p2", detail::axis("L", 0.1 * pi, 2.0 * pi, 41)}},
                            {{"name", "c"}, {"fixed", {{"kappa", 1.8}}}, {"p1", detail::axis("D", 0.01, 0.5, 41)},
                             {"p2", detail::axis("L", 0.1 * pi, 2.0 * pi, 41)}},
                        })}};
      v.push_back({"feasibility_sweep", "Minimum leader mass over (kappa, D, L) for von Mises targets", c});
    }
    {
      json c = detail::base_pde();
      c["scheme"] = "feed_forward";
      v.push_back({"monomodal_1d_ff", "1D von Mises target, feed-forward leaders", c});
    }
    {
      json c = detail::base_pde();
      c["scheme"] = "reference_governor";
      v.push_back({"monomodal_1d_rg", "1D von Mises target, reference governor (conservative alpha)", c});
    }
    {
      json c = detail::base_pde();
      c["disturbance_amplitude"] = pi / 100.0;
      c["variants"] = json::array({
          {{"label", "feed_forward"}, {"scheme", "feed_forward"}},
          {{"label", "conservative"}, {"scheme", "reference_governor"}, {"alpha_rule", "conservative"}},
          {{"label", "optimal"}, {"scheme", "reference_governor"}, {"alpha_rule", "optimal"}},
      });
      v.push_back({"disturbance_robustness", "Constant follower drift from mid-horizon, three controllers", c});
    }
    {
      json c = detail::base_pde();
      c["D"] = 0.02;
      c["plant_kernel"] = json::array({{{"weight", 1.0}, {"L", pi / 6.0}}});
      c["variants"] = json::array({
          {{"label", "feed_forward"}, {"scheme", "feed_forward"}},
          {{"label", "reference_governor"}, {"scheme", "reference_governor"}},
      });
      v.push_back({"kernel_mismatch", "Controller assumes L = pi, plant uses L = pi/6", c});
    }
    {
      json c = detail::base_pde();
      c["kind"] = "ensemble";
      c["scheme"] = "reference_governor";
      c.erase("M_L");
      c.erase("monitor_lyapunov");
      c.erase("disturbance_amplitude");
      c.erase("disturbance_onset_fraction");
      c.erase("allow_infeasible");
      c["N"] = 1000;
      c["N_L"] = json::array({400});
      c["n_trials"] = 8;
      c["kde_bandwidth"] = -1.0;
      c["update_every"] = 1;
      c["threads"] = 0;
      c["steady_fraction"] = 0.1;
      v.push_back({"discrete_ensemble", "Agent-based closed loop on estimated densities, independent trials", c});
    }
    {
      json c = detail::base_pde();
      c["dim"] = 2;
      c["n"] = 50;
      c["dt"] = 0.01;
      c["steps"] = 10000;
      c["K_L"] = 10.0;
      c["kappa"] = 0.5;
      c["kappa2"] = 0.5;
      c["scheme"] = "reference_governor";
      c["monitor_lyapunov"] = false;
      v.push_back({"monomodal_2d_rg", "Torus von Mises target, reference governor", c});
    }
    return v;
  }();
  return list;
}

inline std::vector<std::string> builtin_names() {
  std::vector<std::string> out;
  for (const auto& b : builtins()) out.push_back(b.name);
  return out;
}

/// Built-in by name, or a JSON file path. Unknown names report the nearest
/// built-in.
inline json load_config(const std::string& name_or_path) {
  for (const auto& b : builtins())
    if (b.name == name_or_path) {
      json c = b.config;
      c["name"] = b.name;
      return c;
    }
  if (std::filesystem::is_regular_file(name_or_path)) {
    std::ifstream is(name_or_path);
    json c;
    try {
      c = json::parse(is);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::config_parse, name_or_path + ": " + e.what());
    }
    if (!c.is_object()) throw Error(ErrorKind::config_parse, name_or_path + ": top level must be an object");
    // A file may start from a built-in and override part of it.
    if (!c.contains("name")) c["name"] = std::filesystem::path(name_or_path).stem().string();
    if (c.contains("base")) {
      if (!c.at("base").is_string()) throw Error(ErrorKind::config_parse, name_or_path + ": 'base' must be a string");
      json base = load_config(c.at("base").get<std::string>());
      c.erase("base");
      base.merge_patch(c);
      c = std::move(base);
    }
    return c;
  }
  throw Error(ErrorKind::unknown_scenario, "no scenario or config file '" + name_or_path +
                                               "'; did you mean '" + nearest_match(name_or_path, builtin_names()) +
                                               "'?");
}

// ---------------------------------------------------------------------------
// Validation

namespace detail {

inline const std::vector<std::string>& keys_for(const std::string& kind) {
  static const std::vector<std::string> common{"schema_version", "name", "description", "kind", "seed"};
  static const std::vector<std::string> sim{"dim",  "n",      "dt",          "steps", "D",     "kernel",
                                            "truncation_K", "plant_kernel", "K_L", "scheme", "alpha_rule",
                                            "epsilon", "kappa", "mu", "kappa2", "mu2", "record_every", "gauge",
                                            "leader_floor"};
  static const std::vector<std::string> pde = [] {
    std::vector<std::string> v = common;
    v.insert(v.end(), sim.begin(), sim.end());
    for (const char* k : {"M_L", "disturbance_amplitude", "disturbance_onset_fraction", "allow_infeasible",
                          "monitor_lyapunov", "variants"})
      v.emplace_back(k);
    return v;
  }();
  static const std::vector<std::string> ensemble = [] {
    std::vector<std::string> v = common;
    v.insert(v.end(), sim.begin(), sim.end());
    for (const char* k : {"N", "N_L", "n_trials", "kde_bandwidth", "update_every", "threads", "steady_fraction"})
      v.emplace_back(k);
    return v;
  }();
  static const std::vector<std::string> sweep = [] {
    std::vector<std::string> v = common;
    v.emplace_back("n");
    v.emplace_back("panels");
    return v;
  }();
  if (kind == "pde") return pde;
  if (kind == "ensemble") return ensemble;
  if (kind == "sweep") return sweep;
  throw Error(ErrorKind::config_parse, "kind must be one of pde, ensemble, sweep; got '" + kind + "'");
}

inline void check_keys(const json& c, const std::vector<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : c.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) != allowed.end()) continue;
    if (key == "label" && where != "config") continue;
    throw Error(ErrorKind::config_parse, "unknown key '" + key + "' in " + where + "; did you mean '" +
                                             nearest_match(key, allowed) + "'?");
  }
}

template <class T>
T get(const json& c, const std::string& key) {
  if (!c.contains(key)) throw Error(ErrorKind::config_parse, "missing key '" + key + "'");
  try {
    return c.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::config_parse, "key '" + key + "' has the wrong type: " + c.at(key).dump());
  }
}

inline std::size_t get_count(const json& c, const std::string& key) {
  const auto& v = c.contains(key) ? c.at(key) : json();
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw Error(ErrorKind::config_parse, "key '" + key + "' must be a nonnegative integer");
  return v.get<std::size_t>();
}

inline KernelSpec parse_kernel(const json& j, int dim, int truncation) {
  std::vector<KernelComponent> comps;
  if (j.is_number()) {
    comps.push_back({1.0, j.get<double>()});
  } else if (j.is_array() && !j.empty()) {
    for (const auto& e : j) {
      if (!e.is_object() || !e.contains("L"))
        throw Error(ErrorKind::config_parse, "kernel components need {weight, L}: " + e.dump());
      comps.push_back({e.value("weight", 1.0), e.at("L").get<double>()});
    }
  } else {
    throw Error(ErrorKind::config_parse, "kernel must be a length scale or a list of {weight, L}");
  }
  try {
    return KernelSpec(std::move(comps), dim, truncation);
  } catch (const Error& e) {
    throw Error(ErrorKind::config_parse, e.what());
  }
}

inline Scheme parse_scheme(const std::string& s) {
  if (s == "feed_forward") return Scheme::feed_forward;
  if (s == "reference_governor") return Scheme::reference_governor;
  throw Error(ErrorKind::config_parse, "scheme must be feed_forward or reference_governor; got '" + s + "'");
}

inline AlphaRule parse_alpha_rule(const std::string& s) {
  if (s == "off") return AlphaRule::off;
  if (s == "conservative") return AlphaRule::conservative;
  if (s == "optimal") return AlphaRule::optimal;
  throw Error(ErrorKind::config_parse, "alpha_rule must be off, conservative or optimal; got '" + s + "'");
}

inline FluxGauge parse_gauge(const std::string& s) {
  if (s == "first_cell") return FluxGauge::first_cell;
  if (s == "minimum_energy") return FluxGauge::minimum_energy;
  throw Error(ErrorKind::config_parse, "gauge must be first_cell or minimum_energy; got '" + s + "'");
}

inline PeriodicField von_mises_target(const json& c, const PeriodicGrid& grid, double M_F) {
  if (grid.dim() == 1) return von_mises_1d(grid, get<double>(c, "kappa"), get<double>(c, "mu"), M_F);
  return von_mises_2d(grid, get<double>(c, "kappa"), get<double>(c, "kappa2"), get<double>(c, "mu"),
                      get<double>(c, "mu2"), M_F);
}

/// Everything but target, shared by pde and ensemble configs.
inline SimConfig sim_base(const json& c) {
  SimConfig s;
  const long long dim = get<long long>(c, "dim");
  if (dim != 1 && dim != 2) throw Error(ErrorKind::config_parse, "dim must be 1 or 2");
  s.dim = static_cast<int>(dim);
  s.n = get_count(c, "n");
  if (s.n < 8) throw Error(ErrorKind::config_parse, "n must be >= 8");
  s.dt = get<double>(c, "dt");
  if (!(s.dt > 0.0)) throw Error(ErrorKind::config_parse, "dt must be positive");
  s.n_steps = get_count(c, "steps");
  if (s.n_steps == 0) throw Error(ErrorKind::config_parse, "steps must be >= 1");
  s.D = get<double>(c, "D");
  if (!(s.D >= 0.0)) throw Error(ErrorKind::config_parse, "D must be nonnegative");
  const long long trunc = get<long long>(c, "truncation_K");
  s.controller_kernel = parse_kernel(c.at("kernel"), s.dim, static_cast<int>(trunc));
  if (c.contains("plant_kernel") && !c.at("plant_kernel").is_null())
    s.plant_kernel = parse_kernel(c.at("plant_kernel"), s.dim, static_cast<int>(trunc));
  s.K_L = get<double>(c, "K_L");
  if (!(s.K_L > 0.0)) throw Error(ErrorKind::config_parse, "K_L must be positive");
  s.scheme = parse_scheme(get<std::string>(c, "scheme"));
  s.alpha.rule = parse_alpha_rule(get<std::string>(c, "alpha_rule"));
  s.alpha.epsilon = get<double>(c, "epsilon");
  if (!(s.alpha.epsilon > 0.0)) throw Error(ErrorKind::config_parse, "epsilon must be positive");
  s.record_every = get_count(c, "record_every");
  if (s.record_every == 0) throw Error(ErrorKind::config_parse, "record_every must be >= 1");
  s.gauge = parse_gauge(get<std::string>(c, "gauge"));
  s.leader_floor = get<double>(c, "leader_floor");
  return s;
}

}  // namespace detail

struct PdeVariant {
  std::string label;  // empty for single-run scenarios
  SimConfig sim;
};

struct EnsembleVariant {
  std::size_t N_L;
  DiscreteConfig cfg;
};

struct SweepPanel {
  std::string name;
  std::string p1_name, p2_name;
  std::vector<double> p1, p2;
  double kappa = 0.0, D = 0.0, L = 0.0;  // fixed values; swept ones are overwritten
};

/// A fully validated scenario, ready to execute.
struct Plan {
  std::string name;
  std::string kind;
  json resolved;
  std::vector<PdeVariant> pde;
  std::vector<EnsembleVariant> ensemble;
  std::vector<SweepPanel> panels;
  std::size_t sweep_n = 500;
};

namespace detail {

inline PdeVariant build_pde(const json& c, const std::string& label) {
  PdeVariant v{label, sim_base(c)};
  const double M_L = get<double>(c, "M_L");
  if (!(M_L > 0.0 && M_L < 1.0)) throw Error(ErrorKind::config_parse, "M_L must lie in (0, 1)");
  const double amp = get<double>(c, "disturbance_amplitude");
  if (amp != 0.0) {
    const double frac = get<double>(c, "disturbance_onset_fraction");
    if (!(frac >= 0.0 && frac <= 1.0))
      throw Error(ErrorKind::config_parse, "disturbance_onset_fraction must lie in [0, 1]");
    v.sim.disturbance = Disturbance{amp, frac * v.sim.dt * static_cast<double>(v.sim.n_steps)};
  }
  v.sim.allow_infeasible = get<bool>(c, "allow_infeasible");
  v.sim.monitor_lyapunov = get<bool>(c, "monitor_lyapunov");
  const PeriodicGrid grid = v.sim.grid();
  v.sim.target.emplace(von_mises_target(c, grid, 1.0 - M_L), 1.0 - M_L, v.sim.D, v.sim.controller_kernel);
  return v;
}

inline std::vector<EnsembleVariant> build_ensemble(const json& c) {
  SimConfig base = sim_base(c);
  if (base.dim != 1) throw Error(ErrorKind::config_parse, "ensemble scenarios are one-dimensional");
  const std::size_t N = get_count(c, "N");
  std::vector<std::size_t> nls;
  const json& j = c.at("N_L");
  if (j.is_array()) {
    for (const auto& e : j) {
      if (!e.is_number_integer()) throw Error(ErrorKind::config_parse, "N_L entries must be integers");
      nls.push_back(e.get<std::size_t>());
    }
  } else if (j.is_number_integer()) {
    nls.push_back(j.get<std::size_t>());
  } else {
    throw Error(ErrorKind::config_parse, "N_L must be an integer or a list of integers");
  }
  if (nls.empty()) throw Error(ErrorKind::config_parse, "N_L is empty");
  std::vector<EnsembleVariant> out;
  for (std::size_t nl : nls) {
    if (nl < 2 || nl + 2 > N) throw Error(ErrorKind::config_parse, "N_L must leave at least 2 agents per population");
    DiscreteConfig d;
    d.sim = base;
    d.N_L = nl;
    d.N_F = N - nl;
    d.kde.bandwidth = get<double>(c, "kde_bandwidth");
    d.n_trials = get_count(c, "n_trials");
    if (d.n_trials == 0) throw Error(ErrorKind::config_parse, "n_trials must be >= 1");
    d.master_seed = get<std::uint64_t>(c, "seed");
    d.update_every = get_count(c, "update_every");
    if (d.update_every == 0) throw Error(ErrorKind::config_parse, "update_every must be >= 1");
    d.threads = get_count(c, "threads");
    d.steady_fraction = get<double>(c, "steady_fraction");
    if (!(d.steady_fraction > 0.0 && d.steady_fraction <= 1.0))
      throw Error(ErrorKind::config_parse, "steady_fraction must lie in (0, 1]");
    const double M_F = static_cast<double>(d.N_F) / static_cast<double>(N);
    d.sim.target.emplace(von_mises_target(c, d.sim.grid(), M_F), M_F, d.sim.D, d.sim.controller_kernel);
    out.push_back({nl, std::move(d)});
  }
  return out;
}

inline std::vector<double> linspace(const json& axis_cfg, std::string& name) {
  name = get<std::string>(axis_cfg, "name");
  if (name != "kappa" && name != "D" && name != "L")
    throw Error(ErrorKind::config_parse, "sweep axes are kappa, D or L; got '" + name + "'");
  const double lo = get<double>(axis_cfg, "min"), hi = get<double>(axis_cfg, "max");
  const std::size_t count = get_count(axis_cfg, "count");
  if (count < 2 || !(hi > lo)) throw Error(ErrorKind::config_parse, "sweep axis needs count >= 2 and max > min");
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return v;
}

inline std::vector<SweepPanel> build_sweep(const json& c) {
  std::vector<SweepPanel> out;
  if (!c.contains("panels") || !c.at("panels").is_array() || c.at("panels").empty())
    throw Error(ErrorKind::config_parse, "sweep needs a nonempty 'panels' list");
  for (const auto& p : c.at("panels")) {
    SweepPanel s;
    s.name = get<std::string>(p, "name");
    s.p1 = linspace(p.at("p1"), s.p1_name);
    s.p2 = linspace(p.at("p2"), s.p2_name);
    if (s.p1_name == s.p2_name) throw Error(ErrorKind::config_parse, "sweep axes must differ");
    const json fixed = p.value("fixed", json::object());
    std::set<std::string> have{s.p1_name, s.p2_name};
    for (const auto& [k, val] : fixed.items()) {
      if (k == "kappa") s.kappa = val.get<double>();
      else if (k == "D") s.D = val.get<double>();
      else if (k == "L") s.L = val.get<double>();
      else throw Error(ErrorKind::config_parse, "unknown fixed sweep parameter '" + k + "'");
      have.insert(k);
    }
    if (have.size() != 3) throw Error(ErrorKind::config_parse, "panel '" + s.name + "' must fix the third parameter");
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace detail

/// Parses a `key=value` override. The value is read as JSON, falling back to
/// a plain string. Dotted keys address nested objects or list indices.
inline void apply_override(json& cfg, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw Error(ErrorKind::config_parse, "override must be key=value: " + kv);
  const std::string key = kv.substr(0, eq);
  const std::string text = kv.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &cfg;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    const bool last = dot == std::string::npos;
    if (node->is_array()) {
      char* end = nullptr;
      const unsigned long idx = std::strtoul(part.c_str(), &end, 10);
      if (*end != '\0' || idx >= node->size())
        throw Error(ErrorKind::config_parse, "override '" + key + "': bad list index '" + part + "'");
      node = &(*node)[idx];
    } else if (node->is_object()) {
      if (!last && !node->contains(part))
        throw Error(ErrorKind::config_parse, "override '" + key + "': no key '" + part + "'");
      node = &(*node)[part];
    } else {
      throw Error(ErrorKind::config_parse, "override '" + key + "' descends into a scalar");
    }
    if (last) break;
    start = dot + 1;
  }
  *node = std::move(value);
}

/// Validates a config and builds every run it describes. Nothing touches the
/// file system here.
inline Plan make_plan(const json& cfg) {
  if (!cfg.is_object()) throw Error(ErrorKind::config_parse, "config must be an object");
  const long long version = detail::get<long long>(cfg, "schema_version");
  if (version != schema_version)
    throw Error(ErrorKind::config_parse, "unsupported schema_version " + std::to_string(version));
  Plan plan;
  plan.kind = detail::get<std::string>(cfg, "kind");
  plan.name = cfg.value("name", std::string("scenario"));
  plan.resolved = cfg;
  const auto& keys = detail::keys_for(plan.kind);
  detail::check_keys(cfg, keys, "config");
  try {
    if (plan.kind == "sweep") {
      plan.sweep_n = detail::get_count(cfg, "n");
      if (plan.sweep_n < 8) throw Error(ErrorKind::config_parse, "n must be >= 8");
      plan.panels = detail::build_sweep(cfg);
    } else if (plan.kind == "ensemble") {
      plan.ensemble = detail::build_ensemble(cfg);
    } else if (cfg.contains("variants") && !cfg.at("variants").empty()) {
      std::set<std::string> labels;
      for (const auto& v : cfg.at("variants")) {
        if (!v.is_object()) throw Error(ErrorKind::config_parse, "variants must be objects");
        detail::check_keys(v, keys, "variant");
        if (v.contains("variants")) throw Error(ErrorKind::config_parse, "variants cannot nest");
        const std::string label = detail::get<std::string>(v, "label");
        if (label.empty() || label.find_first_of("/\\.") != std::string::npos || !labels.insert(label).second)
          throw Error(ErrorKind::config_parse, "variant labels must be unique plain names: '" + label + "'");
        json merged = cfg;
        merged.erase("variants");
        for (const auto& [k, val] : v.items())
          if (k != "label") merged[k] = val;
        plan.pde.push_back(detail::build_pde(merged, label));
      }
    } else {
      plan.pde.push_back(detail::build_pde(cfg, ""));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config_parse, e.what());
  }
  // Feasibility is part of validation so infeasible requests fail before any
  // output exists.
  for (const auto& v : plan.pde) {
    if (v.sim.allow_infeasible) continue;
    TargetSpec t(v.sim.target->rho_F(), v.sim.target->M_F(), v.sim.D, v.sim.controller_kernel);
    const FeasibilityReport r = v.sim.dim == 1 ? feasibility_1d(t) : feasibility_2d(t);
    if (!r.feasible)
      throw Error(v.sim.dim == 1 ? ErrorKind::infeasible : ErrorKind::infeasible_2d,
                  "target needs leader mass " + std::to_string(r.M_hat_L) + " but M_L = " + std::to_string(r.M_L));
  }
  for (const auto& v : plan.ensemble) {
    TargetSpec t(v.cfg.sim.target->rho_F(), v.cfg.sim.target->M_F(), v.cfg.sim.D, v.cfg.sim.controller_kernel);
    const FeasibilityReport r = feasibility_1d(t);
    if (!r.feasible)
      throw Error(ErrorKind::infeasible, "N_L = " + std::to_string(v.N_L) + " gives M_L = " + std::to_string(r.M_L) +
                                             " below the minimum " + std::to_string(r.M_hat_L));
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Execution

inline json feasibility_json(const FeasibilityReport& r) {
  json j{{"dim", r.dim},
         {"M_L", r.M_L},
         {"M_hat_L", r.M_hat_L},
         {"feasible", r.feasible},
         {"stability_margin", r.stability_margin},
         {"closed_form", r.closed_form},
         {"min_rho_L_bar", r.rho_L_bar.min()}};
  if (r.dim == 1) {
    j["C"] = r.C;
    j["B"] = r.B;
    if (r.g1) j["g1_inf"] = std::max(std::abs(r.g1->min()), std::abs(r.g1->max()));
  } else {
    j["A"] = r.A;
    j["a1"] = r.a1;
    j["a2"] = r.a2;
  }
  return j;
}

inline FeasibilityReport plan_feasibility(const SimConfig& s) {
  TargetSpec t(s.target->rho_F(), s.target->M_F(), s.D, s.controller_kernel);
  return s.dim == 1 ? feasibility_1d(t) : feasibility_2d(t);
}

struct RunOutcome {
  json summary;
  bool ok = true;
};

namespace detail {

namespace fs = std::filesystem;

inline json diagnostics_json(const Diagnostics& d) {
  json j = json::object();
  for (const auto& [kind, e] : d.entries()) j[to_string(kind)] = {{"count", e.count}, {"first", e.messages}};
  return j;
}

inline json run_pde(const PdeVariant& v, const fs::path& dir) {
  fs::create_directories(dir);
  const SimRecord r = run(v.sim);
  io::write_text(dir / "record.csv", io::record_csv(r));
  auto field = [&](const char* name, const std::optional<PeriodicField>& f) {
    if (f) io::write_field_csv(dir / (std::string(name) + ".csv"), *f);
  };
  field("rho_L0", r.rho_L0);
  field("rho_F0", r.rho_F0);
  field("rho_L", r.rho_L);
  field("rho_F", r.rho_F);
  field("rho_hat_L", r.rho_hat_L);
  field("rho_L_bar", r.rho_L_bar);
  field("rho_F_bar", r.rho_F_bar);
  io::write_text(dir / "feasibility.json", feasibility_json(plan_feasibility(v.sim)).dump(2) + "\n");

  const std::string tag = v.label.empty() ? std::string(to_string(v.sim.scheme)) : v.label;
  io::write_text(dir / "error.svg", io::line_plot_svg({"Percentage error (" + tag + ")", "t", "E [%]",
                                                       {{"followers", r.times, r.E_F}, {"leaders", r.times, r.E_L}}}));
  io::write_text(dir / "kl.svg", io::line_plot_svg({"KL divergence (" + tag + ")", "t", "D_KL",
                                                    {{"followers", r.times, r.KL_F}, {"leaders", r.times, r.KL_L}},
                                                    true}));
  io::write_text(dir / "alpha.svg",
                 io::line_plot_svg({"Blending weight (" + tag + ")", "t", "alpha", {{"alpha", r.times, r.alpha}}}));
  if (v.sim.dim == 2) {
    if (r.rho_F) io::write_text(dir / "rho_F.svg", io::field_heatmap_svg("Follower density, final", *r.rho_F));
    if (r.rho_L) io::write_text(dir / "rho_L.svg", io::field_heatmap_svg("Leader density, final", *r.rho_L));
    if (r.rho_F_bar) io::write_text(dir / "rho_F_bar.svg", io::field_heatmap_svg("Target density", *r.rho_F_bar));
  }

  json s{{"label", v.label},
         {"scheme", to_string(v.sim.scheme)},
         {"alpha_rule", to_string(v.sim.alpha.rule)},
         {"completed", r.completed},
         {"steps_run", r.steps_run},
         {"final_E_F", r.E_F.empty() ? 0.0 : r.E_F.back()},
         {"final_KL_F", r.KL_F.empty() ? 0.0 : r.KL_F.back()},
         {"steady_E_F", steady_value(r.E_F)},
         {"steady_KL_F", steady_value(r.KL_F)},
         {"steady_alpha", steady_value(r.alpha)},
         {"max_mass_drift_L", r.max_mass_drift_L},
         {"max_mass_drift_F", r.max_mass_drift_F},
         {"min_rho_hat_L", r.min_rho_hat_L},
         {"M_hat_L", r.M_hat_L},
         {"feasible", r.feasible},
         {"diagnostics", diagnostics_json(r.diagnostics)}};
  if (v.sim.dim == 1 && v.sim.monitor_lyapunov) {
    s["g1_inf"] = r.g1_inf;
    s["lyapunov_gate"] = r.lyapunov_gate;
    s["lyapunov_violations"] = r.lyapunov_violations;
    s["max_lyap_residual"] = r.max_lyap_residual;
  }
  if (r.failure) {
    s["error"] = to_string(r.failure->kind());
    s["message"] = r.failure->what();
  }
  s["_record"] = {{"t", r.times}, {"E_F", r.E_F}};
  return s;
}

inline json run_ensemble(const Plan& plan, const fs::path& dir) {
  std::string csv = "trial,seed,N_L,steady_E_F,steady_KL_F\n";
  std::string agg = "N_L,n_trials,failed,mean_E_F,std_E_F,mean_KL_F,std_KL_F\n";
  json groups = json::array();
  io::Series mean_series{"mean", {}, {}};
  std::vector<io::Series> curves;
  for (const auto& v : plan.ensemble) {
    const EnsembleResult r = run_discrete(v.cfg);
    for (const auto& t : r.trials) {
      csv += std::to_string(t.trial) + ',' + std::to_string(t.seed) + ',' + std::to_string(t.N_L) + ',' +
             io::fmt(t.steady_E_F) + ',' + io::fmt(t.steady_KL_F) + '\n';
      std::string rec = "t,E_L,E_F,KL_F,alpha\n";
      for (std::size_t k = 0; k < t.times.size(); ++k)
        rec += io::fmt(t.times[k]) + ',' + io::fmt(t.E_L[k]) + ',' + io::fmt(t.E_F[k]) + ',' + io::fmt(t.KL_F[k]) +
               ',' + io::fmt(t.alpha[k]) + '\n';
      io::write_text(dir / ("trial_NL" + std::to_string(v.N_L) + "_" + std::to_string(t.trial) + ".csv"), rec);
    }
    agg += std::to_string(v.N_L) + ',' + std::to_string(r.trials.size()) + ',' + std::to_string(r.failed) + ',' +
           io::fmt(r.mean_E_F) + ',' + io::fmt(r.std_E_F) + ',' + io::fmt(r.mean_KL_F) + ',' + io::fmt(r.std_KL_F) +
           '\n';
    mean_series.x.push_back(static_cast<double>(v.N_L));
    mean_series.y.push_back(r.mean_E_F);
    // Ensemble-mean error curve for this N_L.
    io::Series curve{"N_L = " + std::to_string(v.N_L), {}, {}};
    if (!r.trials.empty()) {
      curve.x = r.trials.front().times;
      curve.y.assign(curve.x.size(), 0.0);
      std::size_t used = 0;
      for (const auto& t : r.trials)
        if (t.E_F.size() == curve.x.size()) {
          for (std::size_t k = 0; k < curve.y.size(); ++k) curve.y[k] += t.E_F[k];
          ++used;
        }
      for (double& y : curve.y) y /= static_cast<double>(std::max<std::size_t>(used, 1));
    }
    curves.push_back(std::move(curve));
    json g{{"N_L", v.N_L},       {"n_trials", r.trials.size()}, {"failed", r.failed},
           {"mean_E_F", r.mean_E_F}, {"std_E_F", r.std_E_F},        {"mean_KL_F", r.mean_KL_F},
           {"std_KL_F", r.std_KL_F}};
    json failures = json::array();
    for (const auto& t : r.trials)
      if (t.failure) failures.push_back({{"trial", t.trial}, {"error", t.failure->what()}});
    if (!failures.empty()) g["failures"] = failures;
    groups.push_back(g);
  }
  io::write_text(dir / "ensemble.csv", csv);
  io::write_text(dir / "aggregate.csv", agg);
  io::write_text(dir / "error.svg", io::line_plot_svg({"Ensemble-mean follower error", "t", "E_F [%]", curves}));
  io::write_text(dir / "steady_error.svg",
                 io::line_plot_svg({"Steady follower error vs leader count", "N_L", "E_F [%]", {mean_series}}));
  return json{{"groups", groups}};
}

inline json run_sweep(const Plan& plan, const fs::path& dir) {
  json panels = json::array();
  for (const auto& p : plan.panels) {
    auto eval = [&](double a, double b) {
      double kappa = p.kappa, D = p.D, L = p.L;
      auto assign = [&](const std::string& name, double val) {
        if (name == "kappa") kappa = val;
        else if (name == "D") D = val;
        else L = val;
      };
      assign(p.p1_name, a);
      assign(p.p2_name, b);
      return von_mises_min_leader_mass(kappa, D, L, plan.sweep_n);
    };
    const std::vector<SweepPoint> pts = feasibility_sweep(p.p1, p.p2, eval);
    std::string csv = "param1,param2,M_hat_L,feasible\n";
    std::vector<double> grid(pts.size());
    std::size_t feasible = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto& s = pts[i];
      csv += io::fmt(s.param1) + ',' + io::fmt(s.param2) + ',' + io::fmt(s.M_hat_L) + ',' + (s.feasible ? "1" : "0") +
             '\n';
      // pts is p1-major; the heatmap wants p1 along x (fastest).
      const std::size_t i1 = i / p.p2.size(), i2 = i % p.p2.size();
      grid[i1 + p.p1.size() * i2] = s.M_hat_L;
      feasible += s.feasible;
    }
    io::write_text(dir / ("sweep_" + p.name + ".csv"), csv);
    io::write_text(dir / ("sweep_" + p.name + ".svg"),
                   io::heatmap_svg("Minimum leader mass, panel " + p.name, grid, p.p1.size(), p.p2.size(), p.p1_name,
                                   p.p2_name));
    panels.push_back({{"name", p.name},
                      {"param1", p.p1_name},
                      {"param2", p.p2_name},
                      {"points", pts.size()},
                      {"feasible_points", feasible}});
  }
  return json{{"panels", panels}};
}

}  // namespace detail

/// Default output directory: $LFDC_OUT_DIR/<name>, else ./lfdc_out/<name>.
inline std::filesystem::path default_out_dir(const std::string& name) {
  const char* env = std::getenv("LFDC_OUT_DIR");
  return std::filesystem::path(env && *env ? env : "lfdc_out") / name;
}

/// Executes a validated plan. Artifacts are written to a staging directory
/// that replaces `out_dir` only when every run completed; on failure the
/// staging directory is removed and the error is rethrown.
inline RunOutcome execute(const Plan& plan, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::path staging = out_dir;
  staging += ".partial";
  std::error_code ec;
  fs::remove_all(staging, ec);
  fs::create_directories(staging);
  RunOutcome out;
  try {
    json summary{{"name", plan.name}, {"kind", plan.kind}};
    if (plan.kind == "sweep") {
      summary.update(detail::run_sweep(plan, staging));
    } else if (plan.kind == "ensemble") {
      summary.update(detail::run_ensemble(plan, staging));
      for (const auto& g : summary["groups"])
        if (g["failed"].get<std::size_t>() > 0) out.ok = false;
    } else {
      json runs = json::array();
      std::vector<io::Series> curves;
      for (const auto& v : plan.pde) {
        const fs::path dir = v.label.empty() ? staging : staging / v.label;
        json s = detail::run_pde(v, dir);
        if (!s["completed"].get<bool>()) out.ok = false;
        curves.push_back({v.label, s["_record"]["t"].get<std::vector<double>>(),
                          s["_record"]["E_F"].get<std::vector<double>>()});
        s.erase("_record");
        runs.push_back(std::move(s));
      }
      if (plan.pde.size() > 1)
        io::write_text(staging / "comparison.svg",
                       io::line_plot_svg({"Follower percentage error", "t", "E_F [%]", curves}));
      summary["runs"] = runs;
    }
    summary["ok"] = out.ok;
    io::write_text(staging / "config.json", plan.resolved.dump(2) + "\n");
    io::write_text(staging / "summary.json", summary.dump(2) + "\n");
    out.summary = std::move(summary);
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
  fs::remove_all(out_dir, ec);
  fs::create_directories(out_dir.parent_path().empty() ? fs::path(".") : out_dir.parent_path());
  fs::rename(staging, out_dir);
  return out;
}

}  // namespace lfdc::scenario
