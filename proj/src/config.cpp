#include "qdnems/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <functional>
#include <istream>
#include <limits>
#include <sstream>

#include "qdnems/errors.hpp"

namespace qdnems {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("invalid value '" + value + "' for " + key + " (expected " + expected + ")");
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) bad_value(key, v, "a finite number");
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, v, "an integer");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  const auto x = to_integer(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) bad_value(key, v, "an int");
  return static_cast<int>(x);
}

std::size_t to_count(const std::string& key, const std::string& v) {
  const auto x = to_integer(key, v);
  if (x < 0) bad_value(key, v, "a non-negative integer");
  return static_cast<std::size_t>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "true or false");
}

bool is_none(const std::string& v) { return v == "none" || v == "off"; }

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(17);
  s << x;
  return s.str();
}

std::string fmt_inf(double x) { return std::isinf(x) ? std::string("infinite") : fmt(x); }

double to_double_or_inf(const std::string& key, const std::string& v) {
  if (v == "infinite" || v == "inf") return std::numeric_limits<double>::infinity();
  return to_double(key, v);
}

struct Key {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define QDNEMS_DOUBLE(section_key, field)                                                     \
  Key {                                                                                        \
    section_key, [](RunConfig& c, const std::string& v) { c.field = to_double(section_key, v); }, \
        [](const RunConfig& c) { return fmt(c.field); }                                        \
  }
#define QDNEMS_INT(section_key, field)                                                     \
  Key {                                                                                     \
    section_key, [](RunConfig& c, const std::string& v) { c.field = to_int(section_key, v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }                          \
  }
#define QDNEMS_COUNT(section_key, field)                                                     \
  Key {                                                                                       \
    section_key, [](RunConfig& c, const std::string& v) { c.field = to_count(section_key, v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }                            \
  }

const std::vector<Key>& key_table() {
  static const std::vector<Key> keys = {
      QDNEMS_DOUBLE("plate.width_nm", plate.width_nm),
      QDNEMS_DOUBLE("plate.length_nm", plate.length_nm),
      QDNEMS_DOUBLE("plate.thickness_nm", plate.thickness_nm),
      QDNEMS_DOUBLE("plate.density_kg_m3", plate.material.density_kg_m3),
      QDNEMS_DOUBLE("plate.youngs_modulus_GPa", plate.material.youngs_modulus_GPa),
      QDNEMS_DOUBLE("plate.poisson_ratio", plate.material.poisson_ratio),
      QDNEMS_INT("plate.ritz_nx", ritz.nx),
      QDNEMS_INT("plate.ritz_ny", ritz.ny),
      QDNEMS_INT("plate.mode_count", mode_count),
      Key{"plate.quality_factor",
          [](RunConfig& c, const std::string& v) {
            c.quality_factor = to_double_or_inf("plate.quality_factor", v);
          },
          [](const RunConfig& c) { return fmt_inf(c.quality_factor); }},

      QDNEMS_DOUBLE("dot.radius_nm", dot.radius_nm),
      QDNEMS_DOUBLE("dot.effective_mass", dot.effective_mass),
      QDNEMS_DOUBLE("dot.offset_x_nm", dot.offset_x_nm),
      QDNEMS_DOUBLE("dot.offset_y_nm", dot.offset_y_nm),

      QDNEMS_DOUBLE("field.B_gauss", field_gauss),

      QDNEMS_DOUBLE("coupling.deformation_potential_eV", coupling.deformation_potential_eV),
      Key{"coupling.layer_offset_nm",
          [](RunConfig& c, const std::string& v) {
            if (is_none(v) || v == "default") {
              c.coupling.layer_offset_nm.reset();
            } else {
              c.coupling.layer_offset_nm = to_double("coupling.layer_offset_nm", v);
            }
          },
          [](const RunConfig& c) {
            return c.coupling.layer_offset_nm ? fmt(*c.coupling.layer_offset_nm) : std::string("default");
          }},
      QDNEMS_DOUBLE("coupling.overall_scale", coupling.overall_scale),
      QDNEMS_INT("coupling.radial_order", coupling.radial_order),
      QDNEMS_INT("coupling.angular_order", coupling.angular_order),
      Key{"coupling.target_coupling_meV",
          [](RunConfig& c, const std::string& v) {
            if (is_none(v)) {
              c.target_coupling_meV.reset();
            } else {
              c.target_coupling_meV = to_double("coupling.target_coupling_meV", v);
            }
          },
          [](const RunConfig& c) {
            return c.target_coupling_meV ? fmt(*c.target_coupling_meV) : std::string("none");
          }},
      Key{"coupling.calibration",
          [](RunConfig& c, const std::string& v) {
            if (v == "effective") {
              c.calibration = CalibrationMode::effective;
            } else if (v == "direct") {
              c.calibration = CalibrationMode::direct;
            } else {
              bad_value("coupling.calibration", v, "effective or direct");
            }
          },
          [](const RunConfig& c) {
            return std::string(c.calibration == CalibrationMode::effective ? "effective" : "direct");
          }},

      QDNEMS_INT("basis.l_max", l_max),
      QDNEMS_INT("basis.nu_max", nu_max),
      Key{"basis.kinetic_cutoff_meV",
          [](RunConfig& c, const std::string& v) {
            if (is_none(v)) {
              c.kinetic_cutoff_meV.reset();
            } else {
              c.kinetic_cutoff_meV = to_double("basis.kinetic_cutoff_meV", v);
            }
          },
          [](const RunConfig& c) {
            return c.kinetic_cutoff_meV ? fmt(*c.kinetic_cutoff_meV) : std::string("none");
          }},
      QDNEMS_INT("basis.max_occupation", caps.max_occupation),
      QDNEMS_COUNT("basis.size_cap", caps.size_cap),
      QDNEMS_DOUBLE("basis.oversample", caps.oversample),
      Key{"basis.window",
          [](RunConfig& c, const std::string& v) {
            if (v == "bottom") {
              c.caps.window = WindowPolicy::bottom;
            } else if (v == "centered") {
              c.caps.window = WindowPolicy::centered;
            } else {
              bad_value("basis.window", v, "bottom or centered");
            }
          },
          [](const RunConfig& c) {
            return std::string(c.caps.window == WindowPolicy::bottom ? "bottom" : "centered");
          }},
      QDNEMS_DOUBLE("basis.drop_tolerance_meV", drop_tolerance_meV),

      QDNEMS_DOUBLE("propagation.dt_ns", dt_ns),
      QDNEMS_DOUBLE("propagation.accuracy", accuracy),
      QDNEMS_DOUBLE("propagation.bound_margin", bound_margin),
      Key{"propagation.dissipation",
          [](RunConfig& c, const std::string& v) {
            if (v == "mean_reverting") {
              c.scenario.dissipation = DissipationMode::mean_reverting;
            } else if (v == "literal") {
              c.scenario.dissipation = DissipationMode::literal;
            } else {
              bad_value("propagation.dissipation", v, "mean_reverting or literal");
            }
          },
          [](const RunConfig& c) {
            return std::string(c.scenario.dissipation == DissipationMode::mean_reverting
                                   ? "mean_reverting"
                                   : "literal");
          }},

      QDNEMS_DOUBLE("thermal.temperature_mK", thermal.temperature_mK),
      Key{"thermal.policy",
          [](RunConfig& c, const std::string& v) { c.thermal.policy = parse_policy(v); },
          [](const RunConfig& c) { return std::string(policy_name(c.thermal.policy)); }},
      QDNEMS_DOUBLE("thermal.coverage", thermal.coverage),
      QDNEMS_COUNT("thermal.samples", thermal.samples),
      Key{"thermal.seed",
          [](RunConfig& c, const std::string& v) {
            c.thermal.seed = static_cast<std::uint64_t>(to_count("thermal.seed", v));
          },
          [](const RunConfig& c) { return std::to_string(c.thermal.seed); }},
      QDNEMS_COUNT("thermal.max_members", thermal.max_members),

      Key{"scenario.name", [](RunConfig& c, const std::string& v) { c.scenario_name = v; },
          [](const RunConfig& c) { return c.scenario_name; }},
      QDNEMS_INT("scenario.initial_l", scenario.initial_l),
      QDNEMS_INT("scenario.initial_nu", scenario.initial_nu),
      QDNEMS_DOUBLE("scenario.t_final_ns", scenario.t_final_ns),
      QDNEMS_COUNT("scenario.stride", scenario.stride),
      Key{"scenario.detuned_mode",
          [](RunConfig& c, const std::string& v) {
            if (is_none(v) || v == "0") {
              c.detuned_mode.reset();
            } else {
              DetunedMode d = c.detuned_mode.value_or(DetunedMode{});
              d.index = to_int("scenario.detuned_mode", v);
              c.detuned_mode = d;
            }
          },
          [](const RunConfig& c) {
            return c.detuned_mode ? std::to_string(c.detuned_mode->index) : std::string("none");
          }},
      Key{"scenario.detuning_fraction",
          [](RunConfig& c, const std::string& v) {
            DetunedMode d = c.detuned_mode.value_or(DetunedMode{});
            d.delta_fraction = to_double("scenario.detuning_fraction", v);
            // Only meaningful once a mode is chosen; kept so key order does not matter.
            if (c.detuned_mode) {
              c.detuned_mode = d;
            } else {
              c.detuned_mode = DetunedMode{0, d.delta_fraction};
            }
          },
          [](const RunConfig& c) {
            return fmt(c.detuned_mode ? c.detuned_mode->delta_fraction : DetunedMode{}.delta_fraction);
          }},
      Key{"scenario.keep_members",
          [](RunConfig& c, const std::string& v) {
            c.scenario.keep_members = to_bool("scenario.keep_members", v);
          },
          [](const RunConfig& c) { return std::string(c.scenario.keep_members ? "true" : "false"); }},

      Key{"output.directory", [](RunConfig& c, const std::string& v) { c.output_dir = v; },
          [](const RunConfig& c) { return c.output_dir; }},
      QDNEMS_COUNT("run.workers", workers),
      QDNEMS_DOUBLE("run.memory_budget_MB", memory_budget_MB),
  };
  return keys;
}

#undef QDNEMS_DOUBLE
#undef QDNEMS_INT
#undef QDNEMS_COUNT

const Key* find_key(const std::string& name) {
  for (const auto& k : key_table())
    if (k.name == name) return &k;
  return nullptr;
}

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

std::string canonical_key(const std::string& key) {
  // `scenario=<preset>` is shorthand for scenario.name.
  return key == "scenario" ? std::string("scenario.name") : key;
}

struct Preset {
  std::string figure;
  double temperature_mK;
  double quality_factor;
  double field_gauss;
  int initial_l;
  bool resonance;
};

const std::vector<Preset>& figure_presets() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  static const std::vector<Preset> presets = {
      {"fig4_T50", 50.0, inf, 0.0, 1, false},     {"fig4_T100", 100.0, inf, 0.0, 1, false},
      {"fig5_T50", 50.0, 100.0, 0.0, 1, false},   {"fig5_T100", 100.0, 100.0, 0.0, 1, false},
      {"fig6", 100.0, 100.0, 0.0, 1, false},      {"fig7_plus", 100.0, inf, 500.0, 1, true},
      {"fig7_minus", 100.0, inf, 500.0, -1, false}, {"fig8_plus", 100.0, 100.0, 500.0, 1, true},
      {"fig8_minus", 100.0, 100.0, 500.0, -1, false},
  };
  return presets;
}

}  // namespace

void RunConfig::validate() const {
  plate.validate();
  dot.validate();
  coupling.validate(plate);
  if (ritz.nx < 5 || ritz.ny < 5) throw ConfigError("plate.ritz_nx and plate.ritz_ny must be >= 5");
  if (mode_count < 1 || mode_count > ritz.nx * ritz.ny) {
    throw ConfigError("plate.mode_count must be in [1, ritz_nx * ritz_ny]");
  }
  if (!(quality_factor > 0.0)) throw ConfigError("plate.quality_factor must be positive or infinite");
  if (field_gauss < 0.0) throw ConfigError("field.B_gauss must be non-negative");
  if (target_coupling_meV && !(*target_coupling_meV > 0.0)) {
    throw ConfigError("coupling.target_coupling_meV must be positive (or none)");
  }
  if (l_max < 1 || l_max > 50) throw ConfigError("basis.l_max must be in [1, 50]");
  if (nu_max < 1 || nu_max > 50) throw ConfigError("basis.nu_max must be in [1, 50]");
  if (caps.max_occupation < 1 || caps.max_occupation > 255) {
    throw ConfigError("basis.max_occupation must be in [1, 255]");
  }
  if (caps.size_cap < 1) throw ConfigError("basis.size_cap must be positive");
  if (caps.oversample < 1.5) throw ConfigError("basis.oversample must be at least 1.5");
  if (!(drop_tolerance_meV >= 0.0)) throw ConfigError("basis.drop_tolerance_meV must be >= 0");
  if (!(dt_ns > 0.0)) throw ConfigError("propagation.dt_ns must be positive");
  if (!(accuracy > 0.0 && accuracy < 1.0)) throw ConfigError("propagation.accuracy must be in (0, 1)");
  if (!(bound_margin >= 0.0)) throw ConfigError("propagation.bound_margin must be >= 0");
  if (thermal.temperature_mK < 0.0) throw ConfigError("thermal.temperature_mK must be >= 0");
  if (!(thermal.coverage > 0.0 && thermal.coverage <= 1.0)) {
    throw ConfigError("thermal.coverage must be in (0, 1]");
  }
  if (thermal.samples < 1) throw ConfigError("thermal.samples must be positive");
  if (scenario.initial_nu < 1 || scenario.initial_nu > nu_max ||
      std::abs(scenario.initial_l) > l_max) {
    throw ConfigError("scenario initial state lies outside the electron basis");
  }
  if (!(scenario.t_final_ns > 0.0)) throw ConfigError("scenario.t_final_ns must be positive");
  if (scenario.stride < 1) throw ConfigError("scenario.stride must be positive");
  if (step_count(scenario.t_final_ns, dt_ns) % scenario.stride != 0) {
    throw ConfigError("scenario.t_final_ns / propagation.dt_ns must be a multiple of scenario.stride");
  }
  if (detuned_mode) {
    if (detuned_mode->index < 1 || detuned_mode->index > mode_count) {
      throw ConfigError("scenario.detuned_mode must be in [1, plate.mode_count]");
    }
    if (!(detuned_mode->delta_fraction < 1.0)) {
      throw ConfigError("scenario.detuning_fraction must be below 1");
    }
  }
  if (!(memory_budget_MB > 0.0)) throw ConfigError("run.memory_budget_MB must be positive");
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& p : figure_presets()) {
    names.push_back(p.figure + "_desk");
    names.push_back(p.figure + "_paper");
  }
  return names;
}

void apply_preset(RunConfig& config, const std::string& name) {
  const auto split = name.rfind('_');
  const std::string figure = split == std::string::npos ? name : name.substr(0, split);
  const std::string scale = split == std::string::npos ? "" : name.substr(split + 1);
  const Preset* preset = nullptr;
  for (const auto& p : figure_presets())
    if (p.figure == figure) preset = &p;
  if (preset == nullptr || (scale != "desk" && scale != "paper")) {
    throw ConfigError("unknown scenario '" + name + "'; valid scenarios: " + join(preset_names(), ", "));
  }
  const bool desk = scale == "desk";
  config.scenario_name = name;
  config.thermal.temperature_mK = preset->temperature_mK;
  config.quality_factor = preset->quality_factor;
  config.field_gauss = preset->field_gauss;
  config.scenario.initial_l = preset->initial_l;
  config.scenario.initial_nu = 1;
  config.scenario.stride = 8;
  config.dt_ns = 0.25;
  config.accuracy = 5e-5;
  if (desk) {
    config.mode_count = 8;
    config.l_max = 4;
    config.nu_max = 2;
    config.caps.size_cap = 20000;
    config.scenario.t_final_ns = 200.0;
  } else {
    config.mode_count = 40;
    config.l_max = 10;
    config.nu_max = 3;
    config.caps.size_cap = 120000;
    config.scenario.t_final_ns = 1000.0;
  }
  config.caps.max_occupation = 40;
  if (preset->temperature_mK <= 50.0) {
    config.thermal.policy = RealizationPolicy::exhaustive;
    // 0.95 keeps the desk run near ten minutes; see README.
    config.thermal.coverage = desk ? 0.95 : 0.99;
  } else {
    // Exhaustive 0.99 coverage at 100 mK needs thousands of members.
    config.thermal.policy = RealizationPolicy::sampled;
    config.thermal.samples = desk ? 32 : 64;
  }
  config.thermal.seed = 1;
  if (preset->resonance) {
    config.detuned_mode = DetunedMode{desk ? config.mode_count : 17, 0.004};
  } else {
    config.detuned_mode.reset();
  }
}

Assignments parse_ini(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config file: ") + e.what());
  }
  Assignments out;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      out[canonical_key(section)] = body.data();
      continue;
    }
    for (const auto& [key, value] : body) out[section + "." + key] = value.data();
  }
  return out;
}

std::pair<std::string, std::string> parse_override(const std::string& text) {
  std::string s = text;
  while (!s.empty() && s.front() == '-') s.erase(s.begin());
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + text + "' is not of the form section.key=value");
  }
  return {canonical_key(s.substr(0, eq)), s.substr(eq + 1)};
}

std::vector<std::string> valid_keys() {
  std::vector<std::string> names;
  for (const auto& k : key_table()) names.push_back(k.name);
  return names;
}

RunConfig resolve_config(const Assignments& assignments) {
  for (const auto& [key, value] : assignments) {
    if (find_key(key) == nullptr) {
      throw ConfigError("unknown config key '" + key + "'; valid keys: " + join(valid_keys(), ", "));
    }
  }
  RunConfig config;
  if (const auto it = assignments.find("scenario.name"); it != assignments.end() && it->second != "custom") {
    apply_preset(config, it->second);
  }
  // Detuning fraction after the mode index so either order works.
  for (const auto& [key, value] : assignments) {
    if (key == "scenario.name" || key == "scenario.detuning_fraction") continue;
    find_key(key)->set(config, value);
  }
  if (const auto it = assignments.find("scenario.detuning_fraction"); it != assignments.end()) {
    find_key(it->first)->set(config, it->second);
  }
  if (config.detuned_mode && config.detuned_mode->index == 0) config.detuned_mode.reset();
  config.scenario.dt_ns = config.dt_ns;
  config.validate();
  return config;
}

Assignments describe_config(const RunConfig& config) {
  Assignments out;
  for (const auto& k : key_table()) out[k.name] = k.get(config);
  return out;
}

}  // namespace qdnems
