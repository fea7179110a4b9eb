#include "ionreg/config.hpp"

#include "ionreg/constants.hpp"
#include "ionreg/errors.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <climits>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <variant>
#include <vector>

namespace ionreg {

namespace {

using FieldPtr = std::variant<double RunConfig::*, int RunConfig::*, bool RunConfig::*,
                              std::uint64_t RunConfig::*, std::string RunConfig::*,
                              double IonSpecies::*, std::string IonSpecies::*>;

struct FieldDef {
  const char* key;
  FieldPtr ptr;
};

// Canonical key order; emit_config writes keys in exactly this order.
const std::vector<FieldDef>& field_table() {
  static const std::vector<FieldDef> t = {
      {"species.name", &IonSpecies::name},
      {"species.mass_kg", &IonSpecies::mass_kg},
      {"species.nuclear_spin", &IonSpecies::nuclear_spin},
      {"species.hyperfine_a_hz", &IonSpecies::hyperfine_a_hz},
      {"species.electron_gamma_hz_per_t", &IonSpecies::electron_gamma_hz_per_t},
      {"species.nuclear_gamma_hz_per_t", &IonSpecies::nuclear_gamma_hz_per_t},
      {"layout.b0_tesla", &RunConfig::b0_tesla},
      {"trap.nu1_hz", &RunConfig::nu1_hz},
      {"trap.n_ions", &RunConfig::n_ions},
      {"trap.gradient_t_per_m", &RunConfig::gradient_t_per_m},
      {"trap.kappa", &RunConfig::kappa},
      {"drive.rabi_mw_hz", &RunConfig::rabi_mw_hz},
      {"drive.rabi_rf_hz", &RunConfig::rabi_rf_hz},
      {"compile.method", &RunConfig::method},
      {"compile.nonselective_rf", &RunConfig::nonselective_rf},
      {"compile.margin_factor", &RunConfig::margin_factor},
      {"compile.swap_si_first", &RunConfig::swap_si_first},
      {"simulate.mode", &RunConfig::mode},
      {"noise.delta_b_rms_tesla", &RunConfig::delta_b_rms_tesla},
      {"noise.trials", &RunConfig::trials},
      {"seed", &RunConfig::seed},
      {"feasibility.gate_time_s", &RunConfig::gate_time_s},
      {"scan.ion", &RunConfig::scan_ion},
      {"scan.rabi_min_hz", &RunConfig::scan_rabi_min_hz},
      {"scan.rabi_max_hz", &RunConfig::scan_rabi_max_hz},
      {"scan.points", &RunConfig::scan_points},
      {"spectrum.channel", &RunConfig::spectrum_channel},
      {"labframe.scale", &RunConfig::labframe_scale},
      {"labframe.steps_per_cycle", &RunConfig::labframe_steps_per_cycle},
      {"output.format", &RunConfig::format},
      {"output.dir", &RunConfig::out_dir},
  };
  return t;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse number from '" + value + "'");
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse integer from '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + value + "'");
}

void assign_field(RunConfig& c, const FieldDef& def, const std::string& value) {
  const std::string& key = def.key;
  std::visit(
      [&](auto ptr) {
        using P = decltype(ptr);
        if constexpr (std::is_same_v<P, double RunConfig::*>) {
          c.*ptr = parse_double(key, value);
        } else if constexpr (std::is_same_v<P, int RunConfig::*>) {
          const long long v = parse_int(key, value);
          if (v < INT_MIN || v > INT_MAX) throw ConfigError("config key '" + key + "': out of range");
          c.*ptr = static_cast<int>(v);
        } else if constexpr (std::is_same_v<P, bool RunConfig::*>) {
          c.*ptr = parse_bool(key, value);
        } else if constexpr (std::is_same_v<P, std::uint64_t RunConfig::*>) {
          const long long v = parse_int(key, value);
          if (v < 0) throw ConfigError("config key '" + key + "': must be nonnegative");
          c.*ptr = static_cast<std::uint64_t>(v);
        } else if constexpr (std::is_same_v<P, std::string RunConfig::*>) {
          c.*ptr = value;
        } else if constexpr (std::is_same_v<P, double IonSpecies::*>) {
          c.species.*ptr = parse_double(key, value);
        } else {
          c.species.*ptr = value;
        }
      },
      def.ptr);
}

std::string read_field(const RunConfig& c, const FieldDef& def) {
  return std::visit(
      [&](auto ptr) -> std::string {
        using P = decltype(ptr);
        if constexpr (std::is_same_v<P, double RunConfig::*>) {
          return fmt_double(c.*ptr);
        } else if constexpr (std::is_same_v<P, int RunConfig::*>) {
          return std::to_string(c.*ptr);
        } else if constexpr (std::is_same_v<P, bool RunConfig::*>) {
          return (c.*ptr) ? "true" : "false";
        } else if constexpr (std::is_same_v<P, std::uint64_t RunConfig::*>) {
          return std::to_string(c.*ptr);
        } else if constexpr (std::is_same_v<P, std::string RunConfig::*>) {
          return c.*ptr;
        } else if constexpr (std::is_same_v<P, double IonSpecies::*>) {
          return fmt_double(c.species.*ptr);
        } else {
          return c.species.*ptr;
        }
      },
      def.ptr);
}

const FieldDef* find_field(const std::string& key) {
  for (const auto& def : field_table())
    if (key == def.key) return &def;
  return nullptr;
}

void set_key(RunConfig& c, const std::string& key, const std::string& value) {
  const FieldDef* def = find_field(key);
  if (def == nullptr) throw ConfigError("unknown config key '" + key + "'");
  assign_field(c, *def, value);
}

void check_choice(const std::string& key, const std::string& value,
                  std::initializer_list<const char*> allowed) {
  for (const char* a : allowed)
    if (value == a) return;
  std::string msg = "config key '" + key + "': '" + value + "' is not one of {";
  bool first = true;
  for (const char* a : allowed) {
    if (!first) msg += ", ";
    msg += a;
    first = false;
  }
  msg += "}";
  throw ConfigError(msg);
}

void check_positive(const std::string& key, double v) {
  if (!std::isfinite(v) || v <= 0.0)
    throw ConfigError("config key '" + key + "': must be finite and positive");
}

void flatten_json(const nlohmann::json& j, const std::string& prefix,
                  std::vector<std::pair<std::string, std::string>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    const nlohmann::json& v = it.value();
    if (v.is_object()) {
      flatten_json(v, key, out);
    } else if (v.is_string()) {
      out.emplace_back(key, v.get<std::string>());
    } else if (v.is_boolean()) {
      out.emplace_back(key, v.get<bool>() ? "true" : "false");
    } else if (v.is_number_integer()) {
      out.emplace_back(key, std::to_string(v.get<long long>()));
    } else if (v.is_number_unsigned()) {
      out.emplace_back(key, std::to_string(v.get<unsigned long long>()));
    } else if (v.is_number_float()) {
      out.emplace_back(key, fmt_double(v.get<double>()));
    } else {
      throw ConfigError("config key '" + key + "': unsupported JSON value type");
    }
  }
}

} // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    set_key(c, key, value);
  }
  validate_config(c);
  return c;
}

RunConfig parse_config_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config JSON parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config JSON must be an object");
  std::vector<std::pair<std::string, std::string>> pairs;
  flatten_json(j, "", pairs);
  RunConfig c;
  for (const auto& [key, value] : pairs) set_key(c, key, value);
  validate_config(c);
  return c;
}

RunConfig parse_config_any(const std::string& text) {
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) continue;
    return ch == '{' ? parse_config_json_text(text) : parse_config_text(text);
  }
  return parse_config_text(text);
}

std::string emit_config(const RunConfig& c) {
  std::string out;
  for (const auto& def : field_table()) {
    out += def.key;
    out += " = ";
    out += read_field(c, def);
    out += "\n";
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_hash_hex(const RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(emit_config(c))));
  return buf;
}

void validate_config(const RunConfig& c) {
  check_positive("species.mass_kg", c.species.mass_kg);
  if (c.species.nuclear_spin < 0.5 ||
      std::abs(c.species.nuclear_spin * 2.0 - std::round(c.species.nuclear_spin * 2.0)) > 1e-9)
    throw ConfigError("config key 'species.nuclear_spin': must be a positive half-integer");
  if (!std::isfinite(c.species.hyperfine_a_hz) || c.species.hyperfine_a_hz == 0.0)
    throw ConfigError("config key 'species.hyperfine_a_hz': must be finite and nonzero");
  check_positive("species.electron_gamma_hz_per_t", c.species.electron_gamma_hz_per_t);
  check_positive("species.nuclear_gamma_hz_per_t", c.species.nuclear_gamma_hz_per_t);
  check_positive("layout.b0_tesla", c.b0_tesla);
  check_positive("trap.nu1_hz", c.nu1_hz);
  if (c.n_ions < 1 || c.n_ions > 10)
    throw ConfigError("config key 'trap.n_ions': must be between 1 and 10");
  if (!std::isfinite(c.gradient_t_per_m) || c.gradient_t_per_m < 0.0)
    throw ConfigError("config key 'trap.gradient_t_per_m': must be finite and nonnegative");
  check_positive("trap.kappa", c.kappa);
  check_positive("drive.rabi_mw_hz", c.rabi_mw_hz);
  check_positive("drive.rabi_rf_hz", c.rabi_rf_hz);
  check_choice("compile.method", c.method, {"two_pulse_delay", "selective_line"});
  check_positive("compile.margin_factor", c.margin_factor);
  check_choice("simulate.mode", c.mode, {"ideal", "physical", "labframe-oracle"});
  if (!std::isfinite(c.delta_b_rms_tesla) || c.delta_b_rms_tesla < 0.0)
    throw ConfigError("config key 'noise.delta_b_rms_tesla': must be finite and nonnegative");
  if (c.trials < 1) throw ConfigError("config key 'noise.trials': must be at least 1");
  check_positive("feasibility.gate_time_s", c.gate_time_s);
  if (c.scan_ion < 1) throw ConfigError("config key 'scan.ion': ion indices are 1-based");
  check_positive("scan.rabi_min_hz", c.scan_rabi_min_hz);
  check_positive("scan.rabi_max_hz", c.scan_rabi_max_hz);
  if (c.scan_rabi_max_hz < c.scan_rabi_min_hz)
    throw ConfigError("config key 'scan.rabi_max_hz': must be >= scan.rabi_min_hz");
  if (c.scan_points < 1) throw ConfigError("config key 'scan.points': must be at least 1");
  check_choice("spectrum.channel", c.spectrum_channel, {"mw", "rf", "both"});
  check_positive("labframe.scale", c.labframe_scale);
  if (c.labframe_scale > 1.0)
    throw ConfigError("config key 'labframe.scale': must be at most 1");
  if (c.labframe_steps_per_cycle < 8)
    throw ConfigError("config key 'labframe.steps_per_cycle': must be at least 8");
  check_choice("output.format", c.format, {"csv", "json", "text"});
  if (c.out_dir.empty()) throw ConfigError("config key 'output.dir': must not be empty");
}

TrapParams trap_from_config(const RunConfig& c) {
  TrapParams t;
  t.species = c.species;
  t.n_ions = c.n_ions;
  t.nu1_rad_s = constants::two_pi * c.nu1_hz;
  t.b0_tesla = c.b0_tesla;
  t.gradient_t_per_m = c.gradient_t_per_m;
  return t;
}

CompileOptions compile_options_from_config(const RunConfig& c) {
  CompileOptions o;
  o.nonselective_rf = c.nonselective_rf;
  o.method = (c.method == "selective_line") ? CnotMethod::selective_line
                                            : CnotMethod::two_pulse_delay;
  o.rabi_mw_hz = c.rabi_mw_hz;
  o.rabi_rf_hz = c.rabi_rf_hz;
  o.margin_factor = c.margin_factor;
  o.swap_si_first = c.swap_si_first;
  o.kappa = c.kappa;
  return o;
}

SystemLayout layout_from_config(const RunConfig& c) {
  if (c.n_ions >= 2) return layout_from_trap(trap_from_config(c), c.kappa);
  SystemLayout layout;
  layout.species = c.species;
  layout.n_ions = 1;
  layout.b0_tesla = c.b0_tesla;
  layout.gradient_t_per_m = c.gradient_t_per_m;
  layout.positions_m = {0.0};
  layout.j_rad_s = Eigen::MatrixXd::Zero(1, 1);
  return layout;
}

} // namespace ionreg
