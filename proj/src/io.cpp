#include "ionreg/io.hpp"

#include "ionreg/errors.hpp"
#include "ionreg/gates.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ionreg {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const json& require(const json& j, const char* key, const char* where) {
  auto it = j.find(key);
  if (it == j.end())
    throw ConfigError(std::string(where) + ": missing key '" + key + "'");
  return *it;
}

double get_num(const json& j, const char* key, const char* where) {
  const json& v = require(j, key, where);
  if (!v.is_number())
    throw ConfigError(std::string(where) + ": key '" + key + "' must be a number");
  return v.get<double>();
}

std::string get_str(const json& j, const char* key, const char* where) {
  const json& v = require(j, key, where);
  if (!v.is_string())
    throw ConfigError(std::string(where) + ": key '" + key + "' must be a string");
  return v.get<std::string>();
}

// Ions are 1-based in files, matching the circuit text format; "all" marks a
// nonselective target.
ordered_json ion_to_json(int ion) {
  if (ion == all_ions) return ordered_json("all");
  return ordered_json(ion + 1);
}

int ion_from_json(const json& v, int n_ions, const char* where) {
  if (v.is_string()) {
    if (v.get<std::string>() == "all") return all_ions;
    throw ConfigError(std::string(where) + ": ion must be an integer or \"all\"");
  }
  if (!v.is_number_integer())
    throw ConfigError(std::string(where) + ": ion must be an integer or \"all\"");
  const long long i = v.get<long long>();
  if (i < 1 || i > n_ions)
    throw ConfigError(std::string(where) + ": ion index out of range (indices are 1-based)");
  return static_cast<int>(i - 1);
}

} // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw ConfigError("error reading file '" + path + "'");
  return buf.str();
}

void atomic_write_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec) throw ConfigError("cannot create directory '" + target.parent_path().string() + "'");
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw ConfigError("error writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw ConfigError("cannot rename '" + tmp.string() + "' to '" + path + "'");
}

std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string channel_name(Channel c) { return c == Channel::mw ? "mw" : "rf"; }

Channel channel_from_name(const std::string& name) {
  if (name == "mw") return Channel::mw;
  if (name == "rf") return Channel::rf;
  throw ConfigError("unknown channel '" + name + "'");
}

std::string spin_sel_name(SpinSel sel) {
  switch (sel) {
    case SpinSel::mi_top: return "mi_top";
    case SpinSel::mi_bottom: return "mi_bottom";
    case SpinSel::ms_up: return "ms_up";
    case SpinSel::ms_down: return "ms_down";
    case SpinSel::both: return "both";
  }
  throw std::logic_error("unreachable spin selector");
}

SpinSel spin_sel_from_name(const std::string& name) {
  if (name == "mi_top") return SpinSel::mi_top;
  if (name == "mi_bottom") return SpinSel::mi_bottom;
  if (name == "ms_up") return SpinSel::ms_up;
  if (name == "ms_down") return SpinSel::ms_down;
  if (name == "both") return SpinSel::both;
  throw ConfigError("unknown spectator condition '" + name + "'");
}

nlohmann::ordered_json schedule_to_json(const Schedule& s, const std::string& config_hash) {
  ordered_json j;
  j["schema_version"] = schema_version;
  j["config_hash"] = config_hash;
  j["n_ions"] = s.n_ions;

  ordered_json sp;
  sp["name"] = s.layout.species.name;
  sp["mass_kg"] = s.layout.species.mass_kg;
  sp["nuclear_spin"] = s.layout.species.nuclear_spin;
  sp["hyperfine_a_hz"] = s.layout.species.hyperfine_a_hz;
  sp["electron_gamma_hz_per_t"] = s.layout.species.electron_gamma_hz_per_t;
  sp["nuclear_gamma_hz_per_t"] = s.layout.species.nuclear_gamma_hz_per_t;

  ordered_json lay;
  lay["species"] = sp;
  lay["b0_tesla"] = s.layout.b0_tesla;
  lay["gradient_t_per_m"] = s.layout.gradient_t_per_m;
  lay["positions_m"] = s.layout.positions_m;
  ordered_json jm = ordered_json::array();
  for (int r = 0; r < s.layout.j_rad_s.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (int c = 0; c < s.layout.j_rad_s.cols(); ++c) row.push_back(s.layout.j_rad_s(r, c));
    jm.push_back(row);
  }
  lay["j_rad_s"] = jm;
  j["layout"] = lay;

  j["circuit_text"] = circuit_to_text(s.circuit);
  j["global_phase_rad"] = s.global_phase_rad;
  j["total_duration_s"] = s.total_duration_s;
  j["frame_note"] = s.frame_note;
  j["parity_nonselective_rf"] = s.parity.nonselective_rf_counts;

  ordered_json items = ordered_json::array();
  for (const auto& item : s.items) {
    ordered_json o;
    if (const auto* p = std::get_if<PulseItem>(&item)) {
      o["type"] = "pulse";
      o["channel"] = channel_name(p->spec.channel);
      o["ion"] = ion_to_json(p->spec.target_ion);
      o["condition"] = spin_sel_name(p->spec.condition);
      if (p->spec.j_condition) {
        ordered_json jc;
        jc["ion"] = p->spec.j_condition->ion + 1;
        jc["m_s"] = p->spec.j_condition->m_s;
        o["j_condition"] = jc;
      }
      o["angle_rad"] = p->spec.angle_rad;
      o["phase_rad"] = p->spec.phase_rad;
      o["rabi_hz"] = p->spec.rabi_hz;
      o["duration_s"] = p->duration_s;
    } else if (const auto* d = std::get_if<DelayItem>(&item)) {
      o["type"] = "delay";
      o["duration_s"] = d->duration_s;
    } else {
      const auto& ps = std::get<PhaseShiftItem>(item);
      o["type"] = "phase_shift";
      o["channel"] = channel_name(ps.channel);
      o["ion"] = ion_to_json(ps.ion);
      o["angle_rad"] = ps.angle_rad;
    }
    items.push_back(o);
  }
  j["items"] = items;
  return j;
}

Schedule schedule_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("schedule: expected a JSON object");
  const std::string ver = get_str(j, "schema_version", "schedule");
  if (ver != schema_version)
    throw ConfigError("schedule: unsupported schema_version '" + ver + "'");

  Schedule s;
  s.n_ions = static_cast<int>(get_num(j, "n_ions", "schedule"));
  if (s.n_ions < 1 || s.n_ions > 10) throw ConfigError("schedule: n_ions out of range");

  const json& lay = require(j, "layout", "schedule");
  const json& sp = require(lay, "species", "schedule.layout");
  s.layout.species.name = get_str(sp, "name", "schedule.layout.species");
  s.layout.species.mass_kg = get_num(sp, "mass_kg", "schedule.layout.species");
  s.layout.species.nuclear_spin = get_num(sp, "nuclear_spin", "schedule.layout.species");
  s.layout.species.hyperfine_a_hz = get_num(sp, "hyperfine_a_hz", "schedule.layout.species");
  s.layout.species.electron_gamma_hz_per_t =
      get_num(sp, "electron_gamma_hz_per_t", "schedule.layout.species");
  s.layout.species.nuclear_gamma_hz_per_t =
      get_num(sp, "nuclear_gamma_hz_per_t", "schedule.layout.species");
  s.layout.n_ions = s.n_ions;
  s.layout.b0_tesla = get_num(lay, "b0_tesla", "schedule.layout");
  s.layout.gradient_t_per_m = get_num(lay, "gradient_t_per_m", "schedule.layout");
  const json& pos = require(lay, "positions_m", "schedule.layout");
  if (!pos.is_array() || static_cast<int>(pos.size()) != s.n_ions)
    throw ConfigError("schedule.layout: positions_m must list one entry per ion");
  s.layout.positions_m.clear();
  for (const auto& v : pos) s.layout.positions_m.push_back(v.get<double>());
  const json& jm = require(lay, "j_rad_s", "schedule.layout");
  if (!jm.is_array() || static_cast<int>(jm.size()) != s.n_ions)
    throw ConfigError("schedule.layout: j_rad_s must be an n_ions x n_ions matrix");
  s.layout.j_rad_s = Eigen::MatrixXd::Zero(s.n_ions, s.n_ions);
  for (int r = 0; r < s.n_ions; ++r) {
    const json& row = jm[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != s.n_ions)
      throw ConfigError("schedule.layout: j_rad_s must be an n_ions x n_ions matrix");
    for (int c = 0; c < s.n_ions; ++c)
      s.layout.j_rad_s(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  validate_layout(s.layout);

  s.circuit = parse_circuit_text(get_str(j, "circuit_text", "schedule"), s.n_ions);
  s.global_phase_rad = get_num(j, "global_phase_rad", "schedule");
  s.total_duration_s = get_num(j, "total_duration_s", "schedule");
  s.frame_note = get_str(j, "frame_note", "schedule");

  const json& par = require(j, "parity_nonselective_rf", "schedule");
  if (!par.is_array() || static_cast<int>(par.size()) != s.n_ions)
    throw ConfigError("schedule: parity_nonselective_rf must list one count per ion");
  s.parity.nonselective_rf_counts.clear();
  for (const auto& v : par) s.parity.nonselective_rf_counts.push_back(v.get<int>());

  const json& items = require(j, "items", "schedule");
  if (!items.is_array()) throw ConfigError("schedule: items must be an array");
  for (const auto& o : items) {
    const std::string type = get_str(o, "type", "schedule.items");
    if (type == "pulse") {
      PulseItem p;
      p.spec.channel = channel_from_name(get_str(o, "channel", "schedule.items"));
      p.spec.target_ion = ion_from_json(require(o, "ion", "schedule.items"), s.n_ions,
                                        "schedule.items");
      p.spec.condition = spin_sel_from_name(get_str(o, "condition", "schedule.items"));
      if (o.contains("j_condition")) {
        const json& jc = o.at("j_condition");
        JCondition cond;
        cond.ion = ion_from_json(require(jc, "ion", "schedule.items.j_condition"), s.n_ions,
                                 "schedule.items.j_condition");
        cond.m_s = get_num(jc, "m_s", "schedule.items.j_condition");
        p.spec.j_condition = cond;
      }
      p.spec.angle_rad = get_num(o, "angle_rad", "schedule.items");
      p.spec.phase_rad = get_num(o, "phase_rad", "schedule.items");
      p.spec.rabi_hz = get_num(o, "rabi_hz", "schedule.items");
      p.duration_s = get_num(o, "duration_s", "schedule.items");
      s.items.emplace_back(p);
    } else if (type == "delay") {
      DelayItem d;
      d.duration_s = get_num(o, "duration_s", "schedule.items");
      s.items.emplace_back(d);
    } else if (type == "phase_shift") {
      PhaseShiftItem ps;
      ps.channel = channel_from_name(get_str(o, "channel", "schedule.items"));
      const int ion = ion_from_json(require(o, "ion", "schedule.items"), s.n_ions,
                                    "schedule.items");
      if (ion == all_ions)
        throw ConfigError("schedule.items: phase_shift needs a single ion");
      ps.ion = ion;
      ps.angle_rad = get_num(o, "angle_rad", "schedule.items");
      s.items.emplace_back(ps);
    } else {
      throw ConfigError("schedule.items: unknown item type '" + type + "'");
    }
  }

  validate_schedule(s);
  return s;
}

Schedule load_schedule_file(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("schedule file '" + path + "': " + e.what());
  }
  return schedule_from_json(j);
}

} // namespace ionreg
