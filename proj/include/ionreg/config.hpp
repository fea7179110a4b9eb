#pragma once

#include "ionreg/compiler.hpp"
#include "ionreg/ion.hpp"
#include "ionreg/trap.hpp"

#include <cstdint>
#include <string>

namespace ionreg {

// Flat run configuration. Text form is dotted-key = value lines ('#' starts
// a comment); a JSON object (nested or flat) is accepted as an alternative.
// Unknown keys are rejected so configs stay diff-able and typo-safe.
struct RunConfig {
  IonSpecies species = ca43_defaults();
  double b0_tesla = 1.0;

  double nu1_hz = 1.0e6;
  int n_ions = 2;
  double gradient_t_per_m = 450.0;
  double kappa = default_kappa;

  double rabi_mw_hz = 1.0e6;
  double rabi_rf_hz = 2.0e5;

  std::string method = "two_pulse_delay"; // or "selective_line"
  bool nonselective_rf = true;
  double margin_factor = 10.0;
  bool swap_si_first = false;

  std::string mode = "ideal"; // "ideal" | "physical" | "labframe-oracle"
  double delta_b_rms_tesla = 0.0;
  int trials = 100;
  std::uint64_t seed = 1;

  double gate_time_s = 1.0e-3;

  int scan_ion = 1; // 1-based
  double scan_rabi_min_hz = 2.5e5;
  double scan_rabi_max_hz = 2.0e6;
  int scan_points = 16;

  std::string spectrum_channel = "both"; // "mw" | "rf" | "both"

  double labframe_scale = 1.0e-4;
  int labframe_steps_per_cycle = 256;

  std::string format = "csv"; // "csv" | "json" | "text"
  std::string out_dir = ".";
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_json_text(const std::string& text);
// Dispatches on the leading non-space character ('{' selects JSON).
RunConfig parse_config_any(const std::string& text);

// Canonical text form; parse_config_text(emit_config(c)) reproduces c.
std::string emit_config(const RunConfig& c);

std::uint64_t fnv1a64(const std::string& data);
// Hash of the canonical emitted form, 16 lowercase hex digits.
std::string config_hash_hex(const RunConfig& c);

void validate_config(const RunConfig& c);

TrapParams trap_from_config(const RunConfig& c);
CompileOptions compile_options_from_config(const RunConfig& c);
// Layout for the configured register: a trap solve for two or more ions, a
// single ion at the origin otherwise.
SystemLayout layout_from_config(const RunConfig& c);

} // namespace ionreg
