#pragma once

#include "ionreg/config.hpp"

#include <string>

namespace ionreg {

// Subcommand bodies. Each writes its output files under cfg.out_dir (atomic
// writes, deterministic content for a fixed config and seed) and prints one
// "wrote <path>" line per file. Errors surface as ConfigError,
// FeasibilityError or NumericalError; the CLI maps those to exit codes.

void cmd_spectrum(const RunConfig& cfg);
void cmd_table1(const RunConfig& cfg);
// Returns 0, or 3 when the operating point violates a hard constraint
// (addressing or spin-motion coupling) and force is not set.
int cmd_feasibility(const RunConfig& cfg, bool force);
void cmd_compile(const RunConfig& cfg, const std::string& circuit_path, bool force);
void cmd_simulate(const RunConfig& cfg, const std::string& schedule_path);
void cmd_scan(const RunConfig& cfg);

} // namespace ionreg
