#include "CLI11.hpp"

#include "ionreg/commands.hpp"
#include "ionreg/config.hpp"
#include "ionreg/errors.hpp"
#include "ionreg/io.hpp"

#include <cstdint>
#include <iostream>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"Simulator and pulse-sequence compiler for electron/nuclear "
               "spin registers in a static field gradient"};
  app.require_subcommand(1);

  std::string config_path, out_dir, format, channel, mode;
  std::string circuit_path, schedule_path;
  std::uint64_t seed = 0;
  bool force = false;

  app.add_option("--config", config_path, "Config file (key = value lines, or JSON)");
  auto* out_opt = app.add_option("--out-dir", out_dir, "Directory for output files");
  auto* fmt_opt = app.add_option("--format", format, "Output format")
                      ->check(CLI::IsMember({"csv", "json", "text"}));
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed for noise sampling");
  app.add_flag("--force", force, "Proceed past feasibility violations");

  auto* sc_spectrum =
      app.add_subcommand("spectrum", "Write transition stick spectra (CSV and JSON)");
  auto* ch_opt = sc_spectrum->add_option("--channel", channel, "Restrict to one channel")
                     ->check(CLI::IsMember({"mw", "rf", "both"}));

  app.add_subcommand("table1", "Recompute the two-ion benchmark operating points");

  auto* sc_compile =
      app.add_subcommand("compile", "Lower a circuit file to a pulse schedule");
  sc_compile->add_option("circuit", circuit_path, "Circuit file (text or JSON)")
      ->required();

  auto* sc_simulate = app.add_subcommand("simulate", "Execute a compiled schedule");
  sc_simulate->add_option("schedule", schedule_path, "Schedule JSON from compile")
      ->required();
  auto* mode_opt = sc_simulate->add_option("--mode", mode, "Execution mode")
                       ->check(CLI::IsMember({"ideal", "physical", "labframe-oracle"}));

  app.add_subcommand("feasibility", "Check the configured operating point");
  app.add_subcommand("scan", "Sweep the rabi rate of a nucleus-conditioned flip");

  CLI11_PARSE(app, argc, argv);

  try {
    ionreg::RunConfig cfg;
    if (!config_path.empty())
      cfg = ionreg::parse_config_any(ionreg::read_file(config_path));
    if (out_opt->count() > 0) cfg.out_dir = out_dir;
    if (fmt_opt->count() > 0) cfg.format = format;
    if (seed_opt->count() > 0) cfg.seed = seed;
    if (ch_opt->count() > 0) cfg.spectrum_channel = channel;
    if (mode_opt->count() > 0) cfg.mode = mode;
    ionreg::validate_config(cfg);

    if (sc_spectrum->parsed()) {
      ionreg::cmd_spectrum(cfg);
    } else if (app.get_subcommand("table1")->parsed()) {
      ionreg::cmd_table1(cfg);
    } else if (app.get_subcommand("feasibility")->parsed()) {
      return ionreg::cmd_feasibility(cfg, force);
    } else if (sc_compile->parsed()) {
      ionreg::cmd_compile(cfg, circuit_path, force);
    } else if (sc_simulate->parsed()) {
      ionreg::cmd_simulate(cfg, schedule_path);
    } else {
      ionreg::cmd_scan(cfg);
    }
    return 0;
  } catch (const ionreg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ionreg::FeasibilityError& e) {
    std::cerr << "feasibility error: " << e.what() << "\n";
    return 3;
  } catch (const ionreg::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
