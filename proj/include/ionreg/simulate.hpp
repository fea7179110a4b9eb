#pragma once

#include "ionreg/schedule.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace ionreg {

enum class ExecMode { ideal, physical_rwa };

struct ExecOptions {
  // Ideal-mode hooks: residual per-ion frame detunings (rad/s) applied during
  // delays with the sign convention of the static Hamiltonian, i.e. an extra
  // sum_i (s_off[i] S_z^i - i_off[i] I_z^i). Empty means zero. Used to probe
  // what the echo sequences cancel; production runs leave them empty.
  std::vector<double> ideal_electron_offset_rad_s;
  std::vector<double> ideal_nuclear_offset_rad_s;
  // Physical mode: execute against this layout (e.g. a shifted field) while
  // keeping frames and drive frequencies from the schedule's nominal layout.
  std::optional<SystemLayout> exec_layout;
};

// Renders the schedule on the truncated register (dimension 4^n): pulses act
// as exact conditional rotations, delays keep only the spin-spin coupling
// (plus any injected frame offsets). Pi and 2*pi pulses follow a fast
// permutation-with-phases path whose output is bitwise independent of
// couplings that cancel; other angles fall back to dense algebra.
cmat execute_ideal(const Schedule& s, const ExecOptions& opt = {});

// Renders the schedule on the full product space with piecewise-constant
// rotating-wave segments, reported in the comparison frame that removes the
// nominal single-ion diagonal evolution. Drive frequencies and frames come
// from the schedule's nominal layout; the physics runs on opt.exec_layout
// when set (field drifts show up as detunings and extra phases).
cmat execute_physical(const Schedule& s, const ExecOptions& opt = {});

struct GateMetrics {
  double fidelity = 0.0; // overlap with the circuit target, parked electrons
  double leakage = 0.0;  // worst-case population outside the qubit levels
};

// Fidelity of a full-space realized unitary against the schedule's circuit
// target over the computational columns (electrons parked, nuclei in each
// basis pattern), |sum of column overlaps| / 2^n; leakage is the maximum
// population leaving the m_I = +/-I subspace over the same inputs.
GateMetrics physical_metrics(const cmat& realized_full, const Schedule& s);

// Same overlap taken on the truncated space. With parked_only the sum runs
// over the 2^n electron-parked columns, otherwise over all 4^n.
double truncated_fidelity(const cmat& realized_trunc, const cmat& target_trunc,
                          bool parked_only);

// Direct lab-frame integration of one drive segment (midpoint exponential
// rule, steps_per_cycle samples per period of the fastest frequency), for
// validating the rotating-wave treatment on scaled-down systems.
cmat integrate_labframe(const SystemLayout& layout, Channel channel,
                        const DriveParams& drive, double duration_s,
                        int steps_per_cycle = 256);

// Transforms a rotating-frame propagator started at t = 0 back to the lab
// frame: exp(-i*2*pi*f*K*T) * u_rwa.
cmat rwa_to_lab(const SystemLayout& layout, Channel channel,
                double frequency_hz, const cmat& u_rwa, double duration_s);

// Drive frequency the physical executor assigns to a pulse on the given
// nominal layout: the resolved line of the target ion, or the mean line for
// a nonselective pulse.
double schedule_pulse_frequency_hz(const SystemLayout& nominal,
                                   const PulseSpec& spec);

struct NoiseSpec {
  double delta_b_rms_tesla = 0.0;
  int trials = 100;
  std::uint64_t seed = 1;
};

struct DephasingResult {
  double mean_fidelity = 0.0;
  double stderr_fidelity = 0.0;
  // sample standard deviation of the idle electron phase 2*pi*gamma_S*dB*T
  double phase_std_rad = 0.0;
  std::vector<double> fidelities;
};

// Monte Carlo over shot-to-shot uniform field offsets: each trial executes
// the schedule physically at b0 + dB with nominal frames and scores the
// computational-subspace fidelity.
DephasingResult dephasing_mc(const Schedule& s, const NoiseSpec& noise);

struct ScanPoint {
  double rabi_hz = 0.0;
  double infidelity = 0.0;
  double leakage = 0.0;
};

// Rabi-rate sweep of the nucleus-controlled electron flip on one ion:
// compiles the single-gate circuit at each rabi rate, executes physically,
// and records 1 - fidelity and leakage.
std::vector<ScanPoint> selectivity_scan(const SystemLayout& layout, int ion,
                                        const std::vector<double>& rabi_hz);

} // namespace ionreg
