#pragma once

#include "ionreg/schedule.hpp"
#include "ionreg/trap.hpp"

namespace ionreg {

enum class CnotMethod {
  two_pulse_delay, // two pi/2 pulses around a refocused coupling delay
  selective_line,  // one pi pulse on a J-resolved line of the target
};

struct CompileOptions {
  bool nonselective_rf = true;
  CnotMethod method = CnotMethod::two_pulse_delay;
  double rabi_mw_hz = 1.0e6;
  // Shared rf pulses leave each ion slightly detuned once a gradient splits
  // the nuclear lines; the stranded population falls off as the square of
  // that detuning over the rabi rate, so the default sits well above the
  // row-1 split while keeping a wide margin below the 5.7 MHz manifold
  // separation that conditioning relies on.
  double rabi_rf_hz = 2.0e5;
  double margin_factor = 10.0;
  bool force = false;          // skip the feasibility gate
  bool swap_si_first = false;  // standalone swap ordering SI,IS,SI
  double kappa = default_kappa;
};

// Lowers a circuit to a pulse schedule against the trap's nominal layout.
// For registers with more than one ion the microwave rabi rate is clipped to
// electron_separation / margin_factor and the feasibility gate must pass
// unless options.force is set.
Schedule compile(const Circuit& circuit, const TrapParams& trap,
                 const CompileOptions& options);

// As above for a caller-supplied layout (no trap solve, no feasibility gate).
Schedule compile_on_layout(const Circuit& circuit, const SystemLayout& layout,
                           const CompileOptions& options);

// Fragment emitters. Each appends items to s and updates parity, duration
// and global phase bookkeeping; targets are 0-based ion indices.
void emit_x(Schedule& s, int ion, const CompileOptions& opt);
void emit_z(Schedule& s, int ion, const CompileOptions& opt);
void emit_rot_s(Schedule& s, int ion, double axis_phase_rad, double angle_rad,
                const CompileOptions& opt);
void emit_cnot_si(Schedule& s, int ion, const CompileOptions& opt,
                  bool nonselective = false);
void emit_cnot_is(Schedule& s, int ion, const CompileOptions& opt);
void emit_swap_is(Schedule& s, int ion, const CompileOptions& opt);
void emit_u_nuclear(Schedule& s, int ion, const cmat& u,
                    const CompileOptions& opt);

// Spin-echo block around two coupling delays of tau each: delay, pi pair on
// both active ions, delay, pi pair again. Renders exp(+i*2*tau*J_ij*Sz_i*Sz_j)
// on the active pair while single-spin phases and couplings to passive ions
// cancel. With nuclei_parked the echo pulses address the bottom nuclear
// spectator line only; otherwise each is lowered to a two-line pair.
void emit_refocus_block(Schedule& s, int ion_a, int ion_b, double tau_s,
                        const CompileOptions& opt, bool nuclei_parked);

// Electron-electron CNOT (control ion_a). Every electron pulse drives both
// resolved nuclear lines, so the gate is exact whatever the nuclei hold.
void emit_electron_cnot(Schedule& s, int ion_a, int ion_b,
                        const CompileOptions& opt);

// Full nucleus-nucleus CNOT: swap both qubits onto the electrons, run the
// electron CNOT, swap back.
void emit_cnot_nn(Schedule& s, int ion_a, int ion_b,
                  const CompileOptions& opt);

} // namespace ionreg
