#include "ionreg/compiler.hpp"

#include "ionreg/constants.hpp"
#include "ionreg/errors.hpp"
#include "ionreg/ion.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ionreg {
namespace k = constants;

namespace {

constexpr double angle_tol = 1e-9;

// The electron manifold an rf flip does not address sits one hyperfine
// splitting away and rings at its generalized Rabi rate for the whole pulse.
// Nudging the requested rabi rate so a pi pulse spans an integer number of
// those rings closes them, which cuts the stranded population there by
// orders of magnitude; the residual phases are deterministic and the
// executor's frame bookkeeping absorbs them.
double ring_closed_rf_rabi(const SystemLayout& lay, double rabi_hz) {
  if (lay.n_ions <= 0 || !(rabi_hz > 0.0))
    return rabi_hz;
  double delta = 0.0;
  for (int ion = 0; ion < lay.n_ions; ++ion)
    delta += rf_line_hz(lay, ion, 0.5) - rf_line_hz(lay, ion, -0.5);
  delta = std::abs(delta) / lay.n_ions;
  if (!(delta > 2.0 * rabi_hz))
    return rabi_hz;
  double cycles = std::round(delta / (2.0 * rabi_hz));
  return delta / std::sqrt(4.0 * cycles * cycles - 1.0);
}

void add_pulse(Schedule& s, const PulseSpec& spec_in) {
  PulseSpec spec = spec_in;
  if (spec.channel == Channel::rf)
    spec.rabi_hz = ring_closed_rf_rabi(s.layout, spec.rabi_hz);
  if (!(spec.rabi_hz > 0.0))
    throw std::invalid_argument("pulse needs a positive rabi rate");
  if (!(spec.angle_rad > 0.0) || spec.angle_rad > k::two_pi + angle_tol)
    throw std::invalid_argument("pulse angle must lie in (0, 2*pi]");
  PulseItem item;
  item.spec = spec;
  item.duration_s = pulse_duration_s(spec.angle_rad, spec.rabi_hz);
  s.total_duration_s += item.duration_s;
  if (spec.channel == Channel::rf && spec.target_ion == all_ions)
    for (int& count : s.parity.nonselective_rf_counts)
      ++count;
  s.items.emplace_back(item);
}

void add_delay(Schedule& s, double duration_s) {
  if (!(duration_s > 0.0))
    throw std::invalid_argument("delay must be positive");
  s.items.emplace_back(DelayItem{duration_s});
  s.total_duration_s += duration_s;
}

void add_phase_shift(Schedule& s, Channel ch, int ion, double angle_rad) {
  if (angle_rad == 0.0)
    return;
  s.items.emplace_back(PhaseShiftItem{ch, ion, angle_rad});
}

PulseSpec mw_pulse(int ion, SpinSel condition, double angle, double phase,
                   const CompileOptions& opt) {
  PulseSpec p;
  p.channel = Channel::mw;
  p.target_ion = ion;
  p.condition = condition;
  p.angle_rad = angle;
  p.phase_rad = phase;
  p.rabi_hz = opt.rabi_mw_hz;
  return p;
}

PulseSpec rf_pulse(int ion, SpinSel condition, double angle, double phase,
                   const CompileOptions& opt) {
  PulseSpec p;
  p.channel = Channel::rf;
  p.target_ion = ion;
  p.condition = condition;
  p.angle_rad = angle;
  p.phase_rad = phase;
  p.rabi_hz = opt.rabi_rf_hz;
  return p;
}

// One RF pi pulse on the upper-manifold line plus the per-ion phase
// corrections that turn the raw ladder flip into an exact electron-controlled
// nuclear NOT on each addressed ion. `nonselective` emits a single pulse
// sweeping the whole register; the corrections stay per-ion.
void emit_rf_flip(Schedule& s, const std::vector<int>& ions, bool nonselective,
                  const CompileOptions& opt) {
  if (nonselective) {
    // A shared pulse sweeps every ion, so the electron frame shift that turns
    // one resonant flip into a clean conditional flip is owed on every ion,
    // not only the addressed ones. With it each shared pulse is an exact
    // tensor product of conditional flips; the even per-gate pulse count then
    // cancels the spectator flips identically even when a spectator electron
    // is not parked.
    add_pulse(s, rf_pulse(all_ions, SpinSel::ms_up, k::pi, 0.0, opt));
    for (int ion = 0; ion < s.n_ions; ++ion) {
      add_phase_shift(s, Channel::mw, ion, k::pi / 2);
      s.global_phase_rad -= k::pi / 4;
    }
    return;
  }
  for (int ion : ions)
    add_pulse(s, rf_pulse(ion, SpinSel::ms_up, k::pi, 0.0, opt));
  for (int ion : ions) {
    add_phase_shift(s, Channel::mw, ion, k::pi / 2);
    s.global_phase_rad -= k::pi / 4;
  }
}

void emit_swap_impl(Schedule& s, int ion, const CompileOptions& opt,
                    bool nonselective_si) {
  if (opt.swap_si_first && !nonselective_si) {
    emit_rf_flip(s, {ion}, false, opt);
    emit_cnot_is(s, ion, opt);
    emit_rf_flip(s, {ion}, false, opt);
  } else {
    emit_cnot_is(s, ion, opt);
    emit_rf_flip(s, {ion}, nonselective_si, opt);
    emit_cnot_is(s, ion, opt);
  }
}

// Merged swap of both qubits on two ions at once: the two inner RF flips
// share one nonselective pulse. Interleaving is exact because operations on
// distinct ions commute.
void emit_pair_swap(Schedule& s, int ion_a, int ion_b,
                    const CompileOptions& opt) {
  emit_cnot_is(s, ion_a, opt);
  emit_cnot_is(s, ion_b, opt);
  emit_rf_flip(s, {ion_a, ion_b}, opt.nonselective_rf, opt);
  emit_cnot_is(s, ion_a, opt);
  emit_cnot_is(s, ion_b, opt);
}

struct Zyz {
  double delta = 0.0; // global phase
  double phi1 = 0.0;  // last z rotation
  double theta = 0.0; // middle y rotation, in [0, pi]
  double phi2 = 0.0;  // first z rotation
};

// u = exp(i*delta) Rz(phi1) Ry(theta) Rz(phi2) in the computational basis,
// with Rz(a) = diag(exp(-i a/2), exp(i a/2)) over (|0>, |1>).
Zyz zyz_decompose(const cmat& u) {
  Zyz out;
  cxd det = u(0, 0) * u(1, 1) - u(0, 1) * u(1, 0);
  out.delta = std::arg(det) / 2;
  cmat v = std::exp(cxd(0, -out.delta)) * u;
  double c = std::abs(v(0, 0));
  double sn = std::abs(v(1, 0));
  out.theta = 2.0 * std::atan2(sn, c);
  if (sn < 1e-14) {
    out.phi2 = 0.0;
    out.phi1 = 2.0 * std::arg(v(1, 1));
  } else if (c < 1e-14) {
    out.phi2 = 0.0;
    out.phi1 = 2.0 * std::arg(v(1, 0));
  } else {
    out.phi1 = std::arg(v(1, 1)) + std::arg(v(1, 0));
    out.phi2 = std::arg(v(1, 1)) - std::arg(v(1, 0));
  }
  return out;
}

std::vector<int> addressed_ions(const Gate& g) {
  if (g.kind == GateKind::cnot_nn)
    return {g.ion, g.ion2};
  return {g.ion};
}

} // namespace

void emit_x(Schedule& s, int ion, const CompileOptions& opt) {
  // End-to-end ladder flips on both electron manifolds so the gate acts
  // whatever the ancilla is doing; each raw flip is i*X on the qubit, so a
  // single global quarter turn fixes the pair.
  add_pulse(s, rf_pulse(ion, SpinSel::ms_down, k::pi, 0.0, opt));
  add_pulse(s, rf_pulse(ion, SpinSel::ms_up, k::pi, 0.0, opt));
  s.global_phase_rad -= k::pi / 2;
}

void emit_z(Schedule& s, int ion, const CompileOptions& opt) {
  (void)opt;
  // exp(-i (pi/7) I_z) puts opposite quarter-turn phases on the two ladder
  // ends, which is Z up to a global factor.
  add_phase_shift(s, Channel::rf, ion, k::pi / 7);
  s.global_phase_rad -= k::pi / 2;
}

void emit_rot_s(Schedule& s, int ion, double axis_phase_rad, double angle_rad,
                const CompileOptions& opt) {
  double theta = std::fmod(angle_rad, 2 * k::two_pi);
  if (theta < 0)
    theta += 2 * k::two_pi;
  if (theta > k::two_pi) {
    theta -= k::two_pi;
    s.global_phase_rad += k::pi;
  }
  if (theta == 0.0)
    return;
  // The synthesizer phase enters the rotation axis with the opposite sign of
  // the computational-basis axis angle.
  double syn = -axis_phase_rad;
  add_pulse(s, mw_pulse(ion, SpinSel::mi_top, theta, syn, opt));
  add_pulse(s, mw_pulse(ion, SpinSel::mi_bottom, theta, syn, opt));
}

void emit_cnot_si(Schedule& s, int ion, const CompileOptions& opt,
                  bool nonselective) {
  emit_rf_flip(s, {ion}, nonselective, opt);
}

void emit_cnot_is(Schedule& s, int ion, const CompileOptions& opt) {
  add_pulse(s, mw_pulse(ion, SpinSel::mi_top, k::pi, 0.0, opt));
  add_phase_shift(s, Channel::rf, ion, -k::pi / 14);
  s.global_phase_rad += k::pi / 4;
}

void emit_swap_is(Schedule& s, int ion, const CompileOptions& opt) {
  emit_swap_impl(s, ion, opt, false);
}

void emit_u_nuclear(Schedule& s, int ion, const cmat& u,
                    const CompileOptions& opt) {
  Gate probe;
  probe.kind = GateKind::u_nuclear;
  probe.u2 = u;
  validate_circuit(Circuit{1, {probe}});
  emit_swap_impl(s, ion, opt, opt.nonselective_rf);
  Zyz d = zyz_decompose(u);
  add_phase_shift(s, Channel::mw, ion, -d.phi2);
  if (d.theta > angle_tol) {
    // drive both resolved nuclear lines so the rotation is unconditional
    add_pulse(s, mw_pulse(ion, SpinSel::mi_top, d.theta, -k::pi / 2, opt));
    add_pulse(s, mw_pulse(ion, SpinSel::mi_bottom, d.theta, -k::pi / 2, opt));
  }
  add_phase_shift(s, Channel::mw, ion, -d.phi1);
  s.global_phase_rad += d.delta;
  emit_swap_impl(s, ion, opt, opt.nonselective_rf);
}

void emit_refocus_block(Schedule& s, int ion_a, int ion_b, double tau_s,
                        const CompileOptions& opt, bool nuclei_parked) {
  auto echo_pair = [&] {
    for (int ion : {ion_a, ion_b}) {
      if (nuclei_parked) {
        add_pulse(s, mw_pulse(ion, SpinSel::mi_bottom, k::pi, k::pi / 2, opt));
      } else {
        add_pulse(s, mw_pulse(ion, SpinSel::mi_top, k::pi, k::pi / 2, opt));
        add_pulse(s, mw_pulse(ion, SpinSel::mi_bottom, k::pi, k::pi / 2, opt));
      }
    }
  };
  add_delay(s, tau_s);
  echo_pair();
  add_delay(s, tau_s);
  echo_pair();
}

void emit_electron_cnot(Schedule& s, int ion_a, int ion_b,
                        const CompileOptions& opt) {
  double j = s.layout.j_rad_s(ion_a, ion_b);
  if (!(j > 0.0))
    throw std::invalid_argument("no spin-spin coupling between the gate ions");
  if (opt.method == CnotMethod::selective_line) {
    // One pi pulse per resolved nuclear line of ion_b, each sitting on the
    // component shifted by ion_a's upper manifold. The tones must stay well
    // inside the J doublet, so the rabi rate is capped at the doublet
    // splitting over the margin.
    double line_limit_hz = j / (k::two_pi * opt.margin_factor);
    for (SpinSel cond : {SpinSel::mi_top, SpinSel::mi_bottom}) {
      PulseSpec p = mw_pulse(ion_b, cond, k::pi, 0.0, opt);
      p.j_condition = JCondition{ion_a, 0.5};
      if (p.rabi_hz > line_limit_hz)
        p.rabi_hz = line_limit_hz;
      add_pulse(s, p);
    }
    add_phase_shift(s, Channel::mw, ion_a, -k::pi / 2);
    s.global_phase_rad += k::pi / 4;
    return;
  }
  auto half_turn = [&](double syn) {
    // both nuclear lines, so the rotation ignores the nuclear state
    add_pulse(s, mw_pulse(ion_b, SpinSel::mi_top, k::pi / 2, syn, opt));
    add_pulse(s, mw_pulse(ion_b, SpinSel::mi_bottom, k::pi / 2, syn, opt));
  };
  double tau = k::pi / (2.0 * j);
  half_turn(k::pi / 2);
  emit_refocus_block(s, ion_a, ion_b, tau, opt, false);
  add_phase_shift(s, Channel::mw, ion_b, -k::pi / 2);
  add_phase_shift(s, Channel::mw, ion_a, -k::pi / 2);
  half_turn(-k::pi / 2);
  s.global_phase_rad += k::pi / 4;
}

void emit_cnot_nn(Schedule& s, int ion_a, int ion_b,
                  const CompileOptions& opt) {
  emit_pair_swap(s, ion_a, ion_b, opt);
  emit_electron_cnot(s, ion_a, ion_b, opt);
  emit_pair_swap(s, ion_a, ion_b, opt);
}

void validate_schedule(const Schedule& s) {
  if (s.n_ions < 1)
    throw std::invalid_argument("schedule needs at least one ion");
  if (static_cast<int>(s.parity.nonselective_rf_counts.size()) != s.n_ions)
    throw std::invalid_argument("parity ledger size mismatch");
  double duration = 0.0;
  for (const ScheduleItem& item : s.items) {
    if (const auto* p = std::get_if<PulseItem>(&item)) {
      const PulseSpec& spec = p->spec;
      if (spec.target_ion != all_ions &&
          (spec.target_ion < 0 || spec.target_ion >= s.n_ions))
        throw std::invalid_argument("pulse target out of range");
      if (!(spec.angle_rad > 0.0) || spec.angle_rad > k::two_pi + angle_tol)
        throw std::invalid_argument("pulse angle must lie in (0, 2*pi]");
      if (!(spec.rabi_hz > 0.0))
        throw std::invalid_argument("pulse needs a positive rabi rate");
      bool mw = spec.channel == Channel::mw;
      bool cond_ok =
          mw ? (spec.condition == SpinSel::mi_top ||
                spec.condition == SpinSel::mi_bottom ||
                spec.condition == SpinSel::both)
             : (spec.condition == SpinSel::ms_up ||
                spec.condition == SpinSel::ms_down ||
                spec.condition == SpinSel::both);
      if (!cond_ok)
        throw std::invalid_argument("pulse condition does not fit its channel");
      if (spec.j_condition) {
        if (!mw)
          throw std::invalid_argument(
              "coupling-resolved lines exist only for electron transitions");
        if (spec.target_ion == all_ions)
          throw std::invalid_argument(
              "coupling-resolved pulses must address a single ion");
        if (spec.j_condition->ion < 0 || spec.j_condition->ion >= s.n_ions ||
            spec.j_condition->ion == spec.target_ion)
          throw std::invalid_argument("bad coupling-condition ion");
      }
      if (!mw && spec.target_ion == all_ions &&
          std::abs(spec.angle_rad - k::pi) > angle_tol)
        throw std::invalid_argument("nonselective RF pulses must be pi pulses");
      double expect = pulse_duration_s(spec.angle_rad, spec.rabi_hz);
      if (std::abs(p->duration_s - expect) > 1e-12 * expect)
        throw std::invalid_argument("pulse duration does not match its angle");
      duration += p->duration_s;
    } else if (const auto* d = std::get_if<DelayItem>(&item)) {
      if (!(d->duration_s > 0.0))
        throw std::invalid_argument("delay must be positive");
      duration += d->duration_s;
    } else if (const auto* ps = std::get_if<PhaseShiftItem>(&item)) {
      if (ps->ion < 0 || ps->ion >= s.n_ions)
        throw std::invalid_argument("phase shift ion out of range");
    }
  }
  if (std::abs(duration - s.total_duration_s) >
      1e-9 * std::max(1.0, duration))
    throw std::invalid_argument("schedule duration bookkeeping mismatch");
}

Schedule compile_on_layout(const Circuit& circuit, const SystemLayout& layout,
                           const CompileOptions& options) {
  validate_circuit(circuit);
  validate_layout(layout);
  if (layout.n_ions != circuit.n_ions)
    throw std::invalid_argument("circuit and layout ion counts differ");
  Schedule s;
  s.n_ions = circuit.n_ions;
  s.layout = layout;
  s.circuit = circuit;
  s.parity.nonselective_rf_counts.assign(
      static_cast<std::size_t>(circuit.n_ions), 0);
  s.frame_note =
      "per-ion rotating frames: electron lines via K = sum S_z, nuclear lines "
      "via K = -2 sum S_z I_z; delays keep only the spin-spin coupling";
  for (const Gate& g : circuit.gates) {
    std::vector<int> counts_before = s.parity.nonselective_rf_counts;
    switch (g.kind) {
    case GateKind::x:
      emit_x(s, g.ion, options);
      break;
    case GateKind::z:
      emit_z(s, g.ion, options);
      break;
    case GateKind::rot_s:
      emit_rot_s(s, g.ion, g.axis_phase_rad, g.angle_rad, options);
      break;
    case GateKind::cnot_si:
      emit_cnot_si(s, g.ion, options);
      break;
    case GateKind::cnot_is:
      emit_cnot_is(s, g.ion, options);
      break;
    case GateKind::swap_is:
      emit_swap_is(s, g.ion, options);
      break;
    case GateKind::cnot_nn:
      emit_cnot_nn(s, g.ion, g.ion2, options);
      break;
    case GateKind::u_nuclear:
      emit_u_nuclear(s, g.ion, g.u2, options);
      break;
    }
    std::vector<int> touched = addressed_ions(g);
    for (int ion = 0; ion < s.n_ions; ++ion) {
      bool is_target = false;
      for (int t : touched)
        is_target = is_target || t == ion;
      if (is_target)
        continue;
      int delta = s.parity.nonselective_rf_counts[static_cast<std::size_t>(
                      ion)] -
                  counts_before[static_cast<std::size_t>(ion)];
      if (delta % 2 != 0)
        throw std::logic_error(
            "compiler emitted an odd nonselective RF count on a bystander ion");
    }
  }
  validate_schedule(s);
  return s;
}

Schedule compile(const Circuit& circuit, const TrapParams& trap,
                 const CompileOptions& options) {
  validate_circuit(circuit);
  if (trap.n_ions != circuit.n_ions)
    throw std::invalid_argument("circuit and trap ion counts differ");
  SystemLayout layout = layout_from_trap(trap, options.kappa);
  CompileOptions opt = options;
  if (circuit.n_ions > 1) {
    FeasibilityReport rep = feasibility_report(
        trap, options.rabi_mw_hz, 1.0e-3, options.margin_factor);
    if (opt.rabi_mw_hz > rep.rabi_limit_hz)
      opt.rabi_mw_hz = rep.rabi_limit_hz;
    if (!options.force && !(rep.addressing_ok && rep.epsilon_ok)) {
      std::ostringstream msg;
      msg << "layout fails the feasibility gate:";
      for (const std::string& m : rep.messages)
        msg << "\n  " << m;
      throw FeasibilityError(msg.str());
    }
  }
  return compile_on_layout(circuit, layout, opt);
}

} // namespace ionreg
