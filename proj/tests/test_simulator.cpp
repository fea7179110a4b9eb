#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ionreg/compiler.hpp"
#include "ionreg/constants.hpp"
#include "ionreg/errors.hpp"
#include "ionreg/simulate.hpp"
#include "ionreg/trap.hpp"

#include <cmath>
#include <complex>
#include <cstring>

using namespace ionreg;
namespace k = ionreg::constants;

namespace {

SystemLayout one_ion() {
  SystemLayout lay;
  lay.species = ca43_defaults();
  lay.n_ions = 1;
  lay.b0_tesla = 1.0;
  lay.gradient_t_per_m = 0.0;
  lay.positions_m = {0.0};
  lay.j_rad_s = Eigen::MatrixXd::Zero(1, 1);
  return lay;
}

TrapParams row1_trap(int n_ions) {
  TrapParams t;
  t.nu1_rad_s = k::two_pi * 1.0e6;
  t.n_ions = n_ions;
  t.species = ca43_defaults();
  t.gradient_t_per_m = 450.0;
  t.b0_tesla = 1.0;
  return t;
}

double max_dev(const cmat& a, const cmat& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

Schedule blank(const SystemLayout& lay) {
  Schedule s;
  s.n_ions = lay.n_ions;
  s.layout = lay;
  s.circuit.n_ions = lay.n_ions;
  s.parity.nonselective_rf_counts.assign(static_cast<std::size_t>(lay.n_ions), 0);
  return s;
}

void push_delay(Schedule& s, double tau_s) {
  DelayItem d;
  d.duration_s = tau_s;
  s.items.emplace_back(d);
  s.total_duration_s += tau_s;
}

void push_pulse(Schedule& s, const PulseSpec& spec) {
  PulseItem item;
  item.spec = spec;
  item.duration_s = pulse_duration_s(spec.angle_rad, spec.rabi_hz);
  s.items.emplace_back(item);
  s.total_duration_s += item.duration_s;
}

PulseSpec rf_pulse_spec(int ion, SpinSel cond, double angle, double phase) {
  PulseSpec p;
  p.channel = Channel::rf;
  p.target_ion = ion;
  p.condition = cond;
  p.angle_rad = angle;
  p.phase_rad = phase;
  p.rabi_hz = 1.0e5;
  return p;
}

Gate make_gate(GateKind kind, int ion, int ion2 = 0) {
  Gate g;
  g.kind = kind;
  g.ion = ion;
  g.ion2 = ion2;
  return g;
}

Circuit single_gate(int n_ions, const Gate& g) {
  Circuit c;
  c.n_ions = n_ions;
  c.gates = {g};
  return c;
}

bool bitwise_equal(const cmat& a, const cmat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    return false;
  return std::memcmp(a.data(), b.data(),
                     sizeof(cxd) * static_cast<std::size_t>(a.size())) == 0;
}

// Species with every field-dependent scale reduced by the given factor, so
// lab-frame integration over a fixed number of carrier cycles stays cheap.
IonSpecies scaled_species(double scale) {
  IonSpecies sp = ca43_defaults();
  sp.hyperfine_a_hz *= scale;
  sp.electron_gamma_hz_per_t *= scale;
  sp.nuclear_gamma_hz_per_t *= scale;
  return sp;
}

} // namespace

// ---------------------------------------------------------------------------
// Drive frequency assignment.
// ---------------------------------------------------------------------------

TEST_CASE("pulse frequencies come from the resolved lines of the nominal layout") {
  const auto lay = one_ion();

  PulseSpec rf_up = rf_pulse_spec(0, SpinSel::ms_up, k::pi, 0.0);
  CHECK(schedule_pulse_frequency_hz(lay, rf_up) == doctest::Approx(406.05e6).epsilon(1e-9));
  PulseSpec rf_dn = rf_pulse_spec(0, SpinSel::ms_down, k::pi, 0.0);
  CHECK(schedule_pulse_frequency_hz(lay, rf_dn) == doctest::Approx(400.35e6).epsilon(1e-9));

  PulseSpec mw_top;
  mw_top.channel = Channel::mw;
  mw_top.target_ion = 0;
  mw_top.condition = SpinSel::mi_top;
  mw_top.angle_rad = k::pi;
  mw_top.rabi_hz = 1.0e6;
  CHECK(schedule_pulse_frequency_hz(lay, mw_top) ==
        doctest::Approx(25.1976e9).epsilon(1e-12));
  PulseSpec mw_bot = mw_top;
  mw_bot.condition = SpinSel::mi_bottom;
  CHECK(schedule_pulse_frequency_hz(lay, mw_bot) ==
        doctest::Approx(30.8424e9).epsilon(1e-12));

  // a pulse conditioned on both manifolds has no single resonant line
  PulseSpec rf_both = rf_pulse_spec(0, SpinSel::both, k::pi, 0.0);
  CHECK_THROWS_AS(schedule_pulse_frequency_hz(lay, rf_both), NumericalError);
}

TEST_CASE("a shared pulse is driven at the mean of the per-ion lines") {
  const auto lay = layout_from_trap(row1_trap(2));
  PulseSpec shared = rf_pulse_spec(all_ions, SpinSel::ms_up, k::pi, 0.0);
  const double f_shared = schedule_pulse_frequency_hz(lay, shared);
  PulseSpec p0 = rf_pulse_spec(0, SpinSel::ms_up, k::pi, 0.0);
  PulseSpec p1 = rf_pulse_spec(1, SpinSel::ms_up, k::pi, 0.0);
  const double f0 = schedule_pulse_frequency_hz(lay, p0);
  const double f1 = schedule_pulse_frequency_hz(lay, p1);
  CHECK(f_shared == doctest::Approx(0.5 * (f0 + f1)).epsilon(1e-14));
  CHECK(f0 != f1); // the gradient really splits the ions
}

// ---------------------------------------------------------------------------
// Comparison frame of the physical executor.
// ---------------------------------------------------------------------------

TEST_CASE("a bare delay keeps only the spin-spin coupling phase") {
  const auto lay = layout_from_trap(row1_trap(2));
  const double tau = 1.0e-4;
  Schedule s = blank(lay);
  push_delay(s, tau);
  const cmat u = execute_physical(s);

  // both nuclei at the top of the ladder, electron patterns (s0, s1);
  // full-space index = s0*128 + i0*16 + s1*8 + i1
  const double j01 = lay.j_rad_s(0, 1);
  for (int s0 = 0; s0 < 2; ++s0) {
    for (int s1 = 0; s1 < 2; ++s1) {
      const int idx = s0 * 128 + s1 * 8;
      const double m0 = s0 == 0 ? 0.5 : -0.5;
      const double m1 = s1 == 0 ? 0.5 : -0.5;
      const cxd expect = std::polar(1.0, tau * j01 * m0 * m1);
      // the executor forms this phase by cancelling local diagonals of order
      // 1e11 rad/s, so the last ~1e-5 rad/s of each term is rounding; over
      // tau that bounds the phase error near 1e-9
      CHECK(std::abs(u(idx, idx) - expect) < 1e-8);
    }
  }
  CHECK(max_dev(u * u.adjoint(), cmat::Identity(256, 256)) < 1e-10);
}

TEST_CASE("a field offset during a delay shows up as the idle electron phase") {
  const auto lay = one_ion();
  const double tau = 1.0e-3;
  const double db = 1.0e-8;
  Schedule s = blank(lay);
  push_delay(s, tau);

  ExecOptions opt;
  SystemLayout shifted = lay;
  shifted.b0_tesla += db;
  opt.exec_layout = shifted;
  const cmat u = execute_physical(s, opt);

  // relative phase between the two electron manifolds at fixed m_I = +7/2:
  // 2*pi*gamma_S*dB*tau
  const double rel = std::arg(u(8, 8) / u(0, 0));
  const double expect = k::two_pi * 28.02e9 * db * tau; // 1.7605 rad
  CHECK(std::abs(rel - std::remainder(expect, k::two_pi)) < 1e-6);
  CHECK(expect == doctest::Approx(1.76054).epsilon(1e-4));
}

// ---------------------------------------------------------------------------
// Physical execution of compiled fragments at nominal field.
// ---------------------------------------------------------------------------

TEST_CASE("electron-conditioned nuclear flip survives physical execution") {
  const auto lay = one_ion();
  CompileOptions copt;
  const Schedule s =
      compile_on_layout(single_gate(1, make_gate(GateKind::cnot_si, 0)), lay, copt);
  const cmat u = execute_physical(s);
  const GateMetrics m = physical_metrics(u, s);
  CHECK(m.fidelity > 0.999);
  CHECK(m.leakage < 1.0e-4);
  CHECK(max_dev(u * u.adjoint(), cmat::Identity(16, 16)) < 1e-10);
}

TEST_CASE("nucleus-conditioned electron flip survives physical execution") {
  const auto lay = one_ion();
  CompileOptions copt;
  const Schedule s =
      compile_on_layout(single_gate(1, make_gate(GateKind::cnot_is, 0)), lay, copt);
  const GateMetrics m = physical_metrics(execute_physical(s), s);
  CHECK(m.fidelity > 0.999);
  CHECK(m.leakage < 1.0e-4);
}

TEST_CASE("compiled swap survives physical execution") {
  const auto lay = one_ion();
  CompileOptions copt;
  const Schedule s =
      compile_on_layout(single_gate(1, make_gate(GateKind::swap_is, 0)), lay, copt);
  const GateMetrics m = physical_metrics(execute_physical(s), s);
  CHECK(m.fidelity > 0.998);
  CHECK(m.leakage < 1.0e-3);
}

TEST_CASE("two-ion nucleus-nucleus CNOT meets its physical fidelity budget") {
  CompileOptions copt;
  Circuit c;
  c.n_ions = 2;
  c.gates = {make_gate(GateKind::cnot_nn, 0, 1)};
  const Schedule s = compile(c, row1_trap(2), copt);
  const GateMetrics m = physical_metrics(execute_physical(s), s);
  CHECK(m.fidelity > 0.99);
  CHECK(m.leakage < 0.02);
}

// ---------------------------------------------------------------------------
// Coupling cancellation is exact at the bit level.
// ---------------------------------------------------------------------------

TEST_CASE("refocused evolution is bitwise independent of passive couplings") {
  auto lay = layout_from_trap(row1_trap(3));
  CompileOptions copt;
  const double tau = k::pi / (2.0 * lay.j_rad_s(0, 1));

  Schedule a = blank(lay);
  emit_refocus_block(a, 0, 1, tau, copt, false);

  SystemLayout other = lay;
  other.j_rad_s(0, 2) *= 17.3;
  other.j_rad_s(2, 0) *= 17.3;
  other.j_rad_s(1, 2) += 250.0;
  other.j_rad_s(2, 1) += 250.0;
  Schedule b = blank(other);
  emit_refocus_block(b, 0, 1, tau, copt, false);

  const cmat ua = execute_ideal(a);
  const cmat ub = execute_ideal(b);
  REQUIRE(ua.rows() == 64);
  CHECK(bitwise_equal(ua, ub));

  // and the rendered phase on the active pair is the designed one
  const cxd top = ua(0, 0); // both electrons up: m0*m1 = +1/4
  CHECK(std::abs(top - std::polar(1.0, 2.0 * tau * lay.j_rad_s(0, 1) * 0.25)) < 1e-12);
}

// ---------------------------------------------------------------------------
// Monte Carlo dephasing.
// ---------------------------------------------------------------------------

TEST_CASE("idle dephasing reproduces the analytic phase spread") {
  const auto lay = one_ion();
  Schedule s = blank(lay);
  push_delay(s, 1.0e-3);

  NoiseSpec noise;
  noise.delta_b_rms_tesla = 1.0e-8;
  noise.trials = 400;
  noise.seed = 11;
  const DephasingResult r = dephasing_mc(s, noise);
  // electron phase spread 2*pi*gamma_S*sigma_B*tau = 1.7605 rad; allow
  // sampling fluctuation of a 400-trial standard deviation
  CHECK(r.phase_std_rad > 1.55);
  CHECK(r.phase_std_rad < 1.97);
  // the stored qubit rides the nuclear moment, four orders of magnitude
  // stiffer against the same field noise, so while the electron phase is
  // fully randomized the memory fidelity barely moves
  CHECK(r.mean_fidelity > 0.9999);
  CHECK(r.mean_fidelity <= 1.0 + 1e-12);
  CHECK(r.fidelities.size() == 400);
  CHECK(r.stderr_fidelity >= 0.0);
}

TEST_CASE("zero field noise leaves an idle register untouched") {
  const auto lay = one_ion();
  Schedule s = blank(lay);
  push_delay(s, 1.0e-3);
  NoiseSpec noise;
  noise.delta_b_rms_tesla = 0.0;
  noise.trials = 20;
  noise.seed = 3;
  const DephasingResult r = dephasing_mc(s, noise);
  CHECK(r.mean_fidelity == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.phase_std_rad == doctest::Approx(0.0));
}

TEST_CASE("matched-seed fidelity falls monotonically with noise amplitude") {
  const auto lay = one_ion();
  Schedule s = blank(lay);
  push_delay(s, 1.0e-3);
  double last = 2.0;
  for (double sigma : {0.0, 1.0e-9, 2.0e-9, 3.0e-9}) {
    NoiseSpec noise;
    noise.delta_b_rms_tesla = sigma;
    noise.trials = 100;
    noise.seed = 5;
    const DephasingResult r = dephasing_mc(s, noise);
    CHECK(r.mean_fidelity < last);
    last = r.mean_fidelity;
  }
}

TEST_CASE("equal seeds give bitwise identical noise runs") {
  const auto lay = one_ion();
  Schedule s = blank(lay);
  push_delay(s, 1.0e-3);
  NoiseSpec noise;
  noise.delta_b_rms_tesla = 1.0e-8;
  noise.trials = 50;
  noise.seed = 42;
  const DephasingResult r1 = dephasing_mc(s, noise);
  const DephasingResult r2 = dephasing_mc(s, noise);
  REQUIRE(r1.fidelities.size() == r2.fidelities.size());
  CHECK(std::memcmp(r1.fidelities.data(), r2.fidelities.data(),
                    sizeof(double) * r1.fidelities.size()) == 0);
  CHECK(r1.mean_fidelity == r2.mean_fidelity);
}

// ---------------------------------------------------------------------------
// Lab-frame cross-check on a scaled system.
// ---------------------------------------------------------------------------

TEST_CASE("rotating-wave pulse matches direct lab-frame integration") {
  SystemLayout lay = one_ion();
  lay.species = scaled_species(1.0e-4);

  const double f = mw_line_hz(lay, 0, 3.5); // top-line electron flip
  DriveParams drive;
  drive.frequency_hz = f;
  drive.rabi_s_hz = 1.0e-3 * f;
  drive.phase_rad = 0.0;
  drive.target_ion = 0;
  const double dur = 0.5 / drive.rabi_s_hz; // pi pulse

  const cmat u_lab = integrate_labframe(lay, Channel::mw, drive, dur, 256);
  CHECK(max_dev(u_lab * u_lab.adjoint(), cmat::Identity(16, 16)) < 1e-9);

  const cmat u_rwa = mat_exp_hermitian(build_h1_rwa(lay, drive, Channel::mw), dur);
  // the rotating-frame pulse really is the intended two-level flip
  CHECK(std::abs(u_rwa(8, 0)) > 0.995);

  const cmat u_rwa_lab = rwa_to_lab(lay, Channel::mw, f, u_rwa, dur);
  const double td = unitary_trace_distance(u_lab, u_rwa_lab);
  CHECK(td < 1.0e-3);
  CHECK(td > 1.0e-7); // the two treatments are not trivially identical
}

// ---------------------------------------------------------------------------
// Selectivity scan.
// ---------------------------------------------------------------------------

TEST_CASE("conditional-flip error grows with rabi rate") {
  const auto lay = layout_from_trap(row1_trap(2));
  const std::vector<double> grid = {2.0e5, 4.0e5, 8.0e5};
  const auto points = selectivity_scan(lay, 1, grid);
  REQUIRE(points.size() == 3);
  CHECK(points[0].rabi_hz == doctest::Approx(2.0e5));
  CHECK(points[0].infidelity < points[1].infidelity);
  CHECK(points[1].infidelity < points[2].infidelity);
  CHECK(points[2].infidelity / points[0].infidelity > 4.0);
  for (const auto& p : points) {
    CHECK(p.infidelity > 0.0);
    CHECK(p.leakage < 1.0e-3);
  }
}

// ---------------------------------------------------------------------------
// Guard rails.
// ---------------------------------------------------------------------------

TEST_CASE("generic-angle nuclear pulses are rejected by the truncated model") {
  const auto lay = one_ion();
  Schedule s = blank(lay);
  push_pulse(s, rf_pulse_spec(0, SpinSel::ms_up, 1.0, 0.0));
  CHECK_THROWS_AS(execute_ideal(s), NumericalError);
}

TEST_CASE("computational overlap scoring ignores global phase") {
  const cmat id = cmat::Identity(16, 16);
  const cmat rot = std::polar(1.0, 0.73) * id;
  CHECK(truncated_fidelity(rot, id, true) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(truncated_fidelity(rot, id, false) == doctest::Approx(1.0).epsilon(1e-12));
}
