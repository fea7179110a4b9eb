#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ionreg/compiler.hpp"
#include "ionreg/constants.hpp"
#include "ionreg/errors.hpp"
#include "ionreg/simulate.hpp"
#include "ionreg/trap.hpp"

#include <cmath>
#include <random>

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

void push_pulse(Schedule& s, const PulseSpec& spec) {
  PulseItem item;
  item.spec = spec;
  item.duration_s = pulse_duration_s(spec.angle_rad, spec.rabi_hz);
  s.items.emplace_back(item);
  s.total_duration_s += item.duration_s;
}

PulseSpec rf_pi(SpinSel cond, double phase) {
  PulseSpec p;
  p.channel = Channel::rf;
  p.target_ion = 0;
  p.condition = cond;
  p.angle_rad = k::pi;
  p.phase_rad = phase;
  p.rabi_hz = 1.0e5;
  return p;
}

PulseSpec mw_pi(SpinSel cond, double phase) {
  PulseSpec p;
  p.channel = Channel::mw;
  p.target_ion = 0;
  p.condition = cond;
  p.angle_rad = k::pi;
  p.phase_rad = phase;
  p.rabi_hz = 1.0e6;
  return p;
}

// Frame z-shifts on the truncated single-ion space, matching the rendering
// of PhaseShiftItem: exp(-i a S_z) and exp(-i a I_z) with I_z = +/-7/2 on
// the computational nuclear states.
cmat shift_mw(double a) {
  cmat d = cmat::Zero(4, 4);
  d(0, 0) = d(1, 1) = std::polar(1.0, -0.5 * a);
  d(2, 2) = d(3, 3) = std::polar(1.0, 0.5 * a);
  return d;
}

cmat shift_rf(double a) {
  cmat d = cmat::Zero(4, 4);
  d(0, 0) = d(2, 2) = std::polar(1.0, -3.5 * a);
  d(1, 1) = d(3, 3) = std::polar(1.0, 3.5 * a);
  return d;
}

Gate make_gate(GateKind kind, int ion, int ion2 = 0) {
  Gate g;
  g.kind = kind;
  g.ion = ion;
  g.ion2 = ion2;
  return g;
}

Circuit single_gate(const SystemLayout& lay, const Gate& g) {
  Circuit c;
  c.n_ions = lay.n_ions;
  c.gates = {g};
  return c;
}

cmat random_u2(unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> ang(-k::pi, k::pi);
  const double a = ang(rng), b = std::abs(ang(rng)) * 0.5, c = ang(rng), d = ang(rng);
  cmat rza = cmat::Zero(2, 2), ryb = cmat::Zero(2, 2), rzc = cmat::Zero(2, 2);
  rza(0, 0) = std::polar(1.0, -a / 2);
  rza(1, 1) = std::polar(1.0, a / 2);
  rzc(0, 0) = std::polar(1.0, -c / 2);
  rzc(1, 1) = std::polar(1.0, c / 2);
  ryb(0, 0) = ryb(1, 1) = std::cos(b / 2);
  ryb(0, 1) = -std::sin(b / 2);
  ryb(1, 0) = std::sin(b / 2);
  return std::polar(1.0, d) * rza * ryb * rzc;
}

} // namespace

// ---------------------------------------------------------------------------
// Gate target oracles: hand-built matrices in the truncated per-ion order
// (S1 I1), (S1 I0), (S0 I1), (S0 I0).
// ---------------------------------------------------------------------------

TEST_CASE("single-ion gate targets match hand-built matrices") {
  cmat csi = cmat::Identity(4, 4);
  csi(0, 0) = csi(1, 1) = 0;
  csi(0, 1) = csi(1, 0) = 1; // electron 1 flips the nucleus
  CHECK(max_dev(gate_unitary_truncated(make_gate(GateKind::cnot_si, 0), 1), csi) == 0);

  cmat cis = cmat::Identity(4, 4);
  cis(0, 0) = cis(2, 2) = 0;
  cis(0, 2) = cis(2, 0) = 1; // nucleus 1 flips the electron
  CHECK(max_dev(gate_unitary_truncated(make_gate(GateKind::cnot_is, 0), 1), cis) == 0);

  cmat swp = cmat::Identity(4, 4);
  swp(1, 1) = swp(2, 2) = 0;
  swp(1, 2) = swp(2, 1) = 1;
  CHECK(max_dev(gate_unitary_truncated(make_gate(GateKind::swap_is, 0), 1), swp) == 0);

  cmat x = cmat::Zero(4, 4);
  x(0, 1) = x(1, 0) = x(2, 3) = x(3, 2) = 1;
  CHECK(max_dev(gate_unitary_truncated(make_gate(GateKind::x, 0), 1), x) == 0);

  cmat z = cmat::Zero(4, 4);
  z(0, 0) = z(2, 2) = -1;
  z(1, 1) = z(3, 3) = 1;
  CHECK(max_dev(gate_unitary_truncated(make_gate(GateKind::z, 0), 1), z) == 0);
}

TEST_CASE("electron rotation target: equatorial-axis rotation on the electron qubit") {
  const double phi = 0.8, theta = 1.9;
  Gate g = make_gate(GateKind::rot_s, 0);
  g.axis_phase_rad = phi;
  g.angle_rad = theta;
  // value-basis 2x2 on (|0>, |1>), embedded with identity on the nucleus
  const cxd c = std::cos(theta / 2), s01 = cxd(0, -1) * std::sin(theta / 2);
  cmat expect = cmat::Zero(4, 4);
  // electron value 1 = indices 0,1; value 0 = indices 2,3; nucleus untouched
  for (int nuc = 0; nuc < 2; ++nuc) {
    const int i1 = nuc, i0 = 2 + nuc;
    expect(i0, i0) = c;
    expect(i1, i1) = c;
    expect(i0, i1) = s01 * std::polar(1.0, -phi);
    expect(i1, i0) = s01 * std::polar(1.0, phi);
  }
  CHECK(max_dev(gate_unitary_truncated(g, 1), expect) < 1e-15);
}

TEST_CASE("two-ion nucleus-nucleus CNOT target") {
  const cmat u = gate_unitary_truncated(make_gate(GateKind::cnot_nn, 0, 1), 2);
  for (int col = 0; col < 16; ++col) {
    const int d0 = col / 4, d1 = col % 4;
    const bool control_one = (d0 & 1) == 0; // ion-0 nuclear value 1
    const int d1_out = control_one ? (d1 ^ 1) : d1;
    const int row = d0 * 4 + d1_out;
    for (int r = 0; r < 16; ++r)
      CHECK(std::abs(u(r, col) - (r == row ? 1.0 : 0.0)) < 1e-15);
  }
}

TEST_CASE("circuit text round-trips through parse") {
  Circuit c;
  c.n_ions = 2;
  c.gates.push_back(make_gate(GateKind::x, 0));
  c.gates.push_back(make_gate(GateKind::cnot_nn, 1, 0));
  Gate rot = make_gate(GateKind::rot_s, 1);
  rot.axis_phase_rad = -1.234567890123, rot.angle_rad = 2.5;
  c.gates.push_back(rot);
  Gate un = make_gate(GateKind::u_nuclear, 0);
  un.u2 = random_u2(5);
  c.gates.push_back(un);

  const Circuit back = parse_circuit_text(circuit_to_text(c), 2);
  REQUIRE(back.gates.size() == c.gates.size());
  CHECK(max_dev(circuit_target_unitary(back), circuit_target_unitary(c)) == 0);
}

// ---------------------------------------------------------------------------
// Correction derivations: execute the bare resonant pulse of each fragment
// and verify that the documented frame/global corrections are exactly the
// ones that complete it to the gate target.
// ---------------------------------------------------------------------------

TEST_CASE("derivation: electron-conditioned nuclear flip needs +pi/2 electron shift") {
  const auto lay = one_ion();
  Schedule s = blank(lay);
  push_pulse(s, rf_pi(SpinSel::ms_up, 0.0));
  const cmat bare = execute_ideal(s);
  const cmat target = gate_unitary_truncated(make_gate(GateKind::cnot_si, 0), 1);
  // target = shift_mw(pi/2) * bare * exp(-i pi/4)
  const cmat fixed = shift_mw(k::pi / 2) * bare * std::polar(1.0, -k::pi / 4);
  CHECK(max_dev(fixed, target) < 1e-12);
}

TEST_CASE("derivation: nucleus-conditioned electron flip needs -pi/14 nuclear shift") {
  const auto lay = one_ion();
  Schedule s = blank(lay);
  push_pulse(s, mw_pi(SpinSel::mi_top, 0.0));
  const cmat bare = execute_ideal(s);
  const cmat target = gate_unitary_truncated(make_gate(GateKind::cnot_is, 0), 1);
  const cmat fixed = shift_rf(-k::pi / 14) * bare * std::polar(1.0, k::pi / 4);
  CHECK(max_dev(fixed, target) < 1e-12);
}

TEST_CASE("derivation: nuclear X is one flip per electron manifold and a global phase") {
  const auto lay = one_ion();
  Schedule down = blank(lay);
  push_pulse(down, rf_pi(SpinSel::ms_down, 0.0));
  const cmat bare_down = execute_ideal(down);
  // A lone parked-manifold flip acts as i*sigma_x there and leaves the other
  // manifold alone.
  const std::complex<double> i(0.0, 1.0);
  CHECK(std::abs(bare_down(0, 0) - 1.0) < 1e-12);
  CHECK(std::abs(bare_down(1, 1) - 1.0) < 1e-12);
  CHECK(std::abs(bare_down(2, 3) - i) < 1e-12);
  CHECK(std::abs(bare_down(3, 2) - i) < 1e-12);

  Schedule both = blank(lay);
  push_pulse(both, rf_pi(SpinSel::ms_down, 0.0));
  push_pulse(both, rf_pi(SpinSel::ms_up, 0.0));
  const cmat bare = execute_ideal(both);
  const cmat target = gate_unitary_truncated(make_gate(GateKind::x, 0), 1);
  CHECK(max_dev(bare * std::polar(1.0, -k::pi / 2), target) < 1e-12);
}

TEST_CASE("derivation: nuclear Z is a pi/7 frame shift up to a global phase") {
  const auto lay = one_ion();
  const cmat target = gate_unitary_truncated(make_gate(GateKind::z, 0), 1);
  CHECK(max_dev(shift_rf(k::pi / 7) * std::polar(1.0, -k::pi / 2), target) < 1e-12);
}

// ---------------------------------------------------------------------------
// Fragment exactness: compiled single-gate schedules reproduce their targets
// including the global phase.
// ---------------------------------------------------------------------------

TEST_CASE("single-ion fragments compile to their exact targets") {
  const auto lay = one_ion();
  CompileOptions opt;
  for (GateKind kind : {GateKind::x, GateKind::z, GateKind::cnot_si, GateKind::cnot_is,
                        GateKind::swap_is}) {
    const Circuit c = single_gate(lay, make_gate(kind, 0));
    const Schedule s = compile_on_layout(c, lay, opt);
    CHECK(max_dev(execute_ideal(s), circuit_target_unitary(c)) < 1e-12);
  }
}

TEST_CASE("electron rotations compile exactly for angles across all branches") {
  const auto lay = one_ion();
  CompileOptions opt;
  for (auto [phi, theta] : {std::pair{0.0, k::pi}, {0.7, 1.3}, {-2.1, k::two_pi},
                            {1.0, 3.5 * k::pi}, {-0.4, 0.001}, {2.9, 2.0 * k::pi + 0.5}}) {
    Gate g = make_gate(GateKind::rot_s, 0);
    g.axis_phase_rad = phi;
    g.angle_rad = theta;
    const Circuit c = single_gate(lay, g);
    const Schedule s = compile_on_layout(c, lay, opt);
    CHECK(max_dev(execute_ideal(s), circuit_target_unitary(c)) < 1e-11);
  }
}

TEST_CASE("arbitrary nuclear unitaries compile exactly, all decomposition branches") {
  const auto lay = one_ion();
  CompileOptions opt;

  // generic
  for (unsigned seed : {1u, 2u, 3u, 4u}) {
    Gate g = make_gate(GateKind::u_nuclear, 0);
    g.u2 = random_u2(seed);
    const Circuit c = single_gate(lay, g);
    CHECK(max_dev(execute_ideal(compile_on_layout(c, lay, opt)),
                  circuit_target_unitary(c)) < 1e-11);
  }

  // diagonal (sin = 0), antidiagonal (cos = 0), identity, global phase only
  cmat dz = cmat::Zero(2, 2);
  dz(0, 0) = std::polar(1.0, 0.3);
  dz(1, 1) = std::polar(1.0, -1.1);
  cmat ax = cmat::Zero(2, 2);
  ax(0, 1) = std::polar(1.0, 0.2);
  ax(1, 0) = std::polar(1.0, 0.9);
  for (const cmat& u : {dz, ax, cmat(cmat::Identity(2, 2)),
                        cmat(std::polar(1.0, 1.7) * cmat::Identity(2, 2))}) {
    Gate g = make_gate(GateKind::u_nuclear, 0);
    g.u2 = u;
    const Circuit c = single_gate(lay, g);
    CHECK(max_dev(execute_ideal(compile_on_layout(c, lay, opt)),
                  circuit_target_unitary(c)) < 1e-11);
  }
}

TEST_CASE("swap compiles exactly in both pulse orderings") {
  const auto lay = one_ion();
  const Circuit c = single_gate(lay, make_gate(GateKind::swap_is, 0));
  for (bool si_first : {false, true}) {
    CompileOptions opt;
    opt.swap_si_first = si_first;
    const Schedule s = compile_on_layout(c, lay, opt);
    CHECK(max_dev(execute_ideal(s), circuit_target_unitary(c)) < 1e-12);
  }
}

TEST_CASE("frame shift conjugated through the compiled swap moves I_z onto S_z") {
  const auto lay = one_ion();
  CompileOptions opt;
  const Circuit c = single_gate(lay, make_gate(GateKind::swap_is, 0));
  const cmat swap = execute_ideal(compile_on_layout(c, lay, opt));
  const double a = 0.77;
  // exp(-i a sigma_z/2) on the nuclear value qubit equals shift_rf(a/7)
  const cmat lhs = swap * shift_rf(a / 7.0) * swap;
  CHECK(max_dev(lhs, shift_mw(a)) < 1e-12);
}

TEST_CASE("nucleus-nucleus CNOT compiles exactly on the two-ion register") {
  const auto trap = row1_trap(2);
  for (bool nonsel : {true, false}) {
    for (CnotMethod method : {CnotMethod::two_pulse_delay, CnotMethod::selective_line}) {
      CompileOptions opt;
      opt.nonselective_rf = nonsel;
      opt.method = method;
      Circuit c;
      c.n_ions = 2;
      c.gates = {make_gate(GateKind::cnot_nn, 0, 1)};
      const Schedule s = compile(c, trap, opt);
      CHECK(max_dev(execute_ideal(s), circuit_target_unitary(c)) < 1e-12);
    }
  }
}

TEST_CASE("reversed-direction CNOT and a mixed circuit compile exactly on three ions") {
  const auto trap = row1_trap(3);
  CompileOptions opt;
  Circuit c;
  c.n_ions = 3;
  c.gates.push_back(make_gate(GateKind::x, 2));
  c.gates.push_back(make_gate(GateKind::cnot_nn, 2, 0));
  c.gates.push_back(make_gate(GateKind::z, 1));
  Gate rot = make_gate(GateKind::rot_s, 0);
  rot.axis_phase_rad = 0.4;
  rot.angle_rad = k::pi / 2;
  c.gates.push_back(rot);
  Gate un = make_gate(GateKind::u_nuclear, 1);
  un.u2 = random_u2(9);
  c.gates.push_back(un);
  const Schedule s = compile(c, trap, opt);
  CHECK(max_dev(execute_ideal(s), circuit_target_unitary(c)) < 1e-10);
}

TEST_CASE("swap sandwich realizes a nuclear unitary through electron rotations") {
  const auto lay = one_ion();
  CompileOptions opt;
  const double phi = 1.1, theta = 2.3;
  Gate rot = make_gate(GateKind::rot_s, 0);
  rot.axis_phase_rad = phi;
  rot.angle_rad = theta;
  Circuit conj;
  conj.n_ions = 1;
  conj.gates = {make_gate(GateKind::swap_is, 0), rot, make_gate(GateKind::swap_is, 0)};

  // the same SU(2) element as a direct nuclear unitary
  Gate un = make_gate(GateKind::u_nuclear, 0);
  un.u2 = cmat::Zero(2, 2);
  un.u2(0, 0) = un.u2(1, 1) = std::cos(theta / 2);
  un.u2(0, 1) = cxd(0, -1) * std::sin(theta / 2) * std::polar(1.0, -phi);
  un.u2(1, 0) = cxd(0, -1) * std::sin(theta / 2) * std::polar(1.0, phi);
  const Circuit direct = single_gate(lay, un);

  const cmat u_conj = execute_ideal(compile_on_layout(conj, lay, opt));
  const cmat u_direct = execute_ideal(compile_on_layout(direct, lay, opt));
  CHECK(max_dev(u_conj, u_direct) < 1e-11);
  CHECK(max_dev(u_conj, circuit_target_unitary(direct)) < 1e-11);
}

// ---------------------------------------------------------------------------
// Nonselective lowering and the parity ledger.
// ---------------------------------------------------------------------------

TEST_CASE("nonselective lowering keeps bystander parity even") {
  const auto trap = row1_trap(3);
  CompileOptions opt;
  opt.nonselective_rf = true;
  Circuit c;
  c.n_ions = 3;
  c.gates = {make_gate(GateKind::cnot_nn, 0, 1)};
  const Schedule s = compile(c, trap, opt);
  REQUIRE(s.parity.nonselective_rf_counts.size() == 3);
  // every nonselective pulse sweeps all ions, so all counts match and are even
  CHECK(s.parity.nonselective_rf_counts[0] == 2);
  CHECK(s.parity.nonselective_rf_counts[1] == 2);
  CHECK(s.parity.nonselective_rf_counts[2] == 2);
  CHECK(max_dev(execute_ideal(s), circuit_target_unitary(c)) < 1e-12);
}

TEST_CASE("nuclear unitary uses one nonselective flip pair") {
  const auto trap = row1_trap(2);
  CompileOptions opt;
  opt.nonselective_rf = true;
  Circuit c;
  c.n_ions = 2;
  Gate un = make_gate(GateKind::u_nuclear, 0);
  un.u2 = random_u2(12);
  c.gates = {un};
  const Schedule s = compile(c, trap, opt);
  CHECK(s.parity.nonselective_rf_counts[0] == 2);
  CHECK(s.parity.nonselective_rf_counts[1] == 2);
  CHECK(max_dev(execute_ideal(s), circuit_target_unitary(c)) < 1e-11);
}

TEST_CASE("lone conditional flips fall back to selective pulses") {
  const auto trap = row1_trap(2);
  CompileOptions opt;
  opt.nonselective_rf = true;
  for (GateKind kind : {GateKind::cnot_si, GateKind::swap_is, GateKind::x}) {
    Circuit c;
    c.n_ions = 2;
    c.gates = {make_gate(kind, 0)};
    const Schedule s = compile(c, trap, opt);
    CHECK(s.parity.nonselective_rf_counts[0] == 0);
    CHECK(s.parity.nonselective_rf_counts[1] == 0);
    CHECK(max_dev(execute_ideal(s), circuit_target_unitary(c)) < 1e-12);
  }
}

TEST_CASE("selective compilation emits no nonselective pulses at all") {
  const auto trap = row1_trap(2);
  CompileOptions opt;
  opt.nonselective_rf = false;
  Circuit c;
  c.n_ions = 2;
  c.gates = {make_gate(GateKind::cnot_nn, 0, 1)};
  const Schedule s = compile(c, trap, opt);
  CHECK(s.parity.nonselective_rf_counts[0] == 0);
  CHECK(s.parity.nonselective_rf_counts[1] == 0);
  for (const auto& item : s.items) {
    if (const auto* p = std::get_if<PulseItem>(&item))
      CHECK(p->spec.target_ion != all_ions);
  }
}

// ---------------------------------------------------------------------------
// Refocusing block.
// ---------------------------------------------------------------------------

TEST_CASE("refocusing block renders the pair coupling phase and nothing else") {
  const auto trap = row1_trap(3);
  auto lay = layout_from_trap(trap);
  // overwrite couplings with arbitrary values incl. the passive pair
  lay.j_rad_s(0, 1) = lay.j_rad_s(1, 0) = 2900.0;
  lay.j_rad_s(0, 2) = lay.j_rad_s(2, 0) = 801.0;
  lay.j_rad_s(1, 2) = lay.j_rad_s(2, 1) = 1234.0;

  const double tau = 3.7e-4;
  CompileOptions opt;
  Schedule s = blank(lay);
  emit_refocus_block(s, 0, 1, tau, opt, false);

  ExecOptions eo;
  // residual frame detunings on the echoed ions must cancel; the passive
  // ion is untouched by the echo, so its frame must already be clean
  eo.ideal_electron_offset_rad_s = {410.0, -220.0, 0.0};
  eo.ideal_nuclear_offset_rad_s = {0.0, 0.0, 0.0};
  const cmat u = execute_ideal(s, eo);

  cmat expect = cmat::Zero(64, 64);
  for (int col = 0; col < 64; ++col) {
    const int d0 = col / 16, d1 = (col / 4) % 4;
    const double m0 = (d0 & 2) == 0 ? 0.5 : -0.5;
    const double m1 = (d1 & 2) == 0 ? 0.5 : -0.5;
    expect(col, col) = std::polar(1.0, 2.0 * tau * lay.j_rad_s(0, 1) * m0 * m1);
  }
  CHECK(max_dev(u, expect) < 1e-12);
}

TEST_CASE("parked-nuclei refocusing matches the full block on the parked sector") {
  const auto trap = row1_trap(2);
  const auto lay = layout_from_trap(trap);
  const double tau = 2.0e-4;
  CompileOptions opt;

  Schedule parked = blank(lay), active = blank(lay);
  emit_refocus_block(parked, 0, 1, tau, opt, true);
  emit_refocus_block(active, 0, 1, tau, opt, false);
  int parked_pulses = 0, active_pulses = 0;
  for (const auto& item : parked.items)
    if (std::get_if<PulseItem>(&item) != nullptr) ++parked_pulses;
  for (const auto& item : active.items)
    if (std::get_if<PulseItem>(&item) != nullptr) ++active_pulses;
  CHECK(active_pulses == 2 * parked_pulses);

  // the single-line variant agrees wherever both nuclei sit at the bottom
  const cmat up = execute_ideal(parked);
  const cmat ua = execute_ideal(active);
  for (int col = 0; col < 16; ++col) {
    const int d0 = col / 4, d1 = col % 4;
    if ((d0 & 1) == 0 || (d1 & 1) == 0) continue; // a nucleus is at the top
    for (int row = 0; row < 16; ++row) {
      const int r0 = row / 4, r1 = row % 4;
      if ((r0 & 1) == 0 || (r1 & 1) == 0) continue;
      CHECK(std::abs(up(row, col) - ua(row, col)) < 1e-12);
    }
  }
}

// ---------------------------------------------------------------------------
// Feasibility gate and rabi clipping.
// ---------------------------------------------------------------------------

TEST_CASE("compilation refuses an infeasible operating point unless forced") {
  auto trap = row1_trap(2);
  trap.gradient_t_per_m = 5000.0; // spin-motion coupling far beyond the cap
  Circuit c;
  c.n_ions = 2;
  c.gates = {make_gate(GateKind::cnot_nn, 0, 1)};
  CompileOptions opt;
  CHECK_THROWS_AS(compile(c, trap, opt), FeasibilityError);
  opt.force = true;
  CHECK_NOTHROW(compile(c, trap, opt));
}

TEST_CASE("compilation clips the electron rabi rate to the selectivity limit") {
  const auto trap = row1_trap(2);
  CompileOptions opt;
  opt.rabi_mw_hz = 50.0e6; // above separation / margin = 6.9 MHz
  Circuit c;
  c.n_ions = 2;
  c.gates = {make_gate(GateKind::cnot_nn, 0, 1)};
  const Schedule s = compile(c, trap, opt);
  const FeasibilityReport rep = feasibility_report(trap, opt.rabi_mw_hz, 1.0e-3,
                                                   opt.margin_factor);
  for (const auto& item : s.items) {
    if (const auto* p = std::get_if<PulseItem>(&item)) {
      if (p->spec.channel == Channel::mw)
        CHECK(p->spec.rabi_hz <= rep.rabi_limit_hz * (1 + 1e-12));
    }
  }
  CHECK(max_dev(execute_ideal(s), circuit_target_unitary(c)) < 1e-12);
}

// ---------------------------------------------------------------------------
// Schedule validation.
// ---------------------------------------------------------------------------

TEST_CASE("schedule validation rejects malformed items") {
  const auto lay = one_ion();

  {
    Schedule s = blank(lay);
    auto p = rf_pi(SpinSel::ms_up, 0.0);
    p.angle_rad = 0.0;
    PulseItem item;
    item.spec = p;
    item.duration_s = 0.0;
    s.items.emplace_back(item);
    CHECK_THROWS(validate_schedule(s));
  }
  {
    Schedule s = blank(lay);
    auto p = rf_pi(SpinSel::ms_up, 0.0);
    p.rabi_hz = 0.0;
    PulseItem item;
    item.spec = p;
    item.duration_s = 1.0e-5;
    s.items.emplace_back(item);
    CHECK_THROWS(validate_schedule(s));
  }
  {
    // RF pulse with a nuclear-spectator condition makes no sense
    Schedule s = blank(lay);
    push_pulse(s, rf_pi(SpinSel::mi_top, 0.0));
    CHECK_THROWS(validate_schedule(s));
  }
  {
    // MW pulse with an electron-manifold condition makes no sense
    Schedule s = blank(lay);
    push_pulse(s, mw_pi(SpinSel::ms_up, 0.0));
    CHECK_THROWS(validate_schedule(s));
  }
  {
    Schedule s = blank(lay);
    DelayItem d;
    d.duration_s = -1.0e-6;
    s.items.emplace_back(d);
    CHECK_THROWS(validate_schedule(s));
  }
  {
    Schedule s = blank(lay);
    PhaseShiftItem ps;
    ps.ion = 3;
    ps.angle_rad = 0.3;
    s.items.emplace_back(ps);
    CHECK_THROWS(validate_schedule(s));
  }
  {
    // duration bookkeeping must be consistent
    Schedule s = blank(lay);
    push_pulse(s, rf_pi(SpinSel::ms_up, 0.0));
    s.total_duration_s *= 2.0;
    CHECK_THROWS(validate_schedule(s));
  }
  {
    // coupling-resolved pulse must name a real partner on a single target
    Schedule s = blank(lay);
    auto p = mw_pi(SpinSel::mi_bottom, 0.0);
    p.j_condition = JCondition{0, 0.5}; // partner = target itself
    push_pulse(s, p);
    CHECK_THROWS(validate_schedule(s));
  }
}

TEST_CASE("circuit validation rejects malformed gates") {
  Circuit c;
  c.n_ions = 2;
  c.gates = {make_gate(GateKind::cnot_nn, 1, 1)};
  CHECK_THROWS(validate_circuit(c));

  c.gates = {make_gate(GateKind::x, 5)};
  CHECK_THROWS(validate_circuit(c));

  Gate un = make_gate(GateKind::u_nuclear, 0);
  un.u2 = cmat::Ones(2, 2); // not unitary
  c.gates = {un};
  CHECK_THROWS(validate_circuit(c));

  CHECK_THROWS(parse_circuit_text("X 0\n", 2));   // 1-based indices
  CHECK_THROWS(parse_circuit_text("FOO 1\n", 2)); // unknown op
}
