#pragma once

#include "ionreg/linalg.hpp"

#include <string>
#include <vector>

namespace ionreg {

// Register-level gates. The computational qubit of each ion is its nuclear
// spin (|1> = m_I at the top of the ladder, |0> at the bottom); the electron
// spin (|1> = m_S = +1/2) serves as ancilla and bus.
enum class GateKind {
  x,         // nuclear-qubit X
  z,         // nuclear-qubit Z
  rot_s,     // electron rotation about an equatorial axis
  cnot_si,   // control electron, target nucleus (same ion)
  cnot_is,   // control nucleus, target electron (same ion)
  swap_is,   // exchange electron and nuclear qubits of one ion
  cnot_nn,   // control nucleus of ion, target nucleus of ion2
  u_nuclear, // arbitrary single-qubit unitary on one nuclear spin
};

struct Gate {
  GateKind kind = GateKind::x;
  int ion = 0;
  int ion2 = 0;                // cnot_nn target
  double axis_phase_rad = 0.0; // rot_s axis angle in the x-y plane
  double angle_rad = 0.0;      // rot_s rotation angle
  cmat u2;                     // u_nuclear payload, 2x2
};

struct Circuit {
  int n_ions = 1;
  std::vector<Gate> gates;
};

void validate_circuit(const Circuit& c);

// Text form, one gate per line, 1-based ion indices:
//   X <ion> | Z <ion> | ROTS <ion> <axis_rad> <angle_rad>
//   CNOTSI <ion> | CNOTIS <ion> | SWAPIS <ion>
//   CNOT <control> <target>
//   UN <ion> <8 floats: row-major re,im pairs of the 2x2 unitary>
// '#' starts a comment; blank lines ignored.
Circuit parse_circuit_text(const std::string& text, int n_ions);
std::string circuit_to_text(const Circuit& c);

// Unitary of one gate / a whole circuit on the truncated register: per ion a
// 4-dim (electron qubit x nuclear qubit) factor, ion 0 slowest, within an ion
// the index is 2*(1-c_S) + (1-c_I) so qubit value 1 maps to the lower index.
cmat gate_unitary_truncated(const Gate& g, int n_ions);
cmat circuit_target_unitary(const Circuit& c);

// Index helpers for the truncated register space (dimension 4^n).
int truncated_dim(int n_ions);
// index of the basis state with the given electron and nuclear qubit values
int truncated_index(const std::vector<int>& electron_bits,
                    const std::vector<int>& nuclear_bits);
// map a truncated-register index to the full product-space index, where each
// ion contributes 2*(2I+1) states and the nuclear qubit lives on m_I = +/-I
int truncated_to_full_index(int trunc_index, int n_ions, int nuclear_dim);

} // namespace ionreg
