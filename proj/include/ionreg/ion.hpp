#pragma once

#include "ionreg/linalg.hpp"
#include "ionreg/spin.hpp"

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace ionreg {

// A species with one valence electron (S = 1/2) and a nuclear spin I coupled
// by a scalar hyperfine term. Gammas are cyclic (Hz/T); nuclear_gamma is the
// positive magnitude, the Hamiltonian carries its sign explicitly.
struct IonSpecies {
  std::string name;
  double mass_kg = 0.0;
  double nuclear_spin = 0.0;
  double hyperfine_a_hz = 0.0;
  double electron_gamma_hz_per_t = 0.0;
  double nuclear_gamma_hz_per_t = 0.0;
};

IonSpecies ca43_defaults();
void validate_species(const IonSpecies& sp);

// Static description of a register: field at trap center, axial gradient,
// ion positions along the trap axis and the electron-electron coupling
// matrix (rad/s) produced by the trap model.
struct SystemLayout {
  IonSpecies species;
  int n_ions = 1;
  double b0_tesla = 1.0;
  double gradient_t_per_m = 0.0;
  std::vector<double> positions_m; // may stay empty for a single ion
  Eigen::MatrixXd j_rad_s;         // n x n symmetric, zero diagonal; 0x0 for n = 1
};

void validate_layout(const SystemLayout& layout);
double field_at(const SystemLayout& layout, int ion);
int spin_dim(const IonSpecies& sp); // 2 * (2I + 1)
int full_dim(const SystemLayout& layout);
std::vector<int> slot_dims(const SystemLayout& layout); // [2, 2I+1, 2, 2I+1, ...]

// Quantum numbers (m_S, m_I per ion) of one product-basis index. Index digit
// 0 is the highest m; ion 0 occupies the most significant digits.
struct BasisLabels {
  std::vector<double> m_s;
  std::vector<double> m_i;
};
BasisLabels basis_labels(const SystemLayout& layout, int index);
// Compact text form, one "s{2mS}i{2mI}" token per ion joined by '_',
// e.g. "s-1i+7" for m_S = -1/2, m_I = +7/2.
std::string basis_label_string(const SystemLayout& layout, int index);

enum class Channel { mw, rf };

// One drive tone. target_ion records which ion's resonance the frequency was
// chosen for; the field itself couples to every ion and selectivity comes
// from detuning alone.
struct DriveParams {
  double frequency_hz = 0.0;
  double rabi_s_hz = 0.0;
  double rabi_i_hz = 0.0;
  double phase_rad = 0.0;
  int target_ion = 0;
};

struct SpectrumLine {
  int ion = 0;
  double frequency_hz = 0.0;
  double intensity = 0.0;
  std::string label_initial;
  std::string label_final;
};

// Static Hamiltonian (rad/s, diagonal in the product basis):
//   H0 = sum_i [Omega_S^i S_z^i - Omega_I^i I_z^i + A S_z^i I_z^i]
//        - sum_{i<j} J_ij S_z^i S_z^j
// with the Zeeman frequencies evaluated at B(z_i).
cmat build_h0(const SystemLayout& layout);
Eigen::VectorXd h0_diagonal(const SystemLayout& layout);

// Generator of the rotating frame used for a drive on the given channel.
// MW: sum_i S_z^i. RF: -2 sum_i S_z^i I_z^i, whose sign per electron manifold
// matches the sense in which the nuclear ladder precesses there (the nuclear
// gap has opposite slope in the two manifolds), so one frame co-rotates both.
cmat frame_k_operator(const SystemLayout& layout, Channel channel);

// Drive term after dropping counter-rotating components. The synthesizer
// phase enters as exp(-i phase) on the raising operator in the co-rotating
// combination; for RF in the m_S = +1/2 manifold this lands on I_- instead,
// so the effective rotation axis there is -phase.
cmat drive_operator_rwa(const SystemLayout& layout, const DriveParams& drive,
                        Channel channel);

// Time-independent rotating-frame Hamiltonian H0 - omega_drive K + drive.
cmat build_h1_rwa(const SystemLayout& layout, const DriveParams& drive,
                  Channel channel);

// All upward magnetic-dipole transitions driven by sum_i S_x^i (MW) or
// sum_i I_x^i (RF) between product eigenstates, sorted by frequency.
std::vector<SpectrumLine> transition_spectrum(const SystemLayout& layout,
                                              Channel channel);

// Resonance frequency of ion's electron flip with the nucleus at m_i.
double mw_line_hz(const SystemLayout& layout, int ion, double m_i);
// Same, further resolved by a coupled partner electron held at control_ms.
double mw_line_hz(const SystemLayout& layout, int ion, double m_i,
                  double control_ms, double j_rad_s);
// Resonance frequency of ion's nuclear ladder within the m_s manifold.
double rf_line_hz(const SystemLayout& layout, int ion, double m_s);

} // namespace ionreg
