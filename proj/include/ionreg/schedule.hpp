#pragma once

#include "ionreg/constants.hpp"
#include "ionreg/gates.hpp"
#include "ionreg/ion.hpp"

#include <optional>
#include <variant>
#include <vector>

namespace ionreg {

// Spectator condition attached to a pulse: which resolved line the tone sits
// on. Microwave pulses are conditioned on the nuclear spectator state (top or
// bottom of the ladder), RF pulses on the electron manifold. `both` drives
// the two lines at once; it is legal in hand-built schedules and rendered
// exactly in ideal mode, but the compiler always lowers it to two adjacent
// single-line pulses so that every emitted tone is a single frequency.
enum class SpinSel { mi_top, mi_bottom, ms_up, ms_down, both };

// Extra J-resolved condition: the line shifted by the named ion sitting in
// the given electron state.
struct JCondition {
  int ion = 0;
  double m_s = 0.5;
};

inline constexpr int all_ions = -1;

struct PulseSpec {
  Channel channel = Channel::mw;
  int target_ion = all_ions; // all_ions = nonselective
  SpinSel condition = SpinSel::mi_bottom;
  std::optional<JCondition> j_condition;
  double angle_rad = 0.0; // rotation angle, in (0, 2*pi]
  double phase_rad = 0.0; // synthesizer phase
  double rabi_hz = 0.0;
};

struct PulseItem {
  PulseSpec spec;
  double duration_s = 0.0;
};

struct DelayItem {
  double duration_s = 0.0;
};

// Zero-duration frame z-rotation, exp(-i*angle*S_z) for the microwave
// channel and exp(-i*angle*I_z) for the RF channel of one ion.
struct PhaseShiftItem {
  Channel channel = Channel::mw;
  int ion = 0;
  double angle_rad = 0.0;
};

using ScheduleItem = std::variant<PulseItem, DelayItem, PhaseShiftItem>;

// Per-ion count of RF pi pulses that were applied nonselectively (every
// nonselective pulse increments the count of every ion it sweeps over).
struct ParityLedger {
  std::vector<int> nonselective_rf_counts;
};

struct Schedule {
  int n_ions = 0;
  SystemLayout layout; // nominal layout the frames refer to
  Circuit circuit;     // source circuit, for target reconstruction
  std::vector<ScheduleItem> items;
  ParityLedger parity;
  double global_phase_rad = 0.0;
  double total_duration_s = 0.0;
  std::string frame_note;
};

inline double pulse_duration_s(double angle_rad, double rabi_hz) {
  return angle_rad / (constants::two_pi * rabi_hz);
}

void validate_schedule(const Schedule& s);

} // namespace ionreg
