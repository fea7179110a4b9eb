#include "ionreg/simulate.hpp"

#include "ionreg/compiler.hpp"
#include "ionreg/constants.hpp"
#include "ionreg/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>

namespace ionreg {
namespace k = constants;
namespace {

constexpr double angle_match_tol = 1e-9;
constexpr int ideal_dim_cap = 4096;
constexpr int ideal_dense_cap = 1024;

int tshift(int n, int ion) { return 2 * (n - 1 - ion); }
int tdigit(int idx, int n, int ion) { return (idx >> tshift(n, ion)) & 3; }
bool digit_s_up(int d) { return (d & 2) == 0; }
bool digit_i_top(int d) { return (d & 1) == 0; }

bool spectator_condition_holds(SpinSel cond, int d) {
  switch (cond) {
  case SpinSel::mi_top:
    return digit_i_top(d);
  case SpinSel::mi_bottom:
    return !digit_i_top(d);
  case SpinSel::ms_up:
    return digit_s_up(d);
  case SpinSel::ms_down:
    return !digit_s_up(d);
  case SpinSel::both:
    return true;
  }
  return false;
}

bool j_condition_holds(const PulseSpec& spec, int col, int n) {
  if (!spec.j_condition)
    return true;
  int dp = tdigit(col, n, spec.j_condition->ion);
  return digit_s_up(dp) == (spec.j_condition->m_s > 0);
}

// Phase of the closed-ladder pi rotation <-m| exp(-i pi J_axis) |m> about an
// equatorial axis at angle a, for total spin j = two_j / 2.
double pi_flip_phase(double axis, int two_j, bool from_top) {
  double j = two_j / 2.0;
  if (from_top)
    return axis * two_j - k::pi * j;
  double ph = -axis * two_j + k::pi * j;
  if (two_j % 2 != 0)
    ph += k::pi;
  return ph;
}

double full_rotation_phase(int two_j) {
  return two_j % 2 != 0 ? k::pi : 0.0;
}

struct Monomial {
  int n = 0;
  int dim = 0;
  std::vector<int> perm;
  std::vector<double> phase;
  std::vector<std::vector<double>> pair_t; // signed delay time, per ion pair
  std::vector<std::vector<double>> s_t;    // signed delay time, per electron
  std::vector<std::vector<double>> i_t;    // signed delay time, per nucleus
};

int pair_index(int p, int q, int n) {
  return p * n - p * (p + 1) / 2 + (q - p - 1);
}

struct IdealContext {
  const Schedule* s = nullptr;
  int n = 0;
  int dim = 0;
  int two_i = 0;     // 2I of the nuclear spin
  double spin_i = 0; // I
  std::vector<double> s_off, i_off;
  bool has_j = false;
};

double combine_phase(const IdealContext& ctx, const Monomial& m, int col) {
  double ph = m.phase[col];
  int pair = 0;
  for (int p = 0; p < ctx.n; ++p)
    for (int q = p + 1; q < ctx.n; ++q, ++pair) {
      double j = ctx.has_j ? ctx.s->layout.j_rad_s(p, q) : 0.0;
      ph += 0.25 * m.pair_t[static_cast<std::size_t>(pair)][
                       static_cast<std::size_t>(col)] * j;
    }
  for (int q = 0; q < ctx.n; ++q)
    ph += -0.5 * m.s_t[static_cast<std::size_t>(q)][
                     static_cast<std::size_t>(col)] * ctx.s_off[
                     static_cast<std::size_t>(q)];
  for (int q = 0; q < ctx.n; ++q)
    ph += ctx.spin_i * m.i_t[static_cast<std::size_t>(q)][
                           static_cast<std::size_t>(col)] * ctx.i_off[
                           static_cast<std::size_t>(q)];
  return ph;
}

cmat monomial_to_dense(const IdealContext& ctx, const Monomial& m) {
  cmat out = cmat::Zero(m.dim, m.dim);
  for (int col = 0; col < m.dim; ++col) {
    double ph = combine_phase(ctx, m, col);
    out(m.perm[static_cast<std::size_t>(col)], col) =
        std::exp(cxd(0.0, ph));
  }
  return out;
}

std::vector<int> pulse_targets(const PulseSpec& spec, int n) {
  if (spec.target_ion == all_ions) {
    std::vector<int> all(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      all[static_cast<std::size_t>(i)] = i;
    return all;
  }
  return {spec.target_ion};
}

void monomial_pulse(const IdealContext& ctx, Monomial& m,
                    const PulseSpec& spec, bool full_turn) {
  bool mw = spec.channel == Channel::mw;
  for (int ion : pulse_targets(spec, ctx.n)) {
    int flip_mask = (mw ? 2 : 1) << tshift(ctx.n, ion);
    for (int col = 0; col < m.dim; ++col) {
      int idx = m.perm[static_cast<std::size_t>(col)];
      int d = tdigit(idx, ctx.n, ion);
      if (!spectator_condition_holds(spec.condition, d) ||
          !j_condition_holds(spec, idx, ctx.n))
        continue;
      if (full_turn) {
        m.phase[static_cast<std::size_t>(col)] +=
            full_rotation_phase(mw ? 1 : ctx.two_i);
        continue;
      }
      if (mw) {
        m.phase[static_cast<std::size_t>(col)] +=
            pi_flip_phase(spec.phase_rad, 1, digit_s_up(d));
      } else {
        double axis = digit_s_up(d) ? -spec.phase_rad : spec.phase_rad;
        m.phase[static_cast<std::size_t>(col)] +=
            pi_flip_phase(axis, ctx.two_i, digit_i_top(d));
      }
      m.perm[static_cast<std::size_t>(col)] = idx ^ flip_mask;
    }
  }
}

void monomial_phase_shift(const IdealContext& ctx, Monomial& m,
                          const PhaseShiftItem& ps) {
  for (int col = 0; col < m.dim; ++col) {
    int d = tdigit(m.perm[static_cast<std::size_t>(col)], ctx.n, ps.ion);
    double mz = ps.channel == Channel::mw
                    ? (digit_s_up(d) ? 0.5 : -0.5)
                    : (digit_i_top(d) ? ctx.spin_i : -ctx.spin_i);
    m.phase[static_cast<std::size_t>(col)] -= ps.angle_rad * mz;
  }
}

void monomial_delay(const IdealContext& ctx, Monomial& m, double tau) {
  for (int col = 0; col < m.dim; ++col) {
    int idx = m.perm[static_cast<std::size_t>(col)];
    int pair = 0;
    for (int p = 0; p < ctx.n; ++p) {
      int dp = tdigit(idx, ctx.n, p);
      for (int q = p + 1; q < ctx.n; ++q, ++pair) {
        int dq = tdigit(idx, ctx.n, q);
        double sgn = digit_s_up(dp) == digit_s_up(dq) ? tau : -tau;
        m.pair_t[static_cast<std::size_t>(pair)][
            static_cast<std::size_t>(col)] += sgn;
      }
    }
    for (int q = 0; q < ctx.n; ++q) {
      int d = tdigit(idx, ctx.n, q);
      m.s_t[static_cast<std::size_t>(q)][static_cast<std::size_t>(col)] +=
          digit_s_up(d) ? tau : -tau;
      m.i_t[static_cast<std::size_t>(q)][static_cast<std::size_t>(col)] +=
          digit_i_top(d) ? tau : -tau;
    }
  }
}

cmat dense_one_ion_pulse(const IdealContext& ctx, const PulseSpec& spec,
                         double angle, int ion) {
  cmat op = cmat::Zero(ctx.dim, ctx.dim);
  bool mw = spec.channel == Channel::mw;
  int flip_mask = (mw ? 2 : 1) << tshift(ctx.n, ion);
  bool is_pi = std::abs(angle - k::pi) < angle_match_tol;
  double c = std::cos(angle / 2);
  double sn = std::sin(angle / 2);
  for (int col = 0; col < ctx.dim; ++col) {
    int d = tdigit(col, ctx.n, ion);
    if (!spectator_condition_holds(spec.condition, d) ||
        !j_condition_holds(spec, col, ctx.n)) {
      op(col, col) = 1.0;
      continue;
    }
    if (mw) {
      // generic-angle electron rotation about an equatorial axis
      op(col, col) = c;
      op(col ^ flip_mask, col) = -cxd(0, 1) * sn * std::exp(
          cxd(0, digit_s_up(d) ? spec.phase_rad : -spec.phase_rad));
    } else if (is_pi) {
      double axis = digit_s_up(d) ? -spec.phase_rad : spec.phase_rad;
      op(col ^ flip_mask, col) = std::exp(
          cxd(0, pi_flip_phase(axis, ctx.two_i, digit_i_top(d))));
    } else if (std::abs(angle - k::two_pi) < angle_match_tol) {
      op(col, col) = std::exp(cxd(0, full_rotation_phase(ctx.two_i)));
    } else {
      throw NumericalError("generic-angle RF pulses leave the truncated "
                           "ladder model; only pi flips are representable");
    }
  }
  return op;
}

cmat dense_pulse_op(const IdealContext& ctx, const PulseSpec& spec,
                    double angle) {
  std::vector<int> targets = pulse_targets(spec, ctx.n);
  cmat op = dense_one_ion_pulse(ctx, spec, angle, targets.front());
  for (std::size_t i = 1; i < targets.size(); ++i)
    op = dense_one_ion_pulse(ctx, spec, angle, targets[i]) * op;
  return op;
}

Eigen::VectorXcd dense_delay_diag(const IdealContext& ctx, double tau) {
  Eigen::VectorXcd diag(ctx.dim);
  for (int col = 0; col < ctx.dim; ++col) {
    double ph = 0.0;
    for (int p = 0; p < ctx.n; ++p) {
      int dp = tdigit(col, ctx.n, p);
      double msp = digit_s_up(dp) ? 0.5 : -0.5;
      for (int q = p + 1; q < ctx.n; ++q) {
        int dq = tdigit(col, ctx.n, q);
        double msq = digit_s_up(dq) ? 0.5 : -0.5;
        double j = ctx.has_j ? ctx.s->layout.j_rad_s(p, q) : 0.0;
        ph += tau * j * msp * msq;
      }
      ph -= tau * ctx.s_off[static_cast<std::size_t>(p)] * msp;
      double mi = digit_i_top(dp) ? ctx.spin_i : -ctx.spin_i;
      ph += tau * ctx.i_off[static_cast<std::size_t>(p)] * mi;
    }
    diag(col) = std::exp(cxd(0, ph));
  }
  return diag;
}

Eigen::VectorXcd dense_phase_shift_diag(const IdealContext& ctx,
                                        const PhaseShiftItem& ps) {
  Eigen::VectorXcd diag(ctx.dim);
  for (int col = 0; col < ctx.dim; ++col) {
    int d = tdigit(col, ctx.n, ps.ion);
    double mz = ps.channel == Channel::mw
                    ? (digit_s_up(d) ? 0.5 : -0.5)
                    : (digit_i_top(d) ? ctx.spin_i : -ctx.spin_i);
    diag(col) = std::exp(cxd(0, -ps.angle_rad * mz));
  }
  return diag;
}

// Drive frequency for a pulse, always taken from the nominal layout.
double pulse_frequency_hz(const SystemLayout& nominal, const PulseSpec& spec) {
  if (spec.condition == SpinSel::both)
    throw NumericalError("two-line pulses must be lowered to single-line "
                         "pulses before physical execution");
  double i_top_m = nominal.species.nuclear_spin;
  auto one_ion = [&](int ion) {
    if (spec.channel == Channel::mw) {
      double m_i = spec.condition == SpinSel::mi_top ? i_top_m : -i_top_m;
      if (spec.j_condition)
        return mw_line_hz(nominal, ion, m_i, spec.j_condition->m_s,
                          nominal.j_rad_s(ion, spec.j_condition->ion));
      return mw_line_hz(nominal, ion, m_i);
    }
    double m_s = spec.condition == SpinSel::ms_up ? 0.5 : -0.5;
    return rf_line_hz(nominal, ion, m_s);
  };
  if (spec.target_ion != all_ions)
    return one_ion(spec.target_ion);
  double sum = 0.0;
  for (int ion = 0; ion < nominal.n_ions; ++ion)
    sum += one_ion(ion);
  return sum / nominal.n_ions;
}

Eigen::VectorXd local_diagonal(const SystemLayout& layout) {
  SystemLayout no_j = layout;
  if (no_j.j_rad_s.size() > 0)
    no_j.j_rad_s.setZero();
  return h0_diagonal(no_j);
}

std::vector<int> truncated_full_indices(int n_ions, int nuclear_dim) {
  int tdim = truncated_dim(n_ions);
  std::vector<int> out(static_cast<std::size_t>(tdim));
  for (int t = 0; t < tdim; ++t)
    out[static_cast<std::size_t>(t)] =
        truncated_to_full_index(t, n_ions, nuclear_dim);
  return out;
}

double gaussian_draw(std::mt19937_64& rng) {
  auto uniform = [&rng] {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1p-53;
  };
  double u1 = uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(k::two_pi * u2);
}

} // namespace

double schedule_pulse_frequency_hz(const SystemLayout& nominal,
                                   const PulseSpec& spec) {
  return pulse_frequency_hz(nominal, spec);
}

cmat execute_ideal(const Schedule& s, const ExecOptions& opt) {
  validate_schedule(s);
  IdealContext ctx;
  ctx.s = &s;
  ctx.n = s.n_ions;
  if (truncated_dim(ctx.n) > ideal_dim_cap)
    throw NumericalError("register too large for the truncated simulator");
  ctx.dim = truncated_dim(ctx.n);
  double nuclear_spin = s.layout.species.nuclear_spin;
  if (nuclear_spin <= 0)
    nuclear_spin = 3.5; // layout-free schedules default to the I = 7/2 ladder
  ctx.spin_i = nuclear_spin;
  ctx.two_i = static_cast<int>(std::lround(2 * nuclear_spin));
  ctx.has_j = s.layout.j_rad_s.rows() == ctx.n && ctx.n > 1;
  auto fill_offsets = [&](const std::vector<double>& src) {
    if (src.empty())
      return std::vector<double>(static_cast<std::size_t>(ctx.n), 0.0);
    if (static_cast<int>(src.size()) != ctx.n)
      throw std::invalid_argument("frame offset vector length mismatch");
    return src;
  };
  ctx.s_off = fill_offsets(opt.ideal_electron_offset_rad_s);
  ctx.i_off = fill_offsets(opt.ideal_nuclear_offset_rad_s);

  Monomial m;
  m.n = ctx.n;
  m.dim = ctx.dim;
  m.perm.resize(static_cast<std::size_t>(ctx.dim));
  for (int c = 0; c < ctx.dim; ++c)
    m.perm[static_cast<std::size_t>(c)] = c;
  m.phase.assign(static_cast<std::size_t>(ctx.dim), 0.0);
  int pairs = ctx.n * (ctx.n - 1) / 2;
  m.pair_t.assign(static_cast<std::size_t>(pairs),
                  std::vector<double>(static_cast<std::size_t>(ctx.dim), 0.0));
  m.s_t.assign(static_cast<std::size_t>(ctx.n),
               std::vector<double>(static_cast<std::size_t>(ctx.dim), 0.0));
  m.i_t = m.s_t;

  bool dense = false;
  cmat dmat;
  auto go_dense = [&] {
    if (dense)
      return;
    if (ctx.dim > ideal_dense_cap)
      throw NumericalError(
          "register too large for generic-angle ideal simulation");
    dmat = monomial_to_dense(ctx, m);
    dense = true;
  };

  for (const ScheduleItem& item : s.items) {
    if (const auto* p = std::get_if<PulseItem>(&item)) {
      const PulseSpec& spec = p->spec;
      bool is_pi = std::abs(spec.angle_rad - k::pi) < angle_match_tol;
      bool is_full = std::abs(spec.angle_rad - k::two_pi) < angle_match_tol;
      if (!dense && (is_pi || is_full)) {
        monomial_pulse(ctx, m, spec, is_full);
      } else {
        if (spec.channel == Channel::rf && !is_pi && !is_full)
          throw NumericalError("generic-angle RF pulses leave the truncated "
                               "ladder model; only pi flips are representable");
        go_dense();
        dmat = dense_pulse_op(ctx, spec, spec.angle_rad) * dmat;
      }
    } else if (const auto* d = std::get_if<DelayItem>(&item)) {
      if (dense)
        dmat = dense_delay_diag(ctx, d->duration_s).asDiagonal() * dmat;
      else
        monomial_delay(ctx, m, d->duration_s);
    } else if (const auto* ps = std::get_if<PhaseShiftItem>(&item)) {
      if (dense)
        dmat = dense_phase_shift_diag(ctx, *ps).asDiagonal() * dmat;
      else
        monomial_phase_shift(ctx, m, *ps);
    }
  }

  cmat out = dense ? dmat : monomial_to_dense(ctx, m);
  if (s.global_phase_rad != 0.0)
    out *= std::exp(cxd(0, s.global_phase_rad));
  return out;
}

// Synthesizer phase bookkeeping around a nuclear pi flip. A single rf tone
// serves every ion, so each ion sees it slightly detuned from its own pair of
// lines; the flip then picks up deterministic z-rotations in both electron
// manifolds. Both angles follow from the nominal layout alone, so the
// executor retards the per-ion nuclear frame going in and advances it coming
// out, the usual virtual-z calibration. The two-level model below transfers
// exactly to the full ladder because every in-manifold drive is an SU(2)
// rotation of the whole spin.
struct RfFrameTrim {
  std::vector<double> pre_rad;  // applied as exp(-i a I_z) before the flip
  std::vector<double> post_rad; // applied as exp(-i a I_z) after it
};

RfFrameTrim rf_frame_trim(const SystemLayout& nominal, const PulseSpec& spec,
                          double f_hz, double t_begin_s, double t_end_s) {
  const int n = nominal.n_ions;
  RfFrameTrim trim;
  trim.pre_rad.assign(static_cast<std::size_t>(n), 0.0);
  trim.post_rad.assign(static_cast<std::size_t>(n), 0.0);
  const double w = k::two_pi * spec.rabi_hz;
  const double duration_s = t_end_s - t_begin_s;
  const bool up_is_driven = spec.condition == SpinSel::ms_up;
  for (int ion = 0; ion < n; ++ion) {
    // Residual z-angle of one manifold relative to its intended transfer,
    // identity for the idle manifold and a resonant flip for the driven one,
    // evaluated in the executor's comparison frame. The frame unwinds the
    // detuning slope in absolute time, which is why the begin and end times
    // enter, not just the duration.
    auto residual = [&](double slope_rad_s, double axis_rad, bool driven) {
      Eigen::Matrix2cd jz = Eigen::Matrix2cd::Zero();
      jz(0, 0) = 0.5;
      jz(1, 1) = -0.5;
      Eigen::Matrix2cd ladder = Eigen::Matrix2cd::Zero();
      ladder(0, 1) = std::polar(0.5 * w, axis_rad);
      cmat h = slope_rad_s * jz + (ladder + ladder.adjoint());
      cmat u2 = mat_exp_hermitian(h, duration_s);
      Eigen::Vector2cd post_frame(std::polar(1.0, 0.5 * slope_rad_s * t_end_s),
                                  std::polar(1.0, -0.5 * slope_rad_s * t_end_s));
      Eigen::Vector2cd pre_frame(std::polar(1.0, -0.5 * slope_rad_s * t_begin_s),
                                 std::polar(1.0, 0.5 * slope_rad_s * t_begin_s));
      cmat a2 = post_frame.asDiagonal() * u2 * pre_frame.asDiagonal();
      cmat h_res = cmat(ladder + ladder.adjoint());
      cmat intended =
          driven ? mat_exp_hermitian(h_res, duration_s) : cmat(cmat::Identity(2, 2));
      cxd e00 = (a2 * intended.adjoint())(0, 0);
      return -2.0 * std::arg(e00);
    };
    double det_up = k::two_pi * (f_hz - rf_line_hz(nominal, ion, 0.5));
    double det_dn = k::two_pi * (f_hz - rf_line_hz(nominal, ion, -0.5));
    // In-frame slopes and drive axes differ between the manifolds because
    // the rotating frame generator is the hyperfine term itself.
    double zeta_up = residual(det_up, spec.phase_rad, up_is_driven);
    double zeta_dn = residual(-det_dn, -spec.phase_rad, !up_is_driven);
    trim.pre_rad[static_cast<std::size_t>(ion)] = 0.5 * (zeta_up - zeta_dn);
    trim.post_rad[static_cast<std::size_t>(ion)] = -0.5 * (zeta_up + zeta_dn);
  }
  return trim;
}

cmat execute_physical(const Schedule& s, const ExecOptions& opt) {
  validate_schedule(s);
  const SystemLayout& nominal = s.layout;
  validate_layout(nominal);
  if (nominal.n_ions != s.n_ions)
    throw std::invalid_argument("schedule layout does not match ion count");
  SystemLayout exec = opt.exec_layout ? *opt.exec_layout : nominal;
  validate_layout(exec);
  if (exec.n_ions != nominal.n_ions ||
      exec.species.nuclear_spin != nominal.species.nuclear_spin)
    throw std::invalid_argument("execution layout shape differs from nominal");

  int dim = full_dim(exec);
  Eigen::VectorXd h_ref = local_diagonal(nominal);
  std::vector<BasisLabels> labels;
  labels.reserve(static_cast<std::size_t>(dim));
  for (int idx = 0; idx < dim; ++idx)
    labels.push_back(basis_labels(nominal, idx));

  cmat u = cmat::Identity(dim, dim);
  double t = 0.0;
  for (const ScheduleItem& item : s.items) {
    if (const auto* ps = std::get_if<PhaseShiftItem>(&item)) {
      Eigen::VectorXcd diag(dim);
      for (int idx = 0; idx < dim; ++idx) {
        const BasisLabels& lb = labels[static_cast<std::size_t>(idx)];
        double mz = ps->channel == Channel::mw
                        ? lb.m_s[static_cast<std::size_t>(ps->ion)]
                        : lb.m_i[static_cast<std::size_t>(ps->ion)];
        diag(idx) = std::exp(cxd(0, -ps->angle_rad * mz));
      }
      u = diag.asDiagonal() * u;
    } else if (const auto* d = std::get_if<DelayItem>(&item)) {
      Eigen::VectorXd h0e = h0_diagonal(exec);
      Eigen::VectorXcd diag(dim);
      for (int idx = 0; idx < dim; ++idx)
        diag(idx) = std::exp(cxd(0, (h_ref(idx) - h0e(idx)) * d->duration_s));
      u = diag.asDiagonal() * u;
      t += d->duration_s;
    } else if (const auto* p = std::get_if<PulseItem>(&item)) {
      const PulseSpec& spec = p->spec;
      double f = pulse_frequency_hz(nominal, spec);
      DriveParams drive;
      drive.frequency_hz = f;
      drive.phase_rad = spec.phase_rad;
      drive.target_ion = spec.target_ion == all_ions ? 0 : spec.target_ion;
      if (spec.channel == Channel::mw)
        drive.rabi_s_hz = spec.rabi_hz;
      else
        drive.rabi_i_hz = spec.rabi_hz;
      cmat h_seg = build_h1_rwa(exec, drive, spec.channel);
      cmat u_seg = mat_exp_hermitian(h_seg, p->duration_s);
      if (spec.channel == Channel::rf &&
          std::abs(spec.angle_rad - k::pi) < angle_match_tol) {
        RfFrameTrim trim = rf_frame_trim(nominal, spec, f, t, t + p->duration_s);
        Eigen::VectorXcd zpre(dim), zpost(dim);
        for (int idx = 0; idx < dim; ++idx) {
          const BasisLabels& lb = labels[static_cast<std::size_t>(idx)];
          double accp = 0.0;
          double acca = 0.0;
          for (int ion = 0; ion < nominal.n_ions; ++ion) {
            accp += trim.pre_rad[static_cast<std::size_t>(ion)] *
                    lb.m_i[static_cast<std::size_t>(ion)];
            acca += trim.post_rad[static_cast<std::size_t>(ion)] *
                    lb.m_i[static_cast<std::size_t>(ion)];
          }
          zpre(idx) = std::exp(cxd(0, -accp));
          zpost(idx) = std::exp(cxd(0, -acca));
        }
        u_seg = zpost.asDiagonal() * u_seg * zpre.asDiagonal();
      }
      cmat k_op = frame_k_operator(exec, spec.channel);
      double t_end = t + p->duration_s;
      Eigen::VectorXcd pre(dim), post(dim);
      for (int idx = 0; idx < dim; ++idx) {
        double hk = h_ref(idx) - k::two_pi * f * k_op(idx, idx).real();
        post(idx) = std::exp(cxd(0, hk * t_end));
        pre(idx) = std::exp(cxd(0, -hk * t));
      }
      u = post.asDiagonal() * u_seg * pre.asDiagonal() * u;
      t = t_end;
    }
  }
  if (s.global_phase_rad != 0.0)
    u *= std::exp(cxd(0, s.global_phase_rad));
  return u;
}

double truncated_fidelity(const cmat& realized_trunc, const cmat& target_trunc,
                          bool parked_only) {
  if (realized_trunc.rows() != target_trunc.rows())
    throw std::invalid_argument("dimension mismatch");
  int dim = static_cast<int>(realized_trunc.rows());
  int n = 0;
  while ((1 << (2 * n)) < dim)
    ++n;
  if ((1 << (2 * n)) != dim)
    throw std::invalid_argument("not a truncated register dimension");
  cxd overlap = 0.0;
  int count = 0;
  for (int col = 0; col < dim; ++col) {
    if (parked_only) {
      bool parked = true;
      for (int ion = 0; ion < n; ++ion)
        parked = parked && !digit_s_up(tdigit(col, n, ion));
      if (!parked)
        continue;
    }
    overlap += target_trunc.col(col).dot(realized_trunc.col(col));
    ++count;
  }
  return std::abs(overlap) / count;
}

GateMetrics physical_metrics(const cmat& realized_full, const Schedule& s) {
  cmat target = circuit_target_unitary(s.circuit);
  int n = s.n_ions;
  int idim = static_cast<int>(std::lround(
                 2 * s.layout.species.nuclear_spin)) + 1;
  std::vector<int> lift = truncated_full_indices(n, idim);
  GateMetrics out;
  cxd overlap = 0.0;
  int count = 0;
  for (int nuc = 0; nuc < (1 << n); ++nuc) {
    std::vector<int> ebits(static_cast<std::size_t>(n), 0);
    std::vector<int> ibits(static_cast<std::size_t>(n));
    for (int ion = 0; ion < n; ++ion)
      ibits[static_cast<std::size_t>(ion)] = (nuc >> (n - 1 - ion)) & 1;
    int tcol = truncated_index(ebits, ibits);
    int fcol = lift[static_cast<std::size_t>(tcol)];
    cxd col_overlap = 0.0;
    double pop_in = 0.0;
    for (int tr = 0; tr < static_cast<int>(lift.size()); ++tr) {
      cxd amp = realized_full(lift[static_cast<std::size_t>(tr)], fcol);
      col_overlap += std::conj(target(tr, tcol)) * amp;
      pop_in += std::norm(amp);
    }
    overlap += col_overlap;
    out.leakage = std::max(out.leakage, 1.0 - pop_in);
    ++count;
  }
  out.fidelity = std::abs(overlap) / count;
  return out;
}

cmat integrate_labframe(const SystemLayout& layout, Channel channel,
                        const DriveParams& drive, double duration_s,
                        int steps_per_cycle) {
  (void)channel;
  if (steps_per_cycle < 8)
    throw std::invalid_argument("steps_per_cycle too small");
  if (!(duration_s > 0))
    throw std::invalid_argument("duration must be positive");
  int dim = full_dim(layout);
  Eigen::VectorXd h0 = h0_diagonal(layout);
  std::vector<int> dims = slot_dims(layout);
  SpinOps s_ops = angular_momentum_ops(make_spin("S", 0.5));
  SpinOps i_ops = angular_momentum_ops(make_spin("I", layout.species.nuclear_spin));
  cmat v = cmat::Zero(dim, dim);
  for (int ion = 0; ion < layout.n_ions; ++ion) {
    if (drive.rabi_s_hz > 0)
      v += k::two_pi * drive.rabi_s_hz * embed(s_ops.jx, 2 * ion, dims);
    if (drive.rabi_i_hz > 0)
      v += k::two_pi * drive.rabi_i_hz * embed(i_ops.jx, 2 * ion + 1, dims);
  }
  double f_max = drive.frequency_hz;
  for (int idx = 0; idx < dim; ++idx)
    f_max = std::max(f_max, std::abs(h0(idx)) / k::two_pi);
  double steps_d = std::ceil(duration_s * steps_per_cycle * f_max);
  if (steps_d > 5e7)
    throw NumericalError("lab-frame integration would need too many steps; "
                         "scale the system down first");
  int steps = std::max(1, static_cast<int>(steps_d));
  double h = duration_s / steps;
  cmat h0m = h0.cast<cxd>().asDiagonal();
  cmat u = cmat::Identity(dim, dim);
  for (int step = 0; step < steps; ++step) {
    double t_mid = (step + 0.5) * h;
    double envelope =
        2.0 * std::cos(k::two_pi * drive.frequency_hz * t_mid +
                       drive.phase_rad);
    cmat ht = h0m + envelope * v;
    u = mat_exp_hermitian(ht, h) * u;
  }
  return u;
}

cmat rwa_to_lab(const SystemLayout& layout, Channel channel,
                double frequency_hz, const cmat& u_rwa, double duration_s) {
  cmat k_op = frame_k_operator(layout, channel);
  int dim = static_cast<int>(u_rwa.rows());
  Eigen::VectorXcd diag(dim);
  for (int idx = 0; idx < dim; ++idx)
    diag(idx) = std::exp(
        cxd(0, -k::two_pi * frequency_hz * duration_s * k_op(idx, idx).real()));
  return diag.asDiagonal() * u_rwa;
}

DephasingResult dephasing_mc(const Schedule& s, const NoiseSpec& noise) {
  if (noise.trials < 1)
    throw std::invalid_argument("need at least one trial");
  if (noise.delta_b_rms_tesla < 0)
    throw std::invalid_argument("field spread must be nonnegative");
  std::mt19937_64 rng(noise.seed);
  DephasingResult out;
  out.fidelities.reserve(static_cast<std::size_t>(noise.trials));
  std::vector<double> phases;
  phases.reserve(static_cast<std::size_t>(noise.trials));
  double gamma_s = s.layout.species.electron_gamma_hz_per_t;
  for (int trial = 0; trial < noise.trials; ++trial) {
    double db = noise.delta_b_rms_tesla * gaussian_draw(rng);
    ExecOptions opt;
    SystemLayout exec = s.layout;
    exec.b0_tesla += db;
    opt.exec_layout = exec;
    cmat u = execute_physical(s, opt);
    out.fidelities.push_back(physical_metrics(u, s).fidelity);
    phases.push_back(k::two_pi * gamma_s * db * s.total_duration_s);
  }
  double mean = 0.0;
  for (double f : out.fidelities)
    mean += f;
  mean /= noise.trials;
  out.mean_fidelity = mean;
  if (noise.trials > 1) {
    double var = 0.0;
    for (double f : out.fidelities)
      var += (f - mean) * (f - mean);
    var /= noise.trials - 1;
    out.stderr_fidelity = std::sqrt(var / noise.trials);
    double pmean = 0.0;
    for (double ph : phases)
      pmean += ph;
    pmean /= noise.trials;
    double pvar = 0.0;
    for (double ph : phases)
      pvar += (ph - pmean) * (ph - pmean);
    out.phase_std_rad = std::sqrt(pvar / (noise.trials - 1));
  }
  return out;
}

std::vector<ScanPoint> selectivity_scan(const SystemLayout& layout, int ion,
                                        const std::vector<double>& rabi_hz) {
  if (ion < 0 || ion >= layout.n_ions)
    throw std::invalid_argument("scan ion out of range");
  std::vector<ScanPoint> out;
  out.reserve(rabi_hz.size());
  Circuit c;
  c.n_ions = layout.n_ions;
  Gate g;
  g.kind = GateKind::cnot_is;
  g.ion = ion;
  c.gates.push_back(g);
  for (double rabi : rabi_hz) {
    if (!(rabi > 0))
      throw std::invalid_argument("scan rabi rates must be positive");
    CompileOptions co;
    co.rabi_mw_hz = rabi;
    Schedule sch = compile_on_layout(c, layout, co);
    cmat u = execute_physical(sch);
    GateMetrics gm = physical_metrics(u, sch);
    out.push_back(ScanPoint{rabi, 1.0 - gm.fidelity, gm.leakage});
  }
  return out;
}

} // namespace ionreg
