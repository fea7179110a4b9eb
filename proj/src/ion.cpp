#include "ionreg/ion.hpp"

#include "ionreg/constants.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <tuple>

namespace ionreg {

namespace k = constants;

namespace {

constexpr long long kDimCap = 4096;

struct Digits {
  int s_idx; // 0 -> m_s = +1/2
  int i_idx; // 0 -> m_i = +I
};

int nuclear_dim(const IonSpecies& sp) {
  return static_cast<int>(std::lround(2.0 * sp.nuclear_spin)) + 1;
}

Digits digits_of(const SystemLayout& layout, int index, int ion) {
  const int di = nuclear_dim(layout.species);
  const int per_ion = 2 * di;
  int rest = index;
  for (int j = layout.n_ions - 1; j > ion; --j) rest /= per_ion;
  const int mine = rest % per_ion;
  return Digits{mine / di, mine % di};
}

} // namespace

IonSpecies ca43_defaults() {
  IonSpecies sp;
  sp.name = "43Ca+";
  sp.mass_kg = 43.0 * 1.67e-27;
  sp.nuclear_spin = 3.5;
  sp.hyperfine_a_hz = -806.4e6;
  sp.electron_gamma_hz_per_t = 28.02e9;
  sp.nuclear_gamma_hz_per_t = 2.85e6;
  return sp;
}

void validate_species(const IonSpecies& sp) {
  if (!(sp.mass_kg > 0.0)) throw std::invalid_argument("species mass must be positive");
  if (!(sp.electron_gamma_hz_per_t > 0.0))
    throw std::invalid_argument("electron gamma must be positive");
  const double twice = 2.0 * sp.nuclear_spin;
  if (twice < 0.0 || std::abs(twice - std::lround(twice)) > 1e-9)
    throw std::invalid_argument("nuclear spin must be a non-negative half-integer");
}

void validate_layout(const SystemLayout& layout) {
  validate_species(layout.species);
  if (layout.n_ions < 1) throw std::invalid_argument("layout needs at least one ion");
  if (!(layout.b0_tesla > 0.0))
    throw std::invalid_argument("static field must be positive (strong-field basis)");
  const auto n = static_cast<std::size_t>(layout.n_ions);
  if (!layout.positions_m.empty() && layout.positions_m.size() != n)
    throw std::invalid_argument("positions length must match the ion count");
  if (layout.n_ions > 1) {
    if (layout.positions_m.size() != n)
      throw std::invalid_argument("multi-ion layout requires ion positions");
    if (layout.j_rad_s.rows() != layout.n_ions || layout.j_rad_s.cols() != layout.n_ions)
      throw std::invalid_argument("multi-ion layout requires an n x n coupling matrix");
  }
  if (layout.j_rad_s.size() > 0) {
    const double scale = std::max(1.0, layout.j_rad_s.cwiseAbs().maxCoeff());
    if ((layout.j_rad_s - layout.j_rad_s.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
      throw std::invalid_argument("coupling matrix must be symmetric");
    if (layout.j_rad_s.diagonal().cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw std::invalid_argument("coupling matrix must have zero diagonal");
  }
}

double field_at(const SystemLayout& layout, int ion) {
  if (ion < 0 || ion >= layout.n_ions) throw std::out_of_range("ion index out of range");
  const double z = layout.positions_m.empty() ? 0.0 : layout.positions_m[ion];
  return layout.b0_tesla + layout.gradient_t_per_m * z;
}

int spin_dim(const IonSpecies& sp) { return 2 * nuclear_dim(sp); }

int full_dim(const SystemLayout& layout) {
  long long d = 1;
  for (int i = 0; i < layout.n_ions; ++i) {
    d *= spin_dim(layout.species);
    if (d > kDimCap)
      throw std::invalid_argument("register dimension exceeds the 4096 state cap");
  }
  return static_cast<int>(d);
}

std::vector<int> slot_dims(const SystemLayout& layout) {
  std::vector<int> dims;
  dims.reserve(2 * static_cast<std::size_t>(layout.n_ions));
  for (int i = 0; i < layout.n_ions; ++i) {
    dims.push_back(2);
    dims.push_back(nuclear_dim(layout.species));
  }
  return dims;
}

BasisLabels basis_labels(const SystemLayout& layout, int index) {
  if (index < 0 || index >= full_dim(layout))
    throw std::out_of_range("basis index out of range");
  BasisLabels out;
  out.m_s.resize(layout.n_ions);
  out.m_i.resize(layout.n_ions);
  for (int i = 0; i < layout.n_ions; ++i) {
    const Digits d = digits_of(layout, index, i);
    out.m_s[i] = 0.5 - d.s_idx;
    out.m_i[i] = layout.species.nuclear_spin - d.i_idx;
  }
  return out;
}

std::string basis_label_string(const SystemLayout& layout, int index) {
  const BasisLabels lbl = basis_labels(layout, index);
  std::string out;
  char buf[32];
  for (int i = 0; i < layout.n_ions; ++i) {
    if (i > 0) out += '_';
    std::snprintf(buf, sizeof(buf), "s%+di%+d",
                  static_cast<int>(std::lround(2.0 * lbl.m_s[i])),
                  static_cast<int>(std::lround(2.0 * lbl.m_i[i])));
    out += buf;
  }
  return out;
}

Eigen::VectorXd h0_diagonal(const SystemLayout& layout) {
  validate_layout(layout);
  const int dim = full_dim(layout);
  const IonSpecies& sp = layout.species;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(dim);
  for (int n = 0; n < dim; ++n) {
    const BasisLabels lbl = basis_labels(layout, n);
    double e = 0.0;
    for (int i = 0; i < layout.n_ions; ++i) {
      const double b = field_at(layout, i);
      e += k::two_pi * sp.electron_gamma_hz_per_t * b * lbl.m_s[i];
      e -= k::two_pi * sp.nuclear_gamma_hz_per_t * b * lbl.m_i[i];
      e += k::two_pi * sp.hyperfine_a_hz * lbl.m_s[i] * lbl.m_i[i];
    }
    if (layout.j_rad_s.size() > 0) {
      for (int i = 0; i < layout.n_ions; ++i)
        for (int j = i + 1; j < layout.n_ions; ++j)
          e -= layout.j_rad_s(i, j) * lbl.m_s[i] * lbl.m_s[j];
    }
    diag(n) = e;
  }
  return diag;
}

cmat build_h0(const SystemLayout& layout) {
  return h0_diagonal(layout).cast<cxd>().asDiagonal();
}

cmat frame_k_operator(const SystemLayout& layout, Channel channel) {
  validate_layout(layout);
  const int dim = full_dim(layout);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(dim);
  for (int n = 0; n < dim; ++n) {
    const BasisLabels lbl = basis_labels(layout, n);
    double v = 0.0;
    for (int i = 0; i < layout.n_ions; ++i) {
      if (channel == Channel::mw)
        v += lbl.m_s[i];
      else
        v -= 2.0 * lbl.m_s[i] * lbl.m_i[i];
    }
    diag(n) = v;
  }
  return diag.cast<cxd>().asDiagonal();
}

cmat drive_operator_rwa(const SystemLayout& layout, const DriveParams& drive,
                        Channel channel) {
  validate_layout(layout);
  if (drive.rabi_s_hz < 0.0 || drive.rabi_i_hz < 0.0)
    throw std::invalid_argument("rabi frequencies must be non-negative");
  const int dim = full_dim(layout);
  const auto dims = slot_dims(layout);
  const auto sops = angular_momentum_ops(make_spin("S", 0.5));
  const auto iops = angular_momentum_ops(make_spin("I", layout.species.nuclear_spin));
  const cxd ephase = std::exp(cxd(0.0, -drive.phase_rad));

  cmat h = cmat::Zero(dim, dim);
  if (channel == Channel::mw) {
    const double w = k::two_pi * drive.rabi_s_hz;
    if (w == 0.0) return h;
    const cmat local = 0.5 * w * (ephase * sops.jplus + std::conj(ephase) * sops.jminus);
    for (int i = 0; i < layout.n_ions; ++i) h += embed(local, 2 * i, dims);
  } else {
    const double w = k::two_pi * drive.rabi_i_hz;
    if (w == 0.0) return h;
    // Per electron manifold the co-rotating half of the cosine pairs with the
    // opposite ladder operator, so the phase enters with opposite sign for
    // m_S = +1/2 (where the nuclear gap decreases with m_I).
    cmat pup = cmat::Zero(2, 2);
    pup(0, 0) = 1.0;
    cmat pdn = cmat::Zero(2, 2);
    pdn(1, 1) = 1.0;
    const cmat up_part = 0.5 * w * (std::conj(ephase) * iops.jplus + ephase * iops.jminus);
    const cmat dn_part = 0.5 * w * (ephase * iops.jplus + std::conj(ephase) * iops.jminus);
    const cmat local = kron(pup, up_part) + kron(pdn, dn_part);
    for (int i = 0; i < layout.n_ions; ++i) {
      // embed the two-slot block of ion i as one unit
      cmat full = cmat::Identity(1, 1);
      for (int j = 0; j < layout.n_ions; ++j) {
        if (j == i)
          full = kron(full, local);
        else
          full = kron(full, cmat::Identity(2 * iops.jz.rows(), 2 * iops.jz.rows()));
      }
      h += full;
    }
  }
  return h;
}

cmat build_h1_rwa(const SystemLayout& layout, const DriveParams& drive,
                  Channel channel) {
  if (drive.frequency_hz == 0.0)
    throw std::invalid_argument("drive frequency must be nonzero");
  if (channel == Channel::mw && drive.rabi_s_hz == 0.0 && drive.rabi_i_hz > 0.0)
    throw std::invalid_argument("MW drive carries no electron rabi frequency");
  if (channel == Channel::rf && drive.rabi_i_hz == 0.0 && drive.rabi_s_hz > 0.0)
    throw std::invalid_argument("RF drive carries no nuclear rabi frequency");
  const double wd = k::two_pi * drive.frequency_hz;
  return build_h0(layout) - wd * frame_k_operator(layout, channel) +
         drive_operator_rwa(layout, drive, channel);
}

std::vector<SpectrumLine> transition_spectrum(const SystemLayout& layout,
                                              Channel channel) {
  validate_layout(layout);
  const int dim = full_dim(layout);
  const Eigen::VectorXd energy = h0_diagonal(layout);
  const int di = nuclear_dim(layout.species);
  const int per_ion = 2 * di;
  const double ii = layout.species.nuclear_spin;

  std::vector<SpectrumLine> lines;
  for (int n = 0; n < dim; ++n) {
    // stride of ion i's digit block
    long long stride = 1;
    std::vector<long long> strides(layout.n_ions);
    for (int i = layout.n_ions - 1; i >= 0; --i) {
      strides[i] = stride;
      stride *= per_ion;
    }
    for (int i = 0; i < layout.n_ions; ++i) {
      const Digits d = digits_of(layout, n, i);
      std::vector<std::pair<int, double>> partners; // (index delta, |element|)
      if (channel == Channel::mw) {
        // flip the electron, element <.|S_x|.> = 1/2
        if (d.s_idx == 1) partners.push_back({-di, 0.5});
        if (d.s_idx == 0) partners.push_back({+di, 0.5});
      } else {
        const double m = ii - d.i_idx;
        if (d.i_idx >= 1) {
          const double el = 0.5 * std::sqrt(ii * (ii + 1.0) - m * (m + 1.0));
          partners.push_back({-1, el}); // m_i -> m_i + 1
        }
        if (d.i_idx <= di - 2) {
          const double el = 0.5 * std::sqrt(ii * (ii + 1.0) - m * (m - 1.0));
          partners.push_back({+1, el}); // m_i -> m_i - 1
        }
      }
      for (const auto& [delta, el] : partners) {
        const int m2 = n + static_cast<int>(delta * strides[i]);
        const double df = energy(m2) - energy(n);
        if (df <= 0.0) continue; // count each pair once, from its lower level
        SpectrumLine line;
        line.ion = i;
        line.frequency_hz = df / k::two_pi;
        line.intensity = el * el;
        line.label_initial = basis_label_string(layout, n);
        line.label_final = basis_label_string(layout, m2);
        lines.push_back(std::move(line));
      }
    }
  }
  std::sort(lines.begin(), lines.end(), [](const SpectrumLine& a, const SpectrumLine& b) {
    return std::tie(a.frequency_hz, a.ion, a.label_initial) <
           std::tie(b.frequency_hz, b.ion, b.label_initial);
  });
  return lines;
}

double mw_line_hz(const SystemLayout& layout, int ion, double m_i) {
  const double b = field_at(layout, ion);
  return layout.species.electron_gamma_hz_per_t * b +
         layout.species.hyperfine_a_hz * m_i;
}

double mw_line_hz(const SystemLayout& layout, int ion, double m_i,
                  double control_ms, double j_rad_s) {
  return mw_line_hz(layout, ion, m_i) - j_rad_s * control_ms / k::two_pi;
}

double rf_line_hz(const SystemLayout& layout, int ion, double m_s) {
  const double b = field_at(layout, ion);
  return std::abs(-layout.species.nuclear_gamma_hz_per_t * b +
                  layout.species.hyperfine_a_hz * m_s);
}

} // namespace ionreg
