#include "ionreg/spin.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace ionreg {

SpinSpec make_spin(std::string label, double j) {
  const double twoj = 2.0 * j;
  if (j < 0.0 || std::abs(twoj - std::round(twoj)) > 1e-12) {
    throw std::invalid_argument("spin quantum number must be a non-negative half-integer");
  }
  SpinSpec spec;
  spec.label = std::move(label);
  spec.j = j;
  spec.dim = static_cast<int>(std::lround(twoj)) + 1;
  return spec;
}

double m_of_index(const SpinSpec& spec, int k) {
  if (k < 0 || k >= spec.dim) {
    throw std::out_of_range("basis index outside spin multiplet");
  }
  return spec.j - static_cast<double>(k);
}

SpinOps angular_momentum_ops(const SpinSpec& spec) {
  const int d = spec.dim;
  const double j = spec.j;
  SpinOps ops;
  ops.jz = cmat::Zero(d, d);
  ops.jplus = cmat::Zero(d, d);
  ops.jminus = cmat::Zero(d, d);
  for (int k = 0; k < d; ++k) {
    const double m = j - k;
    ops.jz(k, k) = m;
    // J+ |m> = sqrt(j(j+1) - m(m+1)) |m+1>; |m+1> has index k-1
    if (k > 0) {
      const double amp = std::sqrt(j * (j + 1.0) - m * (m + 1.0));
      ops.jplus(k - 1, k) = amp;
    }
  }
  ops.jminus = ops.jplus.adjoint();
  ops.jx = 0.5 * (ops.jplus + ops.jminus);
  ops.jy = cxd(0.0, -0.5) * (ops.jplus - ops.jminus);
  return ops;
}

bool state_normalized(const StateVector& psi, double tol) {
  return std::abs(psi.amplitudes.norm() - 1.0) <= tol;
}

} // namespace ionreg
