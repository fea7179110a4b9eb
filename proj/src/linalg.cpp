#include "ionreg/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace ionreg {

cmat kron(const cmat& a, const cmat& b) {
  cmat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      out.block(i * b.rows(), k * b.cols(), b.rows(), b.cols()) = a(i, k) * b;
    }
  }
  return out;
}

cmat embed(const cmat& op, int slot, const std::vector<int>& dims) {
  if (slot < 0 || slot >= static_cast<int>(dims.size())) {
    throw std::out_of_range("embed: slot out of range");
  }
  if (op.rows() != op.cols() || op.rows() != dims[slot]) {
    throw std::invalid_argument("embed: operator dimension does not match slot");
  }
  cmat out = cmat::Identity(1, 1);
  for (int s = 0; s < static_cast<int>(dims.size()); ++s) {
    if (s == slot) {
      out = kron(out, op);
    } else {
      out = kron(out, cmat::Identity(dims[s], dims[s]));
    }
  }
  return out;
}

bool is_hermitian(const cmat& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return true;
  const double defect = (m - m.adjoint()).cwiseAbs().maxCoeff();
  return defect <= rel_tol * scale;
}

bool is_unitary(const cmat& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const cmat g = m.adjoint() * m - cmat::Identity(m.rows(), m.cols());
  return g.cwiseAbs().maxCoeff() <= tol;
}

cmat mat_exp_hermitian(const cmat& h, double t) {
  if (!is_hermitian(h)) {
    throw std::invalid_argument("mat_exp_hermitian: input is not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<cmat> es(h);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("mat_exp_hermitian: eigendecomposition failed");
  }
  const Eigen::VectorXd& w = es.eigenvalues();
  const cmat& v = es.eigenvectors();
  cvec phases(w.size());
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    phases(k) = std::exp(cxd(0.0, -w(k) * t));
  }
  return v * phases.asDiagonal() * v.adjoint();
}

double process_fidelity(const cmat& u, const cmat& v) {
  if (u.rows() != v.rows() || u.cols() != v.cols()) {
    throw std::invalid_argument("process_fidelity: dimension mismatch");
  }
  const cxd tr = (u.adjoint() * v).trace();
  return std::abs(tr) / static_cast<double>(u.rows());
}

double process_fidelity(const cmat& u, const cmat& v,
                        const std::vector<int>& subspace) {
  if (u.rows() != v.rows() || u.cols() != v.cols()) {
    throw std::invalid_argument("process_fidelity: dimension mismatch");
  }
  if (subspace.empty()) {
    throw std::invalid_argument("process_fidelity: empty subspace");
  }
  cxd tr(0.0, 0.0);
  for (int b : subspace) {
    if (b < 0 || b >= u.rows()) {
      throw std::out_of_range("process_fidelity: subspace index out of range");
    }
    // <b| U^dag V |b>, the diagonal of P U^dag V P
    tr += u.col(b).dot(v.col(b));
  }
  return std::abs(tr) / static_cast<double>(subspace.size());
}

double unitary_trace_distance(const cmat& u, const cmat& v) {
  const double f = process_fidelity(u, v);
  const double arg = 1.0 - f;
  return std::sqrt(arg > 0.0 ? arg : 0.0);
}

} // namespace ionreg
