#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

namespace ionreg {

using cxd = std::complex<double>;
using cmat = Eigen::MatrixXcd;
using cvec = Eigen::VectorXcd;

// A single angular-momentum degree of freedom. Basis states are ordered by
// magnetic quantum number m = +j, +j-1, ..., -j (index 0 is m = +j).
struct SpinSpec {
  std::string label;
  double j = 0.5;
  int dim = 2;
};

// Validates that 2j is a non-negative integer and fills dim = 2j+1.
SpinSpec make_spin(std::string label, double j);

// m value of basis index k (0 <= k < dim): m = j - k.
double m_of_index(const SpinSpec& spec, int k);

struct SpinOps {
  cmat jx, jy, jz, jplus, jminus;
};

// Standard ladder-operator construction:
//   <m+1|J+|m> = sqrt(j(j+1) - m(m+1)),  Jx = (J+ + J-)/2,  Jy = (J+ - J-)/(2i)
SpinOps angular_momentum_ops(const SpinSpec& spec);

struct StateVector {
  int dim = 0;
  cvec amplitudes;
};

bool state_normalized(const StateVector& psi, double tol = 1e-10);

} // namespace ionreg
