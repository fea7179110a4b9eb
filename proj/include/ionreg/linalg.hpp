#pragma once

#include "ionreg/spin.hpp"

#include <vector>

namespace ionreg {

// Kronecker product, a slowest-varying (row-major tensor convention).
cmat kron(const cmat& a, const cmat& b);

// Embeds op into the tensor product of subsystems with dimensions dims,
// acting on slot `slot` and as identity elsewhere. Slot 0 is the
// slowest-varying (leftmost) factor.
cmat embed(const cmat& op, int slot, const std::vector<int>& dims);

bool is_hermitian(const cmat& m, double rel_tol = 1e-12);
bool is_unitary(const cmat& m, double tol = 1e-10);

// exp(-i H t) for Hermitian H (entries in rad/s, t in seconds), computed by
// eigendecomposition; exact for piecewise-constant Hamiltonians. Throws
// std::invalid_argument on non-Hermitian input.
cmat mat_exp_hermitian(const cmat& h, double t);

// |trace(P U^dag V P)| / rank(P): global-phase-invariant overlap of two
// unitaries, optionally restricted to the subspace spanned by the given basis
// indices. U must be unitary on that subspace; V may leak out of it.
double process_fidelity(const cmat& u, const cmat& v);
double process_fidelity(const cmat& u, const cmat& v,
                        const std::vector<int>& subspace);

// sqrt(1 - |tr(U^dag V)|/dim): distance between unitaries ignoring global
// phase. Used for rotating-frame vs. lab-frame propagator comparisons.
double unitary_trace_distance(const cmat& u, const cmat& v);

} // namespace ionreg
