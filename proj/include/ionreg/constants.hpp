#pragma once

// Physical constants (SI). Internal frequency unit throughout the library is
// angular (rad/s); user-facing interfaces speak Hz and convert at the boundary.
namespace ionreg::constants {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

inline constexpr double hbar = 1.054571817e-34;              // J s
inline constexpr double elementary_charge = 1.602176634e-19; // C
inline constexpr double epsilon0 = 8.8541878128e-12;         // F/m

// e^2 / (4 pi eps0), the Coulomb energy prefactor in J m
inline constexpr double coulomb_k =
    elementary_charge * elementary_charge / (4.0 * pi * epsilon0);

} // namespace ionreg::constants
