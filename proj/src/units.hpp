#pragma once

#include <cmath>

namespace omtsim {

// Physical constants (SI).
inline constexpr double hbar = 1.054571817e-34;      // J s
inline constexpr double speed_of_light = 2.99792458e8;  // m/s
inline constexpr double elementary_charge = 1.602176634e-19;  // C

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

// All rates are stored internally as angular frequencies (rad/s). Human-facing
// inputs (preset files, reports) use ordinary frequencies f = omega/2pi.
inline constexpr double angular(double hz) { return two_pi * hz; }
inline constexpr double to_hz(double rad_per_s) { return rad_per_s / two_pi; }

}  // namespace omtsim
