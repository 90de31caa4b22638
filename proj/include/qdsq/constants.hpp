#pragma once

#include <numbers>

namespace qdsq::phys {

inline constexpr double hbar = 1.054571817e-34;        // J s
inline constexpr double c0 = 2.99792458e8;             // m/s
inline constexpr double e_charge = 1.602176634e-19;    // C
inline constexpr double eps0 = 8.8541878128e-12;       // F/m
inline constexpr double pi = std::numbers::pi;

// internal time unit
inline constexpr double ps = 1e-12;

}  // namespace qdsq::phys
