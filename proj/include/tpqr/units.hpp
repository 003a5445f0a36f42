#pragma once

#include <numbers>

// Unit conventions used throughout the library:
//   * every frequency and coupling is an angular frequency in rad/ns,
//   * every decay rate is in 1/ns,
//   * every time is in ns.
// Configuration files and CLI flags quote cyclic frequencies (value/2pi in
// GHz or MHz) and rates in 1/us; these helpers convert at the boundary so
// that no 2*pi factor ever appears inside the physics code.
namespace tpqr::units {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// cyclic GHz -> angular rad/ns  (1 GHz * 2pi = 2pi rad/ns)
inline constexpr double ghz_cyclic(double f_ghz) { return two_pi * f_ghz; }

// cyclic MHz -> angular rad/ns
inline constexpr double mhz_cyclic(double f_mhz) { return two_pi * f_mhz * 1e-3; }

// angular rad/ns -> cyclic GHz
inline constexpr double to_ghz_cyclic(double w) { return w / two_pi; }

// angular rad/ns -> cyclic MHz
inline constexpr double to_mhz_cyclic(double w) { return w / two_pi * 1e3; }

// 1/us -> 1/ns
inline constexpr double per_us(double rate) { return rate * 1e-3; }

// 1/ns -> 1/us
inline constexpr double to_per_us(double rate) { return rate * 1e3; }

}  // namespace tpqr::units
