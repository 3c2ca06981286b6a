#pragma once

#include <numbers>

namespace qoct {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = std::numbers::pi;

// Distances at the I/O boundary are optical paths c*tau in micrometres.
constexpr double path_um_to_seconds(double path_um) {
  return path_um * 1e-6 / kSpeedOfLight;
}

constexpr double seconds_to_path_um(double seconds) {
  return seconds * kSpeedOfLight * 1e6;
}

/// Half the pump angular frequency: the degenerate centre of the biphoton
/// spectrum for a pump of wavelength `pump_nm`.
constexpr double pump_nm_to_omega0(double pump_nm) {
  return kPi * kSpeedOfLight / (pump_nm * 1e-9);
}

}  // namespace qoct
