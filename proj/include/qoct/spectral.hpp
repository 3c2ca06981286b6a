#pragma once

// Biphoton joint spectral intensity.
//
// In rotated coordinates s = w1 + w2 - 2 w0 (diagonal) and v = w1 - w2
// (antidiagonal) the spectrum factorises:
//   S = (4 / (pi Wa Wd)) exp(-2 (s/Wd)^2) exp(-2 (v/Wa)^2).
// The rectangular profile swaps the antidiagonal Gaussian for a top-hat of
// full width Wa, rescaled so that S still integrates to one.
//
// Width convention: a FWHM measured along a coordinate maps to the Gaussian
// scale through FWHM = W sqrt(2 ln 2). A band-pass filter of width dw acting on
// each photon spans 2 dw along v, since v = 2 (w1 - w0) when w1 + w2 is pinned
// by the pump.

#include <cmath>
#include <string>
#include <string_view>

#include "qoct/error.hpp"
#include "qoct/units.hpp"

namespace qoct {

enum class FilterProfile { gaussian, rectangular };

inline std::string to_string(FilterProfile p) {
  return p == FilterProfile::gaussian ? "gaussian" : "rectangular";
}

inline FilterProfile parse_profile(std::string_view name) {
  if (name == "gaussian") return FilterProfile::gaussian;
  if (name == "rectangular") return FilterProfile::rectangular;
  throw ValidationError("unknown filter profile '" + std::string(name) +
                        "' (expected gaussian or rectangular)");
}

class SpectralModel {
 public:
  SpectralModel(double omega0, double omega_a, double omega_d,
                FilterProfile profile = FilterProfile::gaussian)
      : omega0_(omega0), omega_a_(omega_a), omega_d_(omega_d), profile_(profile) {
    if (!(omega0 > 0.0) || !(omega_a > 0.0) || !(omega_d > 0.0) || !std::isfinite(omega0) ||
        !std::isfinite(omega_a) || !std::isfinite(omega_d)) {
      throw ValidationError("spectral model needs omega0, Omega_a, Omega_d > 0");
    }
  }

  double omega0() const { return omega0_; }
  double omega_a() const { return omega_a_; }
  double omega_d() const { return omega_d_; }
  FilterProfile profile() const { return profile_; }

  double tau_a() const { return 4.0 / omega_a_; }
  double tau_d() const { return 4.0 / omega_d_; }

  SpectralModel with_omega0(double omega0) const {
    return SpectralModel(omega0, omega_a_, omega_d_, profile_);
  }
  SpectralModel with_tau_d(double tau_d) const {
    return SpectralModel(omega0_, omega_a_, 4.0 / tau_d, profile_);
  }
  SpectralModel with_profile(FilterProfile p) const {
    return SpectralModel(omega0_, omega_a_, omega_d_, p);
  }

  friend bool operator==(const SpectralModel&, const SpectralModel&) = default;

 private:
  double omega0_;
  double omega_a_;
  double omega_d_;
  FilterProfile profile_;
};

namespace detail {
inline double fwhm_to_scale(double fwhm) { return fwhm / std::sqrt(2.0 * std::log(2.0)); }
}  // namespace detail

/// Normalised density of the diagonal coordinate s (integrates to one over s).
inline double diagonal_density(const SpectralModel& m, double s) {
  const double x = s / m.omega_d();
  return std::sqrt(2.0 / kPi) / m.omega_d() * std::exp(-2.0 * x * x);
}

/// Normalised density of the antidiagonal coordinate v (integrates to one over v).
inline double antidiagonal_density(const SpectralModel& m, double v) {
  if (m.profile() == FilterProfile::gaussian) {
    const double x = v / m.omega_a();
    return std::sqrt(2.0 / kPi) / m.omega_a() * std::exp(-2.0 * x * x);
  }
  return std::abs(v) <= 0.5 * m.omega_a() ? 1.0 / m.omega_a() : 0.0;
}

/// Joint spectral intensity S(w1, w2); symmetric and normalised to one.
inline double jsi(const SpectralModel& m, double omega1, double omega2) {
  const double s = omega1 + omega2 - 2.0 * m.omega0();
  const double v = omega1 - omega2;
  // dw1 dw2 = ds dv / 2
  return 2.0 * diagonal_density(m, s) * antidiagonal_density(m, v);
}

/// Shape of a single HOM dip: the Fourier transform of the antidiagonal density.
/// Gaussian: exp(-2 (tau/tau_a)^2); rectangular: sinc(Wa tau / 2).
inline double dip_envelope(const SpectralModel& m, double tau) {
  if (m.profile() == FilterProfile::gaussian) {
    const double x = tau / m.tau_a();
    return std::exp(-2.0 * x * x);
  }
  const double x = 0.5 * m.omega_a() * tau;
  return std::abs(x) < 1e-12 ? 1.0 : std::sin(x) / x;
}

/// Damping of a cross term between features separated by `delta` along the
/// diagonal direction: exp(-(delta/tau_d)^2 / 2).
inline double diagonal_damping(const SpectralModel& m, double delta) {
  const double x = delta / m.tau_d();
  return std::exp(-0.5 * x * x);
}

/// Builds a model from laboratory settings. The pump fixes w0 = pi c / pump;
/// the band-pass filter (width at `center_nm`) sets Omega_a and the pump
/// linewidth sets Omega_d.
inline SpectralModel from_wavelengths(double pump_nm, double center_nm, double filter_fwhm_nm,
                                      double pump_linewidth_hz,
                                      FilterProfile profile = FilterProfile::gaussian) {
  if (!(pump_nm > 0.0) || !(center_nm > 0.0) || !(filter_fwhm_nm > 0.0) ||
      !(pump_linewidth_hz > 0.0)) {
    throw ValidationError("wavelengths, filter width and pump linewidth must all be > 0");
  }
  const double center_m = center_nm * 1e-9;
  const double filter_width_omega = 2.0 * kPi * kSpeedOfLight * filter_fwhm_nm * 1e-9 /
                                    (center_m * center_m);
  const double antidiagonal_width = 2.0 * filter_width_omega;
  const double omega_a = profile == FilterProfile::gaussian
                             ? detail::fwhm_to_scale(antidiagonal_width)
                             : antidiagonal_width;
  const double omega_d = detail::fwhm_to_scale(2.0 * kPi * pump_linewidth_hz);
  return SpectralModel(pump_nm_to_omega0(pump_nm), omega_a, omega_d, profile);
}

}  // namespace qoct
