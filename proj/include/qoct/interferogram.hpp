#pragma once

// Coincidence traces C(tau)/Gamma0 of a multilayer sample probed by a
// biphoton source.
//
// Normalised with N0 = 1:
//   Gamma0    = 1/4 ∫∫ S(w1,w2) [|H(w1)|^2 + |H(w2)|^2]
//   Gamma(t)  = 1/4 ∫∫ S(w1,w2) H(w2) H*(w1) exp(i (w2 - w1) t)
//   C(t)/G0   = 1 - 2 Re Gamma(t) / Gamma0
//
// The numeric engine discretises the antidiagonal axis on a uniform lattice
// whose step is tied to the delay step, so that the trapezoidal sum over v for
// every delay on the grid is a single FFT. The lattice period in delay is
// sized from an echo-horizon estimate so that wrap-around stays below the
// requested tolerance.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qoct/error.hpp"
#include "qoct/fft.hpp"
#include "qoct/spectral.hpp"
#include "qoct/stack_model.hpp"
#include "qoct/units.hpp"

namespace qoct {

struct Interferogram {
  std::vector<double> delays;  ///< tau grid [s], uniform and increasing
  std::vector<double> counts;  ///< C(tau) / Gamma0
  double gamma0 = 0.0;         ///< Gamma0 / N0
  std::map<std::string, std::string> meta;

  friend bool operator==(const Interferogram&, const Interferogram&) = default;
};

struct DelayGrid {
  double start = 0.0;
  double step = 0.0;
  std::size_t count = 0;
};

/// Uniform grid from lo_um to hi_um (inclusive, optical path units).
inline std::vector<double> make_delay_grid_um(double lo_um, double hi_um, double step_um) {
  if (!(step_um > 0.0) || !(hi_um >= lo_um)) {
    throw ValidationError("delay grid needs step > 0 and hi >= lo");
  }
  const auto count = static_cast<std::size_t>(std::floor((hi_um - lo_um) / step_um + 1e-9)) + 1;
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = path_um_to_seconds(lo_um + static_cast<double>(i) * step_um);
  }
  return out;
}

inline DelayGrid check_uniform_grid(std::span<const double> delays) {
  if (delays.empty()) throw ValidationError("delay grid is empty");
  DelayGrid g{delays.front(), path_um_to_seconds(1.0), delays.size()};
  if (delays.size() == 1) return g;
  g.step = (delays.back() - delays.front()) / static_cast<double>(delays.size() - 1);
  if (!(g.step > 0.0)) throw ValidationError("delay grid must be strictly increasing");
  for (std::size_t i = 1; i < delays.size(); ++i) {
    const double d = delays[i] - delays[i - 1];
    if (std::abs(d - g.step) > 1e-6 * g.step) {
      throw ValidationError("delay grid is not uniform");
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Fast transfer-function evaluation

namespace detail {

/// H(w) from the second row of the transfer matrix, accumulated as a row
/// vector from the back surface. Overall scale factors cancel in -C/D, so the
/// 1/t prefactors and exp(-kappa) are dropped (loss enters as exp(-2 kappa)).
class TransferEvaluator {
 public:
  explicit TransferEvaluator(const Sample& sample) {
    for (const auto& iface : sample.interfaces()) r_.push_back(iface.r_fwd);
    for (std::size_t j = 1; j < sample.size(); ++j) {
      delay_.push_back(sample.segments()[j - 1].optical_delay);
      loss2_.push_back(std::exp(-2.0 * sample.segment_kappa(j)));
    }
  }

  complex at(double omega) const {
    std::vector<complex> u(delay_.size());
    for (std::size_t j = 0; j < delay_.size(); ++j) u[j] = std::polar(1.0, -omega * delay_[j]);
    return chain(u.data());
  }

  /// out[q] = H(start + q * step) for q in [0, count).
  void lattice(double start, double step, std::size_t count, complex* out) const {
    constexpr std::size_t kReanchor = 512;
    const std::size_t m = delay_.size();
    // Plain real arithmetic: std::complex products carry NaN-recovery branches.
    std::vector<double> ur(m), ui(m), sr(m), si(m);
    for (std::size_t j = 0; j < m; ++j) {
      sr[j] = std::cos(step * delay_[j]);
      si[j] = -std::sin(step * delay_[j]);
    }
    for (std::size_t q = 0; q < count; ++q) {
      if (q % kReanchor == 0) {
        const double omega = start + static_cast<double>(q) * step;
        for (std::size_t j = 0; j < m; ++j) {
          const complex u = std::polar(1.0, -omega * delay_[j]);
          ur[j] = u.real();
          ui[j] = u.imag();
        }
      }
      out[q] = chain(ur.data(), ui.data());
      for (std::size_t j = 0; j < m; ++j) {
        const double a = ur[j] * sr[j] - ui[j] * si[j];
        ui[j] = ur[j] * si[j] + ui[j] * sr[j];
        ur[j] = a;
      }
    }
  }

 private:
  complex chain(const complex* u) const {
    std::vector<double> ur(delay_.size()), ui(delay_.size());
    for (std::size_t j = 0; j < delay_.size(); ++j) {
      ur[j] = u[j].real();
      ui[j] = u[j].imag();
    }
    return chain(ur.data(), ui.data());
  }

  complex chain(const double* ur, const double* ui) const {
    double ar = 0.0, ai = 0.0, br = 1.0, bi = 0.0;  // (x0, x1)
    for (std::size_t k = r_.size(); k-- > 0;) {
      const double r = r_[k];
      const double cr = ar - r * br, ci = ai - r * bi;
      const double dr = br - r * ar, di = bi - r * ai;
      if (k >= 1) {
        const double l = loss2_[k - 1];
        const double pr = ur[k - 1], pi = ui[k - 1];
        // x0 *= l u, x1 *= conj(u)
        ar = l * (cr * pr - ci * pi);
        ai = l * (cr * pi + ci * pr);
        br = dr * pr + di * pi;
        bi = di * pr - dr * pi;
      } else {
        ar = cr;
        ai = ci;
        br = dr;
        bi = di;
      }
    }
    const double den = br * br + bi * bi;
    if (std::sqrt(den) < kSingularThreshold) throw SingularStack("transfer matrix has D = 0");
    // -x0 / x1
    return {-(ar * br + ai * bi) / den, -(ai * br - ar * bi) / den};
  }

  std::vector<double> r_;
  std::vector<double> delay_;
  std::vector<double> loss2_;
};

/// Trapezoid weight of an antidiagonal node at v with spacing dv; the top-hat
/// gets fractional weights at its edges.
inline double antidiagonal_weight(const SpectralModel& m, double v, double dv) {
  if (m.profile() == FilterProfile::gaussian) return antidiagonal_density(m, v) * dv;
  const double half = 0.5 * m.omega_a();
  const double lo = std::max(v - 0.5 * dv, -half);
  const double hi = std::min(v + 0.5 * dv, half);
  return hi > lo ? (hi - lo) / m.omega_a() : 0.0;
}

/// Delay beyond which a dip envelope is negligible.
inline double envelope_reach(const SpectralModel& m) {
  return m.profile() == FilterProfile::gaussian ? 4.0 * m.tau_a() : 200.0 * m.tau_a();
}

}  // namespace detail

/// Delay by which every multiply-reflected path has decayed below `tolerance`
/// in amplitude, estimated loop by loop: a loop between interfaces i < j has
/// per-pass gain |r_i r_j| prod(t_m^2) exp(-2 sum kappa) and duration
/// tau_j - tau_i.
inline double echo_horizon(const Sample& sample, double tolerance) {
  const auto delays = sample.interface_delays();
  const auto& ifaces = sample.interfaces();
  const double base = delays.back();
  double horizon = base;
  for (std::size_t i = 0; i < ifaces.size(); ++i) {
    double between = 1.0;
    for (std::size_t j = i + 1; j < ifaces.size(); ++j) {
      between *= std::exp(-2.0 * sample.segment_kappa(j));
      const double gain = std::abs(ifaces[i].r_fwd * ifaces[j].r_fwd) * between;
      if (gain > 0.0 && gain < 1.0) {
        const double loops = std::ceil(std::log(tolerance) / std::log(gain));
        if (loops > 0.0) horizon = std::max(horizon, base + loops * (delays[j] - delays[i]));
      }
      between *= 1.0 - ifaces[j].r_fwd * ifaces[j].r_fwd;
    }
  }
  return horizon;
}

struct QuadratureSettings {
  double span_bandwidths = 3.0;    ///< half-width of the node grids in units of Omega
  std::size_t diagonal_nodes = 0;  ///< 0: automatic (at least 64)
  std::size_t fft_size = 0;        ///< 0: automatic from the echo horizon
  double echo_tolerance = 1e-6;
  double cw_ratio = 100.0;  ///< tau_d above cw_ratio * scan span uses the 1-D reduction
  std::size_t max_fft_size = std::size_t{1} << 23;
  double max_tensor_nodes = 4e8;
};

/// Smallest lattice period (in delay) that keeps wrap-around away from the
/// grid, given the latest delay `reach` at which the trace still has structure.
inline double required_period(const SpectralModel& model, const DelayGrid& grid, double reach) {
  const double w = detail::envelope_reach(model);
  const double last = grid.start + grid.step * static_cast<double>(grid.count - 1);
  double period = std::max(reach + w - grid.start, last + w);
  // Keep the antidiagonal step well below the spectral width.
  period = std::max(period, 32.0 * kPi / model.omega_a());
  return period;
}

/// Lattice size the numeric engine would pick for this sample and grid.
inline std::size_t auto_fft_size(const Sample& sample, const SpectralModel& model,
                                 std::span<const double> delays,
                                 const QuadratureSettings& quad = {}) {
  const DelayGrid grid = check_uniform_grid(delays);
  const double period =
      required_period(model, grid, echo_horizon(sample, quad.echo_tolerance));
  const double cells = std::ceil(period / grid.step);
  if (!(cells < static_cast<double>(quad.max_fft_size))) {
    throw QuadratureResolution(
        "echo horizon needs a frequency lattice larger than the configured maximum; "
        "reflections are too strong to converge within the tolerance");
  }
  return std::bit_ceil(static_cast<std::size_t>(cells));
}

/// Full numeric evaluation of the coincidence trace.
inline Interferogram coincidence_trace_numeric(const Sample& sample, const SpectralModel& model,
                                               std::span<const double> delays,
                                               const QuadratureSettings& quad = {}) {
  const DelayGrid grid = check_uniform_grid(delays);
  const double last = grid.start + grid.step * static_cast<double>(grid.count - 1);
  const double round_trip = sample.total_round_trip();

  std::size_t m_size = quad.fft_size;
  if (m_size == 0) {
    m_size = auto_fft_size(sample, model, delays, quad);
  } else {
    const double period = grid.step * static_cast<double>(m_size);
    if (period < required_period(model, grid, round_trip)) {
      throw QuadratureResolution(
          "frequency lattice too coarse: its delay period " +
          std::to_string(seconds_to_path_um(period)) +
          " um cannot hold the scan and the sample's interfaces");
    }
  }
  const double dv = 2.0 * kPi / (grid.step * static_cast<double>(m_size));
  const double half_width = model.profile() == FilterProfile::gaussian
                                ? quad.span_bandwidths * model.omega_a()
                                : 0.5 * model.omega_a() + dv;
  const auto half_nodes = static_cast<std::int64_t>(std::ceil(half_width / dv));
  const std::size_t v_count = static_cast<std::size_t>(2 * half_nodes + 1);

  const double scan = std::max(last - grid.start, round_trip);
  const bool cw = model.tau_d() > quad.cw_ratio * scan;

  // Diagonal nodes (a single node at s = 0 in the CW reduction).
  std::vector<double> s_nodes{0.0};
  std::vector<double> s_weights{1.0};
  if (!cw) {
    const double reach = echo_horizon(sample, quad.echo_tolerance);
    const double ds_guard = 2.0 * kPi / (0.5 * reach + 4.0 * model.tau_d());
    const double span = 2.0 * quad.span_bandwidths * model.omega_d();
    double ds;
    if (quad.diagonal_nodes > 0) {
      ds = span / static_cast<double>(quad.diagonal_nodes);
      if (ds > ds_guard) {
        throw QuadratureResolution("diagonal grid too coarse for the sample's echo delays");
      }
    } else {
      ds = std::min(span / 64.0, ds_guard);
    }
    const auto half_s = static_cast<std::int64_t>(std::ceil(0.5 * span / ds));
    if (static_cast<double>(2 * half_s + 1) * static_cast<double>(v_count) >
        quad.max_tensor_nodes) {
      throw QuadratureResolution("tensor quadrature would need too many nodes");
    }
    s_nodes.clear();
    s_weights.clear();
    for (std::int64_t i = -half_s; i <= half_s; ++i) {
      const double s = static_cast<double>(i) * ds;
      s_nodes.push_back(s);
      s_weights.push_back(diagonal_density(model, s) * ds);
    }
  }

  std::vector<double> v_weights(v_count);
  for (std::size_t j = 0; j < v_count; ++j) {
    const double v = static_cast<double>(static_cast<std::int64_t>(j) - half_nodes) * dv;
    v_weights[j] = detail::antidiagonal_weight(model, v, dv);
  }

  detail::TransferEvaluator evaluator(sample);
  std::vector<complex> h(v_count);
  std::vector<complex> g(v_count, complex(0.0));
  double gamma0 = 0.0;
  for (std::size_t i = 0; i < s_nodes.size(); ++i) {
    // H on w = w0 + s/2 + q dv/2, q in [-J, J]; w1 uses q = j, w2 uses q = -j.
    const double start = model.omega0() + 0.5 * s_nodes[i] - 0.5 * dv * static_cast<double>(half_nodes);
    evaluator.lattice(start, 0.5 * dv, v_count, h.data());
    for (std::size_t j = 0; j < v_count; ++j) {
      const double w = s_weights[i] * v_weights[j];
      if (w == 0.0) continue;
      const complex& h1 = h[j];
      const complex& h2 = h[v_count - 1 - j];
      // h2 * conj(h1)
      g[j] += complex(w * (h2.real() * h1.real() + h2.imag() * h1.imag()),
                      w * (h2.imag() * h1.real() - h2.real() * h1.imag()));
      gamma0 += w * (h1.real() * h1.real() + h1.imag() * h1.imag() + h2.real() * h2.real() +
                     h2.imag() * h2.imag());
    }
  }
  gamma0 *= 0.25;

  // Gamma(tau_n) = 1/4 sum_j g_j exp(-i v_j tau_n), v_j tau_n = v_j tau_0 + 2 pi j n / M.
  std::vector<complex> buffer(m_size, complex(0.0));
  {
    const complex step = std::polar(1.0, -dv * grid.start);
    complex phase(1.0);
    for (std::int64_t j = -half_nodes; j <= half_nodes; ++j) {
      const std::size_t k = static_cast<std::size_t>(j + half_nodes);
      if (k % 512 == 0) phase = std::polar(1.0, -static_cast<double>(j) * dv * grid.start);
      const auto idx = static_cast<std::size_t>(
          ((j % static_cast<std::int64_t>(m_size)) + static_cast<std::int64_t>(m_size)) %
          static_cast<std::int64_t>(m_size));
      buffer[idx] += g[k] * phase;
      phase *= step;
    }
  }
  detail::fft_forward(buffer);

  Interferogram out;
  out.delays.assign(delays.begin(), delays.end());
  out.counts.resize(grid.count);
  out.gamma0 = gamma0;
  for (std::size_t n = 0; n < grid.count; ++n) {
    if (gamma0 <= kSingularThreshold) {
      out.counts[n] = 1.0;
      continue;
    }
    const double re = 0.25 * buffer[n % m_size].real();
    out.counts[n] = std::max(0.0, 1.0 - 2.0 * re / gamma0);
  }
  out.meta["engine"] = "numeric";
  out.meta["reduction"] = cw ? "cw" : "tensor";
  out.meta["fft_size"] = std::to_string(m_size);
  out.meta["antidiagonal_nodes"] = std::to_string(v_count);
  out.meta["diagonal_nodes"] = std::to_string(s_nodes.size());
  return out;
}

// ---------------------------------------------------------------------------
// Visibilities and closed forms

struct ArtifactRecord {
  std::size_t first = 0;   ///< index of the earlier feature
  std::size_t second = 0;  ///< index of the later feature
  double position = 0.0;   ///< (delay_first + delay_second) / 2
  double visibility = 0.0;
  double damping = 1.0;  ///< exp(-(delta/tau_d)^2 / 2)

  friend bool operator==(const ArtifactRecord&, const ArtifactRecord&) = default;
};

struct Visibilities {
  double gamma0 = 0.0;  ///< Gamma0 / N0
  std::vector<double> dips;
  std::vector<ArtifactRecord> artifacts;
};

namespace detail {
inline void require_gaussian(const SpectralModel& m, const char* what) {
  if (m.profile() != FilterProfile::gaussian) {
    throw UnsupportedProfile(std::string(what) +
                             " assumes a Gaussian joint spectrum; use the numeric engine");
  }
}
}  // namespace detail

/// Dip visibilities V_k = r_k^2 / (2 Gamma0) and cross-term visibilities
/// V_kl = r_k r_l / Gamma0 * exp(-(d/tau_d)^2/2) cos(w0 d), d = delay_l - delay_k.
/// Artifacts with |V_kl| < artifact_floor are omitted (Gamma0 always uses all pairs).
inline Visibilities visibilities(const FeatureList& features, const SpectralModel& model,
                                 double artifact_floor = 0.0) {
  detail::require_gaussian(model, "visibility formula");
  Visibilities out;
  const std::size_t n = features.size();
  double g0 = 0.0;
  for (const auto& f : features) g0 += 0.5 * f.amplitude * f.amplitude;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = k + 1; l < n; ++l) {
      const double d = features[l].delay - features[k].delay;
      const double xa = d / model.tau_a();
      g0 += features[k].amplitude * features[l].amplitude * std::exp(-0.5 * xa * xa) *
            diagonal_damping(model, d) * std::cos(model.omega0() * d);
    }
  }
  out.gamma0 = g0;
  if (!(g0 > 0.0)) {
    out.dips.assign(n, 0.0);
    return out;
  }
  out.dips.reserve(n);
  for (const auto& f : features) out.dips.push_back(0.5 * f.amplitude * f.amplitude / g0);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = k + 1; l < n; ++l) {
      const double d = features[l].delay - features[k].delay;
      const double damping = diagonal_damping(model, d);
      const double v = features[k].amplitude * features[l].amplitude / g0 * damping *
                       std::cos(model.omega0() * d);
      if (std::abs(v) < artifact_floor) continue;
      out.artifacts.push_back(
          {k, l, 0.5 * (features[k].delay + features[l].delay), v, damping});
    }
  }
  return out;
}

namespace detail {
/// Adds -amplitude * exp(-2((tau - center)/tau_a)^2) to counts over the
/// window where it is not negligible.
inline void subtract_gaussian(std::span<const double> delays, std::vector<double>& counts,
                              double center, double amplitude, double tau_a) {
  const double reach = 6.0 * tau_a;
  auto lo = std::lower_bound(delays.begin(), delays.end(), center - reach);
  auto hi = std::upper_bound(delays.begin(), delays.end(), center + reach);
  for (auto it = lo; it != hi; ++it) {
    const double x = (*it - center) / tau_a;
    counts[static_cast<std::size_t>(it - delays.begin())] -= amplitude * std::exp(-2.0 * x * x);
  }
}
}  // namespace detail

/// Closed-form trace for a Gaussian spectrum and an arbitrary set of
/// reflection features: 1 - sum V_k g(tau - t_k) - sum V_kl g(tau - (t_k + t_l)/2).
inline Interferogram closed_form_trace(const FeatureList& features, const SpectralModel& model,
                                       std::span<const double> delays) {
  detail::require_gaussian(model, "closed-form trace");
  check_uniform_grid(delays);
  const Visibilities vis = visibilities(features, model);
  Interferogram out;
  out.delays.assign(delays.begin(), delays.end());
  out.counts.assign(delays.size(), 1.0);
  out.gamma0 = vis.gamma0;
  if (vis.gamma0 > 0.0) {
    for (std::size_t k = 0; k < features.size(); ++k) {
      detail::subtract_gaussian(delays, out.counts, features[k].delay, vis.dips[k], model.tau_a());
    }
    for (const auto& a : vis.artifacts) {
      detail::subtract_gaussian(delays, out.counts, a.position, a.visibility, model.tau_a());
    }
  }
  out.meta["engine"] = "closed-form";
  out.meta["terms"] = std::to_string(features.size());
  return out;
}

/// Single-layer closed form from the echo coefficients r~k at delays k T,
/// truncated to the first n_terms coefficients.
inline Interferogram closed_form_single_layer(std::span<const double> r_tilde, double round_trip,
                                              const SpectralModel& model,
                                              std::span<const double> delays,
                                              std::size_t n_terms) {
  if (n_terms < 1) throw ValidationError("closed form needs at least one term");
  detail::require_gaussian(model, "closed-form trace");
  FeatureList features;
  const std::size_t n = std::min(n_terms, r_tilde.size());
  for (std::size_t k = 0; k < n; ++k) {
    features.push_back({static_cast<double>(k) * round_trip, r_tilde[k],
                        k <= 1 ? FeatureKind::interface : FeatureKind::echo,
                        k == 0 ? 0 : static_cast<int>(k) - 1, k <= 1 ? static_cast<int>(k) : -1});
  }
  return closed_form_trace(features, model, delays);
}

/// Number of single-layer series terms needed for the tail to drop below tolerance.
inline std::size_t single_layer_terms(const Sample& sample, double tolerance = 1e-9) {
  if (sample.size() != 2) throw ValidationError("single-layer series needs exactly 2 interfaces");
  const double ratio = std::abs(sample.interfaces()[0].r_fwd * sample.interfaces()[1].r_fwd) *
                       std::exp(-2.0 * sample.segment_kappa(1));
  if (ratio == 0.0) return 2;
  return static_cast<std::size_t>(std::ceil(std::log(tolerance) / std::log(ratio))) + 2;
}

/// Broadband-pump limit: cross terms vanish and only dips remain,
/// V_k = r_k^2 / sum r_j^2.
inline Interferogram pulsed_limit_trace(const FeatureList& features, const SpectralModel& model,
                                        std::span<const double> delays) {
  if (features.empty()) throw ValidationError("pulsed-limit trace needs at least one feature");
  check_uniform_grid(delays);
  double total = 0.0;
  for (const auto& f : features) total += f.amplitude * f.amplitude;
  Interferogram out;
  out.delays.assign(delays.begin(), delays.end());
  out.counts.assign(delays.size(), 1.0);
  out.gamma0 = 0.5 * total;
  if (total > 0.0) {
    for (std::size_t n = 0; n < delays.size(); ++n) {
      double dip = 0.0;
      for (const auto& f : features) {
        dip += f.amplitude * f.amplitude / total * dip_envelope(model, delays[n] - f.delay);
      }
      out.counts[n] = 1.0 - dip;
    }
  }
  out.meta["engine"] = "pulsed";
  return out;
}

// ---------------------------------------------------------------------------
// Pump-wavelength tuning of a cross-interference artifact

/// cos(w0(lambda_p) * delta) over the pump grid, with w0 = pi c / lambda_p.
inline std::vector<std::pair<double, double>> artifact_tuning_curve(
    double delta, std::span<const double> pump_nm) {
  if (!(std::abs(delta) > 0.0)) throw DegeneratePair("features share the same delay");
  std::vector<std::pair<double, double>> out;
  out.reserve(pump_nm.size());
  for (double nm : pump_nm) out.emplace_back(nm, std::cos(pump_nm_to_omega0(nm) * delta));
  return out;
}

inline std::vector<std::pair<double, double>> artifact_tuning_curve(
    const Sample& sample, std::pair<std::size_t, std::size_t> pair,
    std::span<const double> pump_nm) {
  const FeatureList features = enumerate_paths(sample);
  if (pair.first >= features.size() || pair.second >= features.size()) {
    throw ValidationError("feature index out of range");
  }
  if (pair.first == pair.second) throw DegeneratePair("artifact needs two distinct features");
  return artifact_tuning_curve(features[pair.second].delay - features[pair.first].delay, pump_nm);
}

/// Period of the tuning cosine in pump wavelength, 2 lambda^2 / (c delta).
inline double tuning_period_nm(double delta, double pump_nm) {
  return 2.0 * pump_nm * pump_nm * 1e-9 / (kSpeedOfLight * std::abs(delta));
}

struct TuningLandmarks {
  std::vector<double> zeros;   ///< suppressed artifact
  std::vector<double> minima;  ///< cos = -1: strongest dip-like artifact
  std::vector<double> maxima;  ///< cos = +1: strongest peak-like artifact
};

/// Exact landmark wavelengths in [lo_nm, hi_nm]: cos(pi c delta / lambda)
/// vanishes at lambda = c delta / (m + 1/2) and is +-1 at lambda = c delta / m.
inline TuningLandmarks tuning_landmarks(double delta, double lo_nm, double hi_nm) {
  if (!(std::abs(delta) > 0.0)) throw DegeneratePair("features share the same delay");
  const double path_nm = kSpeedOfLight * std::abs(delta) * 1e9;
  TuningLandmarks out;
  const auto m_lo = static_cast<long long>(std::floor(path_nm / hi_nm)) - 1;
  const auto m_hi = static_cast<long long>(std::ceil(path_nm / lo_nm)) + 1;
  for (long long m = std::max(1LL, m_lo); m <= m_hi; ++m) {
    const double extremum = path_nm / static_cast<double>(m);
    if (extremum >= lo_nm && extremum <= hi_nm) {
      (m % 2 == 0 ? out.maxima : out.minima).push_back(extremum);
    }
    const double zero = path_nm / (static_cast<double>(m) + 0.5);
    if (zero >= lo_nm && zero <= hi_nm) out.zeros.push_back(zero);
  }
  for (auto* v : {&out.zeros, &out.minima, &out.maxima}) std::sort(v->begin(), v->end());
  return out;
}

// ---------------------------------------------------------------------------
// Feature labelling

struct Contribution {
  std::string label;  ///< "I1", "e2" or "a(I0,e1)"
  double visibility = 0.0;
  bool artifact = false;
};

struct PositionGroup {
  double position = 0.0;  ///< |V|-weighted mean delay [s]
  std::vector<Contribution> contributions;
  double net_visibility = 0.0;
  bool cancelling = false;  ///< several processes whose visibilities nearly cancel
};

struct TraceLabels {
  FeatureList features;
  std::vector<std::string> labels;
  Visibilities visibilities;
  std::vector<PositionGroup> groups;
};

/// Groups every dip and cross term by position (within tau_a / 2) and lists the
/// processes that contribute to each. A rectangular model is labelled with the
/// Gaussian visibilities of the same Omega_a.
inline TraceLabels label_trace(const Sample& sample, const SpectralModel& model,
                               int max_order = kDefaultMaxOrder,
                               double amplitude_floor = kDefaultAmplitudeFloor,
                               double visibility_floor = 1e-4) {
  const SpectralModel gaussian = model.with_profile(FilterProfile::gaussian);
  TraceLabels out;
  out.features = enumerate_paths(sample, max_order, amplitude_floor);
  out.labels = feature_labels(out.features);
  out.visibilities = visibilities(out.features, gaussian, visibility_floor);

  struct Item {
    double position;
    Contribution c;
  };
  std::vector<Item> items;
  for (std::size_t k = 0; k < out.features.size(); ++k) {
    if (out.visibilities.dips.empty() || out.visibilities.dips[k] < visibility_floor) continue;
    items.push_back({out.features[k].delay, {out.labels[k], out.visibilities.dips[k], false}});
  }
  for (const auto& a : out.visibilities.artifacts) {
    items.push_back({a.position,
                     {"a(" + out.labels[a.first] + "," + out.labels[a.second] + ")", a.visibility,
                      true}});
  }
  std::stable_sort(items.begin(), items.end(),
                   [](const Item& x, const Item& y) { return x.position < y.position; });

  const double tolerance = 0.5 * gaussian.tau_a();
  double weighted = 0.0, weight = 0.0, magnitude = 0.0, group_start = 0.0;
  auto flush = [&] {
    if (out.groups.empty() || out.groups.back().contributions.empty()) return;
    auto& g = out.groups.back();
    g.position = weight > 0.0 ? weighted / weight : group_start;
    g.cancelling = g.contributions.size() > 1 && std::abs(g.net_visibility) < 0.25 * magnitude;
  };
  for (const auto& item : items) {
    if (out.groups.empty() || item.position - group_start > tolerance) {
      flush();
      out.groups.emplace_back();
      group_start = item.position;
      weighted = weight = magnitude = 0.0;
    }
    auto& g = out.groups.back();
    g.contributions.push_back(item.c);
    g.net_visibility += item.c.visibility;
    weighted += std::abs(item.c.visibility) * item.position;
    weight += std::abs(item.c.visibility);
    magnitude += std::abs(item.c.visibility);
  }
  flush();
  return out;
}

// ---------------------------------------------------------------------------

/// Replaces every point with a Poisson draw of mean counts * mean_counts and
/// renormalises. Deterministic for a given seed.
inline Interferogram add_shot_noise(const Interferogram& trace, double mean_counts,
                                    std::uint64_t seed) {
  if (!(mean_counts > 0.0) || !std::isfinite(mean_counts)) {
    throw ValidationError("mean background counts must be > 0");
  }
  Interferogram out = trace;
  std::mt19937_64 rng(seed);
  for (double& c : out.counts) {
    const double mean = c * mean_counts;
    if (mean <= 0.0) {
      c = 0.0;
      continue;
    }
    std::poisson_distribution<long long> draw(mean);
    c = static_cast<double>(draw(rng)) / mean_counts;
  }
  out.meta["noise_counts"] = std::to_string(mean_counts);
  out.meta["noise_seed"] = std::to_string(seed);
  return out;
}

}  // namespace qoct
