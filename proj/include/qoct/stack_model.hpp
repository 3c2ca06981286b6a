#pragma once

// Multilayer sample description and its reflection transfer function.
//
// Every boundary is lossless and follows the real Stokes convention
// (r_bwd = -r_fwd, t_fwd = t_bwd = sqrt(1 - r^2)). Losses are carried by
// separate diagonal matrices applied to the segment that follows each
// boundary: the segment's bulk loss plus the metallic film that coats the
// boundary in front of it.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "qoct/error.hpp"
#include "qoct/units.hpp"

namespace qoct {

using complex = std::complex<double>;

/// 2x2 complex wave-transfer matrix [[a, b], [c, d]].
struct Matrix2 {
  complex a{1.0}, b{0.0}, c{0.0}, d{1.0};

  static Matrix2 identity() { return {}; }

  complex determinant() const { return a * d - b * c; }

  friend Matrix2 operator*(const Matrix2& x, const Matrix2& y) {
    return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d,
            x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
  }

  friend bool operator==(const Matrix2&, const Matrix2&) = default;
};

struct Interface {
  double r_fwd = 0.0;       ///< signed amplitude reflectivity seen from the front
  double film_kappa = 0.0;  ///< loss exponent of the film coating this boundary

  double r_bwd() const { return -r_fwd; }
  double t() const { return std::sqrt(1.0 - r_fwd * r_fwd); }
  double reflectance() const { return r_fwd * r_fwd; }

  friend bool operator==(const Interface&, const Interface&) = default;
};

struct Segment {
  double optical_delay = 0.0;  ///< one-way optical thickness tau' [s]
  double bulk_kappa = 0.0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

inline void validate(const Interface& iface) {
  if (!std::isfinite(iface.r_fwd) || std::abs(iface.r_fwd) >= 1.0) {
    throw InvalidInterface("interface reflectivity must satisfy |r| < 1, got " +
                           std::to_string(iface.r_fwd));
  }
  if (!std::isfinite(iface.film_kappa) || iface.film_kappa < 0.0) {
    throw GainNotSupported("film loss exponent must be >= 0, got " +
                           std::to_string(iface.film_kappa));
  }
}

/// Ordered stack of N >= 1 interfaces separated by N - 1 segments.
/// Immutable once constructed; the constructor enforces every invariant.
class Sample {
 public:
  Sample(std::vector<Interface> interfaces, std::vector<Segment> segments)
      : interfaces_(std::move(interfaces)), segments_(std::move(segments)) {
    if (interfaces_.empty()) {
      throw ValidationError("a sample needs at least one interface");
    }
    if (segments_.size() + 1 != interfaces_.size()) {
      throw ValidationError("a sample with " + std::to_string(interfaces_.size()) +
                            " interfaces needs " +
                            std::to_string(interfaces_.size() - 1) + " segments, got " +
                            std::to_string(segments_.size()));
    }
    for (const auto& iface : interfaces_) validate(iface);
    for (const auto& seg : segments_) {
      if (!std::isfinite(seg.optical_delay) || seg.optical_delay <= 0.0) {
        throw ValidationError("segment optical thickness must be > 0");
      }
      if (!std::isfinite(seg.bulk_kappa) || seg.bulk_kappa < 0.0) {
        throw GainNotSupported("segment loss exponent must be >= 0");
      }
    }
  }

  /// Convenience: single interface of amplitude reflectivity r.
  static Sample mirror(double r) { return Sample({Interface{r, 0.0}}, {}); }

  /// Single layer between two interfaces, thickness given as optical path c*tau' in um.
  static Sample single_layer(double r_front, double r_back, double optical_path_um,
                             double kappa = 0.0) {
    return Sample({Interface{r_front, 0.0}, Interface{r_back, 0.0}},
                  {Segment{path_um_to_seconds(optical_path_um), kappa}});
  }

  const std::vector<Interface>& interfaces() const { return interfaces_; }
  const std::vector<Segment>& segments() const { return segments_; }
  std::size_t size() const { return interfaces_.size(); }

  /// Loss exponent applied to each traversal of segment j (1-based, as in the
  /// transfer-matrix product): bulk loss plus the film on the boundary in front.
  double segment_kappa(std::size_t j) const {
    return segments_[j - 1].bulk_kappa + interfaces_[j - 1].film_kappa;
  }

  /// Round-trip delay from the front surface to each interface.
  std::vector<double> interface_delays() const {
    std::vector<double> out(interfaces_.size(), 0.0);
    for (std::size_t j = 1; j < interfaces_.size(); ++j) {
      out[j] = out[j - 1] + 2.0 * segments_[j - 1].optical_delay;
    }
    return out;
  }

  double total_round_trip() const { return interface_delays().back(); }

  /// The same stack seen from the back side.
  Sample reversed() const {
    std::vector<Interface> ifaces(interfaces_.rbegin(), interfaces_.rend());
    std::vector<Segment> segs(segments_.rbegin(), segments_.rend());
    return Sample(std::move(ifaces), std::move(segs));
  }

  friend bool operator==(const Sample&, const Sample&) = default;

 private:
  std::vector<Interface> interfaces_;
  std::vector<Segment> segments_;
};

inline Matrix2 boundary_matrix(const Interface& iface) {
  validate(iface);
  const double r_fwd = iface.r_fwd;
  const double r_bwd = iface.r_bwd();
  const double t = iface.t();
  const double inv = 1.0 / t;
  return {complex((t * t - r_fwd * r_bwd) * inv), complex(r_bwd * inv),
          complex(-r_fwd * inv), complex(inv)};
}

inline Matrix2 propagation_matrix(double phase) {
  return {std::polar(1.0, -phase), complex(0.0), complex(0.0), std::polar(1.0, phase)};
}

inline Matrix2 loss_matrix(double kappa) {
  if (!(kappa >= 0.0)) {
    throw GainNotSupported("loss exponent must be >= 0, got " + std::to_string(kappa));
  }
  return {complex(std::exp(-kappa)), complex(0.0), complex(0.0), complex(std::exp(kappa))};
}

/// Overall wave-transfer matrix at angular frequency omega. Interface 0 acts
/// first, then segment 1 and interface 1, and so on to the back surface.
inline Matrix2 sample_matrix(const Sample& sample, double omega) {
  if (!(omega > 0.0)) throw DomainError("angular frequency must be > 0");
  Matrix2 m = boundary_matrix(sample.interfaces()[0]);
  for (std::size_t j = 1; j < sample.size(); ++j) {
    const Segment& seg = sample.segments()[j - 1];
    m = propagation_matrix(omega * seg.optical_delay) * loss_matrix(sample.segment_kappa(j)) * m;
    m = boundary_matrix(sample.interfaces()[j]) * m;
  }
  return m;
}

inline constexpr double kSingularThreshold = 1e-300;

/// Effective reflection coefficient H = -C/D of the whole stack.
inline complex transfer_function(const Sample& sample, double omega) {
  const Matrix2 m = sample_matrix(sample, omega);
  if (std::abs(m.d) < kSingularThreshold) throw SingularStack("transfer matrix has D = 0");
  return -m.c / m.d;
}

/// Forward transmission (AD - BC)/D of the whole stack.
inline complex transmission(const Sample& sample, double omega) {
  const Matrix2 m = sample_matrix(sample, omega);
  if (std::abs(m.d) < kSingularThreshold) throw SingularStack("transfer matrix has D = 0");
  return m.determinant() / m.d;
}

// ---------------------------------------------------------------------------
// Reflection paths

enum class FeatureKind { interface, echo };

struct PathFeature {
  double delay = 0.0;      ///< round-trip delay [s]
  double amplitude = 0.0;  ///< signed effective reflectivity
  FeatureKind kind = FeatureKind::interface;
  int order = 0;           ///< internal bounces (reflections from inside the stack)
  int interface = -1;      ///< reflecting interface for single-reflection paths

  friend bool operator==(const PathFeature&, const PathFeature&) = default;
};

using FeatureList = std::vector<PathFeature>;

inline constexpr int kDefaultMaxOrder = 6;
inline constexpr double kDefaultAmplitudeFloor = 1e-4;

/// Enumerates every path that enters through the front surface and leaves
/// through it again, with at most `max_order` internal bounces and
/// |amplitude| >= amplitude_floor. Paths with equal delays are kept apart.
/// The list is sorted by delay, then by order.
inline FeatureList enumerate_paths(const Sample& sample, int max_order = kDefaultMaxOrder,
                                   double amplitude_floor = kDefaultAmplitudeFloor) {
  if (max_order < 0) throw ValidationError("max_order must be >= 0");
  if (!(amplitude_floor >= 0.0)) throw ValidationError("amplitude_floor must be >= 0");

  const auto& ifaces = sample.interfaces();
  const std::size_t n = ifaces.size();
  FeatureList out;

  // Direct reflection from the front surface.
  if (std::abs(ifaces[0].r_fwd) >= amplitude_floor && ifaces[0].r_fwd != 0.0) {
    out.push_back({0.0, ifaces[0].r_fwd, FeatureKind::interface, 0, 0});
  }
  if (n == 1) return out;

  struct State {
    std::size_t at;   // interface about to be met
    bool moving_in;   // true: arriving from the front side
    double amp;
    double delay;
    int bounces;
    int last_reflector;
  };

  auto traverse = [&](State s, std::size_t seg_index) {
    // seg_index is 1-based: segment between interface seg_index-1 and seg_index.
    s.amp *= std::exp(-sample.segment_kappa(seg_index));
    s.delay += sample.segments()[seg_index - 1].optical_delay;
    return s;
  };

  std::vector<State> stack;
  const double t0 = ifaces[0].t();
  stack.push_back(traverse({1, true, t0, 0.0, 0, -1}, 1));

  auto keep = [&](double amp) { return amp != 0.0 && std::abs(amp) >= amplitude_floor; };

  while (!stack.empty()) {
    State s = stack.back();
    stack.pop_back();
    if (!keep(s.amp)) continue;
    const Interface& iface = ifaces[s.at];
    if (s.moving_in) {
      // Reflect back towards the front.
      State refl = s;
      refl.amp *= iface.r_fwd;
      refl.moving_in = false;
      refl.last_reflector = static_cast<int>(s.at);
      if (keep(refl.amp)) {
        refl = traverse(refl, s.at);
        refl.at = s.at - 1;
        stack.push_back(refl);
      }
      // Transmit deeper; light leaving through the back is lost.
      if (s.at + 1 < n) {
        State tr = s;
        tr.amp *= iface.t();
        if (keep(tr.amp)) {
          tr = traverse(tr, s.at + 1);
          tr.at = s.at + 1;
          stack.push_back(tr);
        }
      }
    } else {
      // Transmit towards the front; through interface 0 the path is detected.
      State tr = s;
      tr.amp *= iface.t();
      if (keep(tr.amp)) {
        if (s.at == 0) {
          const bool single = tr.bounces == 0;
          out.push_back({tr.delay, tr.amp, single ? FeatureKind::interface : FeatureKind::echo,
                         tr.bounces, single ? tr.last_reflector : -1});
        } else {
          tr = traverse(tr, s.at);
          tr.at = s.at - 1;
          stack.push_back(tr);
        }
      }
      // Internal bounce back into the stack.
      if (s.bounces + 1 <= max_order) {
        State refl = s;
        refl.amp *= iface.r_bwd();
        refl.moving_in = true;
        refl.bounces += 1;
        if (keep(refl.amp)) {
          refl = traverse(refl, s.at + 1);
          refl.at = s.at + 1;
          stack.push_back(refl);
        }
      }
    }
  }

  std::stable_sort(out.begin(), out.end(), [](const PathFeature& x, const PathFeature& y) {
    if (x.delay != y.delay) return x.delay < y.delay;
    return x.order < y.order;
  });
  return out;
}

/// Labels in the style of the interferogram annotations: interfaces are
/// I0..I{N-1}, echoes e1, e2, ... numbered by increasing delay.
inline std::vector<std::string> feature_labels(const FeatureList& features) {
  std::vector<std::string> out;
  out.reserve(features.size());
  int echo = 0;
  for (const auto& f : features) {
    if (f.kind == FeatureKind::interface) {
      out.push_back("I" + std::to_string(f.interface));
    } else {
      out.push_back("e" + std::to_string(++echo));
    }
  }
  return out;
}

/// Coefficients of the single-layer echo series: r~0 = r01 and
/// r~k = r10^(k-1) r12^k t01 t10 exp(-2 k kappa) for k >= 1.
inline std::vector<double> single_layer_coefficients(const Sample& sample, std::size_t n_terms) {
  if (sample.size() != 2) throw ValidationError("single-layer series needs exactly 2 interfaces");
  const double r01 = sample.interfaces()[0].r_fwd;
  const double r12 = sample.interfaces()[1].r_fwd;
  const double tt = 1.0 - r01 * r01;
  const double loss = std::exp(-2.0 * sample.segment_kappa(1));
  std::vector<double> out;
  if (n_terms == 0) return out;
  out.push_back(r01);
  double amp = r12 * tt * loss;
  for (std::size_t k = 1; k < n_terms; ++k) {
    out.push_back(amp);
    amp *= -r01 * r12 * loss;
  }
  return out;
}

/// Effective real parameters of an N-interface lossy stack that a reflection
/// measurement can see.
inline int count_effective_parameters(int n_interfaces) {
  if (n_interfaces < 1) throw DomainError("need at least one interface");
  return 6 * n_interfaces - 5;
}

}  // namespace qoct
