#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace toalab {

enum class SpecKind { particle, dielectric };

/// One homogeneous slab: a potential step for particles, a refractive
/// index for photons.
struct Segment {
  double width = 0.0;
  double value = 0.0;
};

/// Piecewise-constant 1D medium. Segments are laid out left to right
/// starting at `origin`; the same `exterior` value fills both half-lines.
struct PotentialSpec {
  std::vector<Segment> segments;
  SpecKind kind = SpecKind::particle;
  double exterior = 0.0;
  double origin = 0.0;

  static PotentialSpec particle(std::vector<Segment> segs, double origin = 0.0,
                                double exterior = 0.0) {
    PotentialSpec s;
    s.segments = std::move(segs);
    s.kind = SpecKind::particle;
    s.origin = origin;
    s.exterior = exterior;
    s.validate();
    return s;
  }

  static PotentialSpec dielectric(std::vector<Segment> layers, double exterior_index = 1.0,
                                  double origin = 0.0) {
    PotentialSpec s;
    s.segments = std::move(layers);
    s.kind = SpecKind::dielectric;
    s.origin = origin;
    s.exterior = exterior_index;
    s.validate();
    return s;
  }

  void validate() const {
    for (const auto& seg : segments) {
      if (!(seg.width > 0.0) || !std::isfinite(seg.width))
        throw std::invalid_argument("segment width must be positive and finite");
      if (!std::isfinite(seg.value)) throw std::invalid_argument("segment value must be finite");
      if (kind == SpecKind::dielectric && !(seg.value > 0.0))
        throw std::invalid_argument("refractive index must be positive");
    }
    if (!std::isfinite(origin)) throw std::invalid_argument("origin must be finite");
    if (kind == SpecKind::dielectric && !(exterior > 0.0))
      throw std::invalid_argument("exterior refractive index must be positive");
  }

  [[nodiscard]] bool empty() const { return segments.empty(); }

  [[nodiscard]] double length() const {
    return std::accumulate(segments.begin(), segments.end(), 0.0,
                           [](double acc, const Segment& s) { return acc + s.width; });
  }

  [[nodiscard]] double left_edge() const { return origin; }
  [[nodiscard]] double right_edge() const { return origin + length(); }

  /// Interface positions, including both outer edges (size = segments + 1).
  [[nodiscard]] std::vector<double> interfaces() const {
    std::vector<double> xs;
    xs.reserve(segments.size() + 1);
    double x = origin;
    xs.push_back(x);
    for (const auto& s : segments) {
      x += s.width;
      xs.push_back(x);
    }
    return xs;
  }

  /// Value at x; on an interface (within `tie`) the mean of both sides.
  [[nodiscard]] double value_at(double x, double tie = 0.0) const {
    double left = origin;
    if (std::abs(x - left) <= tie) {
      return segments.empty() ? exterior : 0.5 * (exterior + segments.front().value);
    }
    if (x < left) return exterior;
    for (std::size_t j = 0; j < segments.size(); ++j) {
      const double right = left + segments[j].width;
      const double next = j + 1 < segments.size() ? segments[j + 1].value : exterior;
      if (std::abs(x - right) <= tie) return 0.5 * (segments[j].value + next);
      if (x < right) return segments[j].value;
      left = right;
    }
    return exterior;
  }

  [[nodiscard]] double max_abs_value() const {
    double v = std::abs(exterior);
    for (const auto& s : segments) v = std::max(v, std::abs(s.value));
    return v;
  }
};

/// Rectangular barrier of `height` on [start, start + width].
inline PotentialSpec rectangular_barrier(double height, double width, double start = 0.0) {
  if (width <= 0.0) return PotentialSpec::particle({}, start);
  return PotentialSpec::particle({{width, height}}, start);
}

/// Two barriers of equal height and width separated by a flat gap.
inline PotentialSpec double_barrier(double height, double barrier_width, double gap,
                                    double start = 0.0) {
  return PotentialSpec::particle({{barrier_width, height}, {gap, 0.0}, {barrier_width, height}},
                                 start);
}

/// (HL)^periods H quarter-wave stack centred on angular frequency omega0
/// (c = 1, so each layer has n * d * omega0 = pi / 2).
inline PotentialSpec quarter_wave_stack(double n_high, double n_low, int periods, double omega0,
                                        double exterior_index = 1.0) {
  if (periods < 0) throw std::invalid_argument("periods must be non-negative");
  if (!(omega0 > 0.0)) throw std::invalid_argument("omega0 must be positive");
  const double quarter = M_PI / (2.0 * omega0);
  std::vector<Segment> layers;
  for (int i = 0; i < periods; ++i) {
    layers.push_back({quarter / n_high, n_high});
    layers.push_back({quarter / n_low, n_low});
  }
  layers.push_back({quarter / n_high, n_high});
  return PotentialSpec::dielectric(std::move(layers), exterior_index);
}

}  // namespace toalab
