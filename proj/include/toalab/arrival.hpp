#pragma once

// Time of arrival at a detector placed to the right of a potential.
//
// The arrival amplitude for a state prepared on the left is
//
//   <t x|psi> = int dE e^{-iEt} (2E/m)^{1/4} <x|E> <E|psi>,
//
// with energy-normalised right-moving scattering states <x|E> =
// sqrt(m/(2 pi p)) T(p) e^{ipx} and <E|psi> = sqrt(m/p) psi(p). Changing
// variables to p (dE = p/m dp) gives
//
//   <t x|psi> = int_0^inf dp sqrt(p / (2 pi m)) T(p) e^{ipx - i p^2 t / 2m} psi(p),
//
// whose modulus squared integrates over t to int |T psi|^2 dp.

#include "toalab/errors.hpp"
#include "toalab/potential.hpp"
#include "toalab/quadrature.hpp"
#include "toalab/scatter.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace toalab {

/// Gaussian state in momentum space,
/// psi(p) = (2 pi sigma_p^2)^{-1/4} exp(-(p - p0)^2 / (4 sigma_p^2)) e^{-i p q0}.
struct WavePacket {
  double p0 = 1.0;
  double sigma_p = 0.05;
  double q0 = 0.0;
  double mass = 1.0;

  void validate() const {
    if (!(sigma_p > 0.0) || !std::isfinite(sigma_p))
      throw std::invalid_argument("wave packet: sigma_p must be positive");
    if (!(mass > 0.0) || !std::isfinite(mass))
      throw std::invalid_argument("wave packet: mass must be positive");
    if (!std::isfinite(p0) || !std::isfinite(q0))
      throw std::invalid_argument("wave packet: p0 and q0 must be finite");
  }

  [[nodiscard]] cplx amplitude(double p) const {
    const double norm = std::pow(2.0 * std::numbers::pi * sigma_p * sigma_p, -0.25);
    const double d = p - p0;
    return norm * std::exp(-d * d / (4.0 * sigma_p * sigma_p)) * std::exp(-kI * p * q0);
  }

  [[nodiscard]] double sigma_x() const { return 0.5 / sigma_p; }

  /// Position-space amplitude at t = 0 (same phase convention as amplitude()).
  [[nodiscard]] cplx position_amplitude(double x) const {
    const double sx = sigma_x();
    const double norm = std::pow(2.0 * std::numbers::pi * sx * sx, -0.25);
    const double d = x - q0;
    return norm * std::exp(-d * d / (4.0 * sx * sx)) * std::exp(kI * p0 * d);
  }

  /// Probability carried by p < 0.
  [[nodiscard]] double negative_momentum_weight() const {
    return 0.5 * std::erfc(p0 / (std::numbers::sqrt2 * sigma_p));
  }

  [[nodiscard]] bool right_mover() const { return negative_momentum_weight() < 1e-10; }

  [[nodiscard]] double mean_energy() const {
    return (p0 * p0 + sigma_p * sigma_p) / (2.0 * mass);
  }
};

struct TimeGrid {
  double t_min = 0.0;
  double t_max = 1.0;
  std::size_t points = 2;

  [[nodiscard]] double step() const { return (t_max - t_min) / static_cast<double>(points - 1); }
  [[nodiscard]] std::vector<double> samples() const { return linspace(t_min, t_max, points); }
};

struct ArrivalOptions {
  double window_sigmas = 8.0;  // p window half-width in units of sigma_p
  double p_floor = 1e-8;       // integrand ~ sqrt(p) is clipped here
  std::size_t initial_panels = 8;
  std::size_t max_panels = 1u << 14;
  double amplitude_tolerance = 1e-6;
  std::size_t probe_times = 64;
  bool auto_widen = true;
  double edge_ratio = 1e-6;
  std::size_t max_grid_points = 1u << 20;
};

/// Pre-tabulated momentum integrand; evaluating the amplitude at a time
/// is a weighted sum of phases.
class ArrivalAmplitude {
 public:
  ArrivalAmplitude(const WavePacket& packet, const PotentialSpec& spec, double detector_x,
                   ArrivalOptions opts = {})
      : packet_(packet), spec_(spec), x_(detector_x), opts_(opts) {
    packet_.validate();
    if (spec_.kind != SpecKind::particle)
      throw std::invalid_argument("arrival amplitude needs a particle potential");
    if (!spec_.empty() && detector_x < spec_.right_edge())
      throw GeometryError("detector must sit to the right of the potential support");
    p_lo_ = std::max(opts_.p_floor, packet_.p0 - opts_.window_sigmas * packet_.sigma_p);
    p_hi_ = packet_.p0 + opts_.window_sigmas * packet_.sigma_p;
    if (!(p_hi_ > p_lo_)) throw std::invalid_argument("packet has no right-moving support");
    build(opts_.initial_panels);
  }

  [[nodiscard]] cplx operator()(double t) const {
    const double a = -0.5 * t / packet_.mass;
    cplx sum = 0.0;
    for (std::size_t i = 0; i < p_.size(); ++i) {
      const double ph = a * p_[i] * p_[i];
      sum += coeff_[i] * cplx(std::cos(ph), std::sin(ph));
    }
    return sum;
  }

  /// Amplitude at t0 + k dt for k < n. Each node's phase advances by a
  /// fixed rotation; exact phases are re-anchored every 256 steps.
  [[nodiscard]] std::vector<cplx> on_uniform_grid(double t0, double dt, std::size_t n) const {
    std::vector<cplx> out(n);
    std::vector<cplx> z(p_.size()), rot(p_.size());
    const double a = -0.5 / packet_.mass;
    for (std::size_t i = 0; i < p_.size(); ++i) rot[i] = std::polar(1.0, a * p_[i] * p_[i] * dt);
    for (std::size_t k = 0; k < n; ++k) {
      if (k % 256 == 0) {
        const double t = t0 + dt * static_cast<double>(k);
        for (std::size_t i = 0; i < p_.size(); ++i) z[i] = coeff_[i] * std::polar(1.0, a * p_[i] * p_[i] * t);
      }
      cplx s = 0.0;
      for (std::size_t i = 0; i < p_.size(); ++i) {
        s += z[i];
        z[i] *= rot[i];
      }
      out[k] = s;
    }
    return out;
  }

  /// Double the panel count until the amplitude at the probe times moves by
  /// less than the tolerance (relative to the largest probe amplitude).
  void converge_on(std::span<const double> times) {
    std::vector<cplx> prev(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) prev[i] = (*this)(times[i]);
    while (panels_ < opts_.max_panels) {
      build(panels_ * 2);
      double diff = 0.0, scale = 0.0;
      for (std::size_t i = 0; i < times.size(); ++i) {
        const cplx a = (*this)(times[i]);
        diff = std::max(diff, std::abs(a - prev[i]));
        scale = std::max(scale, std::abs(a));
        prev[i] = a;
      }
      if (diff <= opts_.amplitude_tolerance * scale || scale == 0.0) return;
    }
    throw MaxIterations("arrival amplitude quadrature did not converge");
  }

  /// int |T(p) psi(p)|^2 dp over the momentum window.
  [[nodiscard]] double detection_norm() const { return detection_norm_; }
  [[nodiscard]] std::size_t nodes() const { return p_.size(); }
  [[nodiscard]] double detector() const { return x_; }

 private:
  void build(std::size_t panels) {
    panels_ = panels;
    const QuadratureRule q = composite_gauss_legendre<20>(p_lo_, p_hi_, panels);
    p_ = q.nodes;
    coeff_.resize(p_.size());
    detection_norm_ = 0.0;
    const double m = packet_.mass;
    for (std::size_t i = 0; i < p_.size(); ++i) {
      const double p = p_[i];
      const double energy = p * p / (2.0 * m) + spec_.exterior;
      const cplx t = spec_.empty() ? cplx(1.0) : transmission(spec_, energy, m);
      const cplx tpsi = t * packet_.amplitude(p);
      detection_norm_ += q.weights[i] * std::norm(tpsi);
      coeff_[i] = q.weights[i] * std::sqrt(p / (2.0 * std::numbers::pi * m)) * tpsi *
                  std::exp(kI * p * x_);
    }
  }

  WavePacket packet_;
  PotentialSpec spec_;
  double x_;
  ArrivalOptions opts_;
  double p_lo_ = 0.0, p_hi_ = 0.0;
  std::size_t panels_ = 0;
  std::vector<double> p_;
  std::vector<cplx> coeff_;
  double detection_norm_ = 0.0;
};

/// Single amplitude evaluation, converged at that one time.
inline cplx toa_amplitude(const WavePacket& packet, const PotentialSpec& spec, double x, double t,
                          ArrivalOptions opts = {}) {
  ArrivalAmplitude amp(packet, spec, x, opts);
  const double ts[1] = {t};
  amp.converge_on(ts);
  return amp(t);
}

struct ArrivalDistribution {
  double detector_x = 0.0;
  std::vector<double> t;
  std::vector<double> density;
  double detection_norm = 0.0;  // int |T psi|^2 dp
  double grid_norm = 0.0;       // trapezoid integral of density
  double mean_t = 0.0;          // conditional on detection
  double rms_t = 0.0;
  double raw_first_moment = 0.0;   // int t P dt
  double raw_second_moment = 0.0;  // int t^2 P dt
  bool right_mover_warning = false;
  std::size_t quadrature_nodes = 0;

  /// Sample index of the maximum; the earliest one on ties.
  [[nodiscard]] std::size_t argmax() const {
    return static_cast<std::size_t>(std::max_element(density.begin(), density.end()) -
                                    density.begin());
  }
};

/// Rough window around the expected arrival: free flight plus the Wigner
/// delay at the central energy, +-8 spreads.
inline TimeGrid auto_time_grid(const WavePacket& packet, const PotentialSpec& spec, double x,
                               std::size_t points = 801) {
  packet.validate();
  const double m = packet.mass;
  const double v0 = packet.p0 / m;
  if (!(v0 > 0.0)) throw std::invalid_argument("auto_time_grid needs p0 > 0");
  double tc = (x - packet.q0) / v0;
  if (!spec.empty()) {
    try {
      tc += wigner_delay(spec, packet.p0 * packet.p0 / (2.0 * m) + spec.exterior, m);
    } catch (const Error&) {
    }
  }
  const double sx = packet.sigma_x();
  const double spread_x = std::sqrt(sx * sx + std::pow(packet.sigma_p * tc / m, 2));
  const double st = spread_x / v0;
  return {tc - 8.0 * st, tc + 8.0 * st, points};
}

inline ArrivalDistribution toa_density(const WavePacket& packet, const PotentialSpec& spec, double x,
                                       TimeGrid grid, ArrivalOptions opts = {}) {
  if (grid.points < 3 || !(grid.t_max > grid.t_min))
    throw std::invalid_argument("toa_density: degenerate time grid");
  ArrivalAmplitude amp(packet, spec, x, opts);

  std::vector<double> ts, dens;
  for (;;) {
    ts = grid.samples();
    std::vector<double> probes;
    const std::size_t np = std::min(opts.probe_times, ts.size());
    for (std::size_t i = 0; i < np; ++i)
      probes.push_back(ts[i * (ts.size() - 1) / std::max<std::size_t>(np - 1, 1)]);
    amp.converge_on(probes);

    dens.resize(ts.size());
    const auto a = amp.on_uniform_grid(grid.t_min, grid.step(), ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) dens[i] = std::norm(a[i]);
    const double peak = *std::max_element(dens.begin(), dens.end());
    if (!opts.auto_widen || peak == 0.0) break;
    const bool left = dens.front() > opts.edge_ratio * peak;
    const bool right = dens.back() > opts.edge_ratio * peak;
    if (!left && !right) break;
    const double dt = grid.step();
    const double span = grid.t_max - grid.t_min;
    const auto extra = static_cast<std::size_t>(std::ceil(0.5 * span / dt));
    if (left) {
      grid.t_min -= static_cast<double>(extra) * dt;
      grid.points += extra;
    }
    if (right) {
      grid.t_max += static_cast<double>(extra) * dt;
      grid.points += extra;
    }
    if (grid.points > opts.max_grid_points)
      throw GridTooNarrow("arrival density does not fit inside the time-grid cap");
  }

  ArrivalDistribution d;
  d.detector_x = x;
  d.t = std::move(ts);
  d.density = std::move(dens);
  d.detection_norm = amp.detection_norm();
  d.quadrature_nodes = amp.nodes();
  d.right_mover_warning = !packet.right_mover();
  d.grid_norm = trapezoid(d.t, d.density);
  std::vector<double> w1(d.t.size()), w2(d.t.size());
  for (std::size_t i = 0; i < d.t.size(); ++i) {
    w1[i] = d.t[i] * d.density[i];
    w2[i] = d.t[i] * d.t[i] * d.density[i];
  }
  d.raw_first_moment = trapezoid(d.t, w1);
  d.raw_second_moment = trapezoid(d.t, w2);
  if (d.detection_norm > 0.0) {
    d.mean_t = d.raw_first_moment / d.detection_norm;
    const double var = d.raw_second_moment / d.detection_norm - d.mean_t * d.mean_t;
    d.rms_t = std::sqrt(std::max(var, 0.0));
  }
  return d;
}

struct ArrivalMoments {
  double mean_t = 0.0;
  double rms_t = 0.0;
  double detection_norm = 0.0;
};

inline constexpr double kNoDetectionThreshold = 1e-20;

inline ArrivalMoments mean_arrival(const WavePacket& packet, const PotentialSpec& spec, double x,
                                   ArrivalOptions opts = {}) {
  ArrivalAmplitude probe(packet, spec, x, opts);
  if (probe.detection_norm() < kNoDetectionThreshold)
    throw NoDetection("transmitted probability is numerically zero");
  const ArrivalDistribution d = toa_density(packet, spec, x, auto_time_grid(packet, spec, x), opts);
  return {d.mean_t, d.rms_t, d.detection_norm};
}

struct HartmanPoint {
  double width = 0.0;
  double mean_t = 0.0;
  double rms_t = 0.0;
  double detection_norm = 0.0;
};

/// Mean arrival time behind a rectangular barrier of growing width. The
/// barrier starts at `barrier_start` and the detector stays a fixed
/// `detector_offset` beyond its exit, so only the crossing time changes.
inline std::vector<HartmanPoint> hartman_scan(const WavePacket& packet, double barrier_height,
                                              std::span<const double> widths, double barrier_start,
                                              double detector_offset, ArrivalOptions opts = {}) {
  packet.validate();
  if (!(packet.p0 * packet.p0 / (2.0 * packet.mass) < barrier_height))
    throw std::invalid_argument("hartman_scan: packet energy must lie below the barrier");
  if (!(detector_offset >= 0.0)) throw std::invalid_argument("hartman_scan: negative offset");
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (widths[i] < 0.0) throw std::invalid_argument("hartman_scan: negative width");
    if (i > 0 && widths[i] < widths[i - 1])
      throw std::invalid_argument("hartman_scan: widths must be non-decreasing");
  }
  std::vector<HartmanPoint> out;
  out.reserve(widths.size());
  for (const double w : widths) {
    const PotentialSpec spec = rectangular_barrier(barrier_height, w, barrier_start);
    const double x = barrier_start + w + detector_offset;
    const ArrivalMoments mom = mean_arrival(packet, spec, x, opts);
    out.push_back({w, mom.mean_t, mom.rms_t, mom.detection_norm});
  }
  return out;
}

/// Classical arrival time t(x) = int_q^x m dq' / p(q') for a particle
/// starting at q with momentum p, where p(q') = sign(p) sqrt(2m(E - V(q'))).
/// `breakpoints` marks where V may jump; each smooth piece gets a
/// Gauss-Legendre rule.
template <class PotentialFn>
double classical_arrival_time(PotentialFn&& potential, std::span<const double> breakpoints, double q,
                              double p, double x, double mass = 1.0) {
  if (!(mass > 0.0)) throw std::invalid_argument("classical_arrival_time: mass must be positive");
  if (p == 0.0) throw TurningPointError("particle at rest never arrives");
  const double energy = p * p / (2.0 * mass) + potential(q);
  if (x == q) return 0.0;
  const double a = std::min(q, x);
  const double b = std::max(q, x);
  std::vector<double> cuts{a};
  for (const double c : breakpoints)
    if (c > a && c < b) cuts.push_back(c);
  std::sort(cuts.begin() + 1, cuts.end());
  cuts.push_back(b);

  double total = 0.0;
  for (std::size_t k = 1; k < cuts.size(); ++k) {
    if (!(cuts[k] > cuts[k - 1])) continue;
    const QuadratureRule rule = composite_gauss_legendre<20>(cuts[k - 1], cuts[k], 1);
    for (std::size_t i = 0; i < rule.size(); ++i) {
      const double kinetic = energy - potential(rule.nodes[i]);
      if (!(kinetic > 0.0))
        throw TurningPointError("classically forbidden region on the path");
      total += rule.weights[i] * mass / std::sqrt(2.0 * mass * kinetic);
    }
  }
  const double direction = x > q ? 1.0 : -1.0;
  return direction * (p > 0.0 ? 1.0 : -1.0) * total;
}

inline double classical_arrival_time(const PotentialSpec& spec, double q, double p, double x,
                                     double mass = 1.0) {
  if (spec.kind != SpecKind::particle)
    throw std::invalid_argument("classical_arrival_time needs a particle potential");
  const std::vector<double> cuts = spec.interfaces();
  return classical_arrival_time([&](double y) { return spec.value_at(y); }, cuts, q, p, x, mass);
}

/// Applies -e^{-ipx} sqrt(m/p) q sqrt(m/p) e^{ipx} with q = i d/dp
/// (centred differences) on a uniform momentum grid with p > 0.
inline std::vector<cplx> apply_free_toa_operator(std::span<const double> p, std::span<const cplx> psi,
                                                 double x, double mass = 1.0) {
  const std::size_t n = p.size();
  if (n < 3 || psi.size() != n) throw std::invalid_argument("free TOA operator: bad grid");
  const double h = p[1] - p[0];
  std::vector<cplx> phi(n), out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(p[i] > 0.0)) throw std::invalid_argument("free TOA operator: momenta must be positive");
    phi[i] = std::sqrt(mass / p[i]) * std::exp(kI * p[i] * x) * psi[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    cplx d;
    if (i == 0)
      d = (phi[1] - phi[0]) / h;
    else if (i + 1 == n)
      d = (phi[n - 1] - phi[n - 2]) / h;
    else
      d = (phi[i + 1] - phi[i - 1]) / (2.0 * h);
    out[i] = -std::exp(-kI * p[i] * x) * std::sqrt(mass / p[i]) * (kI * d);
  }
  return out;
}

/// <psi|[H0, t0(x)]|psi> / <psi|psi>; equals i for states away from p = 0.
inline cplx free_toa_commutator(std::span<const double> p, std::span<const cplx> psi, double x,
                                double mass = 1.0) {
  const std::size_t n = p.size();
  std::vector<cplx> h_psi(n);
  for (std::size_t i = 0; i < n; ++i) h_psi[i] = p[i] * p[i] / (2.0 * mass) * psi[i];
  const std::vector<cplx> t_psi = apply_free_toa_operator(p, psi, x, mass);
  const std::vector<cplx> t_h_psi = apply_free_toa_operator(p, h_psi, x, mass);
  cplx num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = p[i] * p[i] / (2.0 * mass);
    num += std::conj(psi[i]) * (e * t_psi[i] - t_h_psi[i]);
    den += std::norm(psi[i]);
  }
  return num / den;
}

}  // namespace toalab
