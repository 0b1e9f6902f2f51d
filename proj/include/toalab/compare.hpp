#pragma once

// Arrival-time density from scattering states set against the probability
// current of a direct simulation at the same detector.
//
// Where the packet is quasi-monochromatic and above any barrier the two
// agree. A packet seeded inside a resonant cavity leaks out as
// exp(-Gamma t); the current carries that tail, the scattering-state
// density does not.

#include "toalab/arrival.hpp"
#include "toalab/resonance.hpp"
#include "toalab/tdse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace toalab {

struct CompareSetup {
  Domain domain{-160.0, 163.0, 0.01};
  double dt = 0.01;
  double t_max = 200.0;
  Absorber absorber{true, 3.0, 0.1};
};

struct FluxOverlay {
  double detector_x = 0.0;
  std::vector<double> t;
  std::vector<double> toa;   // |amplitude|^2 from scattering states
  std::vector<double> flux;  // J(x_d, t) from the simulation
  double toa_norm = 0.0;     // trapezoid over [0, t_max]
  double flux_norm = 0.0;
  double l1 = 0.0;  // int |toa / toa_norm - flux / flux_norm| dt
  Trajectory trajectory;
};

namespace detail {

inline std::vector<double> toa_samples(ArrivalAmplitude& amp, const std::vector<double>& t) {
  std::vector<double> probes;
  const std::size_t np = std::min<std::size_t>(128, t.size());
  for (std::size_t i = 0; i < np; ++i) probes.push_back(t[i * (t.size() - 1) / std::max<std::size_t>(np - 1, 1)]);
  amp.converge_on(probes);
  // Callers pass uniform grids.
  const double step = t.size() > 1 ? (t.back() - t.front()) / static_cast<double>(t.size() - 1) : 0.0;
  const auto a = amp.on_uniform_grid(t.front(), step, t.size());
  std::vector<double> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = std::norm(a[i]);
  return out;
}

inline double tail_integral(const std::vector<double>& t, const std::vector<double>& y, double from) {
  std::vector<double> tt, yy;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] >= from) {
      tt.push_back(t[i]);
      yy.push_back(y[i]);
    }
  return tt.size() < 2 ? 0.0 : trapezoid(tt, yy);
}

}  // namespace detail

/// Runs the simulation with a flux detector at x and evaluates the arrival
/// density on the same time samples. `regions` are passed through so the
/// caller can also watch trapped probability.
inline FluxOverlay overlay_toa_and_flux(const PotentialSpec& spec, const WavePacket& packet, double x,
                                        const CompareSetup& setup, std::vector<Region> regions = {}) {
  if (!(setup.t_max > 0.0)) throw std::invalid_argument("compare: t_max must be positive");
  EvolveOptions o;
  o.dt = setup.dt;
  o.n_steps = static_cast<std::size_t>(std::llround(setup.t_max / setup.dt));
  o.absorber = setup.absorber;
  o.detectors = {x};
  o.regions = std::move(regions);

  FluxOverlay ov;
  ov.detector_x = x;
  ov.trajectory = evolve(spec, packet, setup.domain, o);
  ov.t = ov.trajectory.t;
  ov.flux = ov.trajectory.flux.front();
  ArrivalAmplitude amp(packet, spec, x);
  ov.toa = detail::toa_samples(amp, ov.t);
  ov.toa_norm = trapezoid(ov.t, ov.toa);
  ov.flux_norm = trapezoid(ov.t, ov.flux);
  if (!(ov.toa_norm > 0.0) || !(ov.flux_norm > 0.0)) throw NoDetection("nothing reaches the detector");
  std::vector<double> diff(ov.t.size());
  for (std::size_t i = 0; i < ov.t.size(); ++i) diff[i] = std::abs(ov.toa[i] / ov.toa_norm - ov.flux[i] / ov.flux_norm);
  ov.l1 = trapezoid(ov.t, diff);
  return ov;
}

struct ResonanceSetup {
  CompareSetup run;
  KBox box{0.1, 3.0, -0.5, -1e-4};
  Region cavity;  // empty: the middle segment of a three-segment potential
  double trapped_fit_from = 30.0;
  double trapped_fit_to = 100.0;
  double flux_fit_from = 20.0;
  double flux_fit_to = 100.0;
  double tail_from = 30.0;
  double toa_extension = 20.0;  // TOA density is followed this many lifetimes past t_max
};

struct ResonanceComparison {
  ResonancePole pole;
  Region cavity;
  ExponentialFit trapped;
  ExponentialFit flux;
  double trapped_rate_error = 0.0;  // |rate - Gamma| / Gamma
  double flux_rate_error = 0.0;
  double tdse_tail_mass = 0.0;  // flux after tail_from, exponential continuation past t_max
  double toa_tail_mass = 0.0;
  double tail_ratio = 0.0;  // tdse / toa
  FluxOverlay overlay;
};

/// Lowest resonance of `spec` inside the box, then the packet is run both
/// ways and the decay tails are compared.
inline ResonanceComparison compare_resonance(const PotentialSpec& spec, const WavePacket& packet, double x,
                                             const ResonanceSetup& setup) {
  ResonanceComparison rc;
  auto poles = find_poles(spec, setup.box, 16, packet.mass);
  std::erase_if(poles, [](const ResonancePole& p) { return p.kind != PoleKind::resonance; });
  if (poles.empty()) throw NoDetection("no resonance pole inside the search box");
  rc.pole = *std::min_element(poles.begin(), poles.end(), [](const auto& a, const auto& b) {
    return a.k_pole.real() < b.k_pole.real();
  });

  rc.cavity = setup.cavity;
  if (!(rc.cavity.b > rc.cavity.a)) {
    if (spec.segments.size() != 3) throw std::invalid_argument("compare: give the cavity region explicitly");
    const auto edges = spec.interfaces();
    rc.cavity = {edges[1], edges[2]};
  }

  rc.overlay = overlay_toa_and_flux(spec, packet, x, setup.run, {rc.cavity});
  const auto& t = rc.overlay.t;
  const double gamma = rc.pole.gamma;
  rc.trapped = fit_exponential_decay(t, rc.overlay.trajectory.region_norm.front(), setup.trapped_fit_from,
                                     setup.trapped_fit_to);
  rc.flux = fit_exponential_decay(t, rc.overlay.flux, setup.flux_fit_from, setup.flux_fit_to);
  rc.trapped_rate_error = std::abs(rc.trapped.rate - gamma) / gamma;
  rc.flux_rate_error = std::abs(rc.flux.rate - gamma) / gamma;

  rc.tdse_tail_mass = detail::tail_integral(t, rc.overlay.flux, setup.tail_from);
  if (rc.flux.rate > 0.0) rc.tdse_tail_mass += rc.overlay.flux.back() / rc.flux.rate;

  // Scattering-state density on an extended grid with the same step.
  const double t_end = t.back() + setup.toa_extension / gamma;
  const auto n = static_cast<std::size_t>(std::ceil((t_end - setup.tail_from) / setup.run.dt)) + 1;
  const auto tt = linspace(setup.tail_from, setup.tail_from + setup.run.dt * static_cast<double>(n - 1), n);
  ArrivalAmplitude amp(packet, spec, x);
  rc.toa_tail_mass = trapezoid(tt, detail::toa_samples(amp, tt));
  rc.tail_ratio = rc.toa_tail_mass > 0.0 ? rc.tdse_tail_mass / rc.toa_tail_mass
                                         : std::numeric_limits<double>::infinity();
  return rc;
}

}  // namespace toalab
