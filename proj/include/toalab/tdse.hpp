#pragma once

// Direct time evolution of the 1D Schrodinger equation, used as the
// dynamical reference for arrival-time predictions.
//
// Crank-Nicolson on a uniform grid with Dirichlet walls:
//   (1 + i dt H / 2) psi^{n+1} = (1 - i dt H / 2) psi^n,
// H = -(1/2m) D2 + V. The step is unitary for real V. An optional quartic
// imaginary ramp over the outer part of the domain absorbs outgoing waves.

#include "toalab/arrival.hpp"
#include "toalab/errors.hpp"
#include "toalab/potential.hpp"
#include "toalab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace toalab {

struct Domain {
  double x_min = -50.0;
  double x_max = 50.0;
  double dx = 0.01;

  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(std::floor((x_max - x_min) / dx + 1e-9)) + 1;
  }
  [[nodiscard]] double x(std::size_t i) const { return x_min + dx * static_cast<double>(i); }
  [[nodiscard]] std::size_t index_of(double x) const {
    const double r = std::round((x - x_min) / dx);
    return static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(size() - 1)));
  }
};

/// Closed interval [a, b] of the spatial grid.
struct Region {
  double a = 0.0;
  double b = 0.0;
};

struct Absorber {
  bool enabled = false;
  double strength = 3.0;  // peak of the imaginary potential
  double fraction = 0.1;  // share of the domain covered at each end
};

struct GridState {
  Domain domain;
  std::vector<cplx> psi;
  double t = 0.0;
  double dt = 0.0;

  [[nodiscard]] double norm() const {
    double s = 0.0;
    for (const auto& v : psi) s += std::norm(v);
    return s * domain.dx;
  }
};

/// Samples the packet on the grid and renormalises on the grid measure.
inline GridState initial_state(const WavePacket& packet, const Domain& domain) {
  packet.validate();
  GridState s;
  s.domain = domain;
  s.psi.resize(domain.size());
  for (std::size_t i = 0; i < s.psi.size(); ++i) s.psi[i] = packet.position_amplitude(domain.x(i));
  const double n = std::sqrt(s.norm());
  for (auto& v : s.psi) v /= n;
  return s;
}

/// Potential on the grid (interface points take the mean of both sides),
/// minus the absorbing ramp when enabled.
inline std::vector<cplx> grid_potential(const PotentialSpec& spec, const Domain& domain,
                                        const Absorber& absorber) {
  std::vector<cplx> v(domain.size());
  const double width = absorber.fraction * (domain.x_max - domain.x_min);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = domain.x(i);
    double w = 0.0;
    if (absorber.enabled && width > 0.0) {
      const double sl = (domain.x_min + width - x) / width;
      const double sr = (x - (domain.x_max - width)) / width;
      if (sl > 0.0) w = absorber.strength * std::pow(sl, 4);
      if (sr > 0.0) w = absorber.strength * std::pow(sr, 4);
    }
    v[i] = cplx(spec.value_at(x, 1e-9 * domain.dx), -w);
  }
  return v;
}

/// Tridiagonal Crank-Nicolson stepper with a prefactorised left-hand side.
class CrankNicolson {
 public:
  CrankNicolson(const Domain& domain, std::vector<cplx> potential, double dt, double mass)
      : n_(potential.size()), dt_(dt) {
    if (n_ < 3) throw std::invalid_argument("grid too small");
    const double kin = 1.0 / (mass * domain.dx * domain.dx);
    off_ = kI * (0.5 * dt) * (-0.5 * kin);
    rhs_diag_.resize(n_);
    cprime_.resize(n_);
    inv_den_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const cplx h = kin + potential[i];
      rhs_diag_[i] = 1.0 - kI * (0.5 * dt) * h;
      const cplx a = 1.0 + kI * (0.5 * dt) * h;
      const cplx den = i == 0 ? a : a - off_ * cprime_[i - 1];
      inv_den_[i] = 1.0 / den;
      cprime_[i] = off_ * inv_den_[i];
    }
    scratch_.resize(n_);
  }

  void step(std::vector<cplx>& psi) {
    std::vector<cplx>& d = scratch_;
    for (std::size_t i = 0; i < n_; ++i) {
      cplx b = rhs_diag_[i] * psi[i];
      if (i > 0) b -= off_ * psi[i - 1];
      if (i + 1 < n_) b -= off_ * psi[i + 1];
      d[i] = i == 0 ? b * inv_den_[0] : (b - off_ * d[i - 1]) * inv_den_[i];
    }
    psi[n_ - 1] = d[n_ - 1];
    for (std::size_t i = n_ - 1; i-- > 0;) psi[i] = d[i] - cprime_[i] * psi[i + 1];
  }

  [[nodiscard]] double dt() const { return dt_; }

 private:
  std::size_t n_;
  double dt_;
  cplx off_;
  std::vector<cplx> rhs_diag_, cprime_, inv_den_, scratch_;
};

struct EvolveOptions {
  double dt = 0.01;
  std::size_t n_steps = 1000;
  double mass = 1.0;
  Absorber absorber;
  std::vector<double> detectors;  // flux is sampled here every step
  std::vector<Region> regions;    // probability inside is sampled every step
  std::size_t snapshot_every = 0;  // 0 = no snapshots
  double edge_density_limit = 1e-6;
};

/// Recorded observables of one run; sample 0 is the initial state.
struct Trajectory {
  std::vector<double> t;
  std::vector<double> total_norm;
  std::vector<double> detectors;
  std::vector<std::vector<double>> flux;
  std::vector<Region> regions;
  std::vector<std::vector<double>> region_norm;
  std::vector<GridState> snapshots;
  GridState final_state;
  bool absorber = false;
  double mass = 1.0;
};

namespace detail {

inline double flux_sample(const std::vector<cplx>& psi, std::size_t i, double dx, double mass) {
  if (i == 0 || i + 1 >= psi.size()) return 0.0;
  const cplx d = (psi[i + 1] - psi[i - 1]) / (2.0 * dx);
  return (std::conj(psi[i]) * d).imag() / mass;
}

inline double region_sample(const std::vector<cplx>& psi, const Domain& dom, const Region& r) {
  if (!(r.b > r.a)) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double x = dom.x(i);
    if (x >= r.a && x <= r.b) s += std::norm(psi[i]);
  }
  return s * dom.dx;
}

}  // namespace detail

inline Trajectory evolve(const PotentialSpec& spec, GridState state, const EvolveOptions& opts) {
  if (spec.kind != SpecKind::particle) throw std::invalid_argument("evolve needs a particle potential");
  if (!(opts.dt > 0.0)) throw std::invalid_argument("evolve: dt must be positive");
  if (!(opts.mass > 0.0)) throw std::invalid_argument("evolve: mass must be positive");
  if (opts.dt * spec.max_abs_value() >= 0.1)
    throw std::invalid_argument("evolve: dt * max|V| must stay below 0.1");
  const Domain& dom = state.domain;
  if (state.psi.size() != dom.size()) throw std::invalid_argument("evolve: state/domain mismatch");
  if (!spec.empty() && (spec.left_edge() < dom.x_min || spec.right_edge() > dom.x_max))
    throw DomainTooSmall("potential extends beyond the domain");
  if (std::abs(state.psi.front()) >= 1e-8 || std::abs(state.psi.back()) >= 1e-8)
    throw DomainTooSmall("initial state is not contained in the domain");

  CrankNicolson cn(dom, grid_potential(spec, dom, opts.absorber), opts.dt, opts.mass);

  Trajectory tr;
  tr.absorber = opts.absorber.enabled;
  tr.mass = opts.mass;
  tr.detectors = opts.detectors;
  tr.regions = opts.regions;
  tr.flux.assign(opts.detectors.size(), {});
  tr.region_norm.assign(opts.regions.size(), {});
  std::vector<std::size_t> det_idx;
  for (const double x : opts.detectors) {
    if (x <= dom.x_min || x >= dom.x_max) throw std::invalid_argument("detector outside domain");
    det_idx.push_back(dom.index_of(x));
  }
  const std::size_t samples = opts.n_steps + 1;
  tr.t.reserve(samples);
  tr.total_norm.reserve(samples);
  for (auto& f : tr.flux) f.reserve(samples);
  for (auto& r : tr.region_norm) r.reserve(samples);

  auto record = [&]() {
    tr.t.push_back(state.t);
    tr.total_norm.push_back(state.norm());
    for (std::size_t d = 0; d < det_idx.size(); ++d)
      tr.flux[d].push_back(detail::flux_sample(state.psi, det_idx[d], dom.dx, opts.mass));
    for (std::size_t r = 0; r < opts.regions.size(); ++r)
      tr.region_norm[r].push_back(detail::region_sample(state.psi, dom, opts.regions[r]));
  };

  state.dt = opts.dt;
  record();
  if (opts.snapshot_every > 0) tr.snapshots.push_back(state);
  const std::size_t n = state.psi.size();
  for (std::size_t s = 1; s <= opts.n_steps; ++s) {
    cn.step(state.psi);
    state.t = static_cast<double>(s) * opts.dt;
    if (!opts.absorber.enabled &&
        (std::norm(state.psi[1]) > opts.edge_density_limit ||
         std::norm(state.psi[n - 2]) > opts.edge_density_limit))
      throw DomainTooSmall("wave reached the domain edge; enlarge the domain or enable the absorber");
    record();
    if (opts.snapshot_every > 0 && s % opts.snapshot_every == 0) tr.snapshots.push_back(state);
  }
  tr.final_state = std::move(state);
  return tr;
}

/// Convenience overload starting from a Gaussian packet. Enforces the
/// resolution rule p_max dx < 0.5 with p_max = |p0| + 8 sigma_p.
inline Trajectory evolve(const PotentialSpec& spec, const WavePacket& packet, const Domain& domain,
                         EvolveOptions opts) {
  const double p_max = std::abs(packet.p0) + 8.0 * packet.sigma_p;
  if (p_max * domain.dx >= 0.5) throw std::invalid_argument("evolve: grid too coarse for packet");
  opts.mass = packet.mass;
  return evolve(spec, initial_state(packet, domain), opts);
}

/// Probability current J = Im(psi* psi') / m at a registered detector.
inline const std::vector<double>& flux_at(const Trajectory& tr, double x_detector) {
  for (std::size_t d = 0; d < tr.detectors.size(); ++d)
    if (std::abs(tr.detectors[d] - x_detector) < 1e-12 * std::max(1.0, std::abs(x_detector)))
      return tr.flux[d];
  throw std::invalid_argument("flux_at: detector was not registered before evolution");
}

/// Probability inside a registered region, one sample per step.
inline const std::vector<double>& trapped_norm(const Trajectory& tr, const Region& region) {
  for (std::size_t r = 0; r < tr.regions.size(); ++r)
    if (tr.regions[r].a == region.a && tr.regions[r].b == region.b) return tr.region_norm[r];
  throw std::invalid_argument("trapped_norm: region was not registered before evolution");
}

struct ExponentialFit {
  double rate = 0.0;       // decay constant (positive for decay)
  double intercept = 0.0;  // log amplitude at t = 0
  double r_squared = 0.0;
};

/// Least-squares line through log|y| on t in [t_lo, t_hi].
inline ExponentialFit fit_exponential_decay(const std::vector<double>& t, const std::vector<double>& y,
                                            double t_lo, double t_hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi || y[i] == 0.0) continue;
    const double ly = std::log(std::abs(y[i]));
    sx += t[i];
    sy += ly;
    sxx += t[i] * t[i];
    sxy += t[i] * ly;
    syy += ly * ly;
    ++n;
  }
  if (n < 3) throw std::invalid_argument("fit_exponential_decay: fewer than 3 samples in window");
  const double dn = static_cast<double>(n);
  const double cov = sxy - sx * sy / dn;
  const double var = sxx - sx * sx / dn;
  const double vary = syy - sy * sy / dn;
  ExponentialFit f;
  const double slope = cov / var;
  f.rate = -slope;
  f.intercept = (sy - slope * sx) / dn;
  f.r_squared = vary > 0.0 ? cov * cov / (var * vary) : 1.0;
  return f;
}

}  // namespace toalab
