#pragma once

// Stationary 1D scattering off piecewise-constant media.
//
// Inside each slab the solution is carried as the pair (psi, psi') and moved
// across the slab with the propagator
//
//   [ cos(k d)       sin(k d) / k ]
//   [ -k sin(k d)    cos(k d)     ]
//
// which only depends on k^2, so it is analytic in the complex momentum and has
// no special case at k = 0 (grazing energies E == V_j). Plane-wave
// coefficients are produced on demand from (psi, psi').
//
// Conventions (hbar = 1, c = 1):
//  * particles: k_j^2 = 2 m (E - V_j); photons: k_j = n_j omega.
//  * transfer matrix M maps right-exterior plane-wave coefficients to
//    left-exterior ones, (A_L, B_L) = M (A_R, B_R), with the left exterior
//    referenced at the first interface and the right exterior at the last.
//  * particle amplitudes are global: incident e^{ikx}, transmitted T e^{ikx}.
//    An empty spec gives T = 1 and zero Wigner delay.
//  * stack amplitudes are local: H = field at exit / field at entrance, so a
//    vacuum stack gives H = e^{i omega L}.

#include "toalab/errors.hpp"
#include "toalab/potential.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace toalab {

using cplx = std::complex<double>;
using Matrix2c = Eigen::Matrix2cd;
using Vector2c = Eigen::Vector2cd;

inline constexpr cplx kI{0.0, 1.0};

namespace detail {

/// (psi, psi') propagator across a slab of width d (d may be negative).
inline Matrix2c slab_propagator(cplx k2, double d) {
  const cplx z2 = k2 * d * d;
  cplx c, s_over_k, k_s;
  if (std::abs(z2) < 1e-6) {
    // Taylor series; even in k so no square root needed.
    c = 1.0 - z2 / 2.0 + z2 * z2 / 24.0;
    s_over_k = d * (1.0 - z2 / 6.0 + z2 * z2 / 120.0);
    k_s = k2 * d * (1.0 - z2 / 6.0 + z2 * z2 / 120.0);
  } else {
    const cplx k = std::sqrt(k2);
    const cplx kd = k * d;
    c = std::cos(kd);
    const cplx s = std::sin(kd);
    s_over_k = s / k;
    k_s = k * s;
  }
  Matrix2c p;
  p << c, s_over_k, -k_s, c;
  return p;
}

/// Plane-wave basis at a reference point: (psi, psi') = W (A, B).
inline Matrix2c plane_wave_basis(cplx k) {
  Matrix2c w;
  w << 1.0, 1.0, kI * k, -kI * k;
  return w;
}

inline Matrix2c plane_wave_basis_inverse(cplx k) {
  Matrix2c w;
  const cplx inv = 1.0 / (kI * k);
  w << 0.5, 0.5 * inv, 0.5, -0.5 * inv;
  return w;
}

}  // namespace detail

/// Squared wavenumbers of each slab plus the exterior wavenumber.
struct Wavenumbers {
  cplx exterior;
  std::vector<cplx> squared;
};

/// Particle at real energy, or photon at angular frequency, per spec.kind.
inline Wavenumbers wavenumbers(const PotentialSpec& spec, double energy, double mass = 1.0) {
  Wavenumbers w;
  w.squared.reserve(spec.segments.size());
  if (spec.kind == SpecKind::particle) {
    const double ext = 2.0 * mass * (energy - spec.exterior);
    if (!(ext > 0.0)) throw DegenerateEnergy("energy must lie above the exterior potential");
    if (ext < 1e-24) throw DegenerateEnergy("exterior momentum vanishes");
    w.exterior = std::sqrt(ext);
    for (const auto& s : spec.segments) w.squared.emplace_back(2.0 * mass * (energy - s.value));
  } else {
    if (!(energy > 0.0)) throw DegenerateEnergy("angular frequency must be positive");
    w.exterior = spec.exterior * energy;
    for (const auto& s : spec.segments) {
      const double k = s.value * energy;
      w.squared.emplace_back(k * k);
    }
  }
  return w;
}

/// Particle wavenumbers continued to complex exterior momentum k.
inline Wavenumbers wavenumbers_at_momentum(const PotentialSpec& spec, cplx k, double mass = 1.0) {
  if (spec.kind != SpecKind::particle)
    throw std::invalid_argument("complex-momentum continuation needs a particle potential");
  Wavenumbers w;
  w.exterior = k;
  for (const auto& s : spec.segments) w.squared.push_back(k * k - 2.0 * mass * (s.value - spec.exterior));
  return w;
}

/// Product of slab propagators, left to right: (psi, psi')(right) = P (psi, psi')(left).
inline Matrix2c slab_chain(const PotentialSpec& spec, const Wavenumbers& w) {
  Matrix2c p = Matrix2c::Identity();
  for (std::size_t j = 0; j < spec.segments.size(); ++j)
    p = detail::slab_propagator(w.squared[j], spec.segments[j].width) * p;
  return p;
}

inline Matrix2c transfer_matrix(const PotentialSpec& spec, const Wavenumbers& w) {
  if (spec.segments.empty()) return Matrix2c::Identity();
  const Matrix2c p = slab_chain(spec, w);
  Matrix2c p_inv;
  p_inv << p(1, 1), -p(0, 1), -p(1, 0), p(0, 0);  // det P == 1
  return detail::plane_wave_basis_inverse(w.exterior) * p_inv * detail::plane_wave_basis(w.exterior);
}

/// Transfer matrix at real energy (particles) or angular frequency (stacks).
inline Matrix2c transfer_matrix(const PotentialSpec& spec, double energy, double mass = 1.0) {
  return transfer_matrix(spec, wavenumbers(spec, energy, mass));
}

/// Transfer matrix at complex exterior momentum (particles only). Entire in
/// k away from k = 0.
inline Matrix2c transfer_matrix_at_momentum(const PotentialSpec& spec, cplx k, double mass = 1.0) {
  return transfer_matrix(spec, wavenumbers_at_momentum(spec, k, mass));
}

/// M(0,0) at complex momentum; its zeros are the poles of T.
inline cplx inverse_transmission_element(const PotentialSpec& spec, cplx k, double mass = 1.0) {
  if (spec.segments.empty()) return 1.0;
  return transfer_matrix_at_momentum(spec, k, mass)(0, 0);
}

/// Transmission amplitude: global convention for particles, local for stacks.
inline cplx transmission(const PotentialSpec& spec, double energy, double mass = 1.0) {
  const Wavenumbers w = wavenumbers(spec, energy, mass);
  const cplx t_local = 1.0 / transfer_matrix(spec, w)(0, 0);
  if (spec.kind == SpecKind::dielectric) return t_local;
  return t_local * std::exp(-kI * w.exterior * spec.length());
}

inline cplx reflection(const PotentialSpec& spec, double energy, double mass = 1.0) {
  const Wavenumbers w = wavenumbers(spec, energy, mass);
  const Matrix2c m = transfer_matrix(spec, w);
  const cplx r_local = m(1, 0) / m(0, 0);
  if (spec.kind == SpecKind::dielectric) return r_local;
  return r_local * std::exp(2.0 * kI * w.exterior * spec.origin);
}

namespace detail {

/// d arg f / dx by centred differences with Richardson extrapolation; the
/// step is halved until two extrapolants agree.
template <class F>
double phase_derivative(F&& f, double x, double h0) {
  auto centred = [&](double h) { return std::arg(f(x + h) / f(x - h)) / (2.0 * h); };
  double h = h0;
  double prev = (4.0 * centred(h / 2.0) - centred(h)) / 3.0;
  for (int it = 0; it < 14; ++it) {
    h /= 2.0;
    const double next = (4.0 * centred(h / 2.0) - centred(h)) / 3.0;
    if (std::abs(next - prev) <= 1e-10 * (1.0 + std::abs(next))) return next;
    prev = next;
  }
  return prev;
}

}  // namespace detail

struct ScatterPoint {
  double energy = 0.0;
  double momentum = 0.0;
  cplx transmission;
  cplx reflection;
  double phase = 0.0;         // principal value of arg T
  double wigner_delay = 0.0;  // d arg T / dE
};

inline double wigner_delay(const PotentialSpec& spec, double energy, double mass = 1.0) {
  const double floor = spec.kind == SpecKind::particle ? spec.exterior : 0.0;
  const double h0 = std::min(1e-3 * std::max(std::abs(energy), 1e-3), 0.25 * (energy - floor));
  return detail::phase_derivative([&](double e) { return transmission(spec, e, mass); }, energy, h0);
}

inline ScatterPoint scatter_point(const PotentialSpec& spec, double energy, double mass = 1.0) {
  if (!(energy > 0.0)) throw std::invalid_argument("scatter_point: energy must be positive");
  ScatterPoint sp;
  const Wavenumbers w = wavenumbers(spec, energy, mass);
  sp.energy = energy;
  sp.momentum = w.exterior.real();
  sp.transmission = transmission(spec, energy, mass);
  sp.reflection = reflection(spec, energy, mass);
  sp.phase = std::arg(sp.transmission);
  sp.wigner_delay = wigner_delay(spec, energy, mass);
  return sp;
}

/// Continuous arg T along an increasing energy grid. Each interval is
/// bisected until no sub-step changes the phase by more than pi/4.
inline std::vector<double> unwrapped_transmission_phase(const PotentialSpec& spec,
                                                        std::span<const double> energies,
                                                        double mass = 1.0) {
  std::vector<double> out;
  if (energies.empty()) return out;
  out.reserve(energies.size());
  cplx t_prev = transmission(spec, energies[0], mass);
  double phase = std::arg(t_prev);
  out.push_back(phase);
  for (std::size_t i = 1; i < energies.size(); ++i) {
    const double e0 = energies[i - 1];
    const double e1 = energies[i];
    if (!(e1 > e0)) throw std::invalid_argument("energy grid must increase");
    std::size_t sub = 1;
    for (;;) {
      bool ok = true;
      double acc = 0.0;
      cplx t_a = t_prev;
      for (std::size_t s = 1; s <= sub; ++s) {
        const double e = e0 + (e1 - e0) * static_cast<double>(s) / static_cast<double>(sub);
        const cplx t_b = transmission(spec, e, mass);
        const double d = std::arg(t_b / t_a);
        if (std::abs(d) > std::numbers::pi / 4.0) {
          ok = false;
          break;
        }
        acc += d;
        t_a = t_b;
      }
      if (ok) {
        phase += acc;
        t_prev = t_a;
        break;
      }
      if (sub > (1u << 20)) throw std::runtime_error("phase unwrapping did not converge");
      sub *= 2;
    }
    out.push_back(phase);
  }
  return out;
}

enum class Incidence { left, right };

/// Stationary scattering solution with unit-amplitude incident wave.
///
/// Regions are numbered 0 (left exterior), 1..N (slabs), N+1 (right
/// exterior). Region r is represented around its reference point ref[r]
/// (left edge for slabs, the adjacent interface for the exteriors) both by
/// the exact pair (psi, psi') and by plane-wave coefficients
/// psi = A e^{ik(x-ref)} + B e^{-ik(x-ref)}.
struct ScatteringState {
  double energy = 0.0;
  Incidence branch = Incidence::left;
  cplx transmission;
  cplx reflection;
  std::vector<double> interfaces;
  std::vector<double> ref;
  std::vector<cplx> k_squared;
  std::vector<cplx> wavenumber;  // regularised sqrt(k^2 + i eps)
  std::vector<Vector2c> edge;    // (psi, psi') at ref[r]
  std::vector<cplx> A, B;

  [[nodiscard]] std::size_t region_of(double x) const {
    if (interfaces.empty() || x < interfaces.front()) return 0;
    for (std::size_t j = 1; j < interfaces.size(); ++j)
      if (x < interfaces[j]) return j;
    return interfaces.size();
  }

  [[nodiscard]] Vector2c value_and_derivative(double x) const {
    const std::size_t r = region_of(x);
    return detail::slab_propagator(k_squared[r], x - ref[r]) * edge[r];
  }

  [[nodiscard]] cplx psi(double x) const { return value_and_derivative(x)(0); }

  /// Plane-wave form of region r evaluated at x (any x; used for matching checks).
  [[nodiscard]] Vector2c plane_wave(std::size_t r, double x) const {
    const cplx k = wavenumber[r];
    const cplx ep = std::exp(kI * k * (x - ref[r]));
    const cplx em = std::exp(-kI * k * (x - ref[r]));
    Vector2c v;
    v << A[r] * ep + B[r] * em, kI * k * (A[r] * ep - B[r] * em);
    return v;
  }
};

inline ScatteringState scattering_state(const PotentialSpec& spec, double energy, Incidence branch,
                                        double mass = 1.0) {
  if (!(energy > 0.0)) throw std::invalid_argument("scattering_state: energy must be positive");
  const Wavenumbers w = wavenumbers(spec, energy, mass);
  const Matrix2c m = transfer_matrix(spec, w);
  const std::size_t n = spec.segments.size();
  const cplx k = w.exterior;

  ScatteringState st;
  st.energy = energy;
  st.branch = branch;
  st.interfaces = spec.interfaces();
  st.k_squared.resize(n + 2);
  st.k_squared.front() = k * k;
  st.k_squared.back() = k * k;
  for (std::size_t j = 0; j < n; ++j) st.k_squared[j + 1] = w.squared[j];
  st.ref.resize(n + 2);
  st.ref[0] = st.interfaces.front();
  for (std::size_t j = 0; j < n; ++j) st.ref[j + 1] = st.interfaces[j];
  st.ref[n + 1] = st.interfaces.back();
  st.edge.resize(n + 2);

  const double x0 = st.interfaces.front();
  const double xn = st.interfaces.back();
  const double len = xn - x0;
  if (branch == Incidence::left) {
    const cplx r_loc = m(1, 0) / m(0, 0);
    const cplx phase = std::exp(kI * k * x0);
    st.edge[0] = phase * Vector2c(1.0 + r_loc, kI * k * (1.0 - r_loc));
    Vector2c u = st.edge[0];
    for (std::size_t j = 0; j < n; ++j) {
      st.edge[j + 1] = u;
      u = detail::slab_propagator(w.squared[j], spec.segments[j].width) * u;
    }
    st.edge[n + 1] = u;
    st.transmission = std::exp(-kI * k * len) / m(0, 0);
    st.reflection = r_loc * std::exp(2.0 * kI * k * x0);
  } else {
    const cplx r_loc = -m(0, 1) / m(0, 0);
    const cplx phase = std::exp(-kI * k * xn);
    st.edge[n + 1] = phase * Vector2c(1.0 + r_loc, kI * k * (r_loc - 1.0));
    Vector2c u = st.edge[n + 1];
    for (std::size_t j = n; j-- > 0;) {
      u = detail::slab_propagator(w.squared[j], -spec.segments[j].width) * u;
      st.edge[j + 1] = u;
    }
    st.edge[0] = u;
    st.transmission = std::exp(-kI * k * len) / m(0, 0);
    st.reflection = r_loc * std::exp(-2.0 * kI * k * xn);
  }
  if (spec.kind == SpecKind::dielectric) st.transmission = 1.0 / m(0, 0);

  constexpr double eps = 1e-12;
  st.wavenumber.resize(n + 2);
  st.A.resize(n + 2);
  st.B.resize(n + 2);
  for (std::size_t r = 0; r < n + 2; ++r) {
    const cplx kr = std::sqrt(st.k_squared[r] + cplx(0.0, eps));
    st.wavenumber[r] = kr;
    const cplx d = st.edge[r](1) / (kI * kr);
    st.A[r] = 0.5 * (st.edge[r](0) + d);
    st.B[r] = 0.5 * (st.edge[r](0) - d);
  }
  return st;
}

/// Transmission and group delay of a layered dielectric stack.
struct StackResponse {
  double omega = 0.0;
  cplx transmission;
  cplx reflection;
  double length = 0.0;
  double group_delay = 0.0;     // d arg H / d omega
  double group_velocity = 0.0;  // length / group_delay (c = 1)
};

inline StackResponse stack_transfer(const PotentialSpec& stack, double omega) {
  if (stack.kind != SpecKind::dielectric)
    throw std::invalid_argument("stack_transfer needs a dielectric stack");
  if (!(omega > 0.0)) throw std::invalid_argument("stack_transfer: omega must be positive");
  StackResponse r;
  r.omega = omega;
  r.transmission = transmission(stack, omega);
  r.reflection = reflection(stack, omega);
  r.length = stack.length();
  r.group_delay = detail::phase_derivative([&](double w) { return transmission(stack, w); }, omega,
                                           std::min(1e-3 * omega, 0.25 * omega));
  r.group_velocity = r.length / r.group_delay;
  return r;
}

}  // namespace toalab
