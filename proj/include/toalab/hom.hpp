#pragma once

// Hong-Ou-Mandel coincidence dip for degenerate down-converted pairs, with
// an optional dielectric stack in the signal arm.
//
// Pair state: int dnu f(nu) a_s^+(w0 + nu) a_i^+(w0 - nu) |0>. The signal
// arm applies H(w0 + nu); the idler arm is delayed by tau. With
// A(nu) = f(nu) H(w0 + nu) the 50/50 beam splitter gives
//
//   P_c(tau) = 1/2 [1 - Re int A(nu) A*(-nu) e^{-2 i nu tau} / int |A|^2].
//
// Internal units: femtoseconds and rad/fs with c = 1 (lengths in light-fs).

#include "toalab/errors.hpp"
#include "toalab/potential.hpp"
#include "toalab/quadrature.hpp"
#include "toalab/scatter.hpp"

#include <boost/math/constants/constants.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace toalab {

/// Speed of light in micrometres per femtosecond.
inline constexpr double kLightSpeedUmPerFs = 0.299792458;

/// Angular frequency (rad/fs) of vacuum wavelength lambda (um).
inline double angular_frequency_from_wavelength(double wavelength_um) {
  return 2.0 * boost::math::constants::pi<double>() * kLightSpeedUmPerFs / wavelength_um;
}

/// Sampled pair amplitude on a detuning grid symmetric about zero, so that
/// nu[n - 1 - j] == -nu[j].
struct SpectralAmplitude {
  double omega0 = 0.0;
  std::vector<double> nu;
  std::vector<cplx> f;
  std::string shape = "custom";
  double sigma = 0.0;  // rms width of |f|^2 for the Gaussian shape

  [[nodiscard]] double step() const { return nu.size() > 1 ? nu[1] - nu[0] : 0.0; }
  [[nodiscard]] double norm() const {
    double s = 0.0;
    for (const auto& v : f) s += std::norm(v);
    return s * step();
  }
  void normalize() {
    const double n = std::sqrt(norm());
    if (!(n > 0.0)) throw std::invalid_argument("spectral amplitude is zero");
    for (auto& v : f) v /= n;
  }
  void validate() const {
    if (nu.size() != f.size() || nu.size() < 3) throw std::invalid_argument("spectral amplitude: bad grid");
    const double h = step();
    for (std::size_t j = 0; j < nu.size(); ++j)
      if (std::abs(nu[j] + nu[nu.size() - 1 - j]) > 1e-9 * h)
        throw std::invalid_argument("spectral amplitude: grid must be symmetric about zero");
    if (std::abs(norm() - 1.0) > 1e-8) throw std::invalid_argument("spectral amplitude is not normalised");
  }
};

/// Gaussian pair spectrum; |f|^2 has rms width sigma. With an unobstructed
/// arm the dip is P_c = (1 - exp(-2 sigma^2 tau^2)) / 2.
inline SpectralAmplitude gaussian_spectrum(double omega0, double sigma, std::size_t points = 513,
                                           double half_span_sigmas = 8.0) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_spectrum: sigma must be positive");
  if (points < 3) throw std::invalid_argument("gaussian_spectrum: too few points");
  if (points % 2 == 0) ++points;
  SpectralAmplitude s;
  s.omega0 = omega0;
  s.shape = "gaussian";
  s.sigma = sigma;
  s.nu = linspace(-half_span_sigmas * sigma, half_span_sigmas * sigma, points);
  s.nu[points / 2] = 0.0;
  for (std::size_t j = 0; j < points / 2; ++j) s.nu[points - 1 - j] = -s.nu[j];
  s.f.resize(points);
  for (std::size_t j = 0; j < points; ++j) s.f[j] = std::exp(-s.nu[j] * s.nu[j] / (4.0 * sigma * sigma));
  s.normalize();
  return s;
}

/// Resamples a Gaussian spectrum on a finer grid over the same span.
inline SpectralAmplitude refine(const SpectralAmplitude& s) {
  if (s.shape != "gaussian") throw GridTooCoarse("custom spectra cannot be refined automatically");
  return gaussian_spectrum(s.omega0, s.sigma, 2 * s.nu.size() - 1, s.nu.back() / s.sigma);
}

using ArmTransfer = std::function<cplx(double omega)>;

/// Transfer of a stack placed in an arm, relative to the same length of
/// vacuum it displaces: H(omega) exp(-i omega L).
inline ArmTransfer stack_arm(const PotentialSpec& stack) {
  return [stack](double omega) {
    return transmission(stack, omega) * std::exp(-kI * omega * stack.length());
  };
}

struct DipStats {
  double delay_min = 0.0;  // fs
  double delta_min = 0.0;  // um (c * delay)
  double p_min = 0.0;
  double depth = 0.0;  // 1/2 - P_min
  double half_depth_width = std::numeric_limits<double>::quiet_NaN();  // fs
  bool shallow = false;
};

struct HOMTrace {
  std::vector<double> delay;  // fs
  std::vector<double> delta;  // um
  std::vector<double> pc;
  DipStats stats;
  bool has_stats = false;
  double edge_deviation = 0.0;  // max |P_c - 1/2| at the two grid ends
  std::size_t spectral_points = 0;
};

namespace detail {

/// Largest phase jump of H between neighbouring detuning samples weighted
/// by where the spectrum actually lives.
inline double transfer_undersampling(const SpectralAmplitude& s, const std::vector<cplx>& h) {
  double fmax = 0.0;
  for (const auto& v : s.f) fmax = std::max(fmax, std::abs(v));
  double worst = 0.0;
  for (std::size_t j = 1; j < h.size(); ++j) {
    if (std::abs(s.f[j]) < 1e-6 * fmax && std::abs(s.f[j - 1]) < 1e-6 * fmax) continue;
    const double a0 = std::abs(h[j - 1]), a1 = std::abs(h[j]);
    if (a0 == 0.0 || a1 == 0.0) continue;
    worst = std::max(worst, std::abs(std::arg(h[j] / h[j - 1])));
    worst = std::max(worst, std::abs(std::log(a1 / a0)));
  }
  return worst;
}

inline double coincidence(const std::vector<cplx>& a, const std::vector<double>& nu, double norm, double tau) {
  cplx x = 0.0;
  const std::size_t n = a.size();
  for (std::size_t j = 0; j < n; ++j) x += a[j] * std::conj(a[n - 1 - j]) * std::polar(1.0, -2.0 * nu[j] * tau);
  return std::clamp(0.5 * (1.0 - x.real() / norm), 0.0, 1.0);
}

}  // namespace detail

inline DipStats dip_stats(const std::vector<double>& delay, const std::vector<double>& pc,
                          double shallow_threshold = 0.01) {
  if (delay.size() != pc.size() || delay.size() < 3) throw std::invalid_argument("dip_stats: bad trace");
  const auto i = static_cast<std::size_t>(std::min_element(pc.begin(), pc.end()) - pc.begin());
  if (i == 0 || i + 1 == pc.size()) throw EdgeMinimum("coincidence minimum lies on the scan edge");
  DipStats d;
  // Parabola through the three samples around the minimum.
  const double h = delay[i + 1] - delay[i];
  const double y0 = pc[i - 1], y1 = pc[i], y2 = pc[i + 1];
  const double den = y0 - 2.0 * y1 + y2;
  double off = den > 0.0 ? 0.5 * (y0 - y2) / den : 0.0;
  off = std::clamp(off, -1.0, 1.0);
  d.delay_min = delay[i] + off * h;
  d.p_min = den > 0.0 ? y1 - 0.125 * (y0 - y2) * (y0 - y2) / den : y1;
  d.delta_min = kLightSpeedUmPerFs * d.delay_min;
  d.depth = 0.5 - d.p_min;
  d.shallow = d.depth < shallow_threshold;

  const double level = d.p_min + 0.5 * d.depth;
  double left = std::numeric_limits<double>::quiet_NaN(), right = left;
  for (std::size_t j = i; j-- > 0;)
    if (pc[j] >= level) {
      left = delay[j] + (level - pc[j]) * (delay[j + 1] - delay[j]) / (pc[j + 1] - pc[j]);
      break;
    }
  for (std::size_t j = i + 1; j < pc.size(); ++j)
    if (pc[j] >= level) {
      right = delay[j - 1] + (level - pc[j - 1]) * (delay[j] - delay[j - 1]) / (pc[j] - pc[j - 1]);
      break;
    }
  d.half_depth_width = right - left;
  return d;
}

/// Coincidence probability over `delays` (fs). arm may be empty (H = 1).
/// If H varies too fast for the detuning grid, or the grid cannot resolve
/// the largest delay, Gaussian spectra are refined by doubling; otherwise
/// GridTooCoarse.
inline HOMTrace coincidence_scan(SpectralAmplitude spectrum, const ArmTransfer& arm,
                                 const std::vector<double>& delays, int max_refinements = 6) {
  spectrum.validate();
  double tmax = 0.0;
  for (const double t : delays) tmax = std::max(tmax, std::abs(t));

  std::vector<cplx> a;
  for (int attempt = 0;; ++attempt) {
    const std::size_t n = spectrum.nu.size();
    std::vector<cplx> h(n, cplx(1.0));
    if (arm)
      for (std::size_t j = 0; j < n; ++j) h[j] = arm(spectrum.omega0 + spectrum.nu[j]);
    const double jump = detail::transfer_undersampling(spectrum, h);
    // e^{-2 i nu tau} must not alias: 2 tau dnu well below pi.
    const bool aliased = 2.0 * tmax * spectrum.step() > 0.5 * boost::math::constants::pi<double>();
    if (jump <= 0.1 && !aliased) {
      a.resize(n);
      for (std::size_t j = 0; j < n; ++j) a[j] = spectrum.f[j] * h[j];
      break;
    }
    if (attempt >= max_refinements) throw GridTooCoarse("detuning grid cannot resolve the arm transfer");
    spectrum = refine(spectrum);
  }

  double norm = 0.0;
  for (const auto& v : a) norm += std::norm(v);
  if (!(norm > 0.0)) throw std::invalid_argument("coincidence_scan: the arm blocks all light");

  HOMTrace tr;
  tr.spectral_points = spectrum.nu.size();
  tr.delay = delays;
  tr.delta.resize(delays.size());
  tr.pc.resize(delays.size());
  for (std::size_t k = 0; k < delays.size(); ++k) {
    tr.delta[k] = kLightSpeedUmPerFs * delays[k];
    tr.pc[k] = detail::coincidence(a, spectrum.nu, norm, delays[k]);
  }
  if (!tr.pc.empty()) tr.edge_deviation = std::max(std::abs(tr.pc.front() - 0.5), std::abs(tr.pc.back() - 0.5));
  if (tr.pc.size() >= 3) {
    try {
      tr.stats = dip_stats(tr.delay, tr.pc);
      tr.has_stats = true;
    } catch (const EdgeMinimum&) {
      tr.has_stats = false;
    }
  }
  return tr;
}

/// u = L / tau_g at omega0, in units of c.
inline double effective_group_velocity(const PotentialSpec& stack, double omega0) {
  return stack_transfer(stack, omega0).group_velocity;
}

/// Gaussian bandwidth whose unobstructed dip has the requested full width
/// at half depth (fs), found by root search on the simulated dip.
inline double calibrate_gaussian_bandwidth(double target_width_fs, std::size_t spectral_points = 257) {
  if (!(target_width_fs > 0.0)) throw std::invalid_argument("calibrate: width must be positive");
  const auto delays = linspace(-2.0 * target_width_fs, 2.0 * target_width_fs, 801);
  auto width = [&](double sigma) {
    const auto tr = coincidence_scan(gaussian_spectrum(1.0, sigma, spectral_points), {}, delays);
    return tr.stats.half_depth_width - target_width_fs;
  };
  // The width scales like 1/sigma; bracket a factor of two around 1/w.
  const double guess = 1.0 / target_width_fs;
  std::uintmax_t iters = 60;
  const auto r = boost::math::tools::toms748_solve(width, 0.5 * guess, 4.0 * guess,
                                                   boost::math::tools::eps_tolerance<double>(40), iters);
  return 0.5 * (r.first + r.second);
}

}  // namespace toalab
