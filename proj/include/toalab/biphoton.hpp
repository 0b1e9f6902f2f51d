#pragma once

// Entangled atom-photon state after spontaneous emission with recoil,
// restricted to opposite final momenta:
//
//   K(dp, dk) = N exp(-(dp/Dw)^2) / (dp + dk + i gamma)
//
// dp is the atomic (Doppler) detuning, dk the photon detuning. Both carry
// frequency units so the scaled coordinates x gamma / c and x gamma / v of
// the transported modes do not depend on c or v.

#include "toalab/errors.hpp"
#include "toalab/quadrature.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <boost/math/constants/constants.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace toalab {

using cplx = std::complex<double>;

struct KernelGrid {
  std::size_t n_atom = 1024;
  std::size_t n_photon = 1024;
  double atom_half_span = 4.0;    // in units of Dw
  double photon_half_span = 0.0;  // absolute; 0 picks it from tail_target
  double tail_target = 1e-5;      // Lorentzian mass left outside the photon window
};

/// Sampled kernel on a uniform dp grid and a tangent-mapped dk grid. The
/// dk nodes dk = s tan(theta), theta uniform, cluster where the Lorentzian
/// ridge lives and still reach far into its wings.
struct BiphotonKernel {
  double gamma = 0.0;
  double delta_omega = 0.0;
  double norm = 0.0;  // N
  std::vector<double> dp, dp_weight;
  std::vector<double> dk, dk_weight;
  Eigen::MatrixXcd values;  // K(dp_i, dk_j)
  double truncated_probability = 0.0;

  [[nodiscard]] double envelope(double dp_value) const {
    const double r = dp_value / delta_omega;
    return std::exp(-r * r);
  }
  [[nodiscard]] cplx operator()(double dp_value, double dk_value) const {
    return norm * envelope(dp_value) / cplx(dp_value + dk_value, gamma);
  }
  /// sqrt(w_i) K_ij sqrt(w'_j); its Frobenius norm is one.
  [[nodiscard]] Eigen::MatrixXcd weighted() const {
    Eigen::MatrixXcd w = values;
    for (std::size_t i = 0; i < dp.size(); ++i) w.row(static_cast<Eigen::Index>(i)) *= std::sqrt(dp_weight[i]);
    for (std::size_t j = 0; j < dk.size(); ++j) w.col(static_cast<Eigen::Index>(j)) *= std::sqrt(dk_weight[j]);
    return w;
  }
  [[nodiscard]] double discrete_norm() const {
    double s = 0.0;
    for (std::size_t i = 0; i < dp.size(); ++i)
      for (std::size_t j = 0; j < dk.size(); ++j)
        s += std::norm(values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) * dp_weight[i] *
             dk_weight[j];
    return s;
  }
};

namespace detail {

/// Probability of |K|^2 lying outside the sampled rectangle, from the
/// continuum kernel (Gaussian cut in dp, Lorentzian wings in dk).
inline double kernel_truncation(double gamma, double dw, double a_half, double k_lo, double k_hi) {
  const double pi = boost::math::constants::pi<double>();
  const auto q = composite_gauss_legendre<20>(-a_half, a_half, 64);
  double inside = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double a = q.nodes[i];
    const double g2 = std::exp(-2.0 * (a / dw) * (a / dw));
    inside += q.weights[i] * g2 * (std::atan((k_hi + a) / gamma) - std::atan((k_lo + a) / gamma)) / gamma;
  }
  const double total = pi / gamma * dw * std::sqrt(pi / 2.0);
  return std::max(0.0, 1.0 - inside / total);
}

}  // namespace detail

inline BiphotonKernel build_kernel(double gamma, double delta_omega, const KernelGrid& grid = {}) {
  if (!(gamma > 0.0)) throw std::invalid_argument("build_kernel: gamma must be positive");
  if (!(delta_omega > 0.0)) throw std::invalid_argument("build_kernel: delta_omega must be positive");
  if (grid.n_atom < 2 || grid.n_photon < 2) throw std::invalid_argument("build_kernel: grid too small");
  const double pi = boost::math::constants::pi<double>();

  BiphotonKernel k;
  k.gamma = gamma;
  k.delta_omega = delta_omega;

  // Uniform midpoint grid in dp.
  const double a_half = grid.atom_half_span * delta_omega;
  const double ha = 2.0 * a_half / static_cast<double>(grid.n_atom);
  k.dp.resize(grid.n_atom);
  k.dp_weight.assign(grid.n_atom, ha);
  for (std::size_t i = 0; i < grid.n_atom; ++i) k.dp[i] = -a_half + (static_cast<double>(i) + 0.5) * ha;

  // Tangent-mapped midpoint grid in dk.
  double x_half = grid.photon_half_span;
  if (x_half <= 0.0) {
    if (!(grid.tail_target > 0.0)) throw std::invalid_argument("build_kernel: tail_target must be positive");
    x_half = 2.0 * gamma / (pi * grid.tail_target) + a_half;
  }
  const double s = a_half;
  const double theta_max = std::atan(x_half / s);
  const double ht = 2.0 * theta_max / static_cast<double>(grid.n_photon);
  k.dk.resize(grid.n_photon);
  k.dk_weight.resize(grid.n_photon);
  for (std::size_t j = 0; j < grid.n_photon; ++j) {
    const double th = -theta_max + (static_cast<double>(j) + 0.5) * ht;
    const double c = std::cos(th);
    k.dk[j] = s * std::tan(th);
    k.dk_weight[j] = s * ht / (c * c);
  }

  k.truncated_probability = detail::kernel_truncation(gamma, delta_omega, a_half, -x_half, x_half);
  if (k.truncated_probability > 1e-4)
    throw GridTooNarrow("biphoton grid truncates " + std::to_string(k.truncated_probability) +
                        " of the probability");

  k.norm = 1.0;
  k.values.resize(static_cast<Eigen::Index>(grid.n_atom), static_cast<Eigen::Index>(grid.n_photon));
  for (std::size_t i = 0; i < grid.n_atom; ++i)
    for (std::size_t j = 0; j < grid.n_photon; ++j)
      k.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = k(k.dp[i], k.dk[j]);
  k.norm = 1.0 / std::sqrt(k.discrete_norm());
  k.values *= k.norm;
  return k;
}

/// Schmidt decomposition K = sum_n sqrt(lambda_n) psi_n(dp) phi_n(dk).
/// lambdas are probabilities (squared singular values, summing to one);
/// amplitudes holds the singular values themselves.
struct SchmidtResult {
  std::vector<double> lambdas;
  std::vector<double> amplitudes;
  std::vector<std::vector<cplx>> atom_modes;    // orthonormal under dp weights
  std::vector<std::vector<cplx>> photon_modes;  // orthonormal under dk weights
  BiphotonKernel kernel;

  [[nodiscard]] double schmidt_number() const {
    double s = 0.0;
    for (const double l : lambdas) s += l * l;
    return 1.0 / s;
  }
  [[nodiscard]] std::size_t size() const { return lambdas.size(); }
};

/// n_modes = 0 keeps every mode.
inline SchmidtResult schmidt_decompose(const BiphotonKernel& kernel, std::size_t n_modes = 0) {
  const Eigen::MatrixXcd kw = kernel.weighted();
  const auto rank = static_cast<std::size_t>(std::min(kw.rows(), kw.cols()));
  if (n_modes > rank) throw std::invalid_argument("schmidt_decompose: more modes than grid rank");
  if (n_modes == 0) n_modes = rank;
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(kw, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const auto& u = svd.matrixU();
  const auto& v = svd.matrixV();

  SchmidtResult r;
  r.kernel = kernel;
  double total = 0.0;
  for (Eigen::Index n = 0; n < sv.size(); ++n) total += sv(n) * sv(n);
  for (std::size_t n = 0; n < n_modes; ++n) {
    const auto ni = static_cast<Eigen::Index>(n);
    r.amplitudes.push_back(sv(ni) / std::sqrt(total));
    r.lambdas.push_back(sv(ni) * sv(ni) / total);
    std::vector<cplx> a(kernel.dp.size()), p(kernel.dk.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      a[i] = u(static_cast<Eigen::Index>(i), ni) / std::sqrt(kernel.dp_weight[i]);
    for (std::size_t j = 0; j < p.size(); ++j)
      p[j] = std::conj(v(static_cast<Eigen::Index>(j), ni)) / std::sqrt(kernel.dk_weight[j]);
    // Fix the arbitrary phase: largest atom component real and positive.
    const auto big = std::max_element(a.begin(), a.end(), [](cplx x, cplx y) { return std::abs(x) < std::abs(y); });
    const cplx ph = std::abs(*big) > 0.0 ? std::conj(*big) / std::abs(*big) : cplx(1.0);
    for (auto& x : a) x *= ph;
    for (auto& x : p) x *= std::conj(ph);
    r.atom_modes.push_back(std::move(a));
    r.photon_modes.push_back(std::move(p));
  }
  return r;
}

/// Photon mode n continued off the grid (Nystrom extension):
///   phi_n(k) = (1/sigma_n) sum_i w_i conj(psi_n(i)) K(dp_i, k).
inline cplx photon_mode_at(const SchmidtResult& r, std::size_t n, double dk_value) {
  const auto& kr = r.kernel;
  const auto& psi = r.atom_modes.at(n);
  cplx s = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) s += kr.dp_weight[i] * std::conj(psi[i]) * kr(kr.dp[i], dk_value);
  return s / r.amplitudes.at(n);
}

enum class Species { atom, photon };

struct ModeProfile {
  Species species = Species::photon;
  std::size_t mode = 0;
  double gamma_t = 0.0;
  bool time_too_small = false;  // gamma t < 3: the long-time form is not trustworthy
  std::vector<double> x_scaled;  // x gamma / c (photon) or x gamma / v (atom)
  std::vector<double> density;   // per unit scaled coordinate
};

namespace detail {

/// Photon position amplitude at retarded time xi = x/c - t, i.e.
/// xi = (s - gamma t) / gamma for scaled position s. The Lorentzian transforms in closed form:
///   (1/sqrt(2 pi)) int dk e^{ik xi} / (k + a + i gamma)
///     = -i sqrt(2 pi) theta(-xi) e^{gamma xi} e^{-i a xi},
/// which is what gives the wavefront its sharp edge.
inline cplx photon_amplitude(const SchmidtResult& r, std::size_t n, double xi) {
  if (xi >= 0.0) return 0.0;
  const auto& kr = r.kernel;
  const auto& psi = r.atom_modes[n];
  const double root2pi = std::sqrt(2.0 * boost::math::constants::pi<double>());
  cplx s = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double a = kr.dp[i];
    s += kr.dp_weight[i] * std::conj(psi[i]) * kr.envelope(a) * std::polar(1.0, -a * xi);
  }
  return cplx(0.0, -root2pi) * std::exp(kr.gamma * xi) * kr.norm / r.amplitudes[n] * s;
}

/// Atom position amplitude with linearised recoil dispersion; u = x/v + t.
inline cplx atom_amplitude(const SchmidtResult& r, std::size_t n, double u) {
  const auto& kr = r.kernel;
  const auto& psi = r.atom_modes[n];
  cplx s = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) s += kr.dp_weight[i] * psi[i] * std::polar(1.0, -kr.dp[i] * u);
  return s / std::sqrt(2.0 * boost::math::constants::pi<double>());
}

}  // namespace detail

/// |mode|^2 in position space at time t = gamma_t / gamma. The photon moves
/// to +x at c, the recoiling atom to -x at v.
inline ModeProfile mode_position_profile(const SchmidtResult& r, std::size_t n, double gamma_t, Species species,
                                         std::span<const double> x_scaled) {
  if (n >= r.size()) throw std::invalid_argument("mode_position_profile: mode index out of range");
  const double g = r.kernel.gamma;
  ModeProfile p;
  p.species = species;
  p.mode = n;
  p.gamma_t = gamma_t;
  p.time_too_small = gamma_t < 3.0;
  p.x_scaled.assign(x_scaled.begin(), x_scaled.end());
  p.density.resize(x_scaled.size());
  for (std::size_t i = 0; i < x_scaled.size(); ++i) {
    const double y = x_scaled[i];
    const cplx amp = species == Species::photon ? detail::photon_amplitude(r, n, (y - gamma_t) / g)
                                                : detail::atom_amplitude(r, n, (y + gamma_t) / g);
    p.density[i] = std::norm(amp) / g;
  }
  return p;
}

/// Default window: the photon packet hugs its front at +gamma t, the atom
/// packet sits at -gamma t.
inline ModeProfile mode_position_profile(const SchmidtResult& r, std::size_t n, double gamma_t, Species species,
                                         std::size_t points = 2001) {
  const auto x = species == Species::photon ? linspace(gamma_t - 2.0, gamma_t + 0.5, points)
                                            : linspace(-gamma_t - 1.5, -gamma_t + 1.5, points);
  return mode_position_profile(r, n, gamma_t, species, x);
}

/// Norm of the continued photon mode in detuning space, integrated
/// directly (no Fourier transform involved). Used as the Parseval reference.
inline double photon_mode_norm(const SchmidtResult& r, std::size_t n) {
  const auto& kr = r.kernel;
  const double pi = boost::math::constants::pi<double>();
  const double s = kr.dp.back() + 0.5 * kr.dp_weight.back();
  // dk = s tan(theta) over the whole line.
  const auto q = composite_gauss_legendre<20>(-0.5 * pi, 0.5 * pi, 2048);
  double acc = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double c = std::cos(q.nodes[i]);
    acc += q.weights[i] * s / (c * c) * std::norm(photon_mode_at(r, n, s * std::tan(q.nodes[i])));
  }
  return acc;
}

enum class TailClass { gaussian, exponential, subexponential, unclassified };

inline const char* to_string(TailClass c) {
  switch (c) {
    case TailClass::gaussian: return "gaussian";
    case TailClass::exponential: return "exponential";
    case TailClass::subexponential: return "subexponential";
    default: return "unclassified";
  }
}

inline TailClass classify_beta(double beta) {
  if (beta >= 1.7 && beta <= 2.3) return TailClass::gaussian;
  if (beta >= 0.85 && beta <= 1.15) return TailClass::exponential;
  if (beta < 0.85) return TailClass::subexponential;
  return TailClass::unclassified;
}

enum class TailSide { left, right };

struct TailFit {
  TailClass kind = TailClass::unclassified;
  double beta = 0.0;
  double a = 0.0;   // log P = c - a |x - x0|^beta
  double c = 0.0;
  double x0 = 0.0;  // peak position
  double decades = 0.0;  // dynamic range of the fitted points
  std::size_t points = 0;
  double residual = 0.0;
};

/// Fits the decay on one side of the peak, from the peak down to
/// peak * 10^-fit_decades. For fixed beta the model is linear in (c, a);
/// beta itself is found by Brent minimisation of the residual.
inline TailFit classify_tail(std::span<const double> x, std::span<const double> density, TailSide side,
                             double fit_decades = 3.0) {
  if (x.size() != density.size() || x.size() < 8) throw std::invalid_argument("classify_tail: bad profile");
  const auto ip = static_cast<std::size_t>(std::max_element(density.begin(), density.end()) - density.begin());
  const double peak = density[ip];
  if (!(peak > 0.0)) throw InsufficientRange("classify_tail: profile is zero");

  double floor_seen = peak;
  std::vector<double> d, y;
  auto take = [&](std::size_t i) {
    floor_seen = std::min(floor_seen, density[i]);
    if (density[i] > peak * std::pow(10.0, -fit_decades) && i != ip) {
      d.push_back(std::abs(x[i] - x[ip]));
      y.push_back(std::log(density[i]));
    }
  };
  if (side == TailSide::left)
    for (std::size_t i = ip; i-- > 0;) take(i);
  else
    for (std::size_t i = ip + 1; i < x.size(); ++i) take(i);

  const double range = floor_seen > 0.0 ? std::log10(peak / floor_seen) : std::numeric_limits<double>::infinity();
  if (range < 3.0 || fit_decades < 3.0)
    throw InsufficientRange("classify_tail: tail spans fewer than 3 decades");
  if (d.size() < 4) throw InsufficientRange("classify_tail: too few samples in the tail");

  auto solve = [&](double beta, double& c, double& a) {
    double s1 = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double u = -std::pow(d[i], beta);
      s1 += 1.0;
      sx += u;
      sy += y[i];
      sxx += u * u;
      sxy += u * y[i];
    }
    const double det = s1 * sxx - sx * sx;
    c = (sxx * sy - sx * sxy) / det;
    a = (s1 * sxy - sx * sy) / det;
    double r = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double e = c - a * std::pow(d[i], beta) - y[i];
      r += e * e;
    }
    return r;
  };
  const auto best = boost::math::tools::brent_find_minima(
      [&](double b) {
        double c = 0, a = 0;
        return solve(b, c, a);
      },
      0.2, 4.0, 40);

  TailFit f;
  f.beta = best.first;
  f.residual = solve(f.beta, f.c, f.a);
  f.x0 = x[ip];
  f.points = d.size();
  f.decades = (*std::max_element(y.begin(), y.end()) - *std::min_element(y.begin(), y.end())) / std::log(10.0);
  f.kind = classify_beta(f.beta);
  return f;
}

inline TailFit classify_tail(const ModeProfile& p, TailSide side, double fit_decades = 3.0) {
  return classify_tail(p.x_scaled, p.density, side, fit_decades);
}

}  // namespace toalab
