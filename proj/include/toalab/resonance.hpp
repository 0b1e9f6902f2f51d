#pragma once

// Poles of the transmission amplitude in the complex momentum plane.
//
// T(k) = e^{-ikL} / M00(k) and M00 is entire in k away from k = 0, so poles
// of T are zeros of M00. Zeros are counted with the argument principle on
// rectangular contours, isolated by subdivision and polished by Newton.

#include "toalab/errors.hpp"
#include "toalab/potential.hpp"
#include "toalab/quadrature.hpp"
#include "toalab/scatter.hpp"

#include <Eigen/Core>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

namespace toalab {

/// Rectangle in the complex momentum plane.
struct KBox {
  double re_min = 0.0;
  double re_max = 1.0;
  double im_min = -1.0;
  double im_max = 0.0;

  [[nodiscard]] cplx centre() const { return {0.5 * (re_min + re_max), 0.5 * (im_min + im_max)}; }
  [[nodiscard]] bool contains(cplx k, double margin = 0.0) const {
    return k.real() > re_min - margin && k.real() < re_max + margin && k.imag() > im_min - margin &&
           k.imag() < im_max + margin;
  }
};

enum class PoleKind { resonance, bound, other };

struct ResonancePole {
  cplx k_pole;
  cplx energy;  // k^2 / 2m + exterior
  double e_r = 0.0;
  double gamma = 0.0;  // -2 Im E
  double lifetime = std::numeric_limits<double>::infinity();
  PoleKind kind = PoleKind::other;
  double residual = 0.0;  // |M00(k_pole)|
};

struct PoleSearchOptions {
  std::size_t edge_points = 256;  // per box edge, doubled until the winding is stable
  int max_doublings = 8;
  int max_depth = 24;
  int newton_max_iter = 80;
  double residual_tolerance = 1e-8;
};

namespace detail {

using ComplexFn = std::function<cplx(cplx)>;

/// Winding number of f around the box boundary (counter-clockwise).
inline int winding_number(const ComplexFn& f, const KBox& box, const PoleSearchOptions& opts) {
  const cplx corners[4] = {{box.re_min, box.im_min},
                           {box.re_max, box.im_min},
                           {box.re_max, box.im_max},
                           {box.re_min, box.im_max}};
  auto sweep = [&](std::size_t n, double& max_step, double& min_abs, double& max_abs) {
    double total = 0.0;
    max_step = 0.0;
    min_abs = std::numeric_limits<double>::infinity();
    max_abs = 0.0;
    cplx prev = f(corners[0]);
    for (int e = 0; e < 4; ++e) {
      const cplx a = corners[e];
      const cplx b = corners[(e + 1) % 4];
      for (std::size_t i = 1; i <= n; ++i) {
        const cplx z = a + (b - a) * (static_cast<double>(i) / static_cast<double>(n));
        const cplx v = f(z);
        const double d = std::arg(v / prev);
        total += d;
        max_step = std::max(max_step, std::abs(d));
        min_abs = std::min(min_abs, std::abs(v));
        max_abs = std::max(max_abs, std::abs(v));
        prev = v;
      }
    }
    return total / (2.0 * std::numbers::pi);
  };

  std::size_t n = opts.edge_points;
  double step = 0.0, lo = 0.0, hi = 0.0;
  double w_prev = sweep(n, step, lo, hi);
  for (int it = 0; it < opts.max_doublings; ++it) {
    if (!(lo > 1e-12 * hi)) throw BoxBoundaryPole("zero of M00 on or near the contour");
    n *= 2;
    double step2 = 0.0;
    const double w = sweep(n, step2, lo, hi);
    if (std::lround(w) == std::lround(w_prev) && step2 < std::numbers::pi / 4.0 &&
        std::abs(w - std::round(w)) < 1e-6)
      return static_cast<int>(std::lround(w));
    w_prev = w;
  }
  throw BoxBoundaryPole("winding number did not stabilise; enlarge or move the box");
}

inline cplx analytic_derivative(const ComplexFn& f, cplx z) {
  const double h = 1e-5 * std::max(1.0, std::abs(z));
  const cplx ih = kI * h;
  return (f(z + h) - f(z - h) - kI * (f(z + ih) - f(z - ih))) / (4.0 * h);
}

/// Newton on f(z) / prod (z - known); returns false if it stalls.
inline bool newton(const ComplexFn& f, const std::vector<cplx>& known, cplx& z, int max_iter,
                   double scale) {
  auto g = [&](cplx w) {
    cplx v = f(w);
    for (const cplx r : known) v /= (w - r);
    return v;
  };
  for (int it = 0; it < max_iter; ++it) {
    const cplx gv = g(z);
    const cplx dg = analytic_derivative(g, z);
    if (dg == 0.0) return false;
    const cplx step = gv / dg;
    z -= step;
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(z))) return true;
    if (std::abs(f(z)) < 1e-15 * scale) {
      // One more polish step for accuracy.
      const cplx d2 = analytic_derivative(g, z);
      if (d2 != 0.0) z -= g(z) / d2;
      return true;
    }
  }
  return std::abs(f(z)) < 1e-10 * scale;
}

inline void isolate(const ComplexFn& f, const KBox& box, int count, int depth,
                    const PoleSearchOptions& opts, std::vector<cplx>& roots) {
  if (count == 0) return;
  const double w = box.re_max - box.re_min;
  const double h = box.im_max - box.im_min;
  const double scale = std::max(1.0, std::abs(f(box.centre())));

  if (count == 1 || depth >= opts.max_depth || std::max(w, h) < 1e-9) {
    std::vector<cplx> found;
    for (int n = 0; n < count; ++n) {
      cplx z = box.centre();
      if (!newton(f, found, z, opts.newton_max_iter, scale)) break;
      if (!box.contains(z, 1e-9 * std::max(1.0, std::abs(z)))) break;
      found.push_back(z);
    }
    if (static_cast<int>(found.size()) == count) {
      roots.insert(roots.end(), found.begin(), found.end());
      return;
    }
    if (depth >= opts.max_depth || std::max(w, h) < 1e-9)
      throw MaxIterations("Newton refinement failed inside an isolated box");
  }

  // Split the longer side; nudge the cut if it runs through a zero.
  static constexpr double fractions[] = {0.5, 0.4619, 0.5381, 0.4237, 0.5763};
  for (const double frac : fractions) {
    KBox a = box, b = box;
    if (w >= h) {
      const double cut = box.re_min + frac * w;
      a.re_max = cut;
      b.re_min = cut;
    } else {
      const double cut = box.im_min + frac * h;
      a.im_max = cut;
      b.im_min = cut;
    }
    try {
      const int na = winding_number(f, a, opts);
      const int nb = winding_number(f, b, opts);
      if (na + nb != count) continue;
      isolate(f, a, na, depth + 1, opts, roots);
      isolate(f, b, nb, depth + 1, opts, roots);
      return;
    } catch (const BoxBoundaryPole&) {
      continue;
    }
  }
  throw BoxBoundaryPole("could not split box without cutting through a zero");
}

}  // namespace detail

/// Number of zeros of M00 inside the box (argument principle).
inline int count_poles(const PotentialSpec& spec, const KBox& box, double mass = 1.0,
                       PoleSearchOptions opts = {}) {
  if (box.re_min <= 0.0 && box.re_max >= 0.0 && box.im_min <= 0.0 && box.im_max >= 0.0)
    throw std::invalid_argument("search box must exclude k = 0");
  const detail::ComplexFn f = [&](cplx k) { return inverse_transmission_element(spec, k, mass); };
  return detail::winding_number(f, box, opts);
}

inline ResonancePole make_pole(const PotentialSpec& spec, cplx k, double mass, double residual) {
  ResonancePole p;
  p.k_pole = k;
  p.energy = k * k / (2.0 * mass) + spec.exterior;
  p.e_r = p.energy.real();
  p.gamma = -2.0 * p.energy.imag();
  p.residual = residual;
  const double tiny = 1e-10 * std::max(1.0, std::abs(k));
  if (k.imag() > 0.0 && std::abs(k.real()) < tiny) {
    p.kind = PoleKind::bound;
    p.gamma = 0.0;
  } else if (k.imag() < 0.0 && k.real() > 0.0) {
    p.kind = PoleKind::resonance;
  }
  p.lifetime = p.gamma > 0.0 ? 1.0 / p.gamma : std::numeric_limits<double>::infinity();
  return p;
}

/// All zeros of M00 in the box, sorted by Re k then Im k, at most max_poles.
inline std::vector<ResonancePole> find_poles(const PotentialSpec& spec, const KBox& box,
                                             std::size_t max_poles, double mass = 1.0,
                                             PoleSearchOptions opts = {}) {
  if (spec.kind != SpecKind::particle)
    throw std::invalid_argument("find_poles needs a particle potential");
  if (!(box.re_max > box.re_min) || !(box.im_max > box.im_min))
    throw std::invalid_argument("empty search box");
  std::vector<ResonancePole> poles;
  if (spec.empty()) return poles;
  const detail::ComplexFn f = [&](cplx k) { return inverse_transmission_element(spec, k, mass); };
  const int n = count_poles(spec, box, mass, opts);
  std::vector<cplx> roots;
  detail::isolate(f, box, n, 0, opts, roots);
  std::sort(roots.begin(), roots.end(), [](cplx a, cplx b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  for (const cplx k : roots) {
    const double res = std::abs(f(k));
    if (res > opts.residual_tolerance)
      throw MaxIterations("pole residual above tolerance after Newton refinement");
    poles.push_back(make_pole(spec, k, mass, res));
    if (poles.size() == max_poles) break;
  }
  return poles;
}

struct BreitWignerFit {
  double e_r = 0.0;
  double gamma = 0.0;
  double peak = 0.0;
  double r_squared = 0.0;
  double e_r_deviation = 0.0;      // |fit - pole| / pole Gamma
  double gamma_deviation = 0.0;    // |fit - pole| / pole Gamma
  bool poor_fit = false;           // r_squared < 0.5
  std::vector<double> energies;
  std::vector<double> transmission;  // |T|^2 samples used
};

namespace detail {

// |T|^2 = A (G^2/4) / ((E - E_r)^2 + G^2/4), with E_r kept inside the window
// and G within a factor 3 of the pole width.
struct LorentzianResidual {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  const std::vector<double>* e = nullptr;
  const std::vector<double>* y = nullptr;
  double e0 = 0.0;
  double g0 = 1.0;

  [[nodiscard]] int inputs() const { return 3; }
  [[nodiscard]] int values() const { return static_cast<int>(e->size()); }

  void unpack(const Eigen::VectorXd& x, double& er, double& g, double& a) const {
    er = e0 + 3.0 * g0 * std::tanh(x(0));
    g = g0 * std::pow(3.0, std::tanh(x(1)));
    a = std::exp(x(2));
  }

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const {
    double er, g, a;
    unpack(x, er, g, a);
    for (std::size_t i = 0; i < e->size(); ++i) {
      const double d = (*e)[i] - er;
      fvec(static_cast<Eigen::Index>(i)) = a * 0.25 * g * g / (d * d + 0.25 * g * g) - (*y)[i];
    }
    return 0;
  }
};

}  // namespace detail

/// Least-squares Lorentzian fit of |T(E)|^2 over E_r +- 3 Gamma of a pole.
inline BreitWignerFit breit_wigner_fit(const PotentialSpec& spec, const ResonancePole& pole,
                                       double mass = 1.0, std::size_t samples = 201) {
  if (!(pole.gamma > 0.0)) throw std::invalid_argument("breit_wigner_fit needs a decaying pole");

  // Isolation: no second zero of M00 within 5 Gamma.
  {
    const double e_lo = std::max(pole.e_r - 5.0 * pole.gamma, spec.exterior + 1e-6 * pole.gamma);
    const double e_hi = pole.e_r + 5.0 * pole.gamma;
    KBox box;
    box.re_min = std::sqrt(2.0 * mass * (e_lo - spec.exterior));
    box.re_max = std::sqrt(2.0 * mass * (e_hi - spec.exterior));
    box.im_min = -5.0 * std::abs(pole.k_pole.imag());
    box.im_max = 0.0;
    if (count_poles(spec, box, mass) > 1)
      throw OverlappingResonances("another pole lies within 5 Gamma of the resonance");
  }

  BreitWignerFit fit;
  const double lo = std::max(pole.e_r - 3.0 * pole.gamma, spec.exterior + 1e-9);
  fit.energies = linspace(lo, pole.e_r + 3.0 * pole.gamma, samples);
  fit.transmission.resize(samples);
  for (std::size_t i = 0; i < samples; ++i)
    fit.transmission[i] = std::norm(transmission(spec, fit.energies[i], mass));

  detail::LorentzianResidual functor;
  functor.e = &fit.energies;
  functor.y = &fit.transmission;
  functor.e0 = pole.e_r;
  functor.g0 = pole.gamma;
  Eigen::VectorXd x(3);
  x << 0.0, 0.0, std::log(std::max(*std::max_element(fit.transmission.begin(), fit.transmission.end()),
                                   1e-300));
  Eigen::NumericalDiff<detail::LorentzianResidual> diff(functor);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<detail::LorentzianResidual>, double> lm(diff);
  lm.parameters.maxfev = 4000;
  lm.minimize(x);

  functor.unpack(x, fit.e_r, fit.gamma, fit.peak);
  Eigen::VectorXd r(static_cast<Eigen::Index>(samples));
  functor(x, r);
  double mean = 0.0;
  for (const double v : fit.transmission) mean += v;
  mean /= static_cast<double>(samples);
  double ss_tot = 0.0;
  for (const double v : fit.transmission) ss_tot += (v - mean) * (v - mean);
  const double ss_res = r.squaredNorm();
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
  fit.poor_fit = fit.r_squared < 0.5;
  fit.e_r_deviation = std::abs(fit.e_r - pole.e_r) / pole.gamma;
  fit.gamma_deviation = std::abs(fit.gamma - pole.gamma) / pole.gamma;
  return fit;
}

}  // namespace toalab
