#pragma once

#include <boost/math/quadrature/gauss.hpp>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace toalab {

/// Nodes and weights of a quadrature rule on a fixed interval.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  [[nodiscard]] std::size_t size() const { return nodes.size(); }
};

/// Composite Gauss-Legendre rule with `panels` equal panels of Order points
/// each on [a, b].
template <unsigned Order = 20>
QuadratureRule composite_gauss_legendre(double a, double b, std::size_t panels) {
  if (panels == 0) throw std::invalid_argument("composite_gauss_legendre: zero panels");
  if (!(b > a)) throw std::invalid_argument("composite_gauss_legendre: empty interval");
  using rule = boost::math::quadrature::gauss<double, Order>;
  const auto& abs = rule::abscissa();
  const auto& wts = rule::weights();

  QuadratureRule q;
  q.nodes.reserve(panels * Order);
  q.weights.reserve(panels * Order);
  const double h = (b - a) / static_cast<double>(panels);
  for (std::size_t k = 0; k < panels; ++k) {
    const double mid = a + (static_cast<double>(k) + 0.5) * h;
    const double half = 0.5 * h;
    // Boost stores the non-negative half of the symmetric rule; for odd
    // orders abscissa[0] == 0 and must be counted once.
    for (std::size_t i = 0; i < abs.size(); ++i) {
      if (abs[i] == 0.0) {
        q.nodes.push_back(mid);
        q.weights.push_back(half * wts[i]);
        continue;
      }
      q.nodes.push_back(mid - half * abs[i]);
      q.weights.push_back(half * wts[i]);
      q.nodes.push_back(mid + half * abs[i]);
      q.weights.push_back(half * wts[i]);
    }
  }
  return q;
}

/// Trapezoid rule over samples y on abscissae x (any spacing).
inline double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("trapezoid: size mismatch");
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

/// Evenly spaced samples including both end points.
inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = a;
    return v;
  }
  const double h = (b - a) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) v[i] = a + h * static_cast<double>(i);
  v.back() = b;
  return v;
}

}  // namespace toalab
