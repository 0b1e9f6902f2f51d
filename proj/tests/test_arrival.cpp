#include "oracles.hpp"
#include "toalab/arrival.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace toalab;

namespace {

// Closed-form rectangular barrier amplitude (global phase convention),
// for E below or above the top.
cplx barrier_amplitude(double v0, double width, double e, double m = 1.0) {
  const cplx k = std::sqrt(2.0 * m * e);
  const cplx q = std::sqrt(cplx(2.0 * m * (e - v0)));
  const cplx den = std::cos(q * width) - kI * (k * k + q * q) / (2.0 * k * q) * std::sin(q * width);
  return std::exp(-kI * k * width) / den;
}

// int |T psi|^2 dp by Simpson with the closed-form |T|^2.
double transmitted_weight(const WavePacket& w, double v0, double width) {
  const int n = 40000;
  const double lo = std::max(1e-10, w.p0 - 10 * w.sigma_p), hi = w.p0 + 10 * w.sigma_p;
  const double h = (hi - lo) / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double p = lo + i * h;
    const double c = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    s += c * oracle::barrier_transmission(v0, width, p * p / (2 * w.mass), w.mass) * std::norm(w.amplitude(p));
  }
  return s * h / 3.0;
}

}  // namespace

TEST(Arrival, ClassicalFreeFlight) {
  const PotentialSpec free_space;
  EXPECT_DOUBLE_EQ(classical_arrival_time(free_space, 0.0, 1.0, 10.0), 10.0);
  EXPECT_NEAR(classical_arrival_time(free_space, -2.0, 0.5, 3.0, 2.0), 2.0 * 5.0 / 0.5, 1e-12);
}

TEST(Arrival, ClassicalPiecewiseSum) {
  const auto b = rectangular_barrier(1.0, 1.0, 2.0);
  // E = 2: p = 2 outside, sqrt(2) inside.
  const double expect = 2.0 / 2.0 + 1.0 / std::sqrt(2.0) + 2.0 / 2.0;
  EXPECT_NEAR(classical_arrival_time(b, 0.0, 2.0, 5.0), expect, 1e-12);
}

TEST(Arrival, ClassicalForbiddenRegion) {
  const auto b = rectangular_barrier(1.0, 1.0, 2.0);
  EXPECT_THROW(classical_arrival_time(b, 0.0, 1.0, 5.0), TurningPointError);
}

TEST(Arrival, ClassicalSmoothPotential) {
  // Linear ramp V = -F x: t = (sqrt(p^2 + 2 m F x) - p) / F.
  const double f = 0.3;
  const double t = classical_arrival_time([&](double x) { return -f * x; }, std::span<const double>{}, 0.0, 1.0,
                                          4.0);
  EXPECT_NEAR(t, (std::sqrt(1.0 + 2.0 * f * 4.0) - 1.0) / f, 1e-10);
}

TEST(Arrival, FreeDensityMatchesQuadratureOracle) {
  const WavePacket w{1.0, 0.02, 0.0, 1.0};
  const PotentialSpec free_space;
  const double x = 10.0;
  const auto d = toa_density(w, free_space, x, auto_time_grid(w, free_space, x, 1601));
  double l1 = 0.0;
  std::vector<double> diff(d.t.size());
  for (std::size_t i = 0; i < d.t.size(); ++i)
    diff[i] = std::abs(d.density[i] - std::norm(oracle::free_arrival_amplitude(1.0, 0.02, 0.0, 1.0, x, d.t[i])));
  l1 = trapezoid(d.t, diff);
  EXPECT_LT(l1, 1e-3);
  EXPECT_NEAR(d.grid_norm, 1.0, 1e-4);
  EXPECT_NEAR(d.detection_norm, 1.0, 1e-8);
  EXPECT_NEAR(d.mean_t / 10.0, 1.0, 0.02);
}

TEST(Arrival, NarrowPacketPeaksAtClassicalTime) {
  const WavePacket w{2.0, 0.02, -3.0, 1.5};
  const PotentialSpec free_space;
  const auto d = toa_density(w, free_space, 7.0, auto_time_grid(w, free_space, 7.0, 2001));
  const double classical = 1.5 * 10.0 / 2.0;
  EXPECT_NEAR(d.t[d.argmax()] / classical, 1.0, 0.02);
}

TEST(Arrival, ShiftingLaunchPointShiftsPeak) {
  const PotentialSpec free_space;
  const WavePacket a{1.0, 0.05, 0.0, 1.0};
  WavePacket b = a;
  b.q0 = -2.0;
  TimeGrid g{0.0, 30.0, 3001};
  ArrivalOptions o;
  o.auto_widen = false;
  const auto da = toa_density(a, free_space, 8.0, g, o);
  const auto db = toa_density(b, free_space, 8.0, g, o);
  const double shift = db.t[db.argmax()] - da.t[da.argmax()];
  EXPECT_NEAR(shift, 2.0, 2.0 * g.step());
}

TEST(Arrival, ParsevalBelowBarrier) {
  const WavePacket w{1.0, 0.1, -15.0, 1.0};
  const auto b = rectangular_barrier(0.8, 1.0, 0.0);
  const auto d = toa_density(w, b, 5.0, auto_time_grid(w, b, 5.0, 2001));
  const double expected = transmitted_weight(w, 0.8, 1.0);
  EXPECT_NEAR(d.grid_norm, expected, 1e-4);
  EXPECT_NEAR(d.detection_norm, expected, 1e-6);
  for (const double v : d.density) EXPECT_GE(v, 0.0);
}

TEST(Arrival, ParsevalRandomBarriersAndPackets) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> height(0.2, 2.0), width(0.2, 2.0), p0(0.8, 2.0), rel(0.02, 0.1);
  for (int i = 0; i < 10; ++i) {
    const double v0 = height(rng), l = width(rng), p = p0(rng);
    const WavePacket w{p, rel(rng) * p, -25.0, 1.0};
    const auto b = rectangular_barrier(v0, l, 0.0);
    const double x = l + 3.0;
    const auto d = toa_density(w, b, x, auto_time_grid(w, b, x, 1501));
    EXPECT_NEAR(d.grid_norm, transmitted_weight(w, v0, l), 1e-4) << i;
  }
}

TEST(Arrival, OpaqueBarrierDetectsLittle) {
  const WavePacket w{1.0, 0.05, -20.0, 1.0};
  const auto b = rectangular_barrier(2.0, 4.0, 0.0);
  const auto d = toa_density(w, b, 6.0, auto_time_grid(w, b, 6.0));
  EXPECT_LT(d.detection_norm, 1e-5);
  EXPECT_NEAR(d.detection_norm / transmitted_weight(w, 2.0, 4.0), 1.0, 1e-4);
}

TEST(Arrival, MeanIncludesWignerDelay) {
  // Exact identity for the energy-representation first moment:
  // <t> = int |T psi|^2 (m (x - q0)/p + d arg T/dE) dp / int |T psi|^2.
  const WavePacket w{1.4, 0.05, -30.0, 1.0};
  const double v0 = 0.8, l = 1.5, x = 40.0;
  const auto b = rectangular_barrier(v0, l, 0.0);
  const auto mom = mean_arrival(w, b, x);

  const int n = 20000;
  const double lo = w.p0 - 10 * w.sigma_p, hi = w.p0 + 10 * w.sigma_p, h = (hi - lo) / n;
  double num = 0.0, den = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double p = lo + i * h, e = p * p / 2.0;
    const double c = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    const double wgt = c * std::norm(barrier_amplitude(v0, l, e) * w.amplitude(p));
    const double de = 1e-6;
    const double tau = std::arg(barrier_amplitude(v0, l, e + de) / barrier_amplitude(v0, l, e - de)) / (2 * de);
    num += wgt * ((x - w.q0) / p + tau);
    den += wgt;
  }
  EXPECT_NEAR(mom.mean_t, num / den, 1e-3 * num / den);
}

TEST(Arrival, ResonantPacketStaysUnimodal) {
  const auto b = double_barrier(4.0, 0.5, 2.0);
  const WavePacket w{1.1231, 0.03, -40.0, 1.0};
  const double x = b.right_edge() + 5.0;
  const auto d = toa_density(w, b, x, auto_time_grid(w, b, x, 1601));
  // Count strict local maxima above 1e-3 of the peak.
  const double peak = d.density[d.argmax()];
  int maxima = 0;
  for (std::size_t i = 1; i + 1 < d.density.size(); ++i)
    if (d.density[i] > d.density[i - 1] && d.density[i] >= d.density[i + 1] && d.density[i] > 1e-3 * peak)
      ++maxima;
  EXPECT_EQ(maxima, 1);
}

TEST(Arrival, DetectorMustBeBeyondPotential) {
  const auto b = rectangular_barrier(1.0, 2.0, 0.0);
  const WavePacket w{1.0, 0.05, -10.0, 1.0};
  EXPECT_THROW(toa_amplitude(w, b, 1.0, 5.0), GeometryError);
}

TEST(Arrival, ImpenetrableBarrierRaisesNoDetection) {
  const auto b = rectangular_barrier(1000.0, 10.0, 0.0);
  const WavePacket w{1.0, 0.05, -10.0, 1.0};
  EXPECT_THROW(mean_arrival(w, b, 12.0), NoDetection);
}

TEST(Arrival, RightMoverWarning) {
  const PotentialSpec free_space;
  const WavePacket slow{0.2, 0.1, -5.0, 1.0};
  EXPECT_FALSE(slow.right_mover());
  TimeGrid g{0.0, 200.0, 801};
  ArrivalOptions o;
  o.auto_widen = false;
  EXPECT_TRUE(toa_density(slow, free_space, 5.0, g, o).right_mover_warning);
}

TEST(Arrival, HartmanPlumbing) {
  const WavePacket w{1.0, 0.05, -30.0, 1.0};
  const std::vector<double> widths{0.0, 0.5, 1.0};
  const auto scan = hartman_scan(w, 1.0, widths, 0.0, 5.0);
  ASSERT_EQ(scan.size(), widths.size());
  for (std::size_t i = 0; i < widths.size(); ++i) EXPECT_EQ(scan[i].width, widths[i]);
  // Zero width: free flight to x = 5.
  const PotentialSpec free_space;
  EXPECT_NEAR(scan[0].mean_t, mean_arrival(w, free_space, 5.0).mean_t, 1e-10);
  const std::vector<double> bad{1.0, 0.5};
  EXPECT_THROW(hartman_scan(w, 1.0, bad, 0.0, 5.0), std::invalid_argument);
}

TEST(Arrival, FreeOperatorIsConjugateToHamiltonian) {
  const WavePacket w{2.0, 0.15, -3.0, 1.0};
  const auto p = linspace(0.4, 3.6, 8001);
  std::vector<cplx> psi(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) psi[i] = w.amplitude(p[i]);
  const cplx c = free_toa_commutator(p, psi, 4.0);
  EXPECT_NEAR(c.real(), 0.0, 1e-3);
  EXPECT_NEAR(c.imag(), 1.0, 1e-3);
}

TEST(Arrival, PacketNormalisation) {
  const WavePacket w{1.0, 0.1, 2.0, 1.0};
  const auto q = composite_gauss_legendre<20>(w.p0 - 12 * w.sigma_p, w.p0 + 12 * w.sigma_p, 16);
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) s += q.weights[i] * std::norm(w.amplitude(q.nodes[i]));
  EXPECT_NEAR(s, 1.0, 1e-8);
}

TEST(Arrival, UniformGridRecurrenceMatchesDirectSum) {
  const auto b = double_barrier(4.0, 0.5, 2.0);
  const WavePacket w{1.1231, 0.3, -10.0, 1.0};
  ArrivalAmplitude amp(w, b, 8.0);
  const auto a = amp.on_uniform_grid(-3.0, 0.037, 2000);
  double worst = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const cplx d = amp(-3.0 + 0.037 * static_cast<double>(k));
    worst = std::max(worst, std::abs(a[k] - d));
    scale = std::max(scale, std::abs(d));
  }
  EXPECT_LT(worst, 1e-11 * scale);
}
