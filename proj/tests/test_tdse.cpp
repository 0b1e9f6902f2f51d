#include "oracles.hpp"
#include "toalab/tdse.hpp"

#include <gtest/gtest.h>

using namespace toalab;

namespace {

double mean_position(const GridState& s) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.psi.size(); ++i) {
    num += s.domain.x(i) * std::norm(s.psi[i]);
    den += std::norm(s.psi[i]);
  }
  return num / den;
}

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

TEST(Tdse, FreePacketFollowsEhrenfest) {
  const WavePacket w{2.0, 0.5, -10.0, 1.0};
  const Domain dom{-30.0, 40.0, 0.02};
  EvolveOptions o;
  o.dt = 0.005;
  o.n_steps = 2000;
  o.snapshot_every = 500;
  const auto tr = evolve(PotentialSpec{}, w, dom, o);
  ASSERT_EQ(tr.snapshots.size(), 5u);
  for (const auto& s : tr.snapshots) {
    if (s.t == 0.0) continue;
    const double expected = w.q0 + w.p0 * s.t;
    EXPECT_LT(std::abs(mean_position(s) - expected), 1e-3 * std::abs(expected - w.q0)) << s.t;
  }
}

TEST(Tdse, NormConservedWithoutAbsorber) {
  const WavePacket w{1.5, 0.3, -5.0, 1.0};
  const Domain dom{-25.0, 25.0, 0.02};
  EvolveOptions o;
  o.dt = 0.01;
  o.n_steps = 1000;
  const auto tr = evolve(rectangular_barrier(1.0, 1.0), w, dom, o);
  double worst_step = 0.0;
  for (std::size_t i = 1; i < tr.total_norm.size(); ++i)
    worst_step = std::max(worst_step, std::abs(tr.total_norm[i] - tr.total_norm[i - 1]));
  EXPECT_LT(worst_step, 1e-10);
  EXPECT_LT(std::abs(tr.total_norm.back() - tr.total_norm.front()), 1e-8);
}

TEST(Tdse, WholeDomainRegionIsOneAndEmptyRegionIsZero) {
  const WavePacket w{1.0, 0.4, 0.0, 1.0};
  const Domain dom{-20.0, 20.0, 0.02};
  EvolveOptions o;
  o.dt = 0.01;
  o.n_steps = 200;
  const Region all{dom.x_min, dom.x_max}, none{3.0, 3.0};
  o.regions = {all, none};
  const auto tr = evolve(PotentialSpec{}, w, dom, o);
  for (const double v : trapped_norm(tr, all)) EXPECT_NEAR(v, 1.0, 1e-9);
  for (const double v : trapped_norm(tr, none)) EXPECT_EQ(v, 0.0);
}

TEST(Tdse, BarrierTransmissionMatchesStationaryPrediction) {
  const WavePacket w{1.5, 0.15, -25.0, 1.0};
  const Domain dom{-100.0, 100.0, 0.025};
  EvolveOptions o;
  o.dt = 0.01;
  o.n_steps = 4000;
  const double det = 8.0;
  o.detectors = {det};
  o.regions = {Region{1.0, dom.x_max}};
  const auto tr = evolve(rectangular_barrier(1.0, 1.0, 0.0), w, dom, o);
  const double expected = transmitted_weight(w, 1.0, 1.0);
  const double transmitted = trapped_norm(tr, o.regions[0]).back();
  EXPECT_NEAR(transmitted / expected, 1.0, 0.01);
  // Continuity: the integrated flux past the detector carries the same norm.
  const double through = trapezoid(tr.t, flux_at(tr, det));
  EXPECT_NEAR(through / transmitted, 1.0, 0.01);
}

TEST(Tdse, FreeFluxPeaksAtClassicalTime) {
  const WavePacket w{2.0, 0.04, -20.0, 1.0};
  const Domain dom{-150.0, 150.0, 0.02};
  EvolveOptions o;
  o.dt = 0.01;
  o.n_steps = 1500;
  o.detectors = {0.0};
  o.absorber.enabled = true;
  const auto tr = evolve(PotentialSpec{}, w, dom, o);
  const auto& j = flux_at(tr, 0.0);
  const auto i = static_cast<std::size_t>(std::max_element(j.begin(), j.end()) - j.begin());
  EXPECT_NEAR(tr.t[i] / 10.0, 1.0, 0.02);
}

TEST(Tdse, OpaqueBarrierBlocksFlux) {
  // Launched far enough out that no initial tail overlaps the barrier.
  const WavePacket w{1.0, 0.1, -45.0, 1.0};
  const Domain dom{-120.0, 40.0, 0.02};
  EvolveOptions o;
  o.dt = 0.01;
  o.n_steps = 5000;
  o.detectors = {15.0};
  o.absorber.enabled = true;
  const auto b = rectangular_barrier(5.0, 10.0, 0.0);
  ASSERT_LT(std::abs(transmission(b, 0.5)), 1e-12);
  const auto tr = evolve(b, w, dom, o);
  double peak = 0.0;
  for (const double v : flux_at(tr, 15.0)) peak = std::max(peak, std::abs(v));
  EXPECT_LT(peak, 1e-10);
}

TEST(Tdse, SecondOrderInTime) {
  const WavePacket w{1.5, 0.4, -6.0, 1.0};
  const Domain dom{-20.0, 20.0, 0.02};
  const auto spec = rectangular_barrier(1.0, 1.0);
  auto final_state = [&](double dt) {
    EvolveOptions o;
    o.dt = dt;
    o.n_steps = static_cast<std::size_t>(std::llround(4.0 / dt));
    return evolve(spec, w, dom, o).final_state.psi;
  };
  const auto ref = final_state(0.0025);
  auto err = [&](const std::vector<cplx>& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a[i] - ref[i]);
    return std::sqrt(s * dom.dx);
  };
  // Richardson-corrected: e(dt) - e(ref) ~ C dt^2 (1 - (ref/dt)^2).
  const double e1 = err(final_state(0.04));
  const double e2 = err(final_state(0.02));
  const double ratio = e1 / e2 * (1.0 - std::pow(0.0025 / 0.02, 2)) / (1.0 - std::pow(0.0025 / 0.04, 2));
  EXPECT_NEAR(ratio, 4.0, 0.4);
}

TEST(Tdse, GuardsAgainstBadSetups) {
  const WavePacket w{1.0, 0.4, 0.0, 1.0};
  EvolveOptions o;
  o.dt = 0.01;
  o.n_steps = 10;
  // Packet spills over the edges.
  EXPECT_THROW(evolve(PotentialSpec{}, w, Domain{-3.0, 3.0, 0.02}, o), DomainTooSmall);
  // Potential sticks out of the domain.
  EXPECT_THROW(evolve(rectangular_barrier(1.0, 50.0), w, Domain{-20.0, 20.0, 0.02}, o), DomainTooSmall);
  // dt max|V| too large.
  EXPECT_THROW(evolve(rectangular_barrier(20.0, 1.0), w, Domain{-20.0, 20.0, 0.02}, o), std::invalid_argument);
  // Coarse grid for the momentum content.
  EXPECT_THROW(evolve(PotentialSpec{}, w, Domain{-20.0, 20.0, 0.3}, o), std::invalid_argument);
  // Wave reaches the wall without an absorber.
  o.n_steps = 3000;
  EXPECT_THROW(evolve(PotentialSpec{}, WavePacket{3.0, 0.4, 0.0, 1.0}, Domain{-20.0, 20.0, 0.02}, o),
               DomainTooSmall);
  // Unregistered detector.
  o.n_steps = 5;
  const auto tr = evolve(PotentialSpec{}, w, Domain{-20.0, 20.0, 0.02}, o);
  EXPECT_THROW(flux_at(tr, 1.0), std::invalid_argument);
}

TEST(Tdse, AbsorberRemovesOutgoingWave) {
  const WavePacket w{2.0, 0.3, 0.0, 1.0};
  const Domain dom{-60.0, 60.0, 0.02};
  EvolveOptions o;
  o.dt = 0.01;
  o.n_steps = 8000;
  o.absorber.enabled = true;
  const auto tr = evolve(PotentialSpec{}, w, dom, o);
  EXPECT_LT(tr.total_norm.back(), 1e-4);
}

TEST(Tdse, ExponentialFitRecoversRate) {
  std::vector<double> t, y;
  for (int i = 0; i < 200; ++i) {
    t.push_back(0.5 * i);
    y.push_back(3.0 * std::exp(-0.07 * 0.5 * i));
  }
  const auto f = fit_exponential_decay(t, y, 10.0, 90.0);
  EXPECT_NEAR(f.rate, 0.07, 1e-12);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-10);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
}
