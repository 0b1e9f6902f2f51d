#include "oracles.hpp"
#include "toalab/hom.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace toalab;

namespace {

const double kOmega0 = angular_frequency_from_wavelength(0.702);

SpectralAmplitude coarse_gaussian(double sigma, std::size_t n) {
  // Even point count, symmetric midpoints.
  SpectralAmplitude s;
  s.omega0 = kOmega0;
  const double h = 10.0 * sigma / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double nu = (static_cast<double>(j) - 0.5 * static_cast<double>(n - 1)) * h;
    s.nu.push_back(nu);
    s.f.push_back(std::exp(-nu * nu / (4.0 * sigma * sigma)));
  }
  s.normalize();
  return s;
}

}  // namespace

TEST(Hom, UnobstructedDipIsPerfect) {
  const double sigma = 0.06;
  const auto spec = gaussian_spectrum(kOmega0, sigma);
  const auto delays = linspace(-100.0, 100.0, 401);
  const auto tr = coincidence_scan(spec, {}, delays);
  EXPECT_LT(tr.pc[200], 1e-6);
  EXPECT_NEAR(tr.pc.front(), 0.5, 1e-3);
  EXPECT_NEAR(tr.pc.back(), 0.5, 1e-3);
  EXPECT_LT(tr.edge_deviation, 1e-3);
  for (std::size_t i = 0; i < delays.size(); ++i)
    EXPECT_NEAR(tr.pc[i], 0.5 * (1.0 - std::exp(-2.0 * sigma * sigma * delays[i] * delays[i])), 1e-10);
  ASSERT_TRUE(tr.has_stats);
  EXPECT_NEAR(tr.stats.delay_min, 0.0, 0.5 * (delays[1] - delays[0]));
  EXPECT_NEAR(tr.stats.depth, 0.5, 1e-6);
}

TEST(Hom, MatchesBeamSplitterEnumeration) {
  const auto spec = coarse_gaussian(0.06, 64);
  const auto stack = quarter_wave_stack(2.25, 1.45, 5, kOmega0);
  const auto arm = stack_arm(stack);
  for (const bool with_stack : {false, true}) {
    const ArmTransfer h = with_stack ? arm : ArmTransfer{};
    const std::vector<double> delays{-30.0, -7.5, -2.1, 0.0, 1.3, 9.0, 25.0};
    const auto tr = coincidence_scan(spec, h, delays, 0);
    for (std::size_t i = 0; i < delays.size(); ++i)
      EXPECT_NEAR(tr.pc[i], oracle::hom_brute_force(spec.nu, spec.f, h, kOmega0, delays[i]), 1e-6)
          << with_stack << " " << delays[i];
  }
}

TEST(Hom, CalibratedBandwidthGivesTwentyFemtoseconds) {
  const double sigma = calibrate_gaussian_bandwidth(20.0);
  EXPECT_NEAR(sigma, std::sqrt(2.0 * std::log(2.0)) / 20.0, 1e-3 * sigma);
  const auto tr = coincidence_scan(gaussian_spectrum(kOmega0, sigma), {}, linspace(-60.0, 60.0, 1201));
  EXPECT_NEAR(tr.stats.half_depth_width, 20.0, 1.0);
}

TEST(Hom, BandGapStackShiftsDipToNegativeDelay) {
  const double sigma = calibrate_gaussian_bandwidth(20.0);
  const auto stack = quarter_wave_stack(2.25, 1.45, 5, kOmega0);
  const auto resp = stack_transfer(stack, kOmega0);
  const auto tr = coincidence_scan(gaussian_spectrum(kOmega0, sigma), stack_arm(stack), linspace(-60.0, 60.0, 1201));
  ASSERT_TRUE(tr.has_stats);
  const double expected = resp.group_delay - resp.length;
  EXPECT_LT(tr.stats.delay_min, 0.0);
  EXPECT_NEAR(tr.stats.delay_min / expected, 1.0, 0.05);
  EXPECT_NEAR(tr.stats.delta_min, kLightSpeedUmPerFs * tr.stats.delay_min, 1e-15);
}

TEST(Hom, GroupVelocity) {
  const auto vac = PotentialSpec::dielectric({{3.0, 1.0}});
  EXPECT_NEAR(effective_group_velocity(vac, kOmega0), 1.0, 1e-8);
  const auto stack = quarter_wave_stack(2.25, 1.45, 5, kOmega0);
  EXPECT_GT(effective_group_velocity(stack, kOmega0), 1.0);
  // At the band edge the group delay is long: slow light.
  double slowest = 1e9;
  for (double w = 0.6 * kOmega0; w < 0.8 * kOmega0; w += 0.0005 * kOmega0)
    slowest = std::min(slowest, effective_group_velocity(stack, w));
  EXPECT_LT(slowest, 1.0);
}

TEST(Hom, DipStatsGuards) {
  const auto d = linspace(-10.0, 10.0, 21);
  std::vector<double> rising(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) rising[i] = 0.3 + 0.01 * static_cast<double>(i);
  EXPECT_THROW(dip_stats(d, rising), EdgeMinimum);
  std::vector<double> faint(d.size(), 0.5);
  faint[10] = 0.499;
  EXPECT_TRUE(dip_stats(d, faint).shallow);
}

TEST(Hom, DipPushedOutOfScanIsReported) {
  const auto spec = gaussian_spectrum(kOmega0, 0.06);
  const ArmTransfer late = [](double w) { return std::polar(1.0, 500.0 * w); };
  const auto tr = coincidence_scan(spec, late, linspace(-50.0, 50.0, 101));
  // Flat trace: either no interior minimum or a shallow one.
  EXPECT_TRUE(!tr.has_stats || tr.stats.shallow);
  EXPECT_LT(tr.edge_deviation, 1e-3);
}

TEST(Hom, CoarseGridIsRefinedOrRejected) {
  const ArmTransfer fast = [](double w) { return std::polar(1.0, 200.0 * w); };
  const auto g = gaussian_spectrum(kOmega0, 0.06, 65);
  const auto tr = coincidence_scan(g, fast, std::vector<double>{200.0, 0.0});
  EXPECT_GT(tr.spectral_points, 65u);
  // A 200 fs phase slope in the signal arm moves the dip to +200 fs.
  EXPECT_LT(tr.pc[0], 1e-6);
  EXPECT_THROW(coincidence_scan(coarse_gaussian(0.06, 64), fast, std::vector<double>{0.0}), GridTooCoarse);
}

TEST(Hom, CoincidenceStaysInUnitInterval) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto spec = gaussian_spectrum(kOmega0, 0.05, 257);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = u(rng), b = u(rng), c = 0.5 + 0.5 * u(rng);
    const ArmTransfer h = [=](double w) {
      const double x = w - kOmega0;
      return c * std::polar(1.0, 20.0 * a * x + 400.0 * b * x * x);
    };
    const auto tr = coincidence_scan(spec, h, linspace(-80.0, 80.0, 161));
    for (const double p : tr.pc) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
    }
  }
}

TEST(Hom, RejectsUnnormalisedOrAsymmetricSpectra) {
  auto s = gaussian_spectrum(kOmega0, 0.05, 33);
  s.f[16] *= 2.0;
  EXPECT_THROW(coincidence_scan(s, {}, std::vector<double>{0.0}), std::invalid_argument);
  auto t = gaussian_spectrum(kOmega0, 0.05, 33);
  t.nu[0] -= 0.01;
  EXPECT_THROW(coincidence_scan(t, {}, std::vector<double>{0.0}), std::invalid_argument);
}
