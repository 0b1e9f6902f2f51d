#include "oracles.hpp"
#include "toalab/resonance.hpp"

#include <gtest/gtest.h>

using namespace toalab;

TEST(Resonance, SquareWellBoundStates) {
  const auto well = PotentialSpec::particle({{2.0, -5.0}});
  const auto poles = find_poles(well, KBox{-0.5, 0.5, 0.02, 3.3}, 10);
  const auto levels = oracle::square_well_levels(5.0, 2.0);
  ASSERT_EQ(poles.size(), levels.size());
  std::vector<double> found;
  for (const auto& p : poles) {
    EXPECT_EQ(p.kind, PoleKind::bound);
    EXPECT_NEAR(p.k_pole.real(), 0.0, 1e-10);
    found.push_back(p.e_r);
  }
  std::sort(found.begin(), found.end());
  for (std::size_t i = 0; i < levels.size(); ++i) EXPECT_NEAR(found[i], levels[i], 1e-9 * (1 + std::abs(levels[i])));
}

TEST(Resonance, DoubleBarrierLowestPoleMatchesTransmissionPeak) {
  const auto b = double_barrier(4.0, 0.5, 2.0);
  const auto poles = find_poles(b, KBox{0.5, 3.0, -0.5, -1e-3}, 10);
  ASSERT_GE(poles.size(), 2u);
  const auto& p = poles.front();
  EXPECT_EQ(p.kind, PoleKind::resonance);
  EXPECT_LT(p.residual, 1e-8);
  EXPECT_GT(p.gamma, 0.0);
  EXPECT_NEAR(p.lifetime * p.gamma, 1.0, 1e-14);

  // Dense |T|^2 scan for the lowest peak.
  double prev2 = 0.0, prev1 = 0.0, e_peak = 0.0;
  for (int i = 1; i < 400000; ++i) {
    const double e = 4.0 * i / 400000.0;
    const double t2 = std::norm(transmission(b, e));
    if (i > 2 && prev1 > prev2 && prev1 > t2) {
      e_peak = e - 1e-5;
      break;
    }
    prev2 = prev1;
    prev1 = t2;
  }
  EXPECT_LT(std::abs(p.e_r - e_peak), p.gamma / 10.0);
}

TEST(Resonance, EmptySpecHasNoPoles) {
  const PotentialSpec free_space;
  EXPECT_TRUE(find_poles(free_space, KBox{0.1, 5.0, -3.0, -0.01}, 10).empty());
  EXPECT_EQ(count_poles(free_space, KBox{0.1, 5.0, -3.0, -0.01}), 0);
}

TEST(Resonance, CountMatchesFoundPolesAcrossSubdivision) {
  const auto b = double_barrier(1.0, 0.2, 6.0);
  const KBox whole{0.3, 3.0, -1.0, -1e-3};
  const int n = count_poles(b, whole);
  EXPECT_EQ(static_cast<int>(find_poles(b, whole, 100).size()), n);
  const double cuts[] = {0.87, 1.61, 2.33};
  double lo = whole.re_min;
  int sum = 0;
  for (double c : {cuts[0], cuts[1], cuts[2], whole.re_max}) {
    const KBox part{lo, c, whole.im_min, whole.im_max};
    const int k = count_poles(b, part);
    EXPECT_EQ(static_cast<int>(find_poles(b, part, 100).size()), k);
    sum += k;
    lo = c;
  }
  EXPECT_EQ(sum, n);
}

TEST(Resonance, StableUnderContourRefinement) {
  const auto b = double_barrier(4.0, 0.5, 2.0);
  const KBox box{0.5, 3.0, -0.5, -1e-3};
  PoleSearchOptions fine;
  fine.edge_points = 1024;
  const auto a = find_poles(b, box, 10);
  const auto c = find_poles(b, box, 10, 1.0, fine);
  ASSERT_EQ(a.size(), c.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LT(std::abs(a[i].k_pole - c[i].k_pole), 1e-8 * std::abs(a[i].k_pole));
}

TEST(Resonance, ContourThroughPoleIsRejected) {
  const auto b = double_barrier(4.0, 0.5, 2.0);
  const auto p = find_poles(b, KBox{0.5, 1.5, -0.5, -1e-3}, 1).front();
  const KBox bad{p.k_pole.real(), 1.5, -0.5, -1e-3};
  EXPECT_THROW(count_poles(b, bad), BoxBoundaryPole);
}

TEST(Resonance, BoxAroundOriginIsRejected) {
  const auto b = double_barrier(4.0, 0.5, 2.0);
  EXPECT_THROW(count_poles(b, KBox{-1.0, 1.0, -1.0, 1.0}), std::invalid_argument);
}

TEST(Resonance, BreitWignerWidthAgreesWithPole) {
  const auto b = double_barrier(4.0, 0.5, 2.0);
  const auto p = find_poles(b, KBox{0.5, 1.5, -0.5, -1e-3}, 1).front();
  const auto fit = breit_wigner_fit(b, p);
  EXPECT_LT(fit.gamma_deviation, 0.10);
  EXPECT_LT(fit.e_r_deviation, 0.10);
  EXPECT_FALSE(fit.poor_fit);
}

TEST(Resonance, OverlappingResonancesAreRefused) {
  // Low, thin walls around a long cavity: widths exceed level spacing.
  const auto b = double_barrier(0.5, 0.2, 10.0);
  const auto poles = find_poles(b, KBox{0.3, 3.0, -1.5, -1e-3}, 20);
  ASSERT_GE(poles.size(), 4u);
  EXPECT_THROW(breit_wigner_fit(b, poles[3]), OverlappingResonances);
}

TEST(Resonance, SmoothBackgroundGivesPoorFit) {
  const auto b = rectangular_barrier(1.0, 1.0);
  const auto fake = make_pole(b, std::sqrt(cplx(1.0, -0.05)), 1.0, 0.0);
  const auto fit = breit_wigner_fit(b, fake);
  EXPECT_TRUE(fit.poor_fit);
  EXPECT_LT(fit.r_squared, 0.5);
}
