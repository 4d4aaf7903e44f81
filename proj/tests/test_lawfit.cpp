#include "sgdperf/lawfit.hpp"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

using namespace sgdperf;

namespace {

const std::vector<double> kBatches{1, 2, 4, 8, 16, 32, 64, 128, 256, 512};

std::vector<LawPoint> exact_points(double n_inf, double alpha) {
  std::vector<LawPoint> out;
  for (double m : kBatches) out.push_back({m, n_inf + alpha / m});
  return out;
}

}  // namespace

TEST(FitInverseLaw, RecoversExactLaw) {
  const auto pts = exact_points(100, 1000);
  const LawParams law = fit_inverse_law(pts, 0.01);
  EXPECT_NEAR(law.n_inf, 100.0, 1e-9);
  EXPECT_NEAR(law.alpha, 1000.0, 1e-9);
  EXPECT_NEAR(law.r_squared, 1.0, 1e-12);
  EXPECT_EQ(law.epsilon, 0.01);
  EXPECT_TRUE(law.flags.empty());
}

TEST(FitInverseLaw, NoisyReadingsWithinFivePercent) {
  CounterRng rng(77);
  auto pts = exact_points(100, 1000);
  for (auto& p : pts) p.n_update *= 1.0 + 0.01 * rng.normal();
  const LawParams law = fit_inverse_law(pts, 0.01);
  EXPECT_NEAR(law.n_inf / 100.0, 1.0, 0.05);
  EXPECT_NEAR(law.alpha / 1000.0, 1.0, 0.05);
  EXPECT_GT(law.r_squared, 0.99);
}

TEST(FitInverseLaw, FlatReadingsGiveZeroAlpha) {
  std::vector<LawPoint> pts;
  for (double m : kBatches) pts.push_back({m, 250.0});
  const LawParams law = fit_inverse_law(pts, 0.01);
  EXPECT_NEAR(law.alpha, 0.0, 1e-9);
  EXPECT_NEAR(law.n_inf, 250.0, 1e-9);
  EXPECT_EQ(law.r_squared, 1.0);
}

TEST(FitInverseLaw, NegativeSlopeIsClampedAndFlagged) {
  std::vector<LawPoint> pts{{1, 10}, {2, 20}, {4, 30}};
  const LawParams law = fit_inverse_law(pts, 0.1);
  EXPECT_EQ(law.alpha, 0.0);
  EXPECT_DOUBLE_EQ(law.n_inf, 20.0);
  EXPECT_TRUE(law.has_flag("alpha-clamped"));
  EXPECT_LE(law.r_squared, 0.0 + 1e-12);
}

TEST(FitInverseLaw, NegativeInterceptIsFlagged) {
  const auto pts = exact_points(-5, 1000);
  const LawParams law = fit_inverse_law(pts, 0.1);
  EXPECT_NEAR(law.n_inf, -5.0, 1e-9);
  EXPECT_TRUE(law.has_flag("negative-n-inf"));
}

TEST(FitInverseLaw, InputErrors) {
  std::vector<LawPoint> one{{4, 10}};
  EXPECT_THROW(fit_inverse_law(one, 0.1), InputError);
  std::vector<LawPoint> same{{4, 10}, {4, 12}, {4, 11}};
  EXPECT_THROW(fit_inverse_law(same, 0.1), RankDeficiencyError);
  std::vector<LawPoint> zero{{0, 10}, {4, 12}};
  EXPECT_THROW(fit_inverse_law(zero, 0.1), InputError);
  const auto pts = exact_points(1, 1);
  const std::vector<double> short_w{1.0, 2.0};
  EXPECT_THROW(fit_inverse_law(pts, 0.1, short_w), InputError);
  std::vector<double> bad_w(pts.size(), 1.0);
  bad_w[3] = 0.0;
  EXPECT_THROW(fit_inverse_law(pts, 0.1, bad_w), InputError);
}

TEST(FitInverseLaw, WeightsDownplayOutliers) {
  auto pts = exact_points(100, 1000);
  pts[5].n_update += 500.0;
  std::vector<double> w(pts.size(), 1.0);
  w[5] = 1e-12;
  const LawParams law = fit_inverse_law(pts, 0.01, w);
  EXPECT_NEAR(law.n_inf, 100.0, 1e-6);
  EXPECT_NEAR(law.alpha, 1000.0, 1e-6);
}

TEST(FitInverseLaw, ScaleEquivariant) {
  CounterRng rng(3);
  auto pts = exact_points(40, 300);
  for (auto& p : pts) p.n_update += 3.0 * rng.normal();
  const LawParams base = fit_inverse_law(pts, 0.01);
  for (auto& p : pts) p.n_update *= 7.5;
  const LawParams scaled = fit_inverse_law(pts, 0.01);
  EXPECT_NEAR(scaled.n_inf, 7.5 * base.n_inf, 1e-9 * std::abs(scaled.n_inf));
  EXPECT_NEAR(scaled.alpha, 7.5 * base.alpha, 1e-9 * std::abs(scaled.alpha));
  EXPECT_NEAR(scaled.r_squared, base.r_squared, 1e-12);
}

TEST(FitInverseLaw, ResidualsOrthogonalToRegressors) {
  CounterRng rng(11);
  auto pts = exact_points(40, 300);
  for (auto& p : pts) p.n_update += 5.0 * rng.normal();
  const LawParams law = fit_inverse_law(pts, 0.01);
  ASSERT_TRUE(law.flags.empty());
  double sum = 0.0, dot = 0.0;
  for (const auto& p : pts) {
    const double r = p.n_update - law.predict(p.minibatch);
    sum += r;
    dot += r / p.minibatch;
  }
  EXPECT_NEAR(sum, 0.0, 1e-9);
  EXPECT_NEAR(dot, 0.0, 1e-9);
}

TEST(FitInverseLaw, PredictionNonIncreasingInBatch) {
  CounterRng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<LawPoint> pts;
    for (double m : kBatches) pts.push_back({m, 200.0 * rng.uniform()});
    const LawParams law = fit_inverse_law(pts, 0.01);
    EXPECT_GE(law.alpha, 0.0);
    for (std::size_t i = 1; i < kBatches.size(); ++i)
      EXPECT_LE(law.predict(kBatches[i]), law.predict(kBatches[i - 1]));
  }
}

TEST(TwoPointEstimate, WorkedExample) {
  const LawParams law = two_point_estimate(1, 1100, 10, 200);
  EXPECT_NEAR(law.n_inf, 100.0, 1e-9);
  EXPECT_NEAR(law.alpha, 1000.0, 1e-9);
  EXPECT_EQ(law.r_squared, 1.0);
}

TEST(TwoPointEstimate, EqualReadings) {
  const LawParams law = two_point_estimate(2, 50, 8, 50);
  EXPECT_EQ(law.alpha, 0.0);
  EXPECT_EQ(law.n_inf, 50.0);
  EXPECT_TRUE(law.flags.empty());
}

TEST(TwoPointEstimate, AgreesWithLeastSquares) {
  CounterRng rng(21);
  for (int t = 0; t < 100; ++t) {
    const double m1 = 1 + rng.below(100), m2 = m1 + 1 + rng.below(100);
    const double n2 = 10 + 100 * rng.uniform();
    const double n1 = n2 + 100 * rng.uniform();
    const LawParams a = two_point_estimate(m1, n1, m2, n2);
    const std::vector<LawPoint> pts{{m1, n1}, {m2, n2}};
    const LawParams b = fit_inverse_law(pts, 0.0);
    EXPECT_NEAR(a.n_inf, b.n_inf, 1e-9 * std::max(1.0, std::abs(a.n_inf)));
    EXPECT_NEAR(a.alpha, b.alpha, 1e-9 * std::max(1.0, a.alpha));
  }
}

TEST(TwoPointEstimate, Errors) {
  EXPECT_THROW(two_point_estimate(4, 10, 4, 12), InputError);
  EXPECT_THROW(two_point_estimate(0, 10, 4, 12), InputError);
}

TEST(AggregateRuns, GroupsByBatchAndDropsUnconverged) {
  std::vector<RunRecord> recs;
  auto add = [&](std::size_t m, std::optional<std::uint64_t> n) {
    RunRecord r;
    r.minibatch = m;
    r.n_update = n;
    recs.push_back(r);
  };
  add(4, 10);
  add(1, 30);
  add(4, 14);
  add(1, std::nullopt);
  add(1, 34);
  const AggregatedRuns agg = aggregate_runs(recs);
  ASSERT_EQ(agg.points.size(), 2u);
  EXPECT_EQ(agg.points[0].minibatch, 1.0);
  EXPECT_EQ(agg.points[0].n_update, 32.0);
  EXPECT_EQ(agg.points[1].n_update, 12.0);
  EXPECT_EQ(agg.variances[1], 8.0);
  EXPECT_EQ(agg.counts[0], 2u);
  EXPECT_EQ(agg.dropped_unconverged, 1u);
}

TEST(EpsilonDependence, InverseEpsilonGivesUnitSlope) {
  std::vector<LawParams> fits;
  for (double eps : {0.01, 0.1, 0.02, 0.05}) {
    LawParams f;
    f.epsilon = eps;
    f.n_inf = 1.0 / eps;
    f.alpha = 3.0 / (eps * eps);
    fits.push_back(f);
  }
  const EpsilonLaw law = fit_epsilon_dependence(fits);
  EXPECT_NEAR(law.slope_ninf, -1.0, 1e-12);
  EXPECT_NEAR(law.c_ninf, 1.0, 1e-12);
  EXPECT_NEAR(law.slope_alpha, -2.0, 1e-12);
  EXPECT_NEAR(law.c_alpha, 3.0, 1e-11);
  EXPECT_EQ(law.epsilon_grid, (std::vector<double>{0.1, 0.05, 0.02, 0.01}));
  EXPECT_TRUE(law.excluded.empty());
}

TEST(EpsilonDependence, ConstantGivesZeroSlope) {
  std::vector<LawParams> fits;
  for (double eps : {0.1, 0.05, 0.02}) {
    LawParams f;
    f.epsilon = eps;
    f.n_inf = 42.0;
    f.alpha = 7.0;
    fits.push_back(f);
  }
  const EpsilonLaw law = fit_epsilon_dependence(fits);
  EXPECT_NEAR(law.slope_ninf, 0.0, 1e-12);
  EXPECT_NEAR(law.c_ninf, 42.0, 1e-10);
}

TEST(EpsilonDependence, ExcludesUnusableFits) {
  std::vector<LawParams> fits;
  for (double eps : {0.2, 0.1, 0.05, 0.02, 0.01}) {
    LawParams f;
    f.epsilon = eps;
    f.n_inf = 1.0 / eps;
    f.alpha = 1.0 / eps;
    fits.push_back(f);
  }
  fits[0].r_squared = 0.3;
  fits[1].alpha = 0.0;
  const EpsilonLaw law = fit_epsilon_dependence(fits);
  ASSERT_EQ(law.excluded.size(), 2u);
  EXPECT_EQ(law.excluded[0].epsilon, 0.2);
  EXPECT_EQ(law.excluded[1].reason, "nonpositive alpha");
  EXPECT_EQ(law.epsilon_grid.size(), 3u);
  EXPECT_NEAR(law.slope_ninf, -1.0, 1e-12);

  fits[2].n_inf = -1.0;
  EXPECT_THROW(fit_epsilon_dependence(fits), InputError);
}

TEST(EpsilonDependence, GridErrors) {
  std::vector<LawParams> fits(2);
  fits[0].epsilon = 0.1;
  fits[1].epsilon = 0.2;
  EXPECT_THROW(fit_epsilon_dependence(fits), InputError);
  fits.push_back(fits[0]);
  for (auto& f : fits) f.n_inf = f.alpha = 1.0;
  EXPECT_THROW(fit_epsilon_dependence(fits), InputError);
}

TEST(EpsilonDependence, SimulatedThresholdSlopeNearInverse) {
  ProblemOptions o;
  o.kind = ProblemKind::noisy_quadratic;
  o.dimension = 10;
  o.condition = 100.0;
  o.noise_scale = 0.12;
  const Problem problem(o);
  SgdConfig tmpl;
  tmpl.eta = 0.1;
  tmpl.radius = 2.0;
  const std::vector<std::size_t> ms{1, 2, 4, 8, 16, 32, 64, 128};
  const auto seeds = seed_range(0, 40);
  std::vector<LawParams> fits;
  for (double eps : {0.1, 0.05, 0.02, 0.01}) {
    tmpl.epsilon = eps;
    const auto rows = sweep(problem, tmpl, ms, seeds);
    const auto pts = law_points(rows);
    fits.push_back(fit_inverse_law(pts, eps));
  }
  const EpsilonLaw law = fit_epsilon_dependence(fits);
  EXPECT_GE(law.slope_ninf, -1.5);
  EXPECT_LE(law.slope_ninf, -0.5);
}
