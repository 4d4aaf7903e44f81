#include "sgdperf/sgd_lab.hpp"

#include <bit>
#include <cmath>

#include <gtest/gtest.h>

using namespace sgdperf;

namespace {

Problem unit_quadratic(ProblemKind kind, double phi = 0.0, int dim = 1) {
  ProblemOptions o;
  o.kind = kind;
  o.dimension = dim;
  o.curvature = 1.0;
  o.noise_scale = phi;
  o.dataset_size = 64;
  return Problem(o);
}

SgdConfig fixed_start(double w0, double eta, double eps) {
  SgdConfig c;
  c.eta = eta;
  c.epsilon = eps;
  c.initial_point = Eigen::VectorXd::Constant(1, w0);
  return c;
}

}  // namespace

TEST(SgdRun, DeterministicRecursionCrossesAtFive) {
  // Delta_k = 0.5 * 0.25^k: k=4 -> 1.95e-3 > eps, k=5 -> 4.88e-4 <= eps.
  for (auto kind : {ProblemKind::quadratic, ProblemKind::noisy_quadratic}) {
    const Problem p = unit_quadratic(kind);
    const RunRecord r = sgd_run(p, fixed_start(1.0, 0.5, 0.001));
    ASSERT_TRUE(r.converged());
    EXPECT_EQ(*r.n_update, 5u);
    EXPECT_DOUBLE_EQ(r.final_residual, 0.5 * std::pow(0.25, 5));
  }
}

TEST(SgdRun, AlreadyConverged) {
  const Problem p = unit_quadratic(ProblemKind::noisy_quadratic, 0.3, 4);
  SgdConfig c;
  c.epsilon = 0.5;  // initial residual on the unit sphere is exactly 0.5
  const RunRecord r = sgd_run(p, c);
  ASSERT_TRUE(r.converged());
  EXPECT_EQ(*r.n_update, 0u);
}

TEST(SgdRun, OversizedStepDoesNotConverge) {
  const Problem p = unit_quadratic(ProblemKind::noisy_quadratic);
  SgdConfig c = fixed_start(1.0, 3.0, 1e-3);
  c.max_updates = 20;
  const RunRecord r = sgd_run(p, c);
  EXPECT_FALSE(r.converged());
  EXPECT_DOUBLE_EQ(r.final_residual, 0.5 * std::pow(4.0, 20));
}

TEST(SgdRun, OverflowRaisesDivergenceWithIndex) {
  const Problem p = unit_quadratic(ProblemKind::noisy_quadratic);
  SgdConfig c = fixed_start(1.0, 3.0, 1e-3);
  try {
    sgd_run(p, c);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.update(), 100u);
    EXPECT_NE(std::string(e.what()).find(std::to_string(e.update())), std::string::npos);
  }
}

TEST(SgdRun, RejectsBatchLargerThanDataset) {
  const Problem p = unit_quadratic(ProblemKind::quadratic);
  SgdConfig c = fixed_start(1.0, 0.5, 1e-3);
  c.minibatch = 65;
  EXPECT_THROW(sgd_run(p, c), InputError);
  c.minibatch = 0;
  EXPECT_THROW(sgd_run(p, c), InputError);
}

TEST(SgdRun, RejectsBadConfig) {
  const Problem p = unit_quadratic(ProblemKind::noisy_quadratic);
  SgdConfig c;
  c.eta = 0.0;
  EXPECT_THROW(sgd_run(p, c), InputError);
  c.eta = 0.1;
  c.epsilon = -1.0;
  EXPECT_THROW(sgd_run(p, c), InputError);
}

TEST(SgdRun, BitwiseDeterministic) {
  ProblemOptions o;
  o.kind = ProblemKind::logistic;
  o.dimension = 5;
  o.dataset_size = 256;
  const Problem p(o);
  SgdConfig c;
  c.eta = 0.5;
  c.epsilon = 1e-3;
  c.minibatch = 8;
  c.seed = 42;
  const RunRecord a = sgd_run(p, c);
  const RunRecord b = sgd_run(p, c);
  ASSERT_TRUE(a.converged());
  EXPECT_EQ(a.n_update, b.n_update);
  EXPECT_EQ(std::bit_cast<std::uint64_t>(a.final_residual),
            std::bit_cast<std::uint64_t>(b.final_residual));
  c.seed = 43;
  const RunRecord other = sgd_run(p, c);
  EXPECT_NE(std::bit_cast<std::uint64_t>(a.final_residual),
            std::bit_cast<std::uint64_t>(other.final_residual));
}

TEST(SgdRun, FirstCrossingHoldsOnReplay) {
  for (auto kind : {ProblemKind::quadratic, ProblemKind::noisy_quadratic, ProblemKind::logistic}) {
    ProblemOptions o;
    o.kind = kind;
    o.dimension = 6;
    o.condition = 10.0;
    o.noise_scale = 0.2;
    o.dataset_size = 200;
    const Problem p(o);
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
      SgdConfig c;
      c.eta = kind == ProblemKind::logistic ? 0.1 : 0.2;
      c.epsilon = kind == ProblemKind::logistic ? 1e-2 : 0.02;
      c.minibatch = 1 + seed % 5;
      c.seed = seed;
      const RunRecord r = sgd_run(p, c);
      ASSERT_TRUE(r.converged()) << to_string(kind) << " seed " << seed;
      const auto path = residual_trajectory(p, c, *r.n_update);
      EXPECT_LE(path.back(), c.epsilon);
      EXPECT_EQ(path.back(), r.final_residual);
      for (std::size_t k = 0; k + 1 < path.size(); ++k) EXPECT_GT(path[k], c.epsilon);
    }
  }
}

TEST(Problem, GradientIsLipschitzWithDeclaredCurvature) {
  for (auto kind : {ProblemKind::quadratic, ProblemKind::noisy_quadratic, ProblemKind::logistic}) {
    ProblemOptions o;
    o.kind = kind;
    o.dimension = 7;
    o.condition = 50.0;
    o.curvature = 2.0;
    o.dataset_size = 300;
    const Problem p(o);
    CounterRng rng(1234);
    for (int t = 0; t < 200; ++t) {
      Eigen::VectorXd x(7), y(7);
      for (int i = 0; i < 7; ++i) {
        x[i] = 3.0 * rng.normal();
        y[i] = 3.0 * rng.normal();
      }
      EXPECT_LE((p.gradient(x) - p.gradient(y)).norm(), p.curvature() * (x - y).norm() * (1 + 1e-12))
          << to_string(kind);
    }
  }
}

TEST(Problem, OptimumIsStationaryWithKnownLoss) {
  ProblemOptions o;
  o.kind = ProblemKind::logistic;
  o.dimension = 4;
  o.dataset_size = 500;
  const Problem logistic(o);
  EXPECT_LT(logistic.gradient(logistic.optimum()).norm(), 1e-12);
  EXPECT_NEAR(logistic.residual(logistic.optimum()), 0.0, 1e-15);
  Eigen::VectorXd off = logistic.optimum();
  off[0] += 0.1;
  EXPECT_GT(logistic.residual(off), 0.0);

  o.kind = ProblemKind::quadratic;
  o.noise_scale = 0.5;
  const Problem quad(o);
  EXPECT_EQ(quad.optimal_loss(), 0.0);
  EXPECT_EQ(quad.loss(quad.optimum()), 0.0);
  // Mean of the per-sample gradients equals the exact gradient.
  std::vector<std::size_t> all(500);
  for (std::size_t i = 0; i < 500; ++i) all[i] = i;
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(4, 0.3);
  EXPECT_LT((quad.batch_gradient(w, all) - quad.gradient(w)).norm(), 1e-12);
}

TEST(Problem, RejectsBadOptions) {
  ProblemOptions o;
  o.dimension = 0;
  EXPECT_THROW(Problem{o}, InputError);
  o.dimension = 3;
  o.condition = 0.5;
  EXPECT_THROW(Problem{o}, InputError);
  EXPECT_THROW(parse_problem_kind("svm"), InputError);
  EXPECT_EQ(parse_problem_kind("noisy-quadratic"), ProblemKind::noisy_quadratic);
}

// Total variance of the stochastic gradient at a fixed point times M is
// constant (central limit scaling).
TEST(Problem, GradientVarianceScalesInverselyWithBatch) {
  for (auto kind : {ProblemKind::noisy_quadratic, ProblemKind::quadratic}) {
    ProblemOptions o;
    o.kind = kind;
    o.dimension = 3;
    o.noise_scale = 0.7;
    o.dataset_size = 20000;
    const Problem p(o);
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(3, 0.4);
    const Eigen::VectorXd exact = p.gradient(w);
    std::vector<double> scaled;
    for (std::size_t m : {1, 4, 16, 64}) {
      const int draws = 4000;
      double total = 0.0;
      for (int s = 0; s < draws; ++s)
        total += (sample_stochastic_gradient(p, w, m, std::uint64_t(s) * 131 + m) - exact).squaredNorm();
      scaled.push_back(total / draws * double(m));
    }
    const double expected = 3 * 0.7 * 0.7;
    for (double v : scaled) EXPECT_NEAR(v / expected, 1.0, 0.08) << to_string(kind);
  }
}

TEST(Measure, NoiseFreeHasZeroSpread) {
  const Problem p = unit_quadratic(ProblemKind::noisy_quadratic, 0.0, 5);
  SgdConfig c;
  c.eta = 0.3;
  c.epsilon = 1e-4;
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const Measurement m = measure_n_update(p, c, 4, seeds);
  EXPECT_EQ(m.stddev, 0.0);
  c.seed = 1;
  c.minibatch = 4;
  EXPECT_EQ(m.mean, double(*sgd_run(p, c).n_update));
}

TEST(Measure, SingleSeedEqualsRun) {
  const Problem p = unit_quadratic(ProblemKind::noisy_quadratic, 0.1, 10);
  SgdConfig c;
  c.eta = 0.1;
  c.epsilon = 0.01;
  const std::vector<std::uint64_t> seeds{7};
  const Measurement m = measure_n_update(p, c, 3, seeds);
  c.seed = 7;
  c.minibatch = 3;
  EXPECT_EQ(m.mean, double(*sgd_run(p, c).n_update));
  EXPECT_EQ(m.stddev, 0.0);
  ASSERT_EQ(m.records.size(), 1u);
}

TEST(Measure, LargerBatchNeedsFewerUpdates) {
  const Problem p = unit_quadratic(ProblemKind::noisy_quadratic, 0.14, 10);
  SgdConfig c;
  c.eta = 0.1;
  c.epsilon = 0.01;
  const auto seeds = seed_range(100, 20);
  EXPECT_GT(measure_n_update(p, c, 1, seeds).mean, measure_n_update(p, c, 64, seeds).mean);
}

TEST(Measure, PartialResultCarriesConvergedSubset) {
  const Problem p = unit_quadratic(ProblemKind::noisy_quadratic, 0.1, 10);
  SgdConfig c;
  c.eta = 0.1;
  c.epsilon = 0.05;
  c.max_updates = 11;  // the noise-free run crosses at update 11
  const auto seeds = seed_range(0, 30);
  try {
    measure_n_update(p, c, 1, seeds);
    FAIL() << "expected partial result";
  } catch (const PartialResultError& e) {
    EXPECT_FALSE(e.failed_seeds().empty());
    EXPECT_EQ(e.converged().size() + e.failed_seeds().size(), seeds.size());
    for (const auto& r : e.converged()) EXPECT_TRUE(r.converged());
    EXPECT_EQ(e.minibatch(), std::optional<std::size_t>(1));
  }
  EXPECT_THROW(measure_n_update(p, c, 1, std::span<const std::uint64_t>{}), InputError);
}

TEST(Measure, ThreadedMatchesSequential) {
  const Problem p = unit_quadratic(ProblemKind::noisy_quadratic, 0.14, 10);
  SgdConfig c;
  c.eta = 0.1;
  c.epsilon = 0.01;
  const auto seeds = seed_range(0, 16);
  const Measurement a = measure_n_update(p, c, 2, seeds, 1);
  const Measurement b = measure_n_update(p, c, 2, seeds, 4);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].seed, b.records[i].seed);
    EXPECT_EQ(a.records[i].n_update, b.records[i].n_update);
    EXPECT_EQ(a.records[i].final_residual, b.records[i].final_residual);
  }
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.stddev, b.stddev);
}

TEST(Sweep, ValidatesBatchList) {
  const Problem p = unit_quadratic(ProblemKind::noisy_quadratic, 0.1, 3);
  SgdConfig c;
  const auto seeds = seed_range(0, 2);
  EXPECT_THROW(sweep(p, c, std::span<const std::size_t>{}, seeds), InputError);
  const std::vector<std::size_t> bad{4, 2};
  EXPECT_THROW(sweep(p, c, bad, seeds), InputError);
}

TEST(Sweep, ErrorsAreTaggedWithBatch) {
  const Problem p = unit_quadratic(ProblemKind::quadratic, 0.1, 3);
  SgdConfig c;
  const std::vector<std::size_t> ms{32, 128};
  try {
    sweep(p, c, ms, seed_range(0, 2));
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("M=128"), std::string::npos);
  }
}

TEST(Sweep, NoiseFreeRowsAreIdentical) {
  const Problem p = unit_quadratic(ProblemKind::quadratic, 0.0, 8);
  SgdConfig c;
  c.eta = 0.2;
  c.epsilon = 1e-3;
  const std::vector<std::size_t> ms{1, 2, 4, 8, 16, 32, 64};
  const auto rows = sweep(p, c, ms, seed_range(0, 5));
  for (const auto& r : rows) {
    EXPECT_EQ(r.mean, rows.front().mean);
    EXPECT_EQ(r.stddev, 0.0);
  }
}

TEST(Sweep, MeansNonIncreasingWithinOneStd) {
  const Problem p = unit_quadratic(ProblemKind::noisy_quadratic, 0.14, 10);
  SgdConfig c;
  c.eta = 0.1;
  c.epsilon = 0.01;
  const std::vector<std::size_t> ms{1, 2, 4, 8, 16, 32, 64, 128, 256};
  const auto rows = sweep(p, c, ms, seed_range(0, 20));
  ASSERT_EQ(rows.size(), ms.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].minibatch, ms[i]);
    if (i > 0) EXPECT_LE(rows[i].mean, rows[i - 1].mean + rows[i - 1].stddev);
  }
}

TEST(ResidualCurve, StartsAtInitialResidual) {
  const Problem p = unit_quadratic(ProblemKind::noisy_quadratic, 0.1, 10);
  SgdConfig c;
  c.eta = 0.1;
  c.radius = 1.0;
  const auto curve = residual_curve(p, c, seed_range(0, 10), 50);
  ASSERT_EQ(curve.mean.size(), 51u);
  EXPECT_NEAR(curve.mean[0], 0.5, 1e-14);
  EXPECT_NEAR(curve.standard_error[0], 0.0, 1e-14);
  EXPECT_LT(curve.mean[50], curve.mean[0]);
}
