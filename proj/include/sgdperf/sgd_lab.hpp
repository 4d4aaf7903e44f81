#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sgdperf/errors.hpp"
#include "sgdperf/rng.hpp"

namespace sgdperf {

enum class ProblemKind { quadratic, logistic, noisy_quadratic };

std::string to_string(ProblemKind kind);
ProblemKind parse_problem_kind(const std::string& name);

/// Construction parameters for the synthetic convex problems.
struct ProblemOptions {
  ProblemKind kind = ProblemKind::noisy_quadratic;
  int dimension = 10;
  /// Largest Hessian eigenvalue of the quadratic kinds (L).
  double curvature = 1.0;
  /// Ratio of largest to smallest Hessian eigenvalue of the quadratic kinds.
  /// Eigenvalues are geometric from L down to L / condition.
  double condition = 1.0;
  /// Per-sample gradient noise std (phi). For the quadratic kind it is the
  /// spread of the per-sample offsets; ignored for logistic.
  double noise_scale = 0.0;
  /// Number of samples for the finite-dataset kinds.
  std::size_t dataset_size = 1024;
  /// Seed of the synthetic dataset and of the optimum w*; independent of the
  /// per-run seeds.
  std::uint64_t data_seed = 20180101;
  /// L2 penalty of the logistic kind so that w* exists on separable data.
  double l2 = 1e-2;
};

/// A convex objective f with known minimiser w* and known f(w*).
///
/// quadratic:        f(w) = 1/2 (w-w*)' H (w-w*), H diagonal; sample i adds
///                   z_i.(w-w*) with centred offsets z_i, so the dataset mean
///                   is exactly f.
/// noisy_quadratic:  same f, exact gradient plus Gaussian noise of
///                   per-coordinate variance phi^2 / M.
/// logistic:         mean log(1 + exp(-y x.w)) + l2/2 |w|^2 over a synthetic
///                   dataset; w* by Newton's method at construction.
class Problem {
 public:
  explicit Problem(const ProblemOptions& options);

  ProblemKind kind() const noexcept { return kind_; }
  int dimension() const noexcept { return static_cast<int>(optimum_.size()); }
  const Eigen::VectorXd& optimum() const noexcept { return optimum_; }
  double optimal_loss() const noexcept { return optimal_loss_; }
  /// Lipschitz constant of the full gradient.
  double curvature() const noexcept { return curvature_; }
  double noise_scale() const noexcept { return noise_scale_; }
  /// Empty for the noisy quadratic (infinite stream of noise).
  std::optional<std::size_t> dataset_size() const noexcept;
  const Eigen::VectorXd& hessian_diagonal() const noexcept { return hessian_; }

  double loss(const Eigen::VectorXd& w) const;
  double residual(const Eigen::VectorXd& w) const { return loss(w) - optimal_loss_; }
  Eigen::VectorXd gradient(const Eigen::VectorXd& w) const;

  /// Mean of the per-sample gradients over `indices` (finite kinds only).
  Eigen::VectorXd batch_gradient(const Eigen::VectorXd& w,
                                 std::span<const std::size_t> indices) const;

 private:
  ProblemKind kind_;
  Eigen::VectorXd optimum_;
  Eigen::VectorXd hessian_;
  double optimal_loss_ = 0.0;
  double curvature_ = 0.0;
  double noise_scale_ = 0.0;
  double l2_ = 0.0;
  Eigen::MatrixXd samples_;  // quadratic: offsets z_i; logistic: features x_i (rows)
  Eigen::VectorXd labels_;   // logistic only, +/-1
};

struct SgdConfig {
  double eta = 0.1;
  double epsilon = 0.01;
  std::uint64_t max_updates = 1'000'000;
  std::size_t minibatch = 1;
  std::uint64_t seed = 0;
  /// w0 is drawn uniformly on the sphere of this radius around w*.
  double radius = 1.0;
  /// Overrides the random sphere draw when set.
  std::optional<Eigen::VectorXd> initial_point;
};

struct RunRecord {
  std::size_t minibatch = 0;
  std::uint64_t seed = 0;
  double epsilon = 0.0;
  /// First k with residual(w^k) <= epsilon; empty when max_updates ran out.
  std::optional<std::uint64_t> n_update;
  double final_residual = 0.0;

  bool converged() const noexcept { return n_update.has_value(); }
};

/// Step-by-step mini-batch SGD, w <- w - eta * g, for one (problem, config).
/// The trajectory is a pure function of its inputs.
class Trajectory {
 public:
  Trajectory(const Problem& problem, const SgdConfig& config);

  std::uint64_t update_index() const noexcept { return k_; }
  const Eigen::VectorXd& weights() const noexcept { return w_; }
  double residual() const { return problem_->residual(w_); }

  /// Stochastic gradient at the current weights, consuming randomness.
  Eigen::VectorXd stochastic_gradient();
  void step();

 private:
  const Problem* problem_;
  double eta_;
  std::size_t minibatch_;
  Eigen::VectorXd w_;
  std::uint64_t k_ = 0;
  CounterRng noise_rng_;
  CounterRng batch_rng_;
  std::vector<std::size_t> order_;
};

/// Draws the stochastic gradient at a fixed point `w` for batch size `m`;
/// used to check the variance law directly.
Eigen::VectorXd sample_stochastic_gradient(const Problem& problem, const Eigen::VectorXd& w,
                                           std::size_t m, std::uint64_t seed);

/// Runs to first crossing of epsilon or max_updates.
/// Throws DivergenceError on a non-finite loss and InputError on a bad config.
RunRecord sgd_run(const Problem& problem, const SgdConfig& config);

/// Residuals Delta_0 .. Delta_steps along the trajectory of `config`.
std::vector<double> residual_trajectory(const Problem& problem, const SgdConfig& config,
                                        std::uint64_t steps);

/// Thrown when some seeds did not converge; carries what did.
class PartialResultError : public ModelError {
 public:
  PartialResultError(const std::string& what, std::vector<RunRecord> converged,
                     std::vector<std::uint64_t> failed_seeds,
                     std::optional<std::size_t> minibatch = std::nullopt)
      : ModelError(what),
        converged_(std::move(converged)),
        failed_seeds_(std::move(failed_seeds)),
        minibatch_(minibatch) {}

  const std::vector<RunRecord>& converged() const noexcept { return converged_; }
  const std::vector<std::uint64_t>& failed_seeds() const noexcept { return failed_seeds_; }
  std::optional<std::size_t> minibatch() const noexcept { return minibatch_; }

 private:
  std::vector<RunRecord> converged_;
  std::vector<std::uint64_t> failed_seeds_;
  std::optional<std::size_t> minibatch_;
};

struct Measurement {
  std::size_t minibatch = 0;
  double mean = 0.0;
  /// Sample standard deviation (n - 1); 0 for a single seed.
  double stddev = 0.0;
  std::vector<RunRecord> records;
};

/// Runs every seed at batch size `m` (in parallel when threads > 1; results
/// are identical to the sequential order).
Measurement measure_n_update(const Problem& problem, const SgdConfig& config_template,
                             std::size_t m, std::span<const std::uint64_t> seeds,
                             unsigned threads = 1);

/// One Measurement per entry of `minibatches`, which must be strictly
/// increasing. Errors are rethrown tagged with the offending M.
std::vector<Measurement> sweep(const Problem& problem, const SgdConfig& config_template,
                               std::span<const std::size_t> minibatches,
                               std::span<const std::uint64_t> seeds, unsigned threads = 1);

/// Seed-averaged residual along the trajectory: mean and standard error of
/// Delta_k over seeds for k = 0 .. steps.
struct ResidualCurve {
  std::vector<double> mean;
  std::vector<double> standard_error;
};

ResidualCurve residual_curve(const Problem& problem, const SgdConfig& config_template,
                             std::span<const std::uint64_t> seeds, std::uint64_t steps,
                             unsigned threads = 1);

/// Seeds 0 .. count-1 offset by `base`.
std::vector<std::uint64_t> seed_range(std::uint64_t base, std::size_t count);

}  // namespace sgdperf
