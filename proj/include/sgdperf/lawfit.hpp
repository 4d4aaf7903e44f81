#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgdperf/errors.hpp"
#include "sgdperf/inverse_law.hpp"
#include "sgdperf/sgd_lab.hpp"

namespace sgdperf {

/// N_Update(M) = n_inf + alpha / M at loss threshold `epsilon`.
struct LawParams {
  double n_inf = 0.0;
  double alpha = 0.0;
  double r_squared = 1.0;
  double epsilon = 0.0;
  /// "alpha-clamped", "negative-n-inf", "weights-degenerate".
  std::vector<std::string> flags;

  double predict(double m) const { return n_inf + alpha / m; }
  InverseLawd law() const { return {n_inf, alpha}; }
  bool has_flag(const std::string& f) const;
};

struct LawPoint {
  double minibatch = 1.0;
  double n_update = 0.0;
};

/// OLS of n_update on the regressor 1/M. `weights`, when given, must match
/// `points` in length and be positive. A negative slope is clamped to zero
/// (n_inf becomes the weighted mean) and flagged.
LawParams fit_inverse_law(std::span<const LawPoint> points, double epsilon,
                          std::optional<std::span<const double>> weights = std::nullopt);

/// Exact solution through two readings; r_squared is 1 by convention.
LawParams two_point_estimate(double m1, double n1, double m2, double n2);

/// Mean n_update per M from a sweep, ready for fit_inverse_law.
std::vector<LawPoint> law_points(std::span<const Measurement> rows);

/// Groups raw run records by M (converged records only) and averages them.
/// Returns points sorted by M and the per-point sample variance.
struct AggregatedRuns {
  std::vector<LawPoint> points;
  std::vector<double> variances;
  std::vector<std::size_t> counts;
  std::size_t dropped_unconverged = 0;
};
AggregatedRuns aggregate_runs(std::span<const RunRecord> records);

struct ExcludedFit {
  double epsilon = 0.0;
  std::string reason;
};

/// Power-law fits n_inf ~ c_ninf * eps^slope_ninf and alpha ~ c_alpha * eps^slope_alpha.
/// A 1/eps relationship shows as slopes near -1.
struct EpsilonLaw {
  double c_ninf = 0.0;
  double c_alpha = 0.0;
  double slope_ninf = 0.0;
  double slope_alpha = 0.0;
  /// Epsilons that entered the regression, strictly decreasing.
  std::vector<double> epsilon_grid;
  std::vector<ExcludedFit> excluded;
};

/// Minimum R^2 for a per-epsilon fit to enter the power-law regression.
inline constexpr double kEpsilonStudyMinRSquared = 0.8;

EpsilonLaw fit_epsilon_dependence(std::span<const LawParams> fits);

}  // namespace sgdperf
