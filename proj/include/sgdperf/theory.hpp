#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "sgdperf/errors.hpp"

namespace sgdperf {

/// Symbols of the mini-batch SGD residual bound.
///
///   lambda = eta (1 - eta L / 2) / |w0 - w*|^2
///   sigma^2 = eta^2 L phi^2 / (2 lambda)         (noise floor)
///   theta   = sigma^2 * M                        (sigma^2 ~ theta / M)
template <typename Scalar>
struct BoundParams {
  Scalar lambda{};
  Scalar sigma{};
  Scalar delta0{};
  Scalar theta{};
};

using BoundParamsd = BoundParams<double>;

template <typename Scalar>
void validate(const BoundParams<Scalar>& bp) {
  if (!(bp.lambda > Scalar(0))) throw InputError("lambda must be positive");
  if (!(bp.sigma >= Scalar(0))) throw InputError("sigma must be nonnegative");
  if (!(bp.delta0 > Scalar(0))) throw InputError("delta0 must be positive");
  if (!(bp.theta >= Scalar(0))) throw InputError("theta must be nonnegative");
  if (bp.delta0 < bp.sigma) throw InputError("delta0 must not be below the noise floor sigma");
  if (bp.lambda * (bp.delta0 + bp.sigma) > Scalar(1))
    throw InputError("lambda * (delta0 + sigma) must not exceed 1");
}

/// Builds lambda and sigma from step size, Lipschitz constant, per-sample
/// gradient noise std `phi` (total variance, not per coordinate), initial
/// residual and initial distance to the optimum. `minibatch` divides the
/// noise variance.
template <typename Scalar>
BoundParams<Scalar> bound_params_from_primitives(const Scalar& eta, const Scalar& lipschitz,
                                                 const Scalar& phi, const Scalar& delta0,
                                                 const Scalar& dist0, std::int64_t minibatch = 1) {
  using std::sqrt;
  if (!(eta > Scalar(0))) throw InputError("eta must be positive");
  if (!(lipschitz > Scalar(0))) throw InputError("L must be positive");
  if (!(phi >= Scalar(0))) throw InputError("phi must be nonnegative");
  if (!(dist0 > Scalar(0))) throw InputError("|w0 - w*| must be positive");
  if (minibatch < 1) throw InputError("mini-batch size must be >= 1");
  if (!(eta * lipschitz / Scalar(2) < Scalar(1)))
    throw StepSizeError("step size violates 1 - eta*L/2 > 0");
  BoundParams<Scalar> bp;
  bp.lambda = eta * (Scalar(1) - eta * lipschitz / Scalar(2)) / (dist0 * dist0);
  bp.theta = eta * eta * lipschitz * phi * phi / (Scalar(2) * bp.lambda);
  bp.sigma = sqrt(bp.theta / Scalar(minibatch));
  bp.delta0 = delta0;
  validate(bp);
  return bp;
}

/// 1 / (1/delta0 + lambda k): the noiseless (gradient descent) rate.
template <typename Scalar>
Scalar gd_limit(std::uint64_t k, const Scalar& lambda, const Scalar& delta0) {
  if (!(lambda > Scalar(0)) || !(delta0 > Scalar(0)))
    throw InputError("gd_limit needs lambda > 0 and delta0 > 0");
  return Scalar(1) / (Scalar(1) / delta0 + lambda * Scalar(k));
}

/// Delta_k <= 1 / [(1+2 lambda sigma)^k (1/(delta0-sigma) + 1/(2 sigma)) - 1/(2 sigma)] + sigma.
///
/// Evaluated as 1 / [a + (q - 1)(a + b)] + sigma with a = 1/(delta0-sigma),
/// b = 1/(2 sigma) and q - 1 = expm1(k log1p(2 lambda sigma)), which avoids
/// the cancellation between the two 1/(2 sigma) terms for small sigma.
/// k = 0 returns delta0 itself.
template <typename Scalar>
Scalar residual_bound(std::uint64_t k, const BoundParams<Scalar>& bp) {
  using std::expm1;
  using std::log1p;
  if (bp.sigma == Scalar(0))
    throw InputError("residual_bound needs sigma > 0; use gd_limit for the noiseless case");
  validate(bp);
  if (bp.delta0 == bp.sigma)
    throw InputError("residual_bound is degenerate at delta0 == sigma");
  if (k == 0) return bp.delta0;
  const Scalar a = Scalar(1) / (bp.delta0 - bp.sigma);
  const Scalar b = Scalar(1) / (Scalar(2) * bp.sigma);
  const Scalar growth = expm1(Scalar(k) * log1p(Scalar(2) * bp.lambda * bp.sigma));
  return Scalar(1) / (a + growth * (a + b)) + bp.sigma;
}

/// [log((eps+sigma)/(eps-sigma)) + log((delta0-sigma)/(delta0+sigma))] / log(1 + 2 lambda sigma),
/// with each log ratio written as 2 atanh(sigma / x).
template <typename Scalar>
Scalar n_update_lower_bound_exact(const Scalar& epsilon, const BoundParams<Scalar>& bp) {
  using std::atanh;
  using std::log1p;
  validate(bp);
  if (!(bp.sigma > Scalar(0))) throw InputError("exact N_Update bound needs sigma > 0");
  if (!(bp.delta0 > bp.sigma)) throw InputError("exact N_Update bound needs delta0 > sigma");
  if (!(epsilon > bp.sigma))
    throw UnreachableTargetError("target epsilon is at or below the noise floor sigma");
  const Scalar numerator =
      Scalar(2) * (atanh(bp.sigma / epsilon) - atanh(bp.sigma / bp.delta0));
  return numerator / log1p(Scalar(2) * bp.lambda * bp.sigma);
}

/// Small-sigma expansion of the exact bound with sigma^2 = theta / M:
///   N >= (1/lambda)(1/eps - 1/delta0) (1 + theta/(3M) (1/eps^2 + 1/delta0^2 + 1/(eps delta0)))
/// which has the inverse-law shape n_inf + alpha / M.
template <typename Scalar>
struct TaylorBound {
  Scalar value{};
  Scalar n_inf{};
  Scalar alpha{};
};

template <typename Scalar>
TaylorBound<Scalar> n_update_lower_bound_taylor(const Scalar& epsilon, const Scalar& lambda,
                                                const Scalar& delta0, const Scalar& theta,
                                                const Scalar& m) {
  if (!(lambda > Scalar(0))) throw InputError("lambda must be positive");
  if (!(epsilon > Scalar(0))) throw InputError("epsilon must be positive");
  if (!(epsilon < delta0)) throw InputError("Taylor N_Update bound needs epsilon < delta0");
  if (!(m >= Scalar(1))) throw InputError("mini-batch size must be >= 1");
  if (!(theta >= Scalar(0))) throw InputError("theta must be nonnegative");
  const Scalar spread = Scalar(1) / (epsilon * epsilon) + Scalar(1) / (delta0 * delta0) +
                        Scalar(1) / (epsilon * delta0);
  TaylorBound<Scalar> out;
  out.n_inf = (Scalar(1) / epsilon - Scalar(1) / delta0) / lambda;
  out.alpha = out.n_inf * theta * spread / Scalar(3);
  out.value = out.n_inf + out.alpha / m;
  return out;
}

template <typename Scalar>
struct DominanceReport {
  /// min over k of residual_bound(k) - gd_limit(k)
  Scalar min_gap{};
  std::uint64_t k_at_min = 0;
  std::uint64_t violations = 0;
  std::uint64_t first_violation = 0;
};

/// Checks residual_bound(k) >= gd_limit(k) - tolerance for k in [0, k_max].
/// Violations are counted, never thrown.
template <typename Scalar>
DominanceReport<Scalar> check_dominance(const Scalar& lambda, const Scalar& sigma,
                                        const Scalar& delta0, std::uint64_t k_max,
                                        const Scalar& tolerance = Scalar(0)) {
  if (!(sigma > Scalar(0)) || !(sigma < delta0))
    throw InputError("dominance check needs 0 < sigma < delta0");
  const BoundParams<Scalar> bp{lambda, sigma, delta0, Scalar(0)};
  DominanceReport<Scalar> report;
  for (std::uint64_t k = 0; k <= k_max; ++k) {
    const Scalar gap = residual_bound(k, bp) - gd_limit(k, lambda, delta0);
    if (k == 0 || gap < report.min_gap) {
      report.min_gap = gap;
      report.k_at_min = k;
    }
    if (gap < -tolerance) {
      if (report.violations == 0) report.first_violation = k;
      ++report.violations;
    }
  }
  return report;
}

}  // namespace sgdperf
