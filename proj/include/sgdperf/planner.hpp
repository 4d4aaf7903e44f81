#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgdperf/errors.hpp"
#include "sgdperf/hwmodel.hpp"
#include "sgdperf/inverse_law.hpp"

namespace sgdperf {

enum class Regime { sqrt_branch, weak_branch };

std::string to_string(Regime regime);

template <typename Scalar>
struct Plan {
  std::int64_t p = 1;
  Scalar m_opt{};
  Scalar t_conv{};
  Regime regime = Regime::weak_branch;
  /// False when m_opt came from numerical minimisation (parameter server).
  bool closed_form = true;
};

using Pland = Plan<double>;

struct ScalingConfig {
  std::int64_t m_strong = 1;
  std::int64_t m_per_learner = 1;
};

template <typename Scalar>
struct ScalingRow {
  std::int64_t p = 1;
  Scalar t_strong{};
  Scalar t_weak{};
  Scalar t_optimal{};
};

template <typename Scalar>
struct BottouParams {
  Scalar a{};
  Scalar b{};
  Scalar e1{};
};

/// Golden-section search for the minimum of a unimodal f on [lo, hi].
template <typename Scalar, typename F>
Scalar minimize_unimodal(F&& f, Scalar lo, Scalar hi, const Scalar& rel_tol) {
  using std::sqrt;
  const Scalar inv_phi = (sqrt(Scalar(5)) - Scalar(1)) / Scalar(2);
  Scalar x1 = hi - inv_phi * (hi - lo);
  Scalar x2 = lo + inv_phi * (hi - lo);
  Scalar f1 = f(x1);
  Scalar f2 = f(x2);
  for (int it = 0; it < 500 && hi - lo > rel_tol * hi; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = f(x2);
    }
  }
  return (lo + hi) / Scalar(2);
}

/// T_Conv(M, P) = (N_inf + alpha/M) * [gamma * max(M/P, M_T) + Delta(P)].
template <typename Scalar>
Scalar t_conv(const Scalar& m, std::int64_t p, const InverseLaw<Scalar>& law,
              const HardwareParams<Scalar>& hw) {
  if (law.alpha < Scalar(0)) throw InputError("alpha must be nonnegative");
  const Scalar updates = law.updates(m);
  if (!(updates > Scalar(0)))
    throw ModelError("N_inf + alpha/M is not positive; the fitted law is invalid at this M");
  return updates * t_update(m, p, hw);
}

/// T_Conv with the per-update compute time replaced by the CV-amortised one;
/// the CV pass is shared by the P learners.
template <typename Scalar>
Scalar t_conv(const Scalar& m, std::int64_t p, const InverseLaw<Scalar>& law,
              const HardwareParams<Scalar>& hw, const CvConfig<Scalar>& cv) {
  if (p < 1) throw InputError("learner count must be >= 1");
  const Scalar updates = law.updates(m);
  if (!(updates > Scalar(0)))
    throw ModelError("N_inf + alpha/M is not positive; the fitted law is invalid at this M");
  if (cv.updates_per_cv < 1 || cv.m_cv < 1 || cv.gamma_cv < Scalar(0))
    throw InputError("CV configuration fields must be positive");
  const Scalar knee(hw.m_t);
  const Scalar share = Scalar(p);
  const Scalar period =
      hw.gamma * Scalar(cv.updates_per_cv) * detail::at_least(Scalar(m / share), knee) +
      cv.gamma_cv * detail::at_least(Scalar(Scalar(cv.m_cv) / share), knee);
  return updates * (period / Scalar(cv.updates_per_cv) + comm_time(p, hw));
}

/// Crossover learner count alpha*delta / (gamma * M_T^2 * N_inf) below which
/// the optimal batch exceeds M_T * P.
template <typename Scalar>
Scalar p_star(const InverseLaw<Scalar>& law, const HardwareParams<Scalar>& hw) {
  if (!(law.n_inf > Scalar(0)))
    throw ModelError("p_star is undefined for N_inf <= 0 (flagged fit)");
  const Scalar knee(hw.m_t);
  return law.alpha * hw.delta / (hw.gamma * knee * knee * law.n_inf);
}

namespace detail {

template <typename Scalar>
void check_plannable(const InverseLaw<Scalar>& law, std::int64_t p) {
  if (p < 1) throw InputError("learner count must be >= 1");
  if (law.alpha < Scalar(0)) throw InputError("alpha must be nonnegative");
  if (!(law.n_inf > Scalar(0)))
    throw ModelError("M_Opt is undefined for N_inf <= 0; refit or use the flagged-fit path");
}

// Minimiser of T_Conv over M >= M_T * P for P-dependent communication. The
// objective is convex there and decreasing below M_T * P.
template <typename Scalar>
Scalar numeric_m_opt(std::int64_t p, const InverseLaw<Scalar>& law,
                     const HardwareParams<Scalar>& hw) {
  auto f = [&](const Scalar& m) { return t_conv(m, p, law, hw); };
  const Scalar lo = Scalar(hw.m_t) * Scalar(p);
  const Scalar probe = lo * (Scalar(1) + Scalar(1e-9));
  if (f(probe) >= f(lo)) return lo;
  Scalar hi = lo * Scalar(2);
  while (f(hi) < f(hi / Scalar(2))) hi = hi * Scalar(2);
  const Scalar start = hi / Scalar(4) > lo ? hi / Scalar(4) : lo;
  return minimize_unimodal(f, start, hi, Scalar(1e-13));
}

}  // namespace detail

/// Batch size minimising T_Conv at P learners. P = 1 gives M_T; P >= 2 gives
/// max(sqrt(alpha*delta*P / (N_inf*gamma)), M_T*P) for constant communication
/// and a golden-section minimum for communication linear in P.
template <typename Scalar>
Scalar m_opt(std::int64_t p, const InverseLaw<Scalar>& law, const HardwareParams<Scalar>& hw) {
  using std::sqrt;
  detail::check_plannable(law, p);
  if (p == 1) return Scalar(hw.m_t);
  const Scalar delta = comm_time(p, hw);
  if (hw.comm_kind == CommKind::parameter_server_linear) return detail::numeric_m_opt(p, law, hw);
  const Scalar root = sqrt(law.alpha * delta * Scalar(p) / (law.n_inf * hw.gamma));
  const Scalar weak = Scalar(hw.m_t) * Scalar(p);
  return root > weak ? root : weak;
}

/// Minimum time to convergence at P learners with its regime.
template <typename Scalar>
Plan<Scalar> t_conv_optimal(std::int64_t p, const InverseLaw<Scalar>& law,
                            const HardwareParams<Scalar>& hw) {
  using std::sqrt;
  Plan<Scalar> plan;
  plan.p = p;
  plan.m_opt = m_opt(p, law, hw);
  const Scalar knee(hw.m_t);
  if (p == 1) {
    plan.t_conv = law.updates(knee) * hw.gamma * knee;
    plan.regime = Regime::weak_branch;
    return plan;
  }
  if (hw.comm_kind == CommKind::parameter_server_linear) {
    plan.closed_form = false;
    plan.t_conv = t_conv(plan.m_opt, p, law, hw);
    plan.regime = plan.m_opt > knee * Scalar(p) ? Regime::sqrt_branch : Regime::weak_branch;
    return plan;
  }
  const Scalar delta = comm_time(p, hw);
  if (Scalar(p) < p_star(law, hw)) {
    const Scalar s = sqrt(delta * law.n_inf) + sqrt(law.alpha * hw.gamma / Scalar(p));
    plan.t_conv = s * s;
    plan.regime = Regime::sqrt_branch;
  } else {
    plan.t_conv = (law.n_inf + law.alpha / (knee * Scalar(p))) * (delta + hw.gamma * knee);
    plan.regime = Regime::weak_branch;
  }
  return plan;
}

template <typename Scalar>
std::vector<ScalingRow<Scalar>> scaling_curves(std::span<const std::int64_t> learners,
                                               const InverseLaw<Scalar>& law,
                                               const HardwareParams<Scalar>& hw,
                                               const ScalingConfig& cfg) {
  if (learners.empty()) throw InputError("learner list is empty");
  if (cfg.m_strong < 1 || cfg.m_per_learner < 1)
    throw InputError("scaling batch sizes must be positive");
  std::vector<ScalingRow<Scalar>> rows;
  rows.reserve(learners.size());
  for (std::size_t i = 0; i < learners.size(); ++i) {
    const std::int64_t p = learners[i];
    if (i > 0 && p <= learners[i - 1]) throw InputError("learner list must be increasing");
    ScalingRow<Scalar> row;
    row.p = p;
    row.t_strong = t_conv(Scalar(cfg.m_strong), p, law, hw);
    row.t_weak = t_conv(Scalar(cfg.m_per_learner) * Scalar(p), p, law, hw);
    row.t_optimal = t_conv_optimal(p, law, hw).t_conv;
    rows.push_back(row);
  }
  return rows;
}

/// Iteration count obtained by inverting E_N <= A/M + (1 - B/M)^(N-1) (E_1 - A/M)
/// at E_N = epsilon. Only for comparing curve shapes against the inverse law.
template <typename Scalar>
Scalar bottou_iteration_bound(const BottouParams<Scalar>& bp, const Scalar& epsilon,
                              const Scalar& m) {
  using std::log;
  if (!(m > bp.b)) throw InputError("Bottou bound requires M > B");
  if (!(epsilon * m > bp.a)) throw InputError("Bottou bound requires epsilon*M > A");
  if (!(bp.e1 * m > bp.a)) throw InputError("Bottou bound requires E1*M > A");
  return Scalar(1) + m / (m - bp.b) * log((epsilon * m - bp.a) / (bp.e1 * m - bp.a));
}

/// One entry of a hardware catalogue: a compute choice (gamma, P) and a
/// bandwidth choice (delta) with their prices.
struct DesignOption {
  double gamma = 0.0;
  double cost_compute = 0.0;
  double delta = 0.0;
  double cost_bandwidth = 0.0;
  std::int64_t p = 1;

  double cost() const { return cost_compute + cost_bandwidth; }
};

/// dT/dC toward a catalogue neighbour differing from the winner in exactly
/// one of gamma, delta or P. ratio is NaN when the costs are equal.
struct MarginalRatio {
  std::size_t option = 0;
  double delta_t = 0.0;
  double delta_cost = 0.0;
  double ratio = 0.0;
  bool feasible = false;
};

struct DesignResult {
  std::size_t winner = 0;
  DesignOption option;
  Pland plan;
  /// T_Conv per option (NaN for options over budget).
  std::vector<double> t_conv;
  std::vector<MarginalRatio> neighbours;
};

struct ComputeChoice {
  double gamma = 0.0;
  double cost = 0.0;
  std::int64_t p = 1;
};

struct BandwidthChoice {
  double delta = 0.0;
  double cost = 0.0;
};

/// Cartesian product of compute and bandwidth choices.
std::vector<DesignOption> combine_catalogue(std::span<const ComputeChoice> compute,
                                            std::span<const BandwidthChoice> bandwidth);

/// Exhaustive search for the option with the smallest optimal T_Conv among
/// those whose total cost fits the budget. `base` supplies M_T and the
/// communication kind.
DesignResult design_balance(std::span<const DesignOption> options, double budget,
                            const InverseLawd& law, const HardwareParamsd& base);

}  // namespace sgdperf
