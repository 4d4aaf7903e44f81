#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sgdperf/errors.hpp"

namespace sgdperf {

/// How the non-overlapped communication time scales with the learner count.
enum class CommKind {
  none,                     // single learner only
  allreduce_constant,       // Delta(P) = delta for P >= 2
  parameter_server_linear,  // Delta(P) = delta * P for P >= 2
};

std::string to_string(CommKind kind);
CommKind parse_comm_kind(const std::string& name);

/// Per-update time model T_Update(M, P) = gamma * max(M/P, m_t) + Delta(P).
template <typename Scalar>
struct HardwareParams {
  Scalar gamma{};  // seconds per sample
  std::int64_t m_t = 1;  // knee, in samples
  Scalar delta{};  // seconds
  CommKind comm_kind = CommKind::none;
};

using HardwareParamsd = HardwareParams<double>;

/// Cross-validation overhead: N updates per CV pass over m_cv samples.
template <typename Scalar>
struct CvConfig {
  std::int64_t updates_per_cv = 1;
  std::int64_t m_cv = 1;
  Scalar gamma_cv{};
};

using CvConfigd = CvConfig<double>;

namespace detail {
template <typename Scalar>
Scalar at_least(const Scalar& x, const Scalar& floor) {
  return x > floor ? x : floor;
}
}  // namespace detail

/// gamma * max(M, M_T).
template <typename Scalar>
Scalar gamma_time(const Scalar& m, const HardwareParams<Scalar>& hw) {
  if (!(m >= Scalar(1))) throw InputError("mini-batch size must be >= 1");
  return hw.gamma * detail::at_least(m, Scalar(hw.m_t));
}

template <typename Scalar>
Scalar comm_time(std::int64_t p, const HardwareParams<Scalar>& hw) {
  if (p < 1) throw InputError("learner count must be >= 1");
  if (p == 1) return Scalar(0);
  switch (hw.comm_kind) {
    case CommKind::none:
      throw ConfigurationError("communication kind 'none' cannot serve P=" + std::to_string(p) +
                               " learners");
    case CommKind::allreduce_constant:
      return hw.delta;
    case CommKind::parameter_server_linear:
      return hw.delta * Scalar(p);
  }
  return Scalar(0);
}

/// gamma * max(M/P, M_T) + Delta(P); M/P is not rounded (load imbalance is ignored).
template <typename Scalar>
Scalar t_update(const Scalar& m, std::int64_t p, const HardwareParams<Scalar>& hw) {
  if (!(m >= Scalar(1))) throw InputError("mini-batch size must be >= 1");
  if (p < 1) throw InputError("learner count must be >= 1");
  return hw.gamma * detail::at_least(Scalar(m / Scalar(p)), Scalar(hw.m_t)) + comm_time(p, hw);
}

/// Compute time of one CV period: gamma*N*max(M, M_T) + gamma_cv*max(M_CV, M_T).
template <typename Scalar>
Scalar cv_gamma_time(const Scalar& m, const HardwareParams<Scalar>& hw, const CvConfig<Scalar>& cv) {
  if (cv.updates_per_cv < 1 || cv.m_cv < 1 || cv.gamma_cv < Scalar(0))
    throw InputError("CV configuration fields must be positive");
  const Scalar knee(hw.m_t);
  return hw.gamma * Scalar(cv.updates_per_cv) * detail::at_least(m, knee) +
         cv.gamma_cv * detail::at_least(Scalar(cv.m_cv), knee);
}

struct Timing {
  double minibatch = 1.0;
  std::int64_t learners = 1;
  double seconds = 0.0;
};

struct HardwareFit {
  HardwareParamsd params;
  /// Sum of squared errors of the P = 1 two-segment fit.
  double compute_sse = 0.0;
  /// Sum of squared errors of the chosen communication model (0 without multi-P rows).
  double comm_sse = 0.0;
  /// "knee-unresolved" when the knee sits at the smallest measured M.
  std::vector<std::string> flags;
};

/// Replaces repeated (M, P) measurements by their median, sorted by (P, M).
std::vector<Timing> median_timings(std::span<const Timing> timings);

/// Exhaustive knee search over the measured M values with a least-squares
/// slope through the origin per candidate knee; delta and the communication
/// kind come from the P >= 2 rows, choosing the lower SSE of the constant and
/// linear-in-P models.
HardwareFit fit_hardware(std::span<const Timing> timings);

}  // namespace sgdperf
