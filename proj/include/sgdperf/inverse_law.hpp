#pragma once

namespace sgdperf {

/// Coefficients of N_Update(M) = n_inf + alpha / M.
template <typename Scalar>
struct InverseLaw {
  Scalar n_inf;
  Scalar alpha;

  Scalar updates(const Scalar& m) const { return n_inf + alpha / m; }
};

using InverseLawd = InverseLaw<double>;

}  // namespace sgdperf
