#include "sgdperf/hwmodel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

namespace sgdperf {

std::string to_string(CommKind kind) {
  switch (kind) {
    case CommKind::none:
      return "none";
    case CommKind::allreduce_constant:
      return "allreduce-constant";
    case CommKind::parameter_server_linear:
      return "parameter-server-linear";
  }
  return "unknown";
}

CommKind parse_comm_kind(const std::string& name) {
  if (name == "none") return CommKind::none;
  if (name == "allreduce-constant" || name == "allreduce") return CommKind::allreduce_constant;
  if (name == "parameter-server-linear" || name == "parameter-server")
    return CommKind::parameter_server_linear;
  throw InputError("unknown communication kind '" + name + "'");
}

std::vector<Timing> median_timings(std::span<const Timing> timings) {
  std::map<std::pair<std::int64_t, double>, std::vector<double>> groups;
  for (const auto& t : timings) {
    if (!(t.minibatch >= 1.0) || t.learners < 1 || !(t.seconds >= 0.0) || !std::isfinite(t.seconds))
      throw InputError("timing rows need M >= 1, P >= 1 and a finite nonnegative time");
    groups[{t.learners, t.minibatch}].push_back(t.seconds);
  }
  std::vector<Timing> out;
  out.reserve(groups.size());
  for (auto& [key, values] : groups) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    const double median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    out.push_back({key.second, key.first, median});
  }
  return out;
}

HardwareFit fit_hardware(std::span<const Timing> timings) {
  const std::vector<Timing> rows = median_timings(timings);

  std::vector<Timing> single;
  std::vector<Timing> multi;
  for (const auto& r : rows) (r.learners == 1 ? single : multi).push_back(r);
  if (single.size() < 3)
    throw InputError("hardware fit needs P=1 timings at >= 3 distinct M, got " +
                     std::to_string(single.size()));

  HardwareFit fit;
  double best_sse = INFINITY;
  double best_gamma = 0.0;
  double best_knee = 0.0;
  // `single` is sorted by M, so ties resolve to the smaller knee.
  for (const auto& candidate : single) {
    const double knee = candidate.minibatch;
    double sxy = 0.0;
    double sxx = 0.0;
    for (const auto& r : single) {
      const double x = std::max(r.minibatch, knee);
      sxy += x * r.seconds;
      sxx += x * x;
    }
    const double gamma = sxy / sxx;
    double sse = 0.0;
    for (const auto& r : single) {
      const double e = r.seconds - gamma * std::max(r.minibatch, knee);
      sse += e * e;
    }
    if (sse < best_sse) {
      best_sse = sse;
      best_gamma = gamma;
      best_knee = knee;
    }
  }
  if (!(best_gamma > 0.0)) throw InputError("hardware fit produced a nonpositive gamma");
  fit.params.gamma = best_gamma;
  fit.params.m_t = std::llround(best_knee);
  fit.compute_sse = best_sse;
  if (best_knee == single.front().minibatch) fit.flags.emplace_back("knee-unresolved");

  if (multi.empty()) {
    fit.params.comm_kind = CommKind::none;
    fit.params.delta = 0.0;
    return fit;
  }

  std::vector<std::int64_t> distinct_p;
  for (const auto& r : multi)
    if (distinct_p.empty() || distinct_p.back() != r.learners) distinct_p.push_back(r.learners);
  if (distinct_p.size() < 2)
    throw InputError("communication fit needs timings at >= 2 distinct P >= 2");

  std::vector<double> residual;
  residual.reserve(multi.size());
  for (const auto& r : multi)
    residual.push_back(r.seconds -
                       best_gamma * std::max(r.minibatch / double(r.learners), best_knee));

  double sum_r = 0.0;
  double sum_pr = 0.0;
  double sum_pp = 0.0;
  for (std::size_t i = 0; i < multi.size(); ++i) {
    const double p = double(multi[i].learners);
    sum_r += residual[i];
    sum_pr += p * residual[i];
    sum_pp += p * p;
  }
  const double delta_const = sum_r / double(multi.size());
  const double delta_linear = sum_pr / sum_pp;
  double sse_const = 0.0;
  double sse_linear = 0.0;
  for (std::size_t i = 0; i < multi.size(); ++i) {
    const double p = double(multi[i].learners);
    sse_const += (residual[i] - delta_const) * (residual[i] - delta_const);
    sse_linear += (residual[i] - delta_linear * p) * (residual[i] - delta_linear * p);
  }
  if (sse_linear < sse_const) {
    fit.params.comm_kind = CommKind::parameter_server_linear;
    fit.params.delta = delta_linear;
    fit.comm_sse = sse_linear;
  } else {
    fit.params.comm_kind = CommKind::allreduce_constant;
    fit.params.delta = delta_const;
    fit.comm_sse = sse_const;
  }
  if (fit.params.delta < 0.0) {
    fit.params.delta = 0.0;
    fit.flags.emplace_back("delta-clamped");
  }
  return fit;
}

}  // namespace sgdperf
