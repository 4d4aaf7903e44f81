#include "sgdperf/planner.hpp"

#include <cmath>

namespace sgdperf {

std::string to_string(Regime regime) {
  return regime == Regime::sqrt_branch ? "sqrt-branch" : "weak-branch";
}

std::vector<DesignOption> combine_catalogue(std::span<const ComputeChoice> compute,
                                            std::span<const BandwidthChoice> bandwidth) {
  std::vector<DesignOption> options;
  options.reserve(compute.size() * bandwidth.size());
  for (const auto& c : compute)
    for (const auto& b : bandwidth) options.push_back({c.gamma, c.cost, b.delta, b.cost, c.p});
  return options;
}

DesignResult design_balance(std::span<const DesignOption> options, double budget,
                            const InverseLawd& law, const HardwareParamsd& base) {
  if (options.empty()) throw InputError("design catalogue is empty");

  auto evaluate = [&](const DesignOption& o) {
    if (!(o.gamma > 0.0) || o.delta < 0.0 || o.p < 1 || o.cost_compute < 0.0 ||
        o.cost_bandwidth < 0.0)
      throw InputError("design options need gamma > 0, delta >= 0, P >= 1 and nonnegative costs");
    HardwareParamsd hw = base;
    hw.gamma = o.gamma;
    hw.delta = o.delta;
    if (o.p > 1 && hw.comm_kind == CommKind::none) hw.comm_kind = CommKind::allreduce_constant;
    return t_conv_optimal(o.p, law, hw);
  };

  DesignResult result;
  result.t_conv.assign(options.size(), NAN);
  bool found = false;
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (options[i].cost() > budget) continue;
    const Pland plan = evaluate(options[i]);
    result.t_conv[i] = plan.t_conv;
    if (!found || plan.t_conv < result.plan.t_conv) {
      found = true;
      result.winner = i;
      result.plan = plan;
    }
  }
  if (!found) throw BudgetInfeasibleError("no design option fits within the budget");
  result.option = options[result.winner];

  const DesignOption& w = result.option;
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (i == result.winner) continue;
    const DesignOption& o = options[i];
    const int differing = int(o.gamma != w.gamma) + int(o.delta != w.delta) + int(o.p != w.p);
    if (differing != 1) continue;
    MarginalRatio m;
    m.option = i;
    m.feasible = o.cost() <= budget;
    m.delta_t = evaluate(o).t_conv - result.plan.t_conv;
    m.delta_cost = o.cost() - w.cost();
    m.ratio = m.delta_cost != 0.0 ? m.delta_t / m.delta_cost : NAN;
    result.neighbours.push_back(m);
  }
  return result;
}

}  // namespace sgdperf
