#include "sgdperf/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "sgdperf/errors.hpp"
#include "sgdperf/hwmodel.hpp"
#include "sgdperf/io.hpp"
#include "sgdperf/lawfit.hpp"
#include "sgdperf/planner.hpp"
#include "sgdperf/sgd_lab.hpp"
#include "sgdperf/theory.hpp"

namespace sgdperf {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// --set key=value pairs. Command-line values win over JSON inputs.
class Overrides {
 public:
  explicit Overrides(const std::vector<std::string>& pairs) {
    for (const auto& p : pairs) {
      const auto eq = p.find('=');
      if (eq == std::string::npos || eq == 0)
        throw InputError("--set expects key=value, got '" + p + "'");
      values_[p.substr(0, eq)] = p.substr(eq + 1);
    }
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::optional<double> number(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    const std::string& text = it->second;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
      throw InputError("--set " + key + ": malformed number '" + text + "'");
    return v;
  }

  double number_or(const std::string& key, double fallback) const {
    return number(key).value_or(fallback);
  }

  std::optional<std::string> text(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::int64_t integer_or(const std::string& key, std::int64_t fallback) const {
    const auto v = number(key);
    if (!v) return fallback;
    if (*v != std::floor(*v)) throw InputError("--set " + key + " must be an integer");
    return std::int64_t(*v);
  }

 private:
  std::map<std::string, std::string> values_;
};

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    const std::string item = text.substr(start, end - start);
    T value{};
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (ec != std::errc() || ptr != item.data() + item.size() || item.empty())
      throw InputError(std::string(flag) + ": malformed list entry '" + item + "'");
    out.push_back(value);
    start = end + 1;
  }
  return out;
}

struct Options {
  std::string problem = "noisy-quadratic";
  std::string m_list = "1,2,4,8,16,32,64,128,256";
  std::string eps;
  std::size_t seeds = 10;
  std::string p_list = "1,2,4,8,16,32,64";
  std::string law_path;
  std::string hw_path;
  std::string catalogue_path;
  std::optional<double> budget;
  std::string out_dir = ".";
  std::uint64_t seed = kDefaultSeed;
  std::vector<std::string> sets;
  std::vector<std::string> inputs;
  unsigned threads = 0;
  bool weighted = false;
};

unsigned thread_count(const Options& o) {
  if (o.threads > 0) return o.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

LawParams load_law(const Options& o, const Overrides& set) {
  LawParams law;
  bool have = false;
  if (!o.law_path.empty()) {
    law = io::read_law(o.law_path);
    have = true;
  }
  if (auto v = set.number("n_inf")) law.n_inf = *v;
  if (auto v = set.number("alpha")) law.alpha = *v;
  if (!have && !(set.has("n_inf") && set.has("alpha")))
    throw InputError("missing required input: --law or --set n_inf=...,alpha=...");
  return law;
}

HardwareParamsd load_hw(const Options& o, const Overrides& set, bool required = true) {
  HardwareParamsd hw;
  bool have = false;
  if (!o.hw_path.empty()) {
    hw = io::read_hw(o.hw_path);
    have = true;
  } else {
    hw.comm_kind = CommKind::allreduce_constant;
  }
  if (auto v = set.number("gamma")) hw.gamma = *v;
  hw.m_t = set.integer_or("m_t", hw.m_t);
  if (auto v = set.number("delta")) hw.delta = *v;
  if (auto v = set.text("comm")) hw.comm_kind = parse_comm_kind(*v);
  if (required && !have && !(set.has("gamma") && set.has("m_t") && set.has("delta")))
    throw InputError("missing required input: --hw or --set gamma=...,m_t=...,delta=...");
  if (!(hw.gamma > 0.0) || hw.m_t < 1 || hw.delta < 0.0)
    throw InputError("hardware parameters need gamma > 0, m_t >= 1 and delta >= 0");
  return hw;
}

std::vector<std::int64_t> learner_list(const Options& o) {
  auto ps = parse_list<std::int64_t>(o.p_list, "--P");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i] < 1) throw InputError("--P entries must be >= 1");
    if (i > 0 && ps[i] <= ps[i - 1]) throw InputError("--P must be increasing");
  }
  return ps;
}

int cmd_simulate(const Options& o, const Overrides& set, std::ostream& out) {
  ProblemOptions po;
  po.kind = parse_problem_kind(o.problem);
  po.dimension = int(set.integer_or("dim", po.dimension));
  po.curvature = set.number_or("L", po.curvature);
  po.condition = set.number_or("condition", po.condition);
  po.noise_scale = set.number_or("phi", po.kind == ProblemKind::logistic ? 0.0 : 0.12);
  po.dataset_size = std::size_t(set.integer_or("dataset", std::int64_t(po.dataset_size)));
  po.data_seed = std::uint64_t(set.integer_or("data_seed", std::int64_t(po.data_seed)));
  po.l2 = set.number_or("l2", po.l2);
  const Problem problem(po);

  SgdConfig cfg;
  cfg.eta = set.number_or("eta", 0.1);
  cfg.radius = set.number_or("radius", 1.0);
  cfg.max_updates = std::uint64_t(set.integer_or("max_updates", std::int64_t(cfg.max_updates)));

  const auto ms = parse_list<std::size_t>(o.m_list, "--M");
  const auto epsilons = parse_list<double>(o.eps.empty() ? "0.01" : o.eps, "--eps");
  if (o.seeds == 0) throw InputError("--seeds must be positive");
  const auto seeds = seed_range(o.seed, o.seeds);

  std::vector<RunRecord> records;
  for (double eps : epsilons) {
    cfg.epsilon = eps;
    for (const auto& row : sweep(problem, cfg, ms, seeds, thread_count(o)))
      records.insert(records.end(), row.records.begin(), row.records.end());
  }
  const fs::path path = fs::path(o.out_dir) / "runs.csv";
  io::atomic_write(path, io::runs_csv(records));
  out << "simulate: " << records.size() << " runs (" << to_string(po.kind) << ", "
      << ms.size() << " batch sizes x " << seeds.size() << " seeds x " << epsilons.size()
      << " epsilons) -> " << path.string() << "\n";
  return kExitOk;
}

int cmd_fit(const Options& o, std::ostream& out, std::ostream& err) {
  std::vector<fs::path> inputs(o.inputs.begin(), o.inputs.end());
  if (inputs.empty()) inputs.push_back(fs::path(o.out_dir) / "runs.csv");

  std::vector<RunRecord> runs;
  std::vector<Timing> timings;
  for (const auto& path : inputs) {
    const std::string header = io::header_line(path);
    if (header == io::kRunsHeader) {
      auto r = io::read_runs(path);
      runs.insert(runs.end(), r.begin(), r.end());
    } else if (header == io::kTimingsHeader) {
      auto t = io::read_timings(path);
      timings.insert(timings.end(), t.begin(), t.end());
    } else {
      throw InputError(path.string() + ":1: unrecognised header '" + header + "'");
    }
  }
  std::string summary = "fit:";

  if (!runs.empty()) {
    std::map<double, std::vector<RunRecord>> by_eps;
    for (const auto& r : runs) by_eps[r.epsilon].push_back(r);

    std::vector<LawParams> laws;
    for (const auto& [eps, records] : by_eps) {
      const AggregatedRuns agg = aggregate_runs(records);
      if (agg.points.empty())
        throw ModelError("no converged runs at epsilon " + io::format_double(eps));
      std::vector<double> weights;
      bool degenerate = false;
      if (o.weighted) {
        for (std::size_t i = 0; i < agg.points.size(); ++i) {
          if (agg.variances[i] > 0.0)
            weights.push_back(double(agg.counts[i]) / agg.variances[i]);
          else
            degenerate = true;
        }
      }
      LawParams law = o.weighted && !degenerate
                          ? fit_inverse_law(agg.points, eps, std::span<const double>(weights))
                          : fit_inverse_law(agg.points, eps);
      if (o.weighted && degenerate) law.flags.emplace_back("weights-degenerate");
      if (agg.dropped_unconverged > 0) law.flags.emplace_back("unconverged-runs-dropped");
      laws.push_back(std::move(law));
    }

    double target = laws.front().epsilon;  // smallest epsilon
    if (!o.eps.empty()) {
      const auto requested = parse_list<double>(o.eps, "--eps");
      if (requested.size() != 1) throw InputError("fit: --eps selects a single epsilon");
      target = requested.front();
    }
    const auto chosen = std::find_if(laws.begin(), laws.end(),
                                     [&](const LawParams& l) { return l.epsilon == target; });
    if (chosen == laws.end())
      throw InputError("fit: no runs at epsilon " + io::format_double(target));
    io::atomic_write(fs::path(o.out_dir) / "law.json", io::law_json(*chosen));
    summary += " n_inf=" + io::format_double(chosen->n_inf) +
               " alpha=" + io::format_double(chosen->alpha) +
               " r_squared=" + io::format_double(chosen->r_squared);

    if (laws.size() > 1) {
      std::vector<LawParams> descending(laws.rbegin(), laws.rend());
      io::atomic_write(fs::path(o.out_dir) / "laws.csv", io::laws_csv(descending));
      if (laws.size() >= 3) {
        try {
          const EpsilonLaw el = fit_epsilon_dependence(laws);
          io::atomic_write(fs::path(o.out_dir) / "epsilon_law.json", io::epsilon_law_json(el));
          summary += " slope_ninf=" + io::format_double(el.slope_ninf);
        } catch (const InputError& e) {
          err << "warning: epsilon study skipped: " << e.what() << "\n";
        }
      }
    }
  }

  if (!timings.empty()) {
    const HardwareFit hw = fit_hardware(timings);
    io::atomic_write(fs::path(o.out_dir) / "hw.json", io::hw_json(hw.params));
    summary += " gamma=" + io::format_double(hw.params.gamma) +
               " m_t=" + std::to_string(hw.params.m_t) +
               " delta=" + io::format_double(hw.params.delta) + " comm=" +
               to_string(hw.params.comm_kind);
    for (const auto& f : hw.flags) summary += " [" + f + "]";
  }
  out << summary << "\n";
  return kExitOk;
}

int cmd_plan(const Options& o, const Overrides& set, std::ostream& out) {
  const LawParams law = load_law(o, set);
  const HardwareParamsd hw = load_hw(o, set);
  std::vector<Pland> plans;
  for (std::int64_t p : learner_list(o)) {
    const Pland plan = t_conv_optimal(p, law.law(), hw);
    plans.push_back(plan);
    const double lo = std::max(1.0, std::floor(plan.m_opt));
    const double hi = std::ceil(plan.m_opt);
    out << "P=" << p << " m_opt=" << io::format_double(plan.m_opt)
        << " t_conv=" << io::format_double(plan.t_conv) << " " << to_string(plan.regime)
        << (plan.closed_form ? "" : " (numeric)") << " | M=" << io::format_double(lo)
        << " t_conv=" << io::format_double(t_conv(lo, p, law.law(), hw));
    if (hi != lo)
      out << " | M=" << io::format_double(hi)
          << " t_conv=" << io::format_double(t_conv(hi, p, law.law(), hw));
    out << "\n";
  }
  const fs::path path = fs::path(o.out_dir) / "plan.csv";
  io::atomic_write(path, io::plan_csv(plans));
  out << "plan: " << plans.size() << " rows -> " << path.string() << "\n";
  return kExitOk;
}

int cmd_scale(const Options& o, const Overrides& set, std::ostream& out) {
  const LawParams law = load_law(o, set);
  const HardwareParamsd hw = load_hw(o, set);
  ScalingConfig cfg;
  cfg.m_strong = set.integer_or("m_strong", 256);
  cfg.m_per_learner = set.integer_or("m_per_learner", hw.m_t);
  const auto ps = learner_list(o);
  const auto rows = scaling_curves<double>(ps, law.law(), hw, cfg);
  const fs::path path = fs::path(o.out_dir) / "scaling.csv";
  io::atomic_write(path, io::scaling_csv(rows));
  out << "scale: " << rows.size() << " rows (M_Strong=" << cfg.m_strong
      << ", m=" << cfg.m_per_learner << ") -> " << path.string() << "\n";
  return kExitOk;
}

int cmd_bound(const Options& o, const Overrides& set, std::ostream& out) {
  BoundParamsd bp;
  if (set.has("eta")) {
    const double eta = *set.number("eta");
    const double lip = set.number_or("L", 1.0);
    const double phi = set.number_or("phi", 0.0);
    const double dist0 = set.number_or("dist0", 1.0);
    const double delta0 = set.number_or("delta0", 0.5 * lip * dist0 * dist0);
    bp = bound_params_from_primitives(eta, lip, phi, delta0, dist0);
  } else {
    bp.lambda = set.number_or("lambda", 0.1);
    bp.sigma = set.number_or("sigma", 0.1);
    bp.delta0 = set.number_or("delta0", 1.0);
    bp.theta = set.number_or("theta", bp.sigma * bp.sigma);
    validate(bp);
  }
  const auto k_max = std::uint64_t(set.integer_or("k_max", 1000));
  const auto epsilons = parse_list<double>(o.eps.empty() ? "0.1" : o.eps, "--eps");
  if (epsilons.size() != 1) throw InputError("bound: --eps takes a single value");
  const double eps = epsilons.front();

  std::string curve = std::string(io::kBoundHeader) + "\n";
  for (std::uint64_t k = 0; k <= k_max; ++k) {
    const double limit = gd_limit(k, bp.lambda, bp.delta0);
    const double bound = bp.sigma > 0.0 ? residual_bound(k, bp) : limit;
    curve += std::to_string(k) + "," + io::format_double(bound) + "," +
             io::format_double(limit) + "\n";
  }
  std::string nbound = std::string(io::kNBoundHeader) + "\n";
  for (std::size_t m : parse_list<std::size_t>(o.m_list, "--M")) {
    BoundParamsd at_m = bp;
    at_m.sigma = std::sqrt(bp.theta / double(m));
    double exact = INFINITY;
    if (at_m.sigma > 0.0 && eps > at_m.sigma)
      exact = n_update_lower_bound_exact(eps, at_m);
    else if (at_m.sigma == 0.0)
      exact = (1.0 / eps - 1.0 / bp.delta0) / bp.lambda;
    const auto taylor = n_update_lower_bound_taylor(eps, bp.lambda, bp.delta0, bp.theta, double(m));
    nbound += std::to_string(m) + "," + io::format_double(exact) + "," +
              io::format_double(taylor.value) + "\n";
  }
  io::atomic_write(fs::path(o.out_dir) / "bound.csv", curve);
  io::atomic_write(fs::path(o.out_dir) / "nbound.csv", nbound);
  out << "bound: lambda=" << io::format_double(bp.lambda) << " sigma=" << io::format_double(bp.sigma)
      << " delta0=" << io::format_double(bp.delta0) << " theta=" << io::format_double(bp.theta)
      << " -> bound.csv, nbound.csv\n";
  return kExitOk;
}

// Catalogue JSON: {"compute": [{"gamma", "cost", "P"?}], "bandwidth": [{"delta", "cost"}]}
// or {"options": [{"gamma", "cost_compute", "delta", "cost_bandwidth", "P"}]}.
std::vector<DesignOption> load_catalogue(const Options& o, std::int64_t default_p) {
  json j;
  if (o.catalogue_path.empty()) {
    j = json::parse(R"({"compute":[{"gamma":1e-4,"cost":50},{"gamma":5e-5,"cost":80}],
                        "bandwidth":[{"delta":0.01,"cost":50},{"delta":0.005,"cost":80}]})");
  } else {
    std::ifstream in(o.catalogue_path);
    if (!in) throw InputError("cannot open " + o.catalogue_path);
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw InputError(o.catalogue_path + ": " + e.what());
    }
  }
  try {
    if (j.contains("options")) {
      std::vector<DesignOption> options;
      for (const auto& x : j.at("options"))
        options.push_back({x.at("gamma").get<double>(), x.at("cost_compute").get<double>(),
                           x.at("delta").get<double>(), x.at("cost_bandwidth").get<double>(),
                           x.value("P", default_p)});
      return options;
    }
    std::vector<ComputeChoice> compute;
    for (const auto& x : j.at("compute"))
      compute.push_back({x.at("gamma").get<double>(), x.at("cost").get<double>(),
                         x.value("P", default_p)});
    std::vector<BandwidthChoice> bandwidth;
    for (const auto& x : j.at("bandwidth"))
      bandwidth.push_back({x.at("delta").get<double>(), x.at("cost").get<double>()});
    return combine_catalogue(compute, bandwidth);
  } catch (const json::exception& e) {
    throw InputError("design catalogue: " + std::string(e.what()));
  }
}

int cmd_design(const Options& o, const Overrides& set, std::ostream& out) {
  const LawParams law = load_law(o, set);
  HardwareParamsd base;
  base.comm_kind = CommKind::allreduce_constant;
  if (!o.hw_path.empty()) base = io::read_hw(o.hw_path);
  base.m_t = set.integer_or("m_t", base.m_t);
  if (auto v = set.text("comm")) base.comm_kind = parse_comm_kind(*v);
  if (base.m_t < 1) throw InputError("m_t must be >= 1");

  const auto ps = learner_list(o);
  if (ps.size() != 1) throw InputError("design: --P takes a single learner count");
  if (!o.budget) throw InputError("missing required input: --budget");
  const auto options = load_catalogue(o, ps.front());
  const DesignResult result = design_balance(options, *o.budget, law.law(), base);

  json report;
  report["winner"] = {{"index", result.winner},
                      {"gamma", result.option.gamma},
                      {"delta", result.option.delta},
                      {"P", result.option.p},
                      {"cost", result.option.cost()},
                      {"m_opt", result.plan.m_opt},
                      {"t_conv", result.plan.t_conv},
                      {"regime", to_string(result.plan.regime)}};
  json all = json::array();
  for (std::size_t i = 0; i < options.size(); ++i) {
    json row = {{"gamma", options[i].gamma}, {"delta", options[i].delta}, {"P", options[i].p},
                {"cost", options[i].cost()}, {"feasible", options[i].cost() <= *o.budget}};
    row["t_conv"] = std::isnan(result.t_conv[i]) ? json(nullptr) : json(result.t_conv[i]);
    all.push_back(row);
  }
  report["options"] = all;
  json neighbours = json::array();
  for (const auto& n : result.neighbours) {
    json row = {{"option", n.option}, {"delta_t", n.delta_t}, {"delta_cost", n.delta_cost},
                {"feasible", n.feasible}};
    row["ratio"] = std::isnan(n.ratio) ? json(nullptr) : json(n.ratio);
    neighbours.push_back(row);
  }
  report["marginal_ratios"] = neighbours;
  report["budget"] = *o.budget;
  const fs::path path = fs::path(o.out_dir) / "design.json";
  io::atomic_write(path, report.dump(2) + "\n");
  out << "design: gamma=" << io::format_double(result.option.gamma)
      << " delta=" << io::format_double(result.option.delta) << " P=" << result.option.p
      << " cost=" << io::format_double(result.option.cost())
      << " t_conv=" << io::format_double(result.plan.t_conv) << " -> " << path.string() << "\n";
  return kExitOk;
}

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  while (!text.empty() && text.back() == ' ') text.pop_back();
  return text;
}

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mini-batch SGD training-time model: simulate, fit, plan, scale, bound, design",
               "sgdperf"};
  app.require_subcommand(1, 1);
  Options o;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--set", o.sets, "Model parameter override key=value (repeatable)");
  };
  auto law_hw = [&](CLI::App* cmd) {
    cmd->add_option("--law", o.law_path, "law.json input");
    cmd->add_option("--hw", o.hw_path, "hw.json input");
    cmd->add_option("--P", o.p_list, "Comma list of learner counts")->capture_default_str();
  };

  CLI::App* simulate = app.add_subcommand("simulate", "Run a mini-batch SGD sweep, write runs.csv");
  simulate->add_option("--problem", o.problem, "quadratic | logistic | noisy-quadratic")
      ->capture_default_str();
  simulate->add_option("--M", o.m_list, "Comma list of mini-batch sizes")->capture_default_str();
  simulate->add_option("--eps", o.eps, "Target residual, scalar or comma list (default 0.01)");
  simulate->add_option("--seeds", o.seeds, "Seeds per mini-batch size")->capture_default_str();
  simulate->add_option("--seed", o.seed, "First seed")->capture_default_str();
  simulate->add_option("--threads", o.threads, "Worker threads (0 = hardware)");
  common(simulate);

  CLI::App* fit = app.add_subcommand("fit", "Fit law.json from runs.csv and/or hw.json from timings.csv");
  fit->add_option("inputs", o.inputs, "runs.csv / timings.csv files (default <out>/runs.csv)");
  fit->add_option("--eps", o.eps, "Epsilon whose fit goes to law.json (default smallest)");
  fit->add_flag("--weighted", o.weighted, "Inverse-variance weights from seed spread");
  common(fit);

  CLI::App* plan = app.add_subcommand("plan", "Optimal mini-batch per learner count, write plan.csv");
  law_hw(plan);
  common(plan);

  CLI::App* scale = app.add_subcommand("scale", "Strong/weak/optimal scaling curves, write scaling.csv");
  law_hw(scale);
  common(scale);

  CLI::App* bound = app.add_subcommand("bound", "Convergence bound curves, write bound.csv and nbound.csv");
  bound->add_option("--eps", o.eps, "Target residual (default 0.1)");
  bound->add_option("--M", o.m_list, "Comma list of mini-batch sizes")->capture_default_str();
  common(bound);

  CLI::App* design = app.add_subcommand("design", "Budgeted compute/bandwidth search, write design.json");
  law_hw(design);
  design->add_option("--budget", o.budget, "Total cost budget");
  design->add_option("--catalogue", o.catalogue_path, "Catalogue JSON (default: built-in example)");
  common(design);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return kExitInputError;
  }

  try {
    const Overrides set(o.sets);
    if (*simulate) return cmd_simulate(o, set, out);
    if (*fit) return cmd_fit(o, out, err);
    if (*plan) {
      if (plan->count("--P") == 0) o.p_list = "1,2,4,8,16,32,64";
      return cmd_plan(o, set, out);
    }
    if (*scale) return cmd_scale(o, set, out);
    if (*bound) return cmd_bound(o, set, out);
    if (*design) {
      if (design->count("--P") == 0) o.p_list = "4";
      return cmd_design(o, set, out);
    }
  } catch (const ModelError& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return kExitModelError;
  } catch (const std::exception& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}

}  // namespace sgdperf
