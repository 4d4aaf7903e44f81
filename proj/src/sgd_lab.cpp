#include "sgdperf/sgd_lab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "parallel.hpp"

namespace sgdperf {

namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kBatchStream = 2;
constexpr std::uint64_t kDataStream = 7;

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::VectorXd normal_vector(CounterRng& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

}  // namespace

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::quadratic:
      return "quadratic";
    case ProblemKind::logistic:
      return "logistic";
    case ProblemKind::noisy_quadratic:
      return "noisy-quadratic";
  }
  return "unknown";
}

ProblemKind parse_problem_kind(const std::string& name) {
  if (name == "quadratic") return ProblemKind::quadratic;
  if (name == "logistic") return ProblemKind::logistic;
  if (name == "noisy-quadratic" || name == "noisy_quadratic") return ProblemKind::noisy_quadratic;
  throw InputError("unknown problem kind '" + name + "'");
}

Problem::Problem(const ProblemOptions& options)
    : kind_(options.kind), noise_scale_(options.noise_scale) {
  const int d = options.dimension;
  if (d <= 0) throw InputError("problem dimension must be positive");
  if (!(options.noise_scale >= 0.0) || !std::isfinite(options.noise_scale))
    throw InputError("noise_scale must be a finite nonnegative number");
  if (kind_ != ProblemKind::noisy_quadratic && options.dataset_size == 0)
    throw InputError("dataset_size must be positive");

  CounterRng data_rng = CounterRng::stream(options.data_seed, kDataStream);

  if (kind_ == ProblemKind::logistic) {
    if (!(options.l2 > 0.0)) throw InputError("logistic l2 penalty must be positive");
    l2_ = options.l2;
    const auto n = static_cast<Eigen::Index>(options.dataset_size);
    samples_.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < d; ++j) samples_(i, j) = data_rng.normal();
    const Eigen::VectorXd teacher = normal_vector(data_rng, d) * (2.0 / std::sqrt(double(d)));
    labels_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
      labels_[i] = data_rng.uniform() < sigmoid(samples_.row(i).dot(teacher)) ? 1.0 : -1.0;

    // Newton's method on the regularised mean loss; strongly convex so it
    // converges from zero in a handful of steps.
    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    for (int it = 0; it < 100; ++it) {
      Eigen::VectorXd g = l2_ * w;
      Eigen::MatrixXd h = l2_ * Eigen::MatrixXd::Identity(d, d);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double margin = labels_[i] * samples_.row(i).dot(w);
        const double s = sigmoid(-margin);
        g -= (labels_[i] * s / double(n)) * samples_.row(i).transpose();
        h += (s * (1.0 - s) / double(n)) * samples_.row(i).transpose() * samples_.row(i);
      }
      const Eigen::VectorXd dw = h.ldlt().solve(g);
      w -= dw;
      if (dw.norm() <= 1e-15 * (1.0 + w.norm())) break;
    }
    optimum_ = w;
    hessian_ = Eigen::VectorXd();
    const Eigen::MatrixXd gram = samples_.transpose() * samples_ / double(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    curvature_ = 0.25 * eig.eigenvalues().maxCoeff() + l2_;
    optimal_loss_ = 0.0;
    optimal_loss_ = loss(optimum_);
    return;
  }

  if (!(options.curvature > 0.0)) throw InputError("curvature must be positive");
  if (!(options.condition >= 1.0)) throw InputError("condition must be >= 1");
  hessian_.resize(d);
  for (int i = 0; i < d; ++i) {
    const double t = d == 1 ? 0.0 : double(i) / double(d - 1);
    hessian_[i] = options.curvature * std::pow(options.condition, -t);
  }
  curvature_ = options.curvature;
  optimum_ = Eigen::VectorXd::Zero(d);
  optimal_loss_ = 0.0;

  if (kind_ == ProblemKind::quadratic) {
    const auto n = static_cast<Eigen::Index>(options.dataset_size);
    samples_.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < d; ++j) samples_(i, j) = options.noise_scale * data_rng.normal();
    samples_.rowwise() -= samples_.colwise().mean();
  }
}

std::optional<std::size_t> Problem::dataset_size() const noexcept {
  if (kind_ == ProblemKind::noisy_quadratic) return std::nullopt;
  return static_cast<std::size_t>(samples_.rows());
}

double Problem::loss(const Eigen::VectorXd& w) const {
  if (kind_ != ProblemKind::logistic) {
    const Eigen::VectorXd e = w - optimum_;
    return 0.5 * e.dot(hessian_.cwiseProduct(e));
  }
  double total = 0.0;
  const Eigen::VectorXd margins = (samples_ * w).cwiseProduct(labels_);
  for (Eigen::Index i = 0; i < margins.size(); ++i) total += softplus(-margins[i]);
  return total / double(margins.size()) + 0.5 * l2_ * w.squaredNorm();
}

Eigen::VectorXd Problem::gradient(const Eigen::VectorXd& w) const {
  if (kind_ != ProblemKind::logistic) return hessian_.cwiseProduct(w - optimum_);
  std::vector<std::size_t> all(static_cast<std::size_t>(samples_.rows()));
  std::iota(all.begin(), all.end(), std::size_t{0});
  return batch_gradient(w, all);
}

Eigen::VectorXd Problem::batch_gradient(const Eigen::VectorXd& w,
                                        std::span<const std::size_t> indices) const {
  if (kind_ == ProblemKind::noisy_quadratic)
    throw InputError("noisy-quadratic has no per-sample gradients");
  if (indices.empty()) throw InputError("empty mini-batch");
  const double inv = 1.0 / double(indices.size());
  if (kind_ == ProblemKind::quadratic) {
    Eigen::VectorXd g = hessian_.cwiseProduct(w - optimum_);
    for (std::size_t i : indices) g += inv * samples_.row(Eigen::Index(i)).transpose();
    return g;
  }
  Eigen::VectorXd g = l2_ * w;
  for (std::size_t i : indices) {
    const auto r = Eigen::Index(i);
    const double margin = labels_[r] * samples_.row(r).dot(w);
    g -= (inv * labels_[r] * sigmoid(-margin)) * samples_.row(r).transpose();
  }
  return g;
}

Trajectory::Trajectory(const Problem& problem, const SgdConfig& config)
    : problem_(&problem),
      eta_(config.eta),
      minibatch_(config.minibatch),
      noise_rng_(CounterRng::stream(config.seed, kNoiseStream)),
      batch_rng_(CounterRng::stream(config.seed, kBatchStream)) {
  if (!(config.eta > 0.0) || !std::isfinite(config.eta)) throw InputError("eta must be positive");
  if (config.minibatch == 0) throw InputError("mini-batch size must be positive");
  if (const auto n = problem.dataset_size(); n && config.minibatch > *n)
    throw InputError("mini-batch size " + std::to_string(config.minibatch) +
                     " exceeds dataset size " + std::to_string(*n));
  if (config.initial_point) {
    if (config.initial_point->size() != problem.dimension())
      throw InputError("initial point has the wrong dimension");
    w_ = *config.initial_point;
  } else {
    if (!(config.radius > 0.0)) throw InputError("initial radius must be positive");
    CounterRng init = CounterRng::stream(config.seed, kInitStream);
    Eigen::VectorXd u = normal_vector(init, problem.dimension());
    w_ = problem.optimum() + (config.radius / u.norm()) * u;
  }
  if (const auto n = problem.dataset_size()) {
    order_.resize(*n);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }
}

Eigen::VectorXd Trajectory::stochastic_gradient() {
  if (problem_->kind() == ProblemKind::noisy_quadratic) {
    Eigen::VectorXd g = problem_->gradient(w_);
    const double scale = problem_->noise_scale() / std::sqrt(double(minibatch_));
    if (scale > 0.0)
      for (Eigen::Index i = 0; i < g.size(); ++i) g[i] += scale * noise_rng_.normal();
    return g;
  }
  // Partial Fisher-Yates: the first M entries become a uniform sample
  // without replacement whatever the current order is.
  const std::size_t n = order_.size();
  for (std::size_t i = 0; i < minibatch_; ++i)
    std::swap(order_[i], order_[i + batch_rng_.below(n - i)]);
  return problem_->batch_gradient(w_, std::span(order_).first(minibatch_));
}

void Trajectory::step() {
  w_ -= eta_ * stochastic_gradient();
  ++k_;
}

Eigen::VectorXd sample_stochastic_gradient(const Problem& problem, const Eigen::VectorXd& w,
                                           std::size_t m, std::uint64_t seed) {
  SgdConfig config;
  config.minibatch = m;
  config.seed = seed;
  config.initial_point = w;
  Trajectory t(problem, config);
  return t.stochastic_gradient();
}

RunRecord sgd_run(const Problem& problem, const SgdConfig& config) {
  if (!(config.epsilon > 0.0)) throw InputError("epsilon must be positive");
  Trajectory t(problem, config);
  RunRecord record;
  record.minibatch = config.minibatch;
  record.seed = config.seed;
  record.epsilon = config.epsilon;
  for (;;) {
    const double r = t.residual();
    if (!std::isfinite(r))
      throw DivergenceError("non-finite loss at update " + std::to_string(t.update_index()),
                            t.update_index());
    record.final_residual = r;
    if (r <= config.epsilon) {
      record.n_update = t.update_index();
      return record;
    }
    if (t.update_index() >= config.max_updates) return record;
    t.step();
  }
}

std::vector<double> residual_trajectory(const Problem& problem, const SgdConfig& config,
                                        std::uint64_t steps) {
  Trajectory t(problem, config);
  std::vector<double> out;
  out.reserve(steps + 1);
  out.push_back(t.residual());
  for (std::uint64_t k = 0; k < steps; ++k) {
    t.step();
    out.push_back(t.residual());
  }
  return out;
}

Measurement measure_n_update(const Problem& problem, const SgdConfig& config_template,
                             std::size_t m, std::span<const std::uint64_t> seeds,
                             unsigned threads) {
  if (seeds.empty()) throw InputError("seed list is empty");
  std::vector<RunRecord> records(seeds.size());
  detail::parallel_for(seeds.size(), threads, [&](std::size_t i) {
    SgdConfig config = config_template;
    config.minibatch = m;
    config.seed = seeds[i];
    records[i] = sgd_run(problem, config);
  });

  std::vector<RunRecord> converged;
  std::vector<std::uint64_t> failed;
  for (const auto& r : records) {
    if (r.converged())
      converged.push_back(r);
    else
      failed.push_back(r.seed);
  }
  if (!failed.empty())
    throw PartialResultError(std::to_string(failed.size()) + " of " +
                                 std::to_string(seeds.size()) + " seeds did not converge at M=" +
                                 std::to_string(m),
                             std::move(converged), std::move(failed), m);

  Measurement out;
  out.minibatch = m;
  double sum = 0.0;
  for (const auto& r : records) sum += double(*r.n_update);
  out.mean = sum / double(records.size());
  if (records.size() > 1) {
    double ss = 0.0;
    for (const auto& r : records) ss += (double(*r.n_update) - out.mean) * (double(*r.n_update) - out.mean);
    out.stddev = std::sqrt(ss / double(records.size() - 1));
  }
  out.records = std::move(records);
  return out;
}

std::vector<Measurement> sweep(const Problem& problem, const SgdConfig& config_template,
                               std::span<const std::size_t> minibatches,
                               std::span<const std::uint64_t> seeds, unsigned threads) {
  if (minibatches.empty()) throw InputError("mini-batch list is empty");
  for (std::size_t i = 1; i < minibatches.size(); ++i)
    if (minibatches[i] <= minibatches[i - 1])
      throw InputError("mini-batch list must be strictly increasing");

  std::vector<Measurement> rows;
  rows.reserve(minibatches.size());
  for (std::size_t m : minibatches) {
    const std::string tag = "M=" + std::to_string(m) + ": ";
    try {
      rows.push_back(measure_n_update(problem, config_template, m, seeds, threads));
    } catch (const PartialResultError& e) {
      throw PartialResultError(tag + e.what(), e.converged(), e.failed_seeds(), m);
    } catch (const DivergenceError& e) {
      throw DivergenceError(tag + e.what(), e.update());
    } catch (const InputError& e) {
      throw InputError(tag + e.what());
    }
  }
  return rows;
}

ResidualCurve residual_curve(const Problem& problem, const SgdConfig& config_template,
                             std::span<const std::uint64_t> seeds, std::uint64_t steps,
                             unsigned threads) {
  if (seeds.empty()) throw InputError("seed list is empty");
  std::vector<std::vector<double>> paths(seeds.size());
  detail::parallel_for(seeds.size(), threads, [&](std::size_t i) {
    SgdConfig config = config_template;
    config.seed = seeds[i];
    paths[i] = residual_trajectory(problem, config, steps);
  });

  const double n = double(seeds.size());
  ResidualCurve curve;
  curve.mean.assign(steps + 1, 0.0);
  curve.standard_error.assign(steps + 1, 0.0);
  for (std::uint64_t k = 0; k <= steps; ++k) {
    double sum = 0.0;
    for (const auto& p : paths) sum += p[k];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& p : paths) ss += (p[k] - mean) * (p[k] - mean);
    curve.mean[k] = mean;
    curve.standard_error[k] = seeds.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  }
  return curve;
}

std::vector<std::uint64_t> seed_range(std::uint64_t base, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  std::iota(seeds.begin(), seeds.end(), base);
  return seeds;
}

}  // namespace sgdperf
