#include "sgdperf/lawfit.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace sgdperf {

namespace {

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
};

// Weighted least squares of y on [1, x].
LineFit fit_line(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  Eigen::MatrixXd a(x.size(), 2);
  const Eigen::VectorXd sw = w.cwiseSqrt();
  a.col(0) = sw;
  a.col(1) = sw.cwiseProduct(x);
  const Eigen::VectorXd c = a.colPivHouseholderQr().solve(sw.cwiseProduct(y));
  return {c[0], c[1]};
}

double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& fitted, const Eigen::VectorXd& w) {
  const double mean = w.dot(y) / w.sum();
  const double ss_tot = w.dot((y.array() - mean).square().matrix());
  const double ss_res = w.dot((y - fitted).array().square().matrix());
  if (ss_tot == 0.0) return ss_res <= 1e-24 * (1.0 + y.squaredNorm()) ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

}  // namespace

bool LawParams::has_flag(const std::string& f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

LawParams fit_inverse_law(std::span<const LawPoint> points, double epsilon,
                          std::optional<std::span<const double>> weights) {
  if (points.size() < 2) throw InputError("inverse-law fit needs at least 2 points");
  if (weights && weights->size() != points.size())
    throw InputError("weight count does not match point count");

  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::VectorXd x(n), y(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = points[std::size_t(i)];
    if (!(p.minibatch > 0.0)) throw InputError("mini-batch sizes must be positive");
    if (!std::isfinite(p.n_update)) throw InputError("n_update values must be finite");
    x[i] = 1.0 / p.minibatch;
    y[i] = p.n_update;
    w[i] = weights ? (*weights)[std::size_t(i)] : 1.0;
    if (!(w[i] > 0.0) || !std::isfinite(w[i])) throw InputError("weights must be positive");
  }
  if (x.maxCoeff() == x.minCoeff())
    throw RankDeficiencyError("inverse-law fit needs at least 2 distinct mini-batch sizes");

  LawParams law;
  law.epsilon = epsilon;
  const LineFit line = fit_line(x, y, w);
  law.n_inf = line.intercept;
  law.alpha = line.slope;
  if (law.alpha < 0.0) {
    law.alpha = 0.0;
    law.n_inf = w.dot(y) / w.sum();
    law.flags.emplace_back("alpha-clamped");
  }
  const Eigen::VectorXd fitted = (law.n_inf + law.alpha * x.array()).matrix();
  law.r_squared = r_squared(y, fitted, w);
  if (law.n_inf < 0.0) law.flags.emplace_back("negative-n-inf");
  return law;
}

LawParams two_point_estimate(double m1, double n1, double m2, double n2) {
  if (!(m1 > 0.0) || !(m2 > 0.0)) throw InputError("mini-batch sizes must be positive");
  if (m1 == m2) throw InputError("two-point estimate needs distinct mini-batch sizes");
  LawParams law;
  law.alpha = (n1 - n2) / (1.0 / m1 - 1.0 / m2);
  law.n_inf = n1 - law.alpha / m1;
  law.r_squared = 1.0;
  if (law.alpha < 0.0) {
    law.alpha = 0.0;
    law.n_inf = 0.5 * (n1 + n2);
    law.r_squared = 0.0;
    law.flags.emplace_back("alpha-clamped");
  }
  if (law.n_inf < 0.0) law.flags.emplace_back("negative-n-inf");
  return law;
}

std::vector<LawPoint> law_points(std::span<const Measurement> rows) {
  std::vector<LawPoint> points;
  points.reserve(rows.size());
  for (const auto& r : rows) points.push_back({double(r.minibatch), r.mean});
  return points;
}

AggregatedRuns aggregate_runs(std::span<const RunRecord> records) {
  std::map<std::size_t, std::vector<double>> by_m;
  AggregatedRuns out;
  for (const auto& r : records) {
    if (!r.converged()) {
      ++out.dropped_unconverged;
      continue;
    }
    by_m[r.minibatch].push_back(double(*r.n_update));
  }
  for (const auto& [m, values] : by_m) {
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / double(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    out.points.push_back({double(m), mean});
    out.variances.push_back(values.size() > 1 ? ss / double(values.size() - 1) : 0.0);
    out.counts.push_back(values.size());
  }
  return out;
}

EpsilonLaw fit_epsilon_dependence(std::span<const LawParams> fits) {
  if (fits.size() < 3) throw InputError("epsilon study needs at least 3 fits");
  std::vector<LawParams> sorted(fits.begin(), fits.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const LawParams& a, const LawParams& b) { return a.epsilon > b.epsilon; });

  EpsilonLaw out;
  std::vector<const LawParams*> usable;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& f = sorted[i];
    if (!(f.epsilon > 0.0)) throw InputError("epsilon values must be positive");
    if (i > 0 && f.epsilon == sorted[i - 1].epsilon)
      throw InputError("duplicate epsilon in the study grid");
    if (!(f.n_inf > 0.0))
      out.excluded.push_back({f.epsilon, "nonpositive n_inf"});
    else if (!(f.alpha > 0.0))
      out.excluded.push_back({f.epsilon, "nonpositive alpha"});
    else if (f.r_squared < kEpsilonStudyMinRSquared)
      out.excluded.push_back({f.epsilon, "r_squared below 0.8"});
    else
      usable.push_back(&f);
  }
  if (usable.size() < 3)
    throw InputError("epsilon study has " + std::to_string(usable.size()) +
                     " usable fits, needs at least 3");

  const auto n = static_cast<Eigen::Index>(usable.size());
  Eigen::VectorXd log_eps(n), log_ninf(n), log_alpha(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    log_eps[i] = std::log(usable[std::size_t(i)]->epsilon);
    log_ninf[i] = std::log(usable[std::size_t(i)]->n_inf);
    log_alpha[i] = std::log(usable[std::size_t(i)]->alpha);
    out.epsilon_grid.push_back(usable[std::size_t(i)]->epsilon);
  }
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const LineFit ninf = fit_line(log_eps, log_ninf, ones);
  const LineFit alpha = fit_line(log_eps, log_alpha, ones);
  out.slope_ninf = ninf.slope;
  out.c_ninf = std::exp(ninf.intercept);
  out.slope_alpha = alpha.slope;
  out.c_alpha = std::exp(alpha.intercept);
  return out;
}

}  // namespace sgdperf
