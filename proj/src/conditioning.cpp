#include "mifs/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mifs/error.hpp"
#include "mifs/parallel.hpp"

namespace mifs {

namespace {

void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
}

// Bound fields from the two moment terms shared by both sandwich forms.
ConditionReport sandwich(double top, double bottom, int k, double total, double c, double delta) {
  const double t_min = min_feature_count(k, c, delta);
  if (total < t_min) {
    std::ostringstream msg;
    msg << "too few feature points: T = " << total << " but the bound needs T >= " << t_min;
    throw ValidationError(msg.str());
  }
  ConditionReport report;
  report.delta_tau = delta_tau(k, total, c, delta);
  report.t_min_required = t_min;
  const double denominator = bottom - report.delta_tau;
  report.bound_upper = denominator > 0.0 ? (top + report.delta_tau) / denominator : kInfinity;
  report.bound_lower = std::max(1.0, (top - report.delta_tau) / (bottom + report.delta_tau));
  return report;
}

std::pair<double, double> mean_and_variance(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (!std::isfinite(mean)) return {mean, kInfinity};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, v.size() > 1 ? ss / (n - 1.0) : 0.0};
}

template <class Sampler>
CoverageSummary run_coverage(const ConditionReport& bounds, std::size_t trials, const Rng& rng, unsigned threads,
                             Sampler&& sample) {
  if (trials < 100) throw ValidationError("coverage experiment needs at least 100 trials");
  CoverageSummary summary;
  summary.bounds = bounds;
  summary.trials.resize(trials);
  parallel_for(trials, threads, [&](std::size_t i) {
    Rng trial_rng = rng.derive(i);
    const Eigen::MatrixXd p = sample(trial_rng);
    const ConditionReport empirical = condition_number(p);
    summary.trials[i] = CoverageTrial{i, empirical.beta_empirical, bounds.bound_lower, bounds.bound_upper,
                                      within_sandwich(empirical.beta_empirical, bounds.bound_lower,
                                                      bounds.bound_upper)};
  });
  std::vector<double> betas;
  betas.reserve(trials);
  std::size_t inside = 0;
  for (const auto& t : summary.trials) {
    betas.push_back(t.beta);
    inside += t.within ? 1 : 0;
    summary.infinite += std::isinf(t.beta) ? 1 : 0;
  }
  summary.coverage = static_cast<double>(inside) / static_cast<double>(trials);
  std::tie(summary.mean_beta, summary.var_beta) = mean_and_variance(betas);
  return summary;
}

}  // namespace

ConditionReport condition_number(const Eigen::MatrixXd& p) {
  const Eigen::Index k = p.rows();
  const Eigen::Index t = p.cols();
  if (k < 1) throw ValidationError("feature matrix has no rows");
  if (t < k) throw ValidationError("feature matrix needs T >= k columns (T=" + std::to_string(t) + ", k=" +
                                   std::to_string(k) + ")");
  const Eigen::MatrixXd gram = (p * p.transpose()) / static_cast<double>(t);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  ConditionReport report;
  report.lambda_max = std::max(0.0, eig.eigenvalues().maxCoeff());
  report.lambda_min = std::max(0.0, eig.eigenvalues().minCoeff());
  if (report.lambda_max > 0.0 && report.lambda_min >= kRankTolerance * report.lambda_max)
    report.beta_empirical = report.lambda_max / report.lambda_min;
  else
    report.beta_empirical = kInfinity;
  return report;
}

double delta_tau(int k, double total_features, double c, double delta) {
  return 2.0 * std::sqrt(k * (1.0 / total_features) * (1.0 + c) * std::log(2.0 * k / delta));
}

double min_feature_count(int k, double c, double delta) {
  return k * std::log(2.0 * k / delta) / (9.0 * (1.0 + c));
}

ConditionReport theorem1_bounds(double gamma1, double gammak, double c, double tau, int k, std::size_t t,
                                double delta) {
  if (!(gamma1 > 0.0) || !(gammak >= gamma1)) throw ValidationError("need 0 < gamma1 <= gammak");
  if (!(c >= 0.0 && c < 1.0)) throw ValidationError("c must lie in [0, 1)");
  if (!(tau > 0.0)) throw ValidationError("tau must be positive");
  if (k < 1) throw ValidationError("k must be at least 1");
  check_delta(delta);
  return sandwich((1.0 + c) * std::exp(-gamma1 / tau), std::exp(-gammak / tau), k, static_cast<double>(t), c, delta);
}

ConditionReport theorem2_bounds(const std::vector<double>& gammas, double c, const SkipSchedule& schedule,
                                double delta) {
  if (gammas.empty()) throw ValidationError("gammas must be non-empty");
  if (!std::is_sorted(gammas.begin(), gammas.end())) throw ValidationError("gammas must be sorted non-decreasing");
  if (!(c >= 0.0 && c < 1.0)) throw ValidationError("c must lie in [0, 1)");
  check_delta(delta);
  const double total = static_cast<double>(schedule.total_budget());
  double top = 0.0;
  double bottom = 0.0;
  for (int l : schedule.active_levels()) {
    const double weight = static_cast<double>(schedule.budget(l)) / total;
    top += weight * (1.0 + c) * std::exp(-gammas.front() / schedule.tau(l));
    bottom += weight * std::exp(-gammas.back() / schedule.tau(l));
  }
  return sandwich(top, bottom, static_cast<int>(gammas.size()), total, c, delta);
}

bool within_sandwich(double beta, double lower, double upper) {
  return beta >= lower && (std::isinf(upper) || beta <= upper);
}

CorollaryBound corollary1_lower(int m, double gamma1, double tau, double c) {
  if (m < 0) throw ValidationError("m must be non-negative");
  if (!(tau > 0.0)) throw ValidationError("tau must be positive");
  const double x = gamma1 / tau;
  return CorollaryBound{(1.0 + c) * std::pow(std::exp(x), m), (1.0 + c) * std::pow(1.0 + x, m)};
}

double bernstein_bound(double b, double norm_es, int p_dim, std::size_t /*n*/, double delta) {
  const double log_term = std::max(0.0, std::log(2.0 * p_dim / delta));
  return std::sqrt(2.0 * b * norm_es * log_term) + b / 3.0 * log_term;
}

BernsteinSample bernstein_deviations(int p_dim, std::size_t n, double b, std::size_t trials, const Rng& rng,
                                     VectorSampler sampler, unsigned threads) {
  if (p_dim < 1 || n < 1 || !(b > 0.0)) throw ValidationError("bernstein test needs p, n, B > 0");
  BernsteinSample sample;
  sample.p_dim = p_dim;
  sample.n = n;
  sample.b = b;
  const double scale = std::sqrt(b / p_dim);
  // E{x x^T} = (B/p) I for both samplers' coordinate magnitudes; the fixed
  // sampler's expectation is the rank-one matrix it always produces.
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(p_dim, p_dim);
  if (sampler == VectorSampler::rademacher)
    expected.diagonal().setConstant(static_cast<double>(n) * b / p_dim);
  else
    expected.setConstant(static_cast<double>(n) * b / p_dim);
  sample.norm_es = sampler == VectorSampler::rademacher ? static_cast<double>(n) * b / p_dim : static_cast<double>(n) * b;

  sample.deviations.resize(trials);
  parallel_for(trials, threads, [&](std::size_t i) {
    Rng trial_rng = rng.derive(i);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(p_dim, p_dim);
    Eigen::VectorXd x(p_dim);
    for (std::size_t j = 0; j < n; ++j) {
      for (int r = 0; r < p_dim; ++r) x(r) = sampler == VectorSampler::rademacher ? scale * trial_rng.rademacher() : scale;
      s.selfadjointView<Eigen::Lower>().rankUpdate(x);
    }
    Eigen::MatrixXd deviation = s.selfadjointView<Eigen::Lower>();
    deviation -= expected;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(deviation, Eigen::EigenvaluesOnly);
    sample.deviations[i] = eig.eigenvalues().cwiseAbs().maxCoeff();
  });
  return sample;
}

double exceedance_rate(const BernsteinSample& sample, double delta) {
  const double bound = bernstein_bound(sample.b, sample.norm_es, sample.p_dim, sample.n, delta);
  const auto over = std::count_if(sample.deviations.begin(), sample.deviations.end(),
                                  [bound](double dev) { return dev > bound; });
  return static_cast<double>(over) / static_cast<double>(sample.deviations.size());
}

double bernstein_coverage_test(int p_dim, std::size_t n, double b, double delta, std::size_t trials, const Rng& rng,
                               VectorSampler sampler, unsigned threads) {
  if (trials < 100) throw ValidationError("bernstein coverage test needs at least 100 trials");
  return exceedance_rate(bernstein_deviations(p_dim, n, b, trials, rng, sampler, threads), delta);
}

SpectrumCurve spectrum_curve(const Eigen::MatrixXd& m, std::string label, int count) {
  if (m.cols() < count) throw ValidationError("spectrum needs at least " + std::to_string(count) + " columns");
  if (m.cwiseAbs().maxCoeff() == 0.0) throw ValidationError("spectrum of an all-zero matrix is undefined");
  const Eigen::MatrixXd gram = m.rows() <= m.cols() ? Eigen::MatrixXd(m * m.transpose())
                                                    : Eigen::MatrixXd(m.transpose() * m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  const Eigen::VectorXd& ev = eig.eigenvalues();  // ascending
  const Eigen::Index available = std::min<Eigen::Index>(count, ev.size());
  SpectrumCurve curve;
  curve.level_label = std::move(label);
  const double top = std::sqrt(std::max(0.0, ev(ev.size() - 1)));
  for (Eigen::Index i = 0; i < available; ++i)
    curve.sigmas.push_back(std::sqrt(std::max(0.0, ev(ev.size() - 1 - i))) / top);
  curve.sigmas.front() = 1.0;
  return curve;
}

CoverageSummary coverage_experiment(const LatentModel& model, const FixedSkip& skip, double delta, std::size_t trials,
                                    const Rng& rng, unsigned threads) {
  const std::size_t columns =
      skip.columns > 0 ? skip.columns : static_cast<std::size_t>(std::floor(1.0 / skip.tau + 1e-9));
  const ConditionReport bounds =
      theorem1_bounds(model.gammas.front(), model.gammas.back(), model.c, skip.tau, model.k, columns, delta);
  FeatureOptions options;
  options.columns = skip.columns;
  options.observe = false;
  return run_coverage(bounds, trials, rng, threads, [&](Rng& trial_rng) {
    return build_feature_matrix(model, skip.tau, trial_rng, options).p;
  });
}

CoverageSummary coverage_experiment(const LatentModel& model, const SkipSchedule& schedule, double delta,
                                    std::size_t trials, const Rng& rng, unsigned threads) {
  const ConditionReport bounds = theorem2_bounds(model.gammas, model.c, schedule, delta);
  return run_coverage(bounds, trials, rng, threads, [&](Rng& trial_rng) {
    return mifs_stack(model, schedule, trial_rng, /*observe=*/false).p;
  });
}

BootstrapComparison paired_bootstrap(const std::vector<double>& a, const std::vector<double>& b,
                                     std::size_t resamples, Rng rng) {
  if (a.size() != b.size() || a.size() < 2) throw ValidationError("paired bootstrap needs equal-length samples");
  const std::size_t n = a.size();
  std::size_t mean_wins = 0;
  std::size_t var_wins = 0;
  std::vector<double> ra(n), rb(n);
  for (std::size_t r = 0; r < resamples; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t pick = rng.index(n);
      ra[i] = a[pick];
      rb[i] = b[pick];
    }
    const auto [ma, va] = mean_and_variance(ra);
    const auto [mb, vb] = mean_and_variance(rb);
    mean_wins += ma < mb ? 1 : 0;
    var_wins += va < vb ? 1 : 0;
  }
  const double total = static_cast<double>(resamples);
  return BootstrapComparison{static_cast<double>(mean_wins) / total, static_cast<double>(var_wins) / total};
}

}  // namespace mifs
