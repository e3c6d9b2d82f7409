#pragma once

// Empirical condition numbers and singular spectra of feature matrices, the
// concentration bounds they are checked against, and Monte-Carlo coverage
// experiments over seeded trials.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mifs/latent_model.hpp"
#include "mifs/rng.hpp"
#include "mifs/skipstack.hpp"

namespace mifs {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Eigenvalues below this fraction of lambda_max count as numerically zero.
inline constexpr double kRankTolerance = 1e-12;

struct ConditionReport {
  double beta_empirical = kInfinity;  // lambda_max / lambda_min of (1/T) P P^T
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  double bound_upper = kInfinity;
  double bound_lower = 1.0;
  double delta_tau = 0.0;
  double t_min_required = 0.0;
  bool within_bounds = false;

  bool rank_deficient() const { return beta_empirical == kInfinity; }
};

/// Empirical fields only. Rejects T < k.
ConditionReport condition_number(const Eigen::MatrixXd& p);

double delta_tau(int k, double total_features, double c, double delta);
double min_feature_count(int k, double c, double delta);

/// Fixed-skip sandwich. Bound fields only.
ConditionReport theorem1_bounds(double gamma1, double gammak, double c, double tau, int k, std::size_t t,
                                double delta);

/// Multi-skip sandwich over the schedule's active levels, weighted by T_l / sum T_l.
/// Expressed on the same scale as theorem1_bounds, so a one-level schedule
/// reproduces it exactly.
ConditionReport theorem2_bounds(const std::vector<double>& gammas, double c, const SkipSchedule& schedule,
                                double delta);

/// True when beta lies inside [bound_lower, bound_upper]; an infinite upper
/// bound admits every beta, including an infinite one.
bool within_sandwich(double beta, double lower, double upper);

struct CorollaryBound {
  double exponential = 0.0;  // (1+c) exp(gamma1/tau)^m
  double polynomial = 0.0;   // (1+c) (1 + gamma1/tau)^m
};
CorollaryBound corollary1_lower(int m, double gamma1, double tau, double c);

/// Matrix Bernstein right-hand side sqrt(2 B |E S| L) + B L / 3 with
/// L = log(2p / delta), clamped at zero.
double bernstein_bound(double b, double norm_es, int p_dim, std::size_t n, double delta);

enum class VectorSampler {
  rademacher,  // coordinates +-sqrt(B/p)
  fixed,       // every vector equals sqrt(B/p) * ones
};

struct BernsteinSample {
  std::vector<double> deviations;  // |S - E S| per trial
  double norm_es = 0.0;
  double b = 0.0;
  int p_dim = 0;
  std::size_t n = 0;
};

BernsteinSample bernstein_deviations(int p_dim, std::size_t n, double b, std::size_t trials, const Rng& rng,
                                     VectorSampler sampler = VectorSampler::rademacher, unsigned threads = 1);
double exceedance_rate(const BernsteinSample& sample, double delta);
double bernstein_coverage_test(int p_dim, std::size_t n, double b, double delta, std::size_t trials, const Rng& rng,
                               VectorSampler sampler = VectorSampler::rademacher, unsigned threads = 1);

struct SpectrumCurve {
  std::vector<double> sigmas;  // top singular values divided by the largest
  std::string level_label;
};

/// Top-`count` normalized singular values, via the eigen-decomposition of the
/// smaller Gram matrix. Fewer values are returned when min(rows, cols) < count.
SpectrumCurve spectrum_curve(const Eigen::MatrixXd& m, std::string label = {}, int count = 10);

struct CoverageTrial {
  std::size_t trial = 0;
  double beta = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool within = false;
};

struct CoverageSummary {
  std::vector<CoverageTrial> trials;
  double coverage = 0.0;
  double mean_beta = 0.0;
  double var_beta = 0.0;  // unbiased sample variance
  std::size_t infinite = 0;
  ConditionReport bounds;
};

/// Fixed skip with an explicit column count (0 = floor(1/tau)).
struct FixedSkip {
  double tau = 0.0;
  std::size_t columns = 0;
};

/// At least 100 trials. Trial i samples P from rng.derive(i); the summary is independent of the
/// thread count. Noise is never applied (the bounds concern P alone).
CoverageSummary coverage_experiment(const LatentModel& model, const FixedSkip& skip, double delta, std::size_t trials,
                                    const Rng& rng, unsigned threads = 1);
CoverageSummary coverage_experiment(const LatentModel& model, const SkipSchedule& schedule, double delta,
                                    std::size_t trials, const Rng& rng, unsigned threads = 1);

struct BootstrapComparison {
  double mean_smaller = 0.0;      // fraction of resamples with mean(a) < mean(b)
  double variance_smaller = 0.0;  // fraction with var(a) < var(b)
};

/// Paired bootstrap over trial indices.
BootstrapComparison paired_bootstrap(const std::vector<double>& a, const std::vector<double>& b,
                                     std::size_t resamples, Rng rng);

}  // namespace mifs
