#pragma once

// Reference implementations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "mifs/encoder.hpp"
#include "mifs/rng.hpp"

namespace oracle {

using mifs::GmmModel;
using mifs::Rng;

inline Eigen::MatrixXd gaussian(Eigen::Index n, Eigen::Index d, Rng& rng) {
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// Mean log-likelihood of a diagonal GMM written out directly, for finite differences.
inline double mean_ll(const Eigen::VectorXd& w, const Eigen::MatrixXd& mu, const Eigen::MatrixXd& sd, const Eigen::MatrixXd& x) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::vector<double> logs;
    for (Eigen::Index c = 0; c < w.size(); ++c) {
      double l = std::log(w(c));
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double z = (x(i, j) - mu(c, j)) / sd(c, j);
        l += -0.5 * z * z - std::log(sd(c, j)) - 0.5 * std::log(2.0 * std::numbers::pi);
      }
      logs.push_back(l);
    }
    const double top = *std::max_element(logs.begin(), logs.end());
    double s = 0.0;
    for (double l : logs) s += std::exp(l - top);
    total += top + std::log(s);
  }
  return total / static_cast<double>(x.rows());
}

inline GmmModel random_gmm(Eigen::Index k, Eigen::Index d, Rng& rng) {
  GmmModel g;
  g.weights.resize(k);
  for (Eigen::Index c = 0; c < k; ++c) g.weights(c) = rng.uniform(0.2, 1.0);
  g.weights /= g.weights.sum();
  g.means = gaussian(k, d, rng) * 2.0;
  g.variances.resize(k, d);
  for (Eigen::Index i = 0; i < g.variances.size(); ++i) g.variances.data()[i] = rng.uniform(0.3, 2.0);
  return g;
}

inline Eigen::MatrixXd sample_gmm(const GmmModel& g, Eigen::Index n, Rng& rng) {
  Eigen::MatrixXd x(n, g.dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    double u = rng.uniform(), acc = 0.0;
    Eigen::Index c = 0;
    for (; c + 1 < g.components(); ++c) {
      acc += g.weights(c);
      if (u < acc) break;
    }
    for (Eigen::Index j = 0; j < g.dim(); ++j) x(i, j) = g.means(c, j) + std::sqrt(g.variances(c, j)) * rng.normal();
  }
  return x;
}

// Central differences of mean_ll in the means and standard deviations, scaled
// into Fisher Vector layout.
inline Eigen::VectorXd fisher_fd(const GmmModel& g, const Eigen::MatrixXd& x, double h = 1e-5) {
  const Eigen::Index k = g.components(), d = g.dim();
  const Eigen::MatrixXd sd = g.variances.cwiseSqrt();
  Eigen::VectorXd fd(2 * k * d);
  for (Eigen::Index c = 0; c < k; ++c)
    for (Eigen::Index j = 0; j < d; ++j) {
      Eigen::MatrixXd up = g.means, dn = g.means;
      up(c, j) += h;
      dn(c, j) -= h;
      const double dmu = (mean_ll(g.weights, up, sd, x) - mean_ll(g.weights, dn, sd, x)) / (2 * h);
      Eigen::MatrixXd su = sd, sdn = sd;
      su(c, j) += h;
      sdn(c, j) -= h;
      const double dsd = (mean_ll(g.weights, g.means, su, x) - mean_ll(g.weights, g.means, sdn, x)) / (2 * h);
      fd(c * d + j) = dmu * sd(c, j) / std::sqrt(g.weights(c));
      fd((k + c) * d + j) = dsd * sd(c, j) / std::sqrt(2.0 * g.weights(c));
    }
  return fd;
}

}  // namespace oracle
