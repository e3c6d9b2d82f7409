#pragma once

// Differential feature extraction at one or several time skips, and stacking
// of the per-skip features into a single multi-skip feature set.

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mifs/latent_model.hpp"
#include "mifs/rng.hpp"

namespace mifs {

/// Levels 0..levels with skips tau_l = (l+1) * base_tau and feature budgets
/// T_l = floor(1 / tau_l). Excluded levels are skipped by extraction but keep
/// their numbering, so "L=2-0" is levels {1, 2}.
class SkipSchedule {
 public:
  SkipSchedule(double base_tau, int levels, std::vector<int> excluded = {});

  /// Schedule for a K-frame series: base_tau = 1/K.
  static SkipSchedule for_frames(int frames, int levels, std::vector<int> excluded = {});
  /// Only level `level` is active.
  static SkipSchedule single_level(double base_tau, int level);

  double base_tau() const noexcept { return base_tau_; }
  int levels() const noexcept { return levels_; }
  double tau(int level) const;
  std::size_t budget(int level) const;
  bool active(int level) const;
  std::vector<int> active_levels() const;
  const std::vector<int>& excluded() const noexcept { return excluded_; }
  std::size_t total_budget() const;
  /// "L=2", or "L=2-0" when level 0 is masked, or "l=1" for single levels.
  std::string label() const;

 private:
  double base_tau_;
  int levels_;
  std::vector<int> excluded_;
};

struct FeatureMatrix {
  Eigen::MatrixXd p;  // k x T coefficient differences, entries in {-2, 0, 2}
  Eigen::MatrixXd f;  // d x T observed features; empty when not requested
  std::vector<int> level_of_column;
  std::vector<double> tau_of_column;

  Eigen::Index columns() const { return p.cols(); }
};

struct FeatureOptions {
  std::size_t columns = 0;  // 0: floor(1/tau) on the uniform time grid
  bool observe = true;      // also form f = Xbar p + noise
  int level = 0;            // tag written into level_of_column
};

FeatureMatrix build_feature_matrix(const LatentModel& model, double tau, Rng& rng, const FeatureOptions& options = {});

/// Per-level extraction with sub-stream rng.derive(level), concatenated in
/// level order.
FeatureMatrix mifs_stack(const LatentModel& model, const SkipSchedule& schedule, const Rng& rng, bool observe = true,
                         unsigned threads = 1);

struct SeriesDescriptorSet {
  Eigen::MatrixXd descriptors;  // N x (window * channels)
  Eigen::VectorXd locations;    // N, normalized temporal centers in [0, 1]
  std::vector<int> level_of_row;

  Eigen::Index size() const { return descriptors.rows(); }
};

/// Windowed frame-difference descriptors from a K x d series. Level l keeps
/// every (l+1)-th frame before differencing.
SeriesDescriptorSet extract_series_descriptors(const Eigen::MatrixXd& series, const SkipSchedule& schedule,
                                               int window);

struct LevelCost {
  int level = 0;
  std::size_t budget = 0;
  double relative = 0.0;  // budget / level-0 budget
  bool active = true;
};

struct CostReport {
  std::vector<LevelCost> levels;
  double total_relative = 0.0;  // sum over active levels
};

CostReport level_cost_report(const SkipSchedule& schedule);

}  // namespace mifs
