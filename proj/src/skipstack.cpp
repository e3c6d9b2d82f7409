#include "mifs/skipstack.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mifs/error.hpp"
#include "mifs/parallel.hpp"

namespace mifs {

SkipSchedule::SkipSchedule(double base_tau, int levels, std::vector<int> excluded)
    : base_tau_(base_tau), levels_(levels), excluded_(std::move(excluded)) {
  if (!(base_tau > 0.0) || base_tau > 1.0) throw ValidationError("base_tau must lie in (0, 1]");
  if (levels < 0) throw ValidationError("levels must be non-negative");
  if ((levels + 1) * base_tau > 1.0 + 1e-12) {
    std::ostringstream msg;
    msg << "schedule too deep: (L+1)*base_tau = " << (levels + 1) * base_tau << " > 1";
    throw ValidationError(msg.str());
  }
  std::sort(excluded_.begin(), excluded_.end());
  excluded_.erase(std::unique(excluded_.begin(), excluded_.end()), excluded_.end());
  for (int l : excluded_)
    if (l < 0 || l > levels) throw ValidationError("excluded level " + std::to_string(l) + " outside 0..L");
  if (active_levels().empty()) throw ValidationError("schedule excludes every level");
}

SkipSchedule SkipSchedule::for_frames(int frames, int levels, std::vector<int> excluded) {
  if (frames < 1) throw ValidationError("frame count must be positive");
  return SkipSchedule(1.0 / frames, levels, std::move(excluded));
}

SkipSchedule SkipSchedule::single_level(double base_tau, int level) {
  std::vector<int> excluded;
  for (int l = 0; l < level; ++l) excluded.push_back(l);
  return SkipSchedule(base_tau, level, std::move(excluded));
}

double SkipSchedule::tau(int level) const { return (level + 1) * base_tau_; }

std::size_t SkipSchedule::budget(int level) const {
  // 1/(l+1)tau can land one ulp under an integer (e.g. 1/0.01)
  return static_cast<std::size_t>(std::floor(1.0 / tau(level) + 1e-9));
}

bool SkipSchedule::active(int level) const {
  return level >= 0 && level <= levels_ && !std::binary_search(excluded_.begin(), excluded_.end(), level);
}

std::vector<int> SkipSchedule::active_levels() const {
  std::vector<int> out;
  for (int l = 0; l <= levels_; ++l)
    if (active(l)) out.push_back(l);
  return out;
}

std::size_t SkipSchedule::total_budget() const {
  std::size_t total = 0;
  for (int l : active_levels()) total += budget(l);
  return total;
}

std::string SkipSchedule::label() const {
  const auto act = active_levels();
  if (act.size() == 1 && levels_ > 0) return "l=" + std::to_string(act.front());
  std::string out = "L=" + std::to_string(levels_);
  for (int l : excluded_) out += "-" + std::to_string(l);
  return out;
}

FeatureMatrix build_feature_matrix(const LatentModel& model, double tau, Rng& rng, const FeatureOptions& options) {
  for (int i = 0; i < model.k; ++i) flip_band(model, i, tau);  // validates tau and the band for every signal
  std::size_t columns = options.columns;
  if (columns == 0) columns = static_cast<std::size_t>(std::floor(1.0 / tau + 1e-9));
  if (columns == 0) throw ValidationError("tau yields no feature columns");

  FeatureMatrix fm;
  fm.p.resize(model.k, static_cast<Eigen::Index>(columns));
  const Eigen::Index t_count = fm.p.cols();
  if (options.columns == 0) {
    // uniform grid t_j = j * tau, all within [0, 1 - tau]
    std::vector<double> times(columns);
    for (std::size_t j = 0; j < columns; ++j) times[j] = static_cast<double>(j) * tau;
    for (int i = 0; i < model.k; ++i) {
      const auto pairs = sample_alpha_path(model, i, times, tau, rng);
      for (Eigen::Index j = 0; j < t_count; ++j) fm.p(i, j) = pairs[j].alpha_t_tau - pairs[j].alpha_t;
    }
  } else {
    // explicit column count: T i.i.d. pairs, no time grid
    for (int i = 0; i < model.k; ++i)
      for (Eigen::Index j = 0; j < t_count; ++j) {
        const MixingPair pair = sample_mixing_pair(model, i, tau, rng);
        fm.p(i, j) = pair.alpha_t_tau - pair.alpha_t;
      }
  }
  fm.level_of_column.assign(columns, options.level);
  fm.tau_of_column.assign(columns, tau);

  if (options.observe) {
    fm.f = model.xbar * fm.p;
    if (model.sigma > 0.0) {
      for (Eigen::Index j = 0; j < t_count; ++j)
        for (Eigen::Index r = 0; r < fm.f.rows(); ++r) {
          const double eps_t = rng.normal(0.0, model.sigma);
          const double eps_t_tau = rng.normal(0.0, model.sigma);
          fm.f(r, j) += eps_t_tau - eps_t;
        }
    }
  }
  return fm;
}

FeatureMatrix mifs_stack(const LatentModel& model, const SkipSchedule& schedule, const Rng& rng, bool observe,
                         unsigned threads) {
  const auto levels = schedule.active_levels();
  std::vector<FeatureMatrix> parts(levels.size());
  parallel_for(levels.size(), threads, [&](std::size_t i) {
    Rng level_rng = rng.derive(static_cast<std::uint64_t>(levels[i]));
    FeatureOptions options;
    options.observe = observe;
    options.level = levels[i];
    parts[i] = build_feature_matrix(model, schedule.tau(levels[i]), level_rng, options);
  });

  Eigen::Index total = 0;
  for (const auto& part : parts) total += part.columns();
  FeatureMatrix stacked;
  stacked.p.resize(model.k, total);
  if (observe) stacked.f.resize(model.d, total);
  Eigen::Index offset = 0;
  for (const auto& part : parts) {
    stacked.p.middleCols(offset, part.columns()) = part.p;
    if (observe) stacked.f.middleCols(offset, part.columns()) = part.f;
    stacked.level_of_column.insert(stacked.level_of_column.end(), part.level_of_column.begin(),
                                   part.level_of_column.end());
    stacked.tau_of_column.insert(stacked.tau_of_column.end(), part.tau_of_column.begin(), part.tau_of_column.end());
    offset += part.columns();
  }
  return stacked;
}

SeriesDescriptorSet extract_series_descriptors(const Eigen::MatrixXd& series, const SkipSchedule& schedule,
                                               int window) {
  const Eigen::Index frames = series.rows();
  const Eigen::Index channels = series.cols();
  if (window < 1) throw ValidationError("window must be at least 1");
  if (channels < 1) throw ValidationError("series needs at least one channel");
  const int deepest = schedule.active_levels().back();
  if (frames < static_cast<Eigen::Index>(deepest + 1) * window + 1) {
    std::ostringstream msg;
    msg << "series of " << frames << " frames is shorter than one window at level " << deepest << " (needs "
        << (deepest + 1) * window + 1 << ")";
    throw ValidationError(msg.str());
  }
  if (!series.allFinite()) throw ValidationError("series contains non-finite values");

  const Eigen::Index dim = static_cast<Eigen::Index>(window) * channels;
  const double span = frames > 1 ? static_cast<double>(frames - 1) : 1.0;

  std::vector<Eigen::Index> row_counts;
  Eigen::Index rows = 0;
  for (int l : schedule.active_levels()) {
    const Eigen::Index step = l + 1;
    const Eigen::Index kept = (frames - 1) / step + 1;
    row_counts.push_back(kept - window);
    rows += kept - window;
  }

  SeriesDescriptorSet out;
  out.descriptors.resize(rows, dim);
  out.locations.resize(rows);
  out.level_of_row.reserve(static_cast<std::size_t>(rows));
  Eigen::Index row = 0;
  for (int l : schedule.active_levels()) {
    const Eigen::Index step = l + 1;
    const Eigen::Index kept = (frames - 1) / step + 1;
    Eigen::MatrixXd diffs(kept - 1, channels);
    for (Eigen::Index j = 0; j + 1 < kept; ++j) diffs.row(j) = series.row((j + 1) * step) - series.row(j * step);
    for (Eigen::Index start = 0; start + window <= diffs.rows(); ++start, ++row) {
      for (int w = 0; w < window; ++w) out.descriptors.row(row).segment(w * channels, channels) = diffs.row(start + w);
      out.locations(row) = static_cast<double>(step) * (static_cast<double>(start) + 0.5 * window) / span;
      out.level_of_row.push_back(l);
    }
  }
  return out;
}

CostReport level_cost_report(const SkipSchedule& schedule) {
  CostReport report;
  const double base = static_cast<double>(schedule.budget(0));
  for (int l = 0; l <= schedule.levels(); ++l) {
    LevelCost cost;
    cost.level = l;
    cost.budget = schedule.budget(l);
    cost.relative = static_cast<double>(cost.budget) / base;
    cost.active = schedule.active(l);
    if (cost.active) report.total_relative += cost.relative;
    report.levels.push_back(cost);
  }
  return report;
}

}  // namespace mifs
