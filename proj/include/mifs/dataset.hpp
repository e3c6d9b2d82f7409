#pragma once

// Synthetic multi-speed action series. Each class owns a band-limited
// waveform template per channel; a sample plays its class template s times
// faster (speed factor s), scaled by an amplitude jitter, plus white noise.
//
// A template is the sum of a slow pattern and a fast pattern. With
// slow_bank/fast_bank set, the amplitudes and frequencies of a pattern are
// shared between classes (phases stay per class) so that mostly the
// (slow, fast) pair identifies a class: short skips resolve the fast cue,
// long skips the slow one.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mifs/rng.hpp"

namespace mifs {

struct DatasetConfig {
  int classes = 5;
  std::vector<int> speeds{1, 2, 3};
  int samples_per_cell = 20;  // per (class, speed)
  int frames = 96;
  int channels = 2;
  double noise = 0.1;         // white-noise std relative to unit template amplitude
  double jitter = 0.2;        // amplitude factor drawn from [1 - jitter, 1 + jitter]
  double speed_jitter = 0.2;  // playback rate s * U[1 - speed_jitter, 1 + speed_jitter]
  double max_offset = 2.0;    // clip starts at template time U[0, max_offset]
  double train_fraction = 2.0 / 3.0;
  int slow_components = 2;    // sinusoids with slow_cycles per template unit
  int fast_components = 1;    // sinusoids with fast_cycles per template unit
  double fast_amplitude = 0.3;
  std::vector<double> slow_cycles{0.5, 2.0};
  std::vector<double> fast_cycles{4.0, 7.0};
  int slow_bank = 3;          // distinct slow patterns; 0 = one per class
  int fast_bank = 2;          // distinct fast patterns; 0 = one per class
  double max_template_correlation = 0.5;
};

struct ActionSample {
  Eigen::MatrixXd series;  // frames x channels
  int label = 0;
  int speed = 1;
  bool train = true;
};

struct SyntheticActionDataset {
  DatasetConfig config;
  std::vector<ActionSample> samples;

  std::vector<std::size_t> split(bool train) const;
};

/// Continuous-time class templates, evaluated at template time u in [0, max speed].
class TemplateBank {
 public:
  TemplateBank(const DatasetConfig& config, std::uint64_t seed);
  /// Value of class `label`'s template on `channel` at time u.
  double value(int label, int channel, double u) const;
  /// frames x channels sampling at speed s: row f is the template at u = offset + s f / (frames - 1).
  Eigen::MatrixXd render(int label, double speed, int frames, double offset = 0.0) const;
  /// Largest absolute Pearson correlation between two class templates at speed 1.
  double max_pairwise_correlation(int frames) const;
  int attempts() const noexcept { return attempts_; }
  int classes() const noexcept { return static_cast<int>(class_patterns_.size()); }

 private:
  struct Wave {
    double amplitude;
    double frequency;
    double phase;
  };
  using Pattern = std::vector<std::vector<Wave>>;  // [channel][component]
  void draw(const DatasetConfig& config, Rng& rng);
  std::vector<Pattern> slow_, fast_;                  // phases unused
  std::vector<std::pair<int, int>> class_patterns_;  // (slow, fast) per class
  std::vector<Pattern> waves_;                       // per class, with phases
  int channels_ = 0;
  int attempts_ = 0;
};

nlohmann::json dataset_config_to_json(const DatasetConfig& config);
/// Keys missing from `j` keep their value from `defaults`.
DatasetConfig dataset_config_from_json(const nlohmann::json& j, DatasetConfig defaults);

SyntheticActionDataset generate_dataset(const DatasetConfig& config, std::uint64_t seed);

/// dataset.json (config, labels, speeds, split) plus series.bin holding every
/// sample's frames stacked vertically (kind "SERIES").
void save_dataset(const SyntheticActionDataset& dataset, const std::filesystem::path& dir);
SyntheticActionDataset load_dataset(const std::filesystem::path& dir);

}  // namespace mifs
