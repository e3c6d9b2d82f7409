#pragma once

// Experiment configuration and the end-to-end runs behind each CLI verb.
// Every run is deterministic given the config seed, for any thread count.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mifs/classify.hpp"
#include "mifs/conditioning.hpp"
#include "mifs/dataset.hpp"
#include "mifs/encoder.hpp"
#include "mifs/latent_model.hpp"
#include "mifs/skipstack.hpp"

namespace mifs {

inline constexpr const char* kToolVersion = "0.1.0";

struct ModelConfig {
  int k = 4;
  int d = 8;
  std::vector<double> gammas{0.0004, 0.0004, 0.0032, 0.0032};
  double c = 0.1;
  double sigma = 0.01;
};

struct ScheduleConfig {
  double base_tau = 0.001;
  int frames = 0;  // when > 0, base_tau = 1 / frames
  int levels = 3;
  std::vector<int> exclude;

  SkipSchedule schedule() const;
  SkipSchedule with_levels(int levels) const;
};

struct ConditionConfig {
  double tau = 0.001;
  std::size_t columns = 0;  // 0: floor(1/tau)
  std::size_t trials = 200;
  double delta = 0.1;
  int corollary_m = 3;
};

struct BernsteinConfig {
  int p = 4;
  std::size_t n = 500;
  double b = 4.0;
  std::vector<double> deltas{0.05, 0.1, 0.2};
  std::size_t trials = 1000;
};

struct ClassifierConfig {
  double c = 100.0;
  bool cross_validate = false;
  std::vector<double> grid{1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3};
  int folds = 5;
  int epochs = 200;
  double tol = 1e-6;
};

struct RecognitionConfig {
  int max_level = 3;
  int window = 5;
  int repeats = 1;
  bool masked_runs = true;  // also run "L=1-0" and "L=2-0"
};

struct ExperimentConfig {
  ModelConfig model;
  ScheduleConfig schedule;
  ConditionConfig condition;
  BernsteinConfig bernstein;
  DatasetConfig dataset;
  CodecConfig codec;
  ClassifierConfig classifier;
  RecognitionConfig recognition;
  std::optional<std::uint64_t> seed;  // required by every command
  std::filesystem::path out = "out";
  unsigned threads = 1;
  std::string format = "csv";
  bool svg = false;

  std::uint64_t require_seed() const;
  LatentModel build_model() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
/// Everything that influences results; excludes out dir and thread count.
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// FNV-1a 64-bit, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);
std::string file_checksum(const std::filesystem::path& path);

/// Writes manifest.json into `dir` listing `outputs` (relative names).
void write_manifest(const std::filesystem::path& dir, const std::string& command, const ExperimentConfig& config,
                    const std::vector<std::string>& outputs);

// One command each; all return the files written (relative to config.out).
std::vector<std::string> run_model_gen(const ExperimentConfig& config);
std::vector<std::string> run_sim_condition(const ExperimentConfig& config);
std::vector<std::string> run_sim_bounds(const ExperimentConfig& config);
std::vector<std::string> run_bernstein_check(const ExperimentConfig& config);
std::vector<std::string> run_spectrum(const ExperimentConfig& config);
std::vector<std::string> run_dataset_gen(const ExperimentConfig& config);
std::vector<std::string> run_encode(const ExperimentConfig& config, const std::filesystem::path& input);
std::vector<std::string> run_train(const ExperimentConfig& config, const std::filesystem::path& input);
std::vector<std::string> run_evaluate(const ExperimentConfig& config, const std::filesystem::path& input,
                                      const std::filesystem::path& model_path);
std::vector<std::string> run_recognition(const ExperimentConfig& config);
std::vector<std::string> run_cost_report(const ExperimentConfig& config);
/// Renders `csv` as <stem>.svg in config.out.
std::vector<std::string> run_plot(const ExperimentConfig& config, const std::filesystem::path& csv,
                                  const std::string& kind);

// Building blocks shared with tests.

struct ConditionComparison {
  CoverageSummary fixed;
  CoverageSummary stacked;
};
ConditionComparison compare_conditioning(const LatentModel& model, const FixedSkip& fixed,
                                         const SkipSchedule& schedule, double delta, std::size_t trials,
                                         std::uint64_t seed, unsigned threads = 1);

/// One spectrum curve per stacked level 0..max_level, on the observed matrix F.
std::vector<SpectrumCurve> spectrum_by_level(const LatentModel& model, const ScheduleConfig& schedule, int max_level,
                                             std::uint64_t seed, unsigned threads = 1);

struct RecognitionRun {
  std::string label;
  EvalReport report;
  double relative_cost = 0.0;
};

/// Extract, encode, train and evaluate one schedule on one dataset.
RecognitionRun run_recognition_once(const SyntheticActionDataset& dataset, const SkipSchedule& schedule, int window,
                                    const CodecConfig& codec, const ClassifierConfig& classifier, std::uint64_t seed,
                                    unsigned threads = 1);

struct RecognitionGrid {
  std::vector<double> single_macc;  // per level 0..L, mean over repeats
  std::vector<double> mifs_macc;    // per stacked level 0..L
  std::vector<double> single_map;
  std::vector<double> mifs_map;
  std::vector<RecognitionRun> masked;  // last repeat's masked runs, cost attached
  std::vector<std::vector<double>> single_by_repeat;
  std::vector<std::vector<double>> mifs_by_repeat;
};

RecognitionGrid recognition_grid(const ExperimentConfig& config);

}  // namespace mifs
