#pragma once

// Generative model of temporal action data: an observed signal is a linear
// mixture X(t) = Xbar * alpha(t) + noise of k latent direction vectors whose
// coefficients alpha_i(t) decorrelate over a time skip tau at a rate set by
// the signal's dynamics index gamma_i.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mifs/rng.hpp"

namespace mifs {

struct LatentModel {
  int k = 0;
  int d = 0;
  std::vector<double> gammas;  // sorted non-decreasing
  double c = 0.0;              // slack of the correlation band, in [0, 1)
  double sigma = 0.0;          // observation noise level
  std::uint64_t seed = 0;
  Eigen::MatrixXd xbar;        // d x k, orthonormal columns
};

/// One draw of a coefficient at t and at t + tau. Values are +-1.
struct MixingPair {
  double alpha_t = 0.0;
  double alpha_t_tau = 0.0;
  double tau = 0.0;
};

LatentModel new_model(int k, int d, std::vector<double> gammas, double c, double sigma, std::uint64_t seed);

/// Flip-probability band [exp(-g/tau)/2, (1+c) exp(-g/tau)/2] for signal i.
/// Throws ValidationError("gamma too small for tau") if the upper end exceeds 1/2.
struct FlipBand {
  double lo = 0.0;
  double hi = 0.0;
};
FlipBand flip_band(const LatentModel& model, int signal_index, double tau);

MixingPair sample_mixing_pair(const LatentModel& model, int signal_index, double tau, Rng& rng);

/// Independent pairs at each sample time. Times must be strictly increasing
/// with t >= 0 and t + tau <= 1.
std::vector<MixingPair> sample_alpha_path(const LatentModel& model, int signal_index,
                                          std::span<const double> times, double tau, Rng& rng);

nlohmann::json model_to_json(const LatentModel& model);
LatentModel model_from_json(const nlohmann::json& j);
void save_model(const LatentModel& model, const std::filesystem::path& path);
LatentModel load_model(const std::filesystem::path& path);

}  // namespace mifs
