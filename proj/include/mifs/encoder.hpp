#pragma once

// Descriptor encoding: PCA reduction, diagonal-covariance GMM fitted by EM,
// Fisher Vector gradients and the power / L2 normalization chain.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mifs/rng.hpp"
#include "mifs/skipstack.hpp"

namespace mifs {

struct PcaTransform {
  Eigen::RowVectorXd mean;     // 1 x D
  Eigen::MatrixXd projection;  // D x D', orthonormal columns
  Eigen::VectorXd explained;   // per kept component, fraction of total variance

  Eigen::Index input_dim() const { return mean.size(); }
  Eigen::Index output_dim() const { return projection.cols(); }
};

/// Keeps `components` principal directions; 0 means ceil(D/2).
PcaTransform pca_fit(const Eigen::MatrixXd& data, Eigen::Index components = 0);
Eigen::MatrixXd pca_apply(const PcaTransform& pca, const Eigen::MatrixXd& data);

struct GmmModel {
  Eigen::VectorXd weights;    // K
  Eigen::MatrixXd means;      // K x D
  Eigen::MatrixXd variances;  // K x D, diagonal covariances
  std::vector<double> log_likelihood_trace;  // mean per-sample log-likelihood per EM iteration
  int reseeds = 0;

  bool fitted() const { return weights.size() > 0; }
  Eigen::Index components() const { return weights.size(); }
  Eigen::Index dim() const { return means.cols(); }
};

struct GmmOptions {
  int components = 16;
  int max_iters = 100;
  double tol = 1e-6;             // relative change in mean log-likelihood
  double variance_floor = 1e-6;  // times the per-dimension data variance
};

/// EM with k-means++ seeding. A component whose weight falls under 1e-8 is
/// re-seeded (restarting the likelihood trace) at most three times.
GmmModel gmm_fit(const Eigen::MatrixXd& data, const GmmOptions& options, Rng& rng);

/// Responsibilities (N x K, rows sum to one) and the mean log-likelihood.
Eigen::MatrixXd gmm_posteriors(const GmmModel& gmm, const Eigen::MatrixXd& data, double* mean_log_likelihood = nullptr);
double gmm_mean_log_likelihood(const GmmModel& gmm, const Eigen::MatrixXd& data);

struct FisherEncoding {
  Eigen::VectorXd values;  // [mean block K*D | variance block K*D], component-major
  bool powered = false;
  bool l2_normalized = false;
  bool empty = false;  // encoded from an empty descriptor set
};

FisherEncoding fisher_vector(const GmmModel& gmm, const Eigen::MatrixXd& descriptors);

Eigen::VectorXd power_normalize(const Eigen::VectorXd& v);
/// Divides by the Euclidean norm; a zero vector is returned unchanged with
/// `was_zero` set.
Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v, bool* was_zero = nullptr);
void power_normalize(FisherEncoding& e);
void l2_normalize(FisherEncoding& e);
/// Power + L2 on each part, concatenate, then a final L2.
FisherEncoding concat_renormalize(const std::vector<FisherEncoding>& parts, bool renormalize = true);

struct CodecConfig {
  Eigen::Index pca_dims = 0;  // 0: ceil(D/2)
  GmmOptions gmm;
  std::size_t sample_budget = 20000;  // descriptors sampled for GMM training
  bool renormalize = true;
};

/// Fitted PCA + GMM. Immutable after fit and safe to share between threads.
struct FisherCodec {
  CodecConfig config;
  PcaTransform pca;
  GmmModel gmm;

  Eigen::Index encoding_dim() const { return 2 * gmm.components() * gmm.dim(); }
  /// PCA-project and append the location coordinate.
  Eigen::MatrixXd project(const SeriesDescriptorSet& set) const;
  FisherEncoding encode(const SeriesDescriptorSet& set) const;
};

/// PCA on the pooled training descriptors, GMM on a sample of the projected
/// pool with locations appended.
FisherCodec fit_codec(const std::vector<SeriesDescriptorSet>& training, const CodecConfig& config, Rng& rng);

struct EncodedDataset {
  Eigen::MatrixXd encodings;  // samples x encoding_dim
  std::vector<bool> empty;    // sample had no descriptors
};

EncodedDataset encode_dataset(const FisherCodec& codec, const std::vector<SeriesDescriptorSet>& sets,
                              unsigned threads = 1);

nlohmann::json codec_to_json(const FisherCodec& codec);
FisherCodec codec_from_json(const nlohmann::json& j);
void save_codec(const FisherCodec& codec, const std::filesystem::path& path);
FisherCodec load_codec(const std::filesystem::path& path);

}  // namespace mifs
