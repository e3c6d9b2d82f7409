#pragma once

// One-vs-all linear SVMs with an unregularized intercept, and the mean
// accuracy / mean average precision evaluation protocols.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace mifs {

struct BinarySvm {
  Eigen::VectorXd w;
  double bias = 0.0;
  int epochs = 0;
  double objective = 0.0;                // (1/2)|w|^2 + C sum hinge
  std::vector<double> objective_trace;   // per epoch, of the returned iterate
};

struct LinearModel {
  std::vector<BinarySvm> classes;  // one per class label 0..C-1
  double c = 100.0;

  int class_count() const { return static_cast<int>(classes.size()); }
  Eigen::Index dim() const { return classes.empty() ? 0 : classes.front().w.size(); }
};

struct SvmOptions {
  double c = 100.0;
  int epochs = 200;
  double tol = 1e-6;  // relative duality gap
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

double hinge_objective(const Eigen::MatrixXd& x, const std::vector<double>& y, const Eigen::VectorXd& w, double bias,
                       double c);

/// Binary problem with labels +-1.
BinarySvm svm_train_binary(const Eigen::MatrixXd& x, const std::vector<double>& y, const SvmOptions& options);

/// Labels are 0..C-1; every class needs at least one sample.
LinearModel svm_train(const Eigen::MatrixXd& x, const std::vector<int>& labels, const SvmOptions& options);

struct Prediction {
  Eigen::MatrixXd scores;  // N x C
  std::vector<int> labels;  // argmax, lowest index on ties
};

Prediction predict(const LinearModel& model, const Eigen::MatrixXd& x);

struct ClassEval {
  int label = 0;
  std::size_t support = 0;
  double accuracy = 0.0;  // percent
  double ap = 0.0;        // percent
  std::vector<std::size_t> confusion;  // predicted-label counts for this true class
};

struct EvalReport {
  double macc = 0.0;  // percent
  double map = 0.0;   // percent
  std::vector<ClassEval> per_class;
  std::vector<std::string> warnings;
};

/// Average precision of a score ranking (ties broken by sample index).
double average_precision(const Eigen::VectorXd& scores, const std::vector<bool>& relevant);

EvalReport evaluate(const LinearModel& model, const Eigen::MatrixXd& x, const std::vector<int>& labels);
EvalReport evaluate_scores(const Eigen::MatrixXd& scores, const std::vector<int>& labels);

enum class Protocol { macc, map };

struct CvResult {
  double best_c = 0.0;
  std::vector<double> grid;
  std::vector<double> fold_scores;  // mean metric per grid entry
};

/// Stratified k-fold selection of C (the first C wins ties).
CvResult select_c_by_cv(const Eigen::MatrixXd& x, const std::vector<int>& labels, const std::vector<double>& grid,
                        int folds, Protocol protocol, const SvmOptions& options);

nlohmann::json model_to_json(const LinearModel& model);
LinearModel linear_model_from_json(const nlohmann::json& j);
nlohmann::json report_to_json(const EvalReport& report);

void save_linear_model(const LinearModel& model, const std::filesystem::path& path);
LinearModel load_linear_model(const std::filesystem::path& path);

}  // namespace mifs
