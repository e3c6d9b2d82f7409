#include "mifs/classify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mifs/error.hpp"
#include "mifs/parallel.hpp"
#include "mifs/rng.hpp"

namespace mifs {

namespace {

constexpr double kKktEps = 1e-8;
constexpr double kTinyCurvature = 1e-12;

// Exact minimizer over the intercept of sum_i max(0, 1 - y_i (s_i + b)).
// Each term has its kink at b_i = y_i - s_i and the total slope rises by one
// at every kink, starting from -(number of positives).
double best_intercept(const Eigen::VectorXd& s, const std::vector<double>& y) {
  const std::size_t n = y.size();
  std::vector<double> kinks(n);
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    kinks[i] = y[i] - s(static_cast<Eigen::Index>(i));
    positives += y[i] > 0.0 ? 1 : 0;
  }
  std::sort(kinks.begin(), kinks.end());
  if (positives == 0) return kinks.front() - 1.0;
  if (positives == n) return kinks.back() + 1.0;
  return 0.5 * (kinks[positives - 1] + kinks[positives]);
}


BinarySvm solve_binary(const Eigen::MatrixXd& x, const Eigen::MatrixXd& gram, const std::vector<double>& y,
                       const SvmOptions& options) {
  const Eigen::Index n = x.rows();
  const double c = options.c;

  // Seeded visiting order only affects tie-breaks in working-set selection.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng.engine());

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);  // Q alpha - 1
  auto q = [&](Eigen::Index i, Eigen::Index j) { return y[i] * y[j] * gram(i, j); };
  auto in_up = [&](Eigen::Index t) { return (y[t] > 0.0 && alpha(t) < c) || (y[t] < 0.0 && alpha(t) > 0.0); };
  auto in_low = [&](Eigen::Index t) { return (y[t] > 0.0 && alpha(t) > 0.0) || (y[t] < 0.0 && alpha(t) < c); };

  BinarySvm best;
  best.objective = std::numeric_limits<double>::infinity();
  bool converged = false;
  int epoch = 0;
  while (!converged && epoch < options.epochs) {
    ++epoch;
    for (Eigen::Index step = 0; step < n; ++step) {
      // second-order working set selection
      double gmax = -std::numeric_limits<double>::infinity();
      double gmax2 = -std::numeric_limits<double>::infinity();
      Eigen::Index i = -1;
      for (Eigen::Index t : order)
        if (in_up(t) && -y[t] * grad(t) > gmax) {
          gmax = -y[t] * grad(t);
          i = t;
        }
      Eigen::Index j = -1;
      double best_gain = std::numeric_limits<double>::infinity();
      for (Eigen::Index t : order) {
        if (!in_low(t)) continue;
        const double yg = y[t] * grad(t);
        gmax2 = std::max(gmax2, yg);
        const double b = gmax + yg;
        if (i < 0 || b <= 0.0) continue;
        double a = gram(i, i) + gram(t, t) - 2.0 * gram(i, t);
        if (a <= 0.0) a = kTinyCurvature;
        if (-(b * b) / a < best_gain) {
          best_gain = -(b * b) / a;
          j = t;
        }
      }
      if (i < 0 || j < 0 || gmax + gmax2 < kKktEps) {
        converged = true;
        break;
      }

      const double old_i = alpha(i);
      const double old_j = alpha(j);
      if (y[i] != y[j]) {
        double quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
        if (quad <= 0.0) quad = kTinyCurvature;
        const double delta = (-grad(i) - grad(j)) / quad;
        const double diff = alpha(i) - alpha(j);
        alpha(i) += delta;
        alpha(j) += delta;
        if (diff > 0.0 && alpha(j) < 0.0) {
          alpha(j) = 0.0;
          alpha(i) = diff;
        } else if (diff <= 0.0 && alpha(i) < 0.0) {
          alpha(i) = 0.0;
          alpha(j) = -diff;
        }
        if (diff > 0.0 && alpha(i) > c) {
          alpha(i) = c;
          alpha(j) = c - diff;
        } else if (diff <= 0.0 && alpha(j) > c) {
          alpha(j) = c;
          alpha(i) = c + diff;
        }
      } else {
        double quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
        if (quad <= 0.0) quad = kTinyCurvature;
        const double delta = (grad(i) - grad(j)) / quad;
        const double sum = alpha(i) + alpha(j);
        alpha(i) -= delta;
        alpha(j) += delta;
        if (sum > c && alpha(i) > c) {
          alpha(i) = c;
          alpha(j) = sum - c;
        } else if (sum <= c && alpha(j) < 0.0) {
          alpha(j) = 0.0;
          alpha(i) = sum;
        }
        if (sum > c && alpha(j) > c) {
          alpha(j) = c;
          alpha(i) = sum - c;
        } else if (sum <= c && alpha(i) < 0.0) {
          alpha(i) = 0.0;
          alpha(j) = sum;
        }
      }
      const double di = alpha(i) - old_i;
      const double dj = alpha(j) - old_j;
      for (Eigen::Index t = 0; t < n; ++t) grad(t) += q(t, i) * di + q(t, j) * dj;
    }

    Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());
    for (Eigen::Index t = 0; t < n; ++t)
      if (alpha(t) != 0.0) w += alpha(t) * y[t] * x.row(t).transpose();
    const Eigen::VectorXd s = x * w;
    const double bias = best_intercept(s, y);
    const double primal = hinge_objective(x, y, w, bias, c);
    if (primal < best.objective) {
      best.w = w;
      best.bias = bias;
      best.objective = primal;
    }
    best.objective_trace.push_back(best.objective);
    const double dual = alpha.sum() - 0.5 * w.squaredNorm();
    if (primal - dual <= options.tol * std::max(1.0, std::abs(primal))) converged = true;
  }
  best.epochs = epoch;
  if (best.w.size() == 0) {  // zero epochs requested
    best.w = Eigen::VectorXd::Zero(x.cols());
    best.bias = best_intercept(Eigen::VectorXd::Zero(n), y);
    best.objective = hinge_objective(x, y, best.w, best.bias, c);
  }
  return best;
}

void check_inputs(const Eigen::MatrixXd& x, std::size_t label_count) {
  if (x.rows() < 1) throw ValidationError("training set is empty");
  if (static_cast<std::size_t>(x.rows()) != label_count) throw ValidationError("feature/label count mismatch");
  if (!x.allFinite()) throw ValidationError("features contain non-finite values");
}

}  // namespace

double hinge_objective(const Eigen::MatrixXd& x, const std::vector<double>& y, const Eigen::VectorXd& w, double bias,
                       double c) {
  const Eigen::VectorXd s = x * w;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) loss += std::max(0.0, 1.0 - y[i] * (s(i) + bias));
  return 0.5 * w.squaredNorm() + c * loss;
}

BinarySvm svm_train_binary(const Eigen::MatrixXd& x, const std::vector<double>& y, const SvmOptions& options) {
  check_inputs(x, y.size());
  if (!(options.c > 0.0)) throw ValidationError("C must be positive");
  const bool has_pos = std::any_of(y.begin(), y.end(), [](double v) { return v > 0.0; });
  const bool has_neg = std::any_of(y.begin(), y.end(), [](double v) { return v < 0.0; });
  if (!has_pos || !has_neg) throw ValidationError("binary SVM needs both classes");
  const Eigen::MatrixXd gram = x * x.transpose();
  return solve_binary(x, gram, y, options);
}

LinearModel svm_train(const Eigen::MatrixXd& x, const std::vector<int>& labels, const SvmOptions& options) {
  check_inputs(x, labels.size());
  if (!(options.c > 0.0)) throw ValidationError("C must be positive");
  const int classes = *std::max_element(labels.begin(), labels.end()) + 1;
  if (*std::min_element(labels.begin(), labels.end()) < 0) throw ValidationError("labels must be non-negative");
  if (classes < 2) throw ValidationError("training needs at least two classes");
  std::vector<std::size_t> counts(static_cast<std::size_t>(classes), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  for (int c = 0; c < classes; ++c)
    if (counts[static_cast<std::size_t>(c)] == 0)
      throw ValidationError("class " + std::to_string(c) + " has no training samples");

  const Eigen::MatrixXd gram = x * x.transpose();
  LinearModel model;
  model.c = options.c;
  model.classes.resize(static_cast<std::size_t>(classes));
  parallel_for(static_cast<std::size_t>(classes), options.threads, [&](std::size_t cls) {
    std::vector<double> y(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == static_cast<int>(cls) ? 1.0 : -1.0;
    SvmOptions per_class = options;
    per_class.seed = derive_seed(options.seed, cls);
    model.classes[cls] = solve_binary(x, gram, y, per_class);
  });
  return model;
}

Prediction predict(const LinearModel& model, const Eigen::MatrixXd& x) {
  if (model.classes.empty()) throw ValidationError("model has no classes");
  if (x.cols() != model.dim())
    throw ValidationError("feature dimension " + std::to_string(x.cols()) + " does not match model dimension " +
                          std::to_string(model.dim()));
  Prediction out;
  out.scores.resize(x.rows(), model.class_count());
  for (int c = 0; c < model.class_count(); ++c)
    out.scores.col(c) = (x * model.classes[c].w).array() + model.classes[c].bias;
  out.labels.resize(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    int best = 0;
    for (int c = 1; c < model.class_count(); ++c)
      if (out.scores(i, c) > out.scores(i, best)) best = c;
    out.labels[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

double average_precision(const Eigen::VectorXd& scores, const std::vector<bool>& relevant) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return scores(a) > scores(b); });
  double hits = 0.0;
  double sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (!relevant[static_cast<std::size_t>(order[rank])]) continue;
    hits += 1.0;
    sum += hits / static_cast<double>(rank + 1);
  }
  return hits > 0.0 ? sum / hits : 0.0;
}

EvalReport evaluate_scores(const Eigen::MatrixXd& scores, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(scores.rows()) != labels.size()) throw ValidationError("score/label count mismatch");
  const int classes = static_cast<int>(scores.cols());
  EvalReport report;
  std::vector<int> predicted(labels.size());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    int best = 0;
    for (int c = 1; c < classes; ++c)
      if (scores(i, c) > scores(i, best)) best = c;
    predicted[static_cast<std::size_t>(i)] = best;
  }
  double acc_sum = 0.0;
  double ap_sum = 0.0;
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    ClassEval ce;
    ce.label = c;
    ce.confusion.assign(static_cast<std::size_t>(classes), 0);
    std::vector<bool> relevant(labels.size());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      relevant[i] = labels[i] == c;
      if (!relevant[i]) continue;
      ++ce.support;
      ++ce.confusion[static_cast<std::size_t>(predicted[i])];
      correct += predicted[i] == c ? 1 : 0;
    }
    if (ce.support == 0) {
      report.warnings.push_back("class " + std::to_string(c) + " absent from the evaluation set; excluded from means");
      report.per_class.push_back(ce);
      continue;
    }
    ce.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(ce.support);
    ce.ap = 100.0 * average_precision(scores.col(c), relevant);
    acc_sum += ce.accuracy;
    ap_sum += ce.ap;
    ++present;
    report.per_class.push_back(ce);
  }
  if (present == 0) throw ValidationError("evaluation set contains no labeled classes");
  report.macc = acc_sum / present;
  report.map = ap_sum / present;
  return report;
}

EvalReport evaluate(const LinearModel& model, const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  for (int l : labels)
    if (l < 0 || l >= model.class_count()) throw ValidationError("label " + std::to_string(l) + " unknown to model");
  return evaluate_scores(predict(model, x).scores, labels);
}

CvResult select_c_by_cv(const Eigen::MatrixXd& x, const std::vector<int>& labels, const std::vector<double>& grid,
                        int folds, Protocol protocol, const SvmOptions& options) {
  if (grid.empty()) throw ValidationError("C grid is empty");
  if (folds < 2) throw ValidationError("cross-validation needs at least 2 folds");
  const int classes = *std::max_element(labels.begin(), labels.end()) + 1;

  // stratified assignment: shuffle within class, deal round-robin
  std::vector<int> fold_of(labels.size());
  Rng rng(derive_seed(options.seed, 0x6376 /* "cv" */));
  for (int c = 0; c < classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng.engine());
    for (std::size_t m = 0; m < members.size(); ++m) fold_of[members[m]] = static_cast<int>(m % folds);
  }

  CvResult result;
  result.grid = grid;
  double best = -1.0;
  for (double c : grid) {
    double total = 0.0;
    for (int f = 0; f < folds; ++f) {
      std::vector<Eigen::Index> train, test;
      for (std::size_t i = 0; i < labels.size(); ++i) (fold_of[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
      std::vector<int> train_labels, test_labels;
      for (auto i : train) train_labels.push_back(labels[static_cast<std::size_t>(i)]);
      for (auto i : test) test_labels.push_back(labels[static_cast<std::size_t>(i)]);
      SvmOptions fold_options = options;
      fold_options.c = c;
      const LinearModel model = svm_train(x(train, Eigen::all), train_labels, fold_options);
      const EvalReport report = evaluate_scores(predict(model, x(test, Eigen::all)).scores, test_labels);
      total += protocol == Protocol::macc ? report.macc : report.map;
    }
    const double mean = total / folds;
    result.fold_scores.push_back(mean);
    if (mean > best) {
      best = mean;
      result.best_c = c;
    }
  }
  return result;
}

nlohmann::json model_to_json(const LinearModel& model) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& svm : model.classes)
    classes.push_back({{"w", std::vector<double>(svm.w.data(), svm.w.data() + svm.w.size())},
                       {"bias", svm.bias},
                       {"epochs", svm.epochs},
                       {"objective", svm.objective}});
  return nlohmann::json{{"c", model.c}, {"classes", std::move(classes)}};
}

LinearModel linear_model_from_json(const nlohmann::json& j) {
  try {
    LinearModel model;
    model.c = j.at("c").get<double>();
    for (const auto& entry : j.at("classes")) {
      BinarySvm svm;
      const auto w = entry.at("w").get<std::vector<double>>();
      svm.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
      svm.bias = entry.at("bias").get<double>();
      svm.epochs = entry.value("epochs", 0);
      svm.objective = entry.value("objective", 0.0);
      if (!model.classes.empty() && svm.w.size() != model.dim())
        throw ValidationError("per-class weight vectors differ in length");
      model.classes.push_back(std::move(svm));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model document: ") + e.what());
  }
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& ce : report.per_class)
    per_class.push_back({{"class", ce.label},
                         {"support", ce.support},
                         {"accuracy", ce.accuracy},
                         {"ap", ce.ap},
                         {"confusion", ce.confusion}});
  return nlohmann::json{{"macc", report.macc}, {"map", report.map}, {"per_class", std::move(per_class)}};
}

void save_linear_model(const LinearModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << model_to_json(model).dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

LinearModel load_linear_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return linear_model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace mifs
