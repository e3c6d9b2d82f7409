#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "mifs/classify.hpp"
#include "mifs/error.hpp"
#include "mifs/rng.hpp"

using namespace mifs;

namespace {

struct Blobs {
  Eigen::MatrixXd x;
  std::vector<int> labels;
};

// Gaussian blobs around well separated centers.
Blobs blobs(int classes, int per_class, int dim, double spread, Rng& rng) {
  Blobs b;
  b.x.resize(classes * per_class, dim);
  Eigen::MatrixXd centers(classes, dim);
  for (Eigen::Index i = 0; i < centers.size(); ++i) centers.data()[i] = 6.0 * rng.normal();
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per_class; ++i) {
      const int r = c * per_class + i;
      for (int j = 0; j < dim; ++j) b.x(r, j) = centers(c, j) + spread * rng.normal();
      b.labels.push_back(c);
    }
  return b;
}

// Average precision by its definition: mean over relevant items of the
// precision among items ranked at or above them.
double ap_oracle(const Eigen::VectorXd& scores, const std::vector<bool>& relevant) {
  std::vector<std::size_t> order(relevant.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores(a) > scores(b); });
  double hits = 0.0, sum = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r)
    if (relevant[order[r]]) {
      hits += 1.0;
      sum += hits / static_cast<double>(r + 1);
    }
  return hits > 0 ? sum / hits : 0.0;
}

std::vector<double> signs(const std::vector<int>& labels, int positive) {
  std::vector<double> y;
  for (int l : labels) y.push_back(l == positive ? 1.0 : -1.0);
  return y;
}

}  // namespace

TEST_SUITE("classify") {

TEST_CASE("separable blobs are learned exactly") {
  Rng rng(1);
  const auto b = blobs(2, 40, 3, 0.3, rng);
  SvmOptions opt;
  const auto model = svm_train(b.x, b.labels, opt);
  const auto pred = predict(model, b.x);
  CHECK(pred.labels == b.labels);
  const auto report = evaluate(model, b.x, b.labels);
  CHECK(report.macc == 100.0);
  CHECK(report.map == 100.0);
  // a training point predicts its own label
  CHECK(predict(model, b.x.row(7)).labels[0] == b.labels[7]);
}

TEST_CASE("uninformative features give chance accuracy") {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(30, 4);
  std::vector<int> labels;
  for (int i = 0; i < 30; ++i) labels.push_back(i % 3);
  const auto model = svm_train(x, labels, SvmOptions{});
  CHECK(evaluate(model, x, labels).macc == doctest::Approx(100.0 / 3.0));
}

TEST_CASE("property: binary solution is optimal and beats the zero vector") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    Rng rng(seed);
    const auto b = blobs(2, 15 + static_cast<int>(seed), 4, 4.0, rng);  // overlapping
    const auto y = signs(b.labels, 0);
    SvmOptions opt;
    opt.c = std::pow(10.0, static_cast<double>(seed % 4) - 2.0);
    opt.epochs = 500;
    opt.tol = 1e-9;
    const auto svm = svm_train_binary(b.x, y, opt);
    const double obj = hinge_objective(b.x, y, svm.w, svm.bias, opt.c);
    CHECK(svm.objective == doctest::Approx(obj).epsilon(1e-9));
    CHECK(obj <= opt.c * static_cast<double>(y.size()) + 1e-12);
    // no small perturbation of (w, b) improves a convex objective at its minimum
    for (int trial = 0; trial < 40; ++trial) {
      Eigen::VectorXd dw(svm.w.size());
      for (Eigen::Index j = 0; j < dw.size(); ++j) dw(j) = rng.normal();
      const double step = 1e-4 * (1.0 + svm.w.norm());
      const double db = rng.normal() * step;
      CHECK(hinge_objective(b.x, y, svm.w + step * dw.normalized(), svm.bias + db, opt.c) >=
            obj - 1e-6 * std::max(1.0, obj));
    }
    for (std::size_t e = 1; e < svm.objective_trace.size(); ++e)
      CHECK(svm.objective_trace[e] <= svm.objective_trace[e - 1] * (1.0 + 1e-8));
  }
}

TEST_CASE("training is deterministic and thread independent") {
  Rng rng(3);
  const auto b = blobs(4, 20, 5, 3.0, rng);
  SvmOptions one;
  one.seed = 9;
  SvmOptions many = one;
  many.threads = 4;
  const auto m1 = svm_train(b.x, b.labels, one);
  const auto m2 = svm_train(b.x, b.labels, many);
  for (int c = 0; c < 4; ++c) {
    CHECK(m1.classes[c].w == m2.classes[c].w);
    CHECK(m1.classes[c].bias == m2.classes[c].bias);
  }
}

TEST_CASE("prediction") {
  Rng rng(4);
  const auto b = blobs(3, 20, 4, 2.0, rng);
  const auto model = svm_train(b.x, b.labels, SvmOptions{});
  const auto batch = predict(model, b.x);
  for (Eigen::Index i = 0; i < b.x.rows(); ++i) {
    const auto single = predict(model, b.x.row(i));
    CHECK(single.labels[0] == batch.labels[static_cast<std::size_t>(i)]);
    CHECK(single.scores.row(0) == batch.scores.row(i));
  }
  LinearModel scaled = model;
  for (auto& cls : scaled.classes) {
    cls.w *= 3.7;
    cls.bias *= 3.7;
  }
  CHECK(predict(scaled, b.x).labels == batch.labels);
  CHECK_THROWS_AS(predict(model, Eigen::MatrixXd::Zero(2, 5)), ValidationError);

  // ties go to the lowest class index
  LinearModel tie;
  tie.classes.resize(3);
  for (auto& c : tie.classes) c.w = Eigen::VectorXd::Zero(2);
  CHECK(predict(tie, Eigen::MatrixXd::Ones(1, 2)).labels[0] == 0);
}

TEST_CASE("training preconditions") {
  Rng rng(5);
  const auto b = blobs(2, 5, 2, 1.0, rng);
  CHECK_THROWS_AS(svm_train(b.x, std::vector<int>(10, 0), SvmOptions{}), ValidationError);
  Eigen::MatrixXd bad = b.x;
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(svm_train(bad, b.labels, SvmOptions{}), ValidationError);
  std::vector<int> gap = b.labels;
  for (auto& l : gap) l = l == 1 ? 2 : 0;  // class 1 missing
  CHECK_THROWS_AS(svm_train(b.x, gap, SvmOptions{}), ValidationError);
}

TEST_CASE("average precision") {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.index(40);
    Eigen::VectorXd s(static_cast<Eigen::Index>(n));
    std::vector<bool> rel(n);
    for (std::size_t i = 0; i < n; ++i) {
      s(static_cast<Eigen::Index>(i)) = std::round(rng.uniform(0.0, 5.0));  // plenty of ties
      rel[i] = rng.bernoulli(0.4);
    }
    CHECK(average_precision(s, rel) == doctest::Approx(ap_oracle(s, rel)).epsilon(1e-12));
    // invariant under strictly monotone transforms
    CHECK(average_precision(s.array().exp().matrix() * 3.0, rel) == doctest::Approx(average_precision(s, rel)));
  }
}

TEST_CASE("random scores give MAP near 50") {
  Rng rng(7);
  const int n = 20000;
  Eigen::MatrixXd scores(n, 2);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    scores(i, 0) = rng.uniform();
    scores(i, 1) = rng.uniform();
    labels[i] = i % 2;
  }
  const auto r = evaluate_scores(scores, labels);
  CHECK(std::abs(r.map - 50.0) < 5.0);
  CHECK(r.macc >= 0.0);
  CHECK(r.macc <= 100.0);
}

TEST_CASE("evaluation bookkeeping") {
  Eigen::MatrixXd scores(4, 3);
  scores << 1, 0, 0,  //
      0, 1, 0,        //
      1, 0, 0,        //
      0, 0, 1;
  SUBCASE("perfect") {
    const auto r = evaluate_scores(scores, {0, 1, 0, 2});
    CHECK(r.macc == 100.0);
    CHECK(r.map == 100.0);
    CHECK(r.per_class[0].confusion == std::vector<std::size_t>{2, 0, 0});
  }
  SUBCASE("absent class is excluded with a warning") {
    const auto r = evaluate_scores(scores.topRows(3), {0, 0, 0});
    CHECK(r.macc == doctest::Approx(200.0 / 3.0));
    CHECK_FALSE(r.warnings.empty());
  }
  SUBCASE("json has fixed keys") {
    const auto j = report_to_json(evaluate_scores(scores, {0, 1, 0, 2}));
    CHECK(j.contains("macc"));
    CHECK(j.contains("map"));
    CHECK(j["per_class"].size() == 3);
  }
}

TEST_CASE("cross-validated C") {
  Rng rng(8);
  const auto b = blobs(3, 20, 3, 1.5, rng);
  SvmOptions opt;
  opt.seed = 2;
  const std::vector<double> grid{1e-3, 1e-1, 10.0};
  const auto cv = select_c_by_cv(b.x, b.labels, grid, 5, Protocol::macc, opt);
  CHECK(cv.grid == grid);
  CHECK(cv.fold_scores.size() == 3);
  CHECK(std::find(grid.begin(), grid.end(), cv.best_c) != grid.end());
  const auto best = std::max_element(cv.fold_scores.begin(), cv.fold_scores.end());
  CHECK(cv.best_c == grid[static_cast<std::size_t>(best - cv.fold_scores.begin())]);
  CHECK(select_c_by_cv(b.x, b.labels, grid, 5, Protocol::macc, opt).fold_scores == cv.fold_scores);
  CHECK_THROWS_AS(select_c_by_cv(b.x, b.labels, {}, 5, Protocol::macc, opt), ValidationError);
}

TEST_CASE("model json round trip") {
  Rng rng(9);
  const auto b = blobs(3, 10, 4, 1.0, rng);
  const auto model = svm_train(b.x, b.labels, SvmOptions{});
  const auto path = std::filesystem::temp_directory_path() / "mifs_svm.json";
  save_linear_model(model, path);
  const auto back = load_linear_model(path);
  std::filesystem::remove(path);
  CHECK(back.c == model.c);
  for (int c = 0; c < 3; ++c) {
    CHECK(back.classes[c].w == model.classes[c].w);
    CHECK(back.classes[c].bias == model.classes[c].bias);
  }
  CHECK_THROWS_AS(load_linear_model("/nonexistent/m.json"), IoError);
}

}  // TEST_SUITE
