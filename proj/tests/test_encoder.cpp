#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "mifs/encoder.hpp"
#include "mifs/error.hpp"
#include "oracles.hpp"

using namespace mifs;
using namespace oracle;

TEST_SUITE("encoder") {

TEST_CASE("pca") {
  Rng rng(1);
  SUBCASE("data in a low-dimensional subspace reconstructs exactly") {
    const Eigen::MatrixXd basis = gaussian(3, 6, rng);
    const Eigen::MatrixXd data = (gaussian(200, 3, rng) * basis).rowwise() + Eigen::RowVectorXd::Constant(6, 1.5);
    const auto pca = pca_fit(data);
    CHECK(pca.output_dim() == 3);
    const Eigen::MatrixXd recon = (pca_apply(pca, data) * pca.projection.transpose()).rowwise() + pca.mean;
    CHECK((recon - data).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("odd dimension rounds up") { CHECK(pca_fit(gaussian(50, 7, rng)).output_dim() == 4); }
  SUBCASE("isotropic data spreads variance evenly") {
    const int d = 8;
    const auto pca = pca_fit(gaussian(200000, d, rng));
    for (Eigen::Index i = 0; i < pca.explained.size(); ++i) CHECK(pca.explained(i) == doctest::Approx(1.0 / d).epsilon(0.05));
  }
  SUBCASE("orthonormal projection and repeatable apply") {
    const Eigen::MatrixXd data = gaussian(100, 9, rng);
    const auto pca = pca_fit(data);
    const Eigen::MatrixXd gram = pca.projection.transpose() * pca.projection;
    CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(pca_apply(pca, data) == pca_apply(pca, data));
  }
  SUBCASE("preconditions") {
    CHECK_THROWS_AS(pca_fit(gaussian(5, 5, rng)), ValidationError);
    const auto pca = pca_fit(gaussian(20, 4, rng));
    CHECK_THROWS_AS(pca_apply(pca, gaussian(3, 5, rng)), ValidationError);
  }
}

TEST_CASE("gmm on two clusters recovers the centroids") {
  Rng rng(4);
  Eigen::MatrixXd data(2000, 2);
  const Eigen::RowVector2d a(-5.0, 1.0), b(4.0, -3.0);
  for (Eigen::Index i = 0; i < 2000; ++i) data.row(i) = (i < 1000 ? a : b) + 0.3 * gaussian(1, 2, rng);
  // centroid oracle: the plain averages of each cluster
  const Eigen::RowVectorXd ca = data.topRows(1000).colwise().mean();
  const Eigen::RowVectorXd cb = data.bottomRows(1000).colwise().mean();
  const auto g = gmm_fit(data, GmmOptions{2, 100, 1e-8, 1e-6}, rng);
  const Eigen::Index ia = (g.means.row(0) - ca).norm() < (g.means.row(1) - ca).norm() ? 0 : 1;
  CHECK((g.means.row(ia) - ca).norm() < 0.05);
  CHECK((g.means.row(1 - ia) - cb).norm() < 0.05);
  CHECK(g.weights.sum() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("single-component gmm is the sample moments") {
  Rng rng(5);
  const Eigen::MatrixXd data = gaussian(300, 3, rng) * 2.0;
  const auto g = gmm_fit(data, GmmOptions{1, 10, 1e-12, 1e-6}, rng);
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::RowVectorXd var = (data.rowwise() - mean).array().square().colwise().mean();
  CHECK((g.means.row(0) - mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.variances.row(0) - var).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(g.weights(0) == 1.0);
}

TEST_CASE("property: EM trace never decreases and parameters stay valid") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto truth = random_gmm(3, 3, rng);
    const Eigen::MatrixXd data = sample_gmm(truth, 400, rng);
    const auto g = gmm_fit(data, GmmOptions{static_cast<int>(2 + seed % 4), 60, 1e-10, 1e-6}, rng);
    for (std::size_t i = 1; i < g.log_likelihood_trace.size(); ++i) {
      const double prev = g.log_likelihood_trace[i - 1];
      CHECK(g.log_likelihood_trace[i] - prev >= -1e-9 * std::abs(prev));
    }
    CHECK(g.weights.sum() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(g.weights.minCoeff() > 0.0);
    CHECK(g.variances.minCoeff() > 0.0);
    double ll = 0.0;
    const Eigen::MatrixXd post = gmm_posteriors(g, data, &ll);
    CHECK((post.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK(ll == doctest::Approx(gmm_mean_log_likelihood(g, data)));
  }
}

TEST_CASE("gmm preconditions") {
  Rng rng(1);
  CHECK_THROWS_AS(gmm_fit(gaussian(15, 2, rng), GmmOptions{2, 10, 1e-6, 1e-6}, rng), ValidationError);
  CHECK_THROWS_AS(fisher_vector(GmmModel{}, gaussian(3, 2, rng)), ValidationError);
}

TEST_CASE("fisher vector at the mode of a single gaussian") {
  GmmModel g;
  g.weights = Eigen::VectorXd::Ones(1);
  g.means = Eigen::MatrixXd::Constant(1, 3, 0.7);
  g.variances = Eigen::MatrixXd::Constant(1, 3, 2.0);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(25, 3, 0.7);
  const auto fv = fisher_vector(g, x);
  CHECK(fv.values.size() == 6);
  for (int j = 0; j < 3; ++j) {
    CHECK(fv.values(j) == 0.0);
    CHECK(fv.values(3 + j) == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-14));
  }
}

TEST_CASE("property: fisher vector equals scaled finite-difference gradients") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(seed, 7));
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.index(4));
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.index(6));
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.index(46));
    const auto g = random_gmm(k, d, rng);
    const Eigen::MatrixXd x = sample_gmm(g, n, rng);
    const auto fv = fisher_vector(g, x);
    const Eigen::VectorXd fd = fisher_fd(g, x);
    INFO("seed " << seed);
    CHECK((fv.values - fd).norm() / fd.norm() < 1e-5);
  }
}

TEST_CASE("fisher vector of the model's own samples vanishes") {
  Rng rng(21);
  const auto g = random_gmm(3, 2, rng);
  const auto fv = fisher_vector(g, sample_gmm(g, 100000, rng));
  CHECK(fv.values.norm() < 0.02);
}

TEST_CASE("normalization chain") {
  Eigen::VectorXd v(3);
  v << 4, -9, 0;
  CHECK(power_normalize(v) == Eigen::Vector3d(2, -3, 0));
  Eigen::VectorXd w(2);
  w << 3, 4;
  CHECK(l2_normalize(w).isApprox(Eigen::Vector2d(0.6, 0.8), 1e-15));
  bool zero = false;
  CHECK(l2_normalize(Eigen::VectorXd::Zero(3), &zero).isZero(0.0));
  CHECK(zero);

  FisherEncoding a, b;
  a.values = Eigen::VectorXd::Unit(4, 1);
  b.values = Eigen::VectorXd::Unit(3, 2);
  const auto joined = concat_renormalize({a, b});
  CHECK(joined.values.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(joined.values.head(4).norm() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(joined.values.tail(3).norm() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(joined.powered);
  CHECK(concat_renormalize({a, b}, false).values.norm() == doctest::Approx(std::sqrt(2.0)));

  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    FisherEncoding e;
    e.values = gaussian(1 + static_cast<Eigen::Index>(rng.index(30)), 1, rng).col(0);
    const auto out = concat_renormalize({e});
    CHECK(out.values.allFinite());
    CHECK(std::abs(out.values.norm() - 1.0) < 1e-10);
  }
}

namespace {

SeriesDescriptorSet descriptor_set(Eigen::Index n, Eigen::Index d, Rng& rng, int level = 0) {
  SeriesDescriptorSet s;
  s.descriptors = gaussian(n, d, rng);
  s.locations.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) s.locations(i) = rng.uniform();
  s.level_of_row.assign(static_cast<std::size_t>(n), level);
  return s;
}

}  // namespace

TEST_CASE("codec") {
  Rng rng(31);
  std::vector<SeriesDescriptorSet> train;
  for (int i = 0; i < 10; ++i) train.push_back(descriptor_set(60, 7, rng, i % 2));
  CodecConfig cfg;
  cfg.gmm.components = 4;
  cfg.sample_budget = 400;
  Rng fit_rng(3);
  const auto codec = fit_codec(train, cfg, fit_rng);
  CHECK(codec.pca.output_dim() == 4);
  CHECK(codec.encoding_dim() == 2 * 4 * (4 + 1));

  SUBCASE("identical descriptors encode identically") {
    const auto e1 = codec.encode(train[0]);
    const auto e2 = codec.encode(train[0]);
    CHECK(e1.values == e2.values);
    CHECK(e1.values.norm() == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("a set with only level-1 rows encodes") {
    const auto only = descriptor_set(20, 7, rng, 1);
    CHECK(codec.encode(only).values.allFinite());
  }
  SUBCASE("empty set encodes to a flagged zero") {
    SeriesDescriptorSet empty;
    empty.descriptors.resize(0, 7);
    const auto e = codec.encode(empty);
    CHECK(e.empty);
    CHECK(e.values.isZero(0.0));
    CHECK(e.values.size() == codec.encoding_dim());
  }
  SUBCASE("dataset encoding is thread independent") {
    const auto a = encode_dataset(codec, train, 1);
    const auto b = encode_dataset(codec, train, 3);
    CHECK(a.encodings == b.encodings);
    CHECK(a.encodings.cols() == codec.encoding_dim());
  }
  SUBCASE("json round trip") {
    const auto path = std::filesystem::temp_directory_path() / "mifs_codec.json";
    save_codec(codec, path);
    const auto back = load_codec(path);
    std::filesystem::remove(path);
    CHECK(back.encode(train[3]).values.isApprox(codec.encode(train[3]).values, 1e-12));
  }
  SUBCASE("fit is deterministic") {
    Rng again(3);
    const auto twin = fit_codec(train, cfg, again);
    CHECK(twin.gmm.means == codec.gmm.means);
  }
}

}  // TEST_SUITE
