#include "mifs/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "mifs/error.hpp"
#include "mifs/parallel.hpp"

namespace mifs {

namespace {

constexpr double kCollapsedWeight = 1e-8;
constexpr int kMaxReseeds = 3;

std::vector<double> flatten(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

Eigen::MatrixXd unflatten(const std::vector<double>& flat, Eigen::Index rows, Eigen::Index cols) {
  if (flat.size() != static_cast<std::size_t>(rows * cols)) throw ValidationError("matrix payload has wrong length");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
  return m;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// k-means++ choice of one data row given current centers (first `count` rows).
Eigen::Index kmeanspp_pick(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centers, Eigen::Index count, Rng& rng) {
  const Eigen::Index n = data.rows();
  if (count == 0) return static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
  Eigen::VectorXd dist(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < count; ++c) best = std::min(best, (data.row(i) - centers.row(c)).squaredNorm());
    dist(i) = best;
  }
  const double total = dist.sum();
  if (!(total > 0.0)) return static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
  double target = rng.uniform() * total;
  for (Eigen::Index i = 0; i < n; ++i) {
    target -= dist(i);
    if (target < 0.0) return i;
  }
  return n - 1;
}

}  // namespace

PcaTransform pca_fit(const Eigen::MatrixXd& data, Eigen::Index components) {
  const Eigen::Index n = data.rows();
  const Eigen::Index dim = data.cols();
  if (dim < 1) throw ValidationError("PCA input has no columns");
  if (n <= dim) throw ValidationError("PCA needs more samples than dimensions (N=" + std::to_string(n) +
                                      ", D=" + std::to_string(dim) + ")");
  if (!data.allFinite()) throw ValidationError("PCA input contains non-finite values");
  if (components == 0) components = (dim + 1) / 2;
  if (components < 1 || components > dim) throw ValidationError("PCA component count out of range");

  PcaTransform pca;
  pca.mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - pca.mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("PCA eigensolver failed");
  const double total = std::max(0.0, eig.eigenvalues().sum());
  pca.projection.resize(dim, components);
  pca.explained.resize(components);
  for (Eigen::Index c = 0; c < components; ++c) {
    const Eigen::Index src = dim - 1 - c;
    Eigen::VectorXd axis = eig.eigenvectors().col(src);
    Eigen::Index pivot = 0;
    axis.cwiseAbs().maxCoeff(&pivot);
    if (axis(pivot) < 0.0) axis = -axis;  // sign convention: largest entry positive
    pca.projection.col(c) = axis;
    pca.explained(c) = total > 0.0 ? std::max(0.0, eig.eigenvalues()(src)) / total : 0.0;
  }
  return pca;
}

Eigen::MatrixXd pca_apply(const PcaTransform& pca, const Eigen::MatrixXd& data) {
  if (data.cols() != pca.input_dim())
    throw ValidationError("PCA input has " + std::to_string(data.cols()) + " columns, transform expects " +
                          std::to_string(pca.input_dim()));
  return (data.rowwise() - pca.mean) * pca.projection;
}

Eigen::MatrixXd gmm_posteriors(const GmmModel& gmm, const Eigen::MatrixXd& data, double* mean_log_likelihood) {
  if (!gmm.fitted()) throw ValidationError("GMM is not fitted");
  if (data.cols() != gmm.dim()) throw ValidationError("descriptor dimension does not match the GMM");
  const Eigen::Index n = data.rows();
  const Eigen::Index k = gmm.components();
  const Eigen::Index dim = gmm.dim();

  Eigen::VectorXd constant(k);
  const Eigen::MatrixXd inv_var = gmm.variances.cwiseInverse();
  for (Eigen::Index c = 0; c < k; ++c)
    constant(c) = std::log(gmm.weights(c)) -
                  0.5 * (dim * std::log(2.0 * std::numbers::pi) + gmm.variances.row(c).array().log().sum());

  Eigen::MatrixXd post(n, k);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < k; ++c) {
      double q = 0.0;
      for (Eigen::Index d = 0; d < dim; ++d) {
        const double diff = data(i, d) - gmm.means(c, d);
        q += diff * diff * inv_var(c, d);
      }
      post(i, c) = constant(c) - 0.5 * q;
      top = std::max(top, post(i, c));
    }
    double sum = 0.0;
    for (Eigen::Index c = 0; c < k; ++c) {
      post(i, c) = std::exp(post(i, c) - top);
      sum += post(i, c);
    }
    post.row(i) /= sum;
    total += top + std::log(sum);
  }
  if (mean_log_likelihood) *mean_log_likelihood = n > 0 ? total / static_cast<double>(n) : 0.0;
  return post;
}

double gmm_mean_log_likelihood(const GmmModel& gmm, const Eigen::MatrixXd& data) {
  double ll = 0.0;
  gmm_posteriors(gmm, data, &ll);
  return ll;
}

GmmModel gmm_fit(const Eigen::MatrixXd& data, const GmmOptions& options, Rng& rng) {
  const Eigen::Index n = data.rows();
  const Eigen::Index dim = data.cols();
  const Eigen::Index k = options.components;
  if (k < 1) throw ValidationError("GMM needs at least one component");
  if (n < 10 * k)
    throw ValidationError("GMM with " + std::to_string(k) + " components needs at least " + std::to_string(10 * k) +
                          " samples, got " + std::to_string(n));
  if (dim < 1) throw ValidationError("GMM input has no columns");
  if (!data.allFinite()) throw ValidationError("GMM input contains non-finite values");

  const Eigen::RowVectorXd data_mean = data.colwise().mean();
  const Eigen::RowVectorXd data_var =
      ((data.rowwise() - data_mean).array().square().colwise().sum() / static_cast<double>(n)).matrix();
  const Eigen::RowVectorXd floor = (options.variance_floor * data_var.array().max(1e-12)).matrix();

  GmmModel gmm;
  gmm.weights = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  gmm.means.resize(k, dim);
  gmm.variances.resize(k, dim);
  for (Eigen::Index c = 0; c < k; ++c) {
    gmm.means.row(c) = data.row(kmeanspp_pick(data, gmm.means, c, rng));
    gmm.variances.row(c) = data_var.cwiseMax(floor);
  }

  for (int iter = 0; iter < options.max_iters; ++iter) {
    double ll = 0.0;
    const Eigen::MatrixXd post = gmm_posteriors(gmm, data, &ll);
    if (!std::isfinite(ll)) throw NumericalError("GMM log-likelihood became non-finite");
    gmm.log_likelihood_trace.push_back(ll);
    const auto& trace = gmm.log_likelihood_trace;
    if (trace.size() >= 2 && trace.back() - trace[trace.size() - 2] <= options.tol * std::abs(trace[trace.size() - 2]))
      break;
    if (iter + 1 == options.max_iters) break;

    const Eigen::VectorXd mass = post.colwise().sum().transpose();
    bool reseeded = false;
    for (Eigen::Index c = 0; c < k; ++c) {
      if (mass(c) / static_cast<double>(n) >= kCollapsedWeight) {
        gmm.weights(c) = mass(c) / static_cast<double>(n);
        gmm.means.row(c) = (post.col(c).transpose() * data) / mass(c);
        Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(dim);
        for (Eigen::Index i = 0; i < n; ++i) var += post(i, c) * (data.row(i) - gmm.means.row(c)).array().square().matrix();
        gmm.variances.row(c) = (var / mass(c)).cwiseMax(floor);
        continue;
      }
      if (++gmm.reseeds > kMaxReseeds) throw NumericalError("GMM component collapsed after repeated re-seeding");
      reseeded = true;
      Eigen::MatrixXd others(k - 1, dim);
      for (Eigen::Index o = 0, r = 0; o < k; ++o)
        if (o != c) others.row(r++) = gmm.means.row(o);
      gmm.means.row(c) = data.row(kmeanspp_pick(data, others, k - 1, rng));
      gmm.variances.row(c) = data_var.cwiseMax(floor);
      gmm.weights(c) = 1.0 / static_cast<double>(k);
    }
    if (reseeded) {
      gmm.weights /= gmm.weights.sum();
      gmm.log_likelihood_trace.clear();  // monotonicity restarts from the re-seeded state
    }
  }
  return gmm;
}

FisherEncoding fisher_vector(const GmmModel& gmm, const Eigen::MatrixXd& descriptors) {
  if (!gmm.fitted()) throw ValidationError("Fisher vector needs a fitted GMM");
  if (descriptors.rows() < 1) throw ValidationError("Fisher vector needs at least one descriptor");
  const Eigen::MatrixXd post = gmm_posteriors(gmm, descriptors);
  const Eigen::Index n = descriptors.rows();
  const Eigen::Index k = gmm.components();
  const Eigen::Index dim = gmm.dim();
  const double inv_n = 1.0 / static_cast<double>(n);

  FisherEncoding enc;
  enc.values = Eigen::VectorXd::Zero(2 * k * dim);
  for (Eigen::Index c = 0; c < k; ++c) {
    const Eigen::RowVectorXd sigma = gmm.variances.row(c).cwiseSqrt();
    Eigen::RowVectorXd mean_grad = Eigen::RowVectorXd::Zero(dim);
    Eigen::RowVectorXd var_grad = Eigen::RowVectorXd::Zero(dim);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double g = post(i, c);
      if (g == 0.0) continue;
      const Eigen::RowVectorXd z = (descriptors.row(i) - gmm.means.row(c)).cwiseQuotient(sigma);
      mean_grad += g * z;
      var_grad += g * (z.array().square() - 1.0).matrix();
    }
    enc.values.segment(c * dim, dim) = mean_grad.transpose() * (inv_n / std::sqrt(gmm.weights(c)));
    enc.values.segment((k + c) * dim, dim) = var_grad.transpose() * (inv_n / std::sqrt(2.0 * gmm.weights(c)));
  }
  return enc;
}

Eigen::VectorXd power_normalize(const Eigen::VectorXd& v) {
  return v.unaryExpr([](double z) { return z < 0.0 ? -std::sqrt(-z) : std::sqrt(z); });
}

Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v, bool* was_zero) {
  const double norm = v.norm();
  if (was_zero) *was_zero = norm == 0.0;
  return norm == 0.0 ? v : Eigen::VectorXd(v / norm);
}

void power_normalize(FisherEncoding& e) {
  e.values = power_normalize(e.values);
  e.powered = true;
}

void l2_normalize(FisherEncoding& e) {
  bool zero = false;
  e.values = l2_normalize(e.values, &zero);
  e.l2_normalized = !zero;
}

FisherEncoding concat_renormalize(const std::vector<FisherEncoding>& parts, bool renormalize) {
  FisherEncoding out;
  Eigen::Index total = 0;
  for (const auto& p : parts) total += p.values.size();
  out.values.resize(total);
  out.empty = !parts.empty();
  Eigen::Index offset = 0;
  for (auto part : parts) {
    power_normalize(part);
    l2_normalize(part);
    out.values.segment(offset, part.values.size()) = part.values;
    offset += part.values.size();
    out.empty = out.empty && part.empty;
    out.l2_normalized = part.l2_normalized;
  }
  out.powered = true;
  if (renormalize) l2_normalize(out);
  return out;
}

Eigen::MatrixXd FisherCodec::project(const SeriesDescriptorSet& set) const {
  Eigen::MatrixXd out(set.size(), pca.output_dim() + 1);
  out.leftCols(pca.output_dim()) = pca_apply(pca, set.descriptors);
  out.col(pca.output_dim()) = set.locations;
  return out;
}

FisherEncoding FisherCodec::encode(const SeriesDescriptorSet& set) const {
  if (set.size() == 0) {
    FisherEncoding empty;
    empty.values = Eigen::VectorXd::Zero(encoding_dim());
    empty.empty = true;
    return empty;
  }
  return concat_renormalize({fisher_vector(gmm, project(set))}, config.renormalize);
}

FisherCodec fit_codec(const std::vector<SeriesDescriptorSet>& training, const CodecConfig& config, Rng& rng) {
  Eigen::Index rows = 0;
  Eigen::Index dim = -1;
  for (const auto& set : training) {
    if (set.size() == 0) continue;
    if (dim >= 0 && set.descriptors.cols() != dim) throw ValidationError("training descriptors differ in dimension");
    dim = set.descriptors.cols();
    rows += set.size();
  }
  if (rows == 0) throw ValidationError("codec training pool is empty");
  Eigen::MatrixXd pool(rows, dim);
  Eigen::VectorXd locations(rows);
  Eigen::Index offset = 0;
  for (const auto& set : training) {
    if (set.size() == 0) continue;
    pool.middleRows(offset, set.size()) = set.descriptors;
    locations.segment(offset, set.size()) = set.locations;
    offset += set.size();
  }

  FisherCodec codec;
  codec.config = config;
  codec.pca = pca_fit(pool, config.pca_dims);

  // partial Fisher-Yates: the first `take` entries become a uniform sample
  std::vector<Eigen::Index> order(static_cast<std::size_t>(rows));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const std::size_t take = std::min<std::size_t>(config.sample_budget, order.size());
  for (std::size_t i = 0; i < take; ++i) std::swap(order[i], order[i + rng.index(order.size() - i)]);
  SeriesDescriptorSet sample;
  sample.descriptors.resize(static_cast<Eigen::Index>(take), dim);
  sample.locations.resize(static_cast<Eigen::Index>(take));
  for (std::size_t i = 0; i < take; ++i) {
    sample.descriptors.row(static_cast<Eigen::Index>(i)) = pool.row(order[i]);
    sample.locations(static_cast<Eigen::Index>(i)) = locations(order[i]);
  }
  codec.gmm = gmm_fit(codec.project(sample), config.gmm, rng);
  return codec;
}

EncodedDataset encode_dataset(const FisherCodec& codec, const std::vector<SeriesDescriptorSet>& sets,
                              unsigned threads) {
  EncodedDataset out;
  out.encodings.resize(static_cast<Eigen::Index>(sets.size()), codec.encoding_dim());
  std::vector<char> empty(sets.size(), 0);
  parallel_for(sets.size(), threads, [&](std::size_t i) {
    const FisherEncoding e = codec.encode(sets[i]);
    out.encodings.row(static_cast<Eigen::Index>(i)) = e.values.transpose();
    empty[i] = e.empty ? 1 : 0;
  });
  out.empty.assign(empty.begin(), empty.end());
  return out;
}

nlohmann::json codec_to_json(const FisherCodec& codec) {
  const auto& cfg = codec.config;
  return nlohmann::json{
      {"config",
       {{"pca_dims", cfg.pca_dims},
        {"gmm_components", cfg.gmm.components},
        {"max_iters", cfg.gmm.max_iters},
        {"tol", cfg.gmm.tol},
        {"variance_floor", cfg.gmm.variance_floor},
        {"sample_budget", cfg.sample_budget},
        {"renormalize", cfg.renormalize}}},
      {"pca",
       {{"input_dim", codec.pca.input_dim()},
        {"output_dim", codec.pca.output_dim()},
        {"mean", flatten(codec.pca.mean)},
        {"projection", flatten(codec.pca.projection)},
        {"explained", flatten(codec.pca.explained)}}},
      {"gmm",
       {{"components", codec.gmm.components()},
        {"dim", codec.gmm.dim()},
        {"weights", flatten(codec.gmm.weights)},
        {"means", flatten(codec.gmm.means)},
        {"variances", flatten(codec.gmm.variances)}}}};
}

FisherCodec codec_from_json(const nlohmann::json& j) {
  try {
    FisherCodec codec;
    const auto& cfg = j.at("config");
    codec.config.pca_dims = cfg.at("pca_dims").get<Eigen::Index>();
    codec.config.gmm.components = cfg.at("gmm_components").get<int>();
    codec.config.gmm.max_iters = cfg.at("max_iters").get<int>();
    codec.config.gmm.tol = cfg.at("tol").get<double>();
    codec.config.gmm.variance_floor = cfg.at("variance_floor").get<double>();
    codec.config.sample_budget = cfg.at("sample_budget").get<std::size_t>();
    codec.config.renormalize = cfg.at("renormalize").get<bool>();

    const auto& pca = j.at("pca");
    const auto in = pca.at("input_dim").get<Eigen::Index>();
    const auto out = pca.at("output_dim").get<Eigen::Index>();
    codec.pca.mean = unflatten(pca.at("mean").get<std::vector<double>>(), 1, in);
    codec.pca.projection = unflatten(pca.at("projection").get<std::vector<double>>(), in, out);
    codec.pca.explained = to_vector(pca.at("explained").get<std::vector<double>>());

    const auto& gmm = j.at("gmm");
    const auto k = gmm.at("components").get<Eigen::Index>();
    const auto dim = gmm.at("dim").get<Eigen::Index>();
    codec.gmm.weights = to_vector(gmm.at("weights").get<std::vector<double>>());
    codec.gmm.means = unflatten(gmm.at("means").get<std::vector<double>>(), k, dim);
    codec.gmm.variances = unflatten(gmm.at("variances").get<std::vector<double>>(), k, dim);
    if (codec.gmm.weights.size() != k) throw ValidationError("GMM weights have wrong length");
    if (dim != out + 1) throw ValidationError("GMM dimension must be PCA output + 1 location coordinate");
    return codec;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed codec document: ") + e.what());
  }
}

void save_codec(const FisherCodec& codec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << codec_to_json(codec).dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

FisherCodec load_codec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return codec_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace mifs
