#include "mifs/latent_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mifs/error.hpp"

namespace mifs {

namespace {

void check_signal(const LatentModel& model, int signal_index) {
  if (signal_index < 0 || signal_index >= model.k)
    throw ValidationError("signal_index " + std::to_string(signal_index) + " out of range for k=" +
                          std::to_string(model.k));
}

void check_tau(double tau) {
  if (!(tau > 0.0) || tau > 1.0) {
    std::ostringstream msg;
    msg << "tau must lie in (0, 1], got " << tau;
    throw ValidationError(msg.str());
  }
}

}  // namespace

LatentModel new_model(int k, int d, std::vector<double> gammas, double c, double sigma, std::uint64_t seed) {
  if (k < 1) throw ValidationError("k must be at least 1");
  if (d < k) throw ValidationError("d must be >= k (d=" + std::to_string(d) + ", k=" + std::to_string(k) + ")");
  if (static_cast<int>(gammas.size()) != k)
    throw ValidationError("gammas must have length k=" + std::to_string(k));
  for (double g : gammas)
    if (!(g > 0.0) || std::isnan(g)) throw ValidationError("gammas must be positive");
  if (!std::is_sorted(gammas.begin(), gammas.end()))
    throw ValidationError("gammas must be sorted non-decreasing");
  if (!(c >= 0.0 && c < 1.0)) throw ValidationError("c must lie in [0, 1)");
  if (!(sigma >= 0.0)) throw ValidationError("sigma must be non-negative");

  LatentModel model;
  model.k = k;
  model.d = d;
  model.gammas = std::move(gammas);
  model.c = c;
  model.sigma = sigma;
  model.seed = seed;

  Rng rng(derive_seed(seed, 0x78626172 /* "xbar" */));
  Eigen::MatrixXd gaussian(d, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < d; ++i) gaussian(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian);
  model.xbar = qr.householderQ() * Eigen::MatrixXd::Identity(d, k);
  return model;
}

FlipBand flip_band(const LatentModel& model, int signal_index, double tau) {
  check_signal(model, signal_index);
  check_tau(tau);
  const double decay = std::exp(-model.gammas[signal_index] / tau);
  FlipBand band{0.5 * decay, 0.5 * (1.0 + model.c) * decay};
  if (band.hi > 0.5) {
    std::ostringstream msg;
    msg << "gamma too small for tau: (1+c)exp(-gamma/tau)/2 = " << band.hi << " > 1/2 (gamma="
        << model.gammas[signal_index] << ", tau=" << tau << ", c=" << model.c << ")";
    throw ValidationError(msg.str());
  }
  return band;
}

MixingPair sample_mixing_pair(const LatentModel& model, int signal_index, double tau, Rng& rng) {
  const FlipBand band = flip_band(model, signal_index, tau);
  const double q = rng.uniform(band.lo, band.hi);
  MixingPair pair;
  pair.tau = tau;
  pair.alpha_t = rng.rademacher();
  pair.alpha_t_tau = rng.bernoulli(q) ? -pair.alpha_t : pair.alpha_t;
  return pair;
}

std::vector<MixingPair> sample_alpha_path(const LatentModel& model, int signal_index,
                                          std::span<const double> times, double tau, Rng& rng) {
  check_signal(model, signal_index);
  check_tau(tau);
  constexpr double slack = 1e-12;  // grid times j*tau may land a rounding step past 1 - tau
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (times[j] < 0.0 || times[j] + tau > 1.0 + slack) {
      std::ostringstream msg;
      msg << "sample time " << times[j] << " + tau " << tau << " exceeds 1";
      throw ValidationError(msg.str());
    }
    if (j > 0 && !(times[j] > times[j - 1])) throw ValidationError("sample times must be strictly increasing");
  }
  std::vector<MixingPair> pairs;
  pairs.reserve(times.size());
  for (std::size_t j = 0; j < times.size(); ++j) pairs.push_back(sample_mixing_pair(model, signal_index, tau, rng));
  return pairs;
}

nlohmann::json model_to_json(const LatentModel& model) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(model.d) * model.k);
  for (int i = 0; i < model.d; ++i)
    for (int j = 0; j < model.k; ++j) flat.push_back(model.xbar(i, j));
  return nlohmann::json{{"k", model.k},         {"d", model.d},         {"gammas", model.gammas},
                        {"c", model.c},         {"sigma", model.sigma}, {"seed", model.seed},
                        {"xbar", std::move(flat)}};
}

LatentModel model_from_json(const nlohmann::json& j) {
  try {
    LatentModel model = new_model(j.at("k").get<int>(), j.at("d").get<int>(), j.at("gammas").get<std::vector<double>>(),
                                  j.at("c").get<double>(), j.at("sigma").get<double>(),
                                  j.at("seed").get<std::uint64_t>());
    const auto flat = j.at("xbar").get<std::vector<double>>();
    if (flat.size() != static_cast<std::size_t>(model.d) * model.k)
      throw ValidationError("xbar has " + std::to_string(flat.size()) + " entries, expected d*k");
    for (int i = 0; i < model.d; ++i)
      for (int c = 0; c < model.k; ++c) model.xbar(i, c) = flat[static_cast<std::size_t>(i) * model.k + c];
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model document: ") + e.what());
  }
}

void save_model(const LatentModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << model_to_json(model).dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

LatentModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace mifs
