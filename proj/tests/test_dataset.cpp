#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "mifs/dataset.hpp"
#include "mifs/error.hpp"

using namespace mifs;

namespace {

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double ma = a.mean(), mb = b.mean();
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    sab += (a(i) - ma) * (b(i) - mb);
    saa += (a(i) - ma) * (a(i) - ma);
    sbb += (b(i) - mb) * (b(i) - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Templates flattened over channels, compared pairwise.
double max_correlation_oracle(const TemplateBank& bank, int frames) {
  double worst = 0.0;
  for (int a = 0; a < bank.classes(); ++a)
    for (int b = a + 1; b < bank.classes(); ++b) {
      const Eigen::MatrixXd ta = bank.render(a, 1.0, frames);
      const Eigen::MatrixXd tb = bank.render(b, 1.0, frames);
      const Eigen::VectorXd va = Eigen::Map<const Eigen::VectorXd>(ta.data(), ta.size());
      const Eigen::VectorXd vb = Eigen::Map<const Eigen::VectorXd>(tb.data(), tb.size());
      worst = std::max(worst, std::abs(pearson(va, vb)));
    }
  return worst;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("default dataset counts and stratified split") {
  const auto ds = generate_dataset(DatasetConfig{}, 1);
  CHECK(ds.samples.size() == 300);
  CHECK(ds.split(true).size() == 200);
  CHECK(ds.split(false).size() == 100);
  std::map<std::pair<int, int>, std::pair<int, int>> cells;  // (label, speed) -> (train, test)
  for (const auto& s : ds.samples) {
    auto& c = cells[{s.label, s.speed}];
    (s.train ? c.first : c.second) += 1;
    CHECK(s.series.rows() == 96);
    CHECK(s.series.cols() == 2);
    CHECK(s.series.allFinite());
  }
  CHECK(cells.size() == 15);
  for (const auto& [key, c] : cells) {
    CHECK(c.first + c.second == 20);
    CHECK(c.first >= 13);
    CHECK(c.second >= 6);
  }
}

TEST_CASE("noise-free samples at speed 1 are scaled templates") {
  DatasetConfig cfg;
  cfg.noise = 0.0;
  cfg.speed_jitter = 0.0;
  cfg.max_offset = 0.0;
  cfg.speeds = {1, 3};
  const auto ds = generate_dataset(cfg, 4);
  const TemplateBank bank(cfg, 4);
  for (const auto& s : ds.samples) {
    const Eigen::MatrixXd t = bank.render(s.label, s.speed, cfg.frames);
    const double scale = s.series.cwiseProduct(t).sum() / t.squaredNorm();
    CHECK(scale >= 1.0 - cfg.jitter - 1e-12);
    CHECK(scale <= 1.0 + cfg.jitter + 1e-12);
    CHECK((s.series - scale * t).norm() <= 1e-10 * t.norm());
  }
}

TEST_CASE("speed s plays the template s times faster") {
  DatasetConfig cfg;
  const TemplateBank bank(cfg, 2);
  const Eigen::MatrixXd slow = bank.render(1, 1.0, 97);
  const Eigen::MatrixXd fast = bank.render(1, 2.0, 97);
  for (Eigen::Index f = 0; f < 49; ++f) CHECK(fast.row(f).isApprox(slow.row(2 * f), 1e-12));
}

TEST_CASE("property: templates stay below the correlation limit") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    DatasetConfig cfg;
    cfg.classes = 3 + static_cast<int>(seed % 4);
    cfg.frames = 64;
    const TemplateBank bank(cfg, seed);
    const double oracle = max_correlation_oracle(bank, cfg.frames);
    CHECK(oracle < cfg.max_template_correlation);
    CHECK(bank.max_pairwise_correlation(cfg.frames) == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("generation is deterministic per seed") {
  DatasetConfig cfg;
  cfg.samples_per_cell = 4;
  const auto a = generate_dataset(cfg, 11);
  const auto b = generate_dataset(cfg, 11);
  const auto c = generate_dataset(cfg, 12);
  bool differs = false;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].series == b.samples[i].series);
    differs = differs || a.samples[i].series != c.samples[i].series;
  }
  CHECK(differs);
}

TEST_CASE("save and load round trip") {
  DatasetConfig cfg;
  cfg.samples_per_cell = 3;
  const auto ds = generate_dataset(cfg, 5);
  const auto dir = std::filesystem::temp_directory_path() / "mifs_dataset_rt";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  save_dataset(ds, dir);
  const auto back = load_dataset(dir);
  std::filesystem::remove_all(dir);
  REQUIRE(back.samples.size() == ds.samples.size());
  CHECK(dataset_config_to_json(back.config) == dataset_config_to_json(ds.config));
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    // series.bin stores float32
    const Eigen::MatrixXd rounded = ds.samples[i].series.cast<float>().cast<double>();
    CHECK(back.samples[i].series == rounded);
    CHECK(back.samples[i].label == ds.samples[i].label);
    CHECK(back.samples[i].speed == ds.samples[i].speed);
    CHECK(back.samples[i].train == ds.samples[i].train);
  }
  CHECK_THROWS_AS(load_dataset("/nonexistent/dir"), IoError);
}

TEST_CASE("config json keeps defaults for missing keys") {
  DatasetConfig base;
  base.classes = 7;
  const auto cfg = dataset_config_from_json(nlohmann::json{{"noise", 0.3}}, base);
  CHECK(cfg.classes == 7);
  CHECK(cfg.noise == 0.3);
}

TEST_CASE("invalid configs are rejected") {
  auto rejects = [](auto mutate) {
    DatasetConfig cfg;
    mutate(cfg);
    CHECK_THROWS_AS(generate_dataset(cfg, 0), ValidationError);
  };
  rejects([](DatasetConfig& c) { c.classes = 1; });
  rejects([](DatasetConfig& c) { c.speeds = {}; });
  rejects([](DatasetConfig& c) { c.speeds = {5}; });
  rejects([](DatasetConfig& c) { c.samples_per_cell = 1; });
  rejects([](DatasetConfig& c) { c.noise = -1.0; });
  rejects([](DatasetConfig& c) { c.jitter = 1.0; });
  rejects([](DatasetConfig& c) { c.train_fraction = 1.0; });
  rejects([](DatasetConfig& c) { c.fast_cycles = {5.0, 2.0}; });
  rejects([](DatasetConfig& c) {
    c.classes = 7;  // 3 x 2 pattern pairs
  });
}

}  // TEST_SUITE
