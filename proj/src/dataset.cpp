#include "mifs/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "mifs/error.hpp"
#include "mifs/matrix_io.hpp"

namespace mifs {

namespace {

constexpr int kMaxTemplateAttempts = 1000;

double pearson(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::ArrayXd x = a.reshaped().array() - a.mean();
  const Eigen::ArrayXd y = b.reshaped().array() - b.mean();
  const double denom = std::sqrt((x * x).sum() * (y * y).sum());
  return denom > 0.0 ? (x * y).sum() / denom : 0.0;
}

void validate(const DatasetConfig& config) {
  if (config.classes < 2) throw ValidationError("dataset needs at least 2 classes");
  if (config.speeds.empty()) throw ValidationError("dataset needs at least one speed");
  for (int s : config.speeds)
    if (s < 1 || s > 4) throw ValidationError("speeds must lie in {1, 2, 3, 4}");
  if (config.samples_per_cell < 2)
    throw ValidationError("each class/speed combination needs at least 2 samples (one per split)");
  if (config.frames < 8) throw ValidationError("frames must be at least 8");
  if (config.channels < 1) throw ValidationError("channels must be at least 1");
  if (!(config.noise >= 0.0)) throw ValidationError("noise must be non-negative");
  if (!(config.jitter >= 0.0 && config.jitter < 1.0)) throw ValidationError("jitter must lie in [0, 1)");
  if (!(config.max_offset >= 0.0)) throw ValidationError("max_offset must be non-negative");
  if (!(config.speed_jitter >= 0.0 && config.speed_jitter < 1.0))
    throw ValidationError("speed_jitter must lie in [0, 1)");
  if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0))
    throw ValidationError("train_fraction must lie in (0, 1)");
  if (config.slow_components + config.fast_components < 1) throw ValidationError("templates need a component");
  if (config.slow_components < 0 || config.fast_components < 0) throw ValidationError("component counts must be non-negative");
  for (const auto* range : {&config.slow_cycles, &config.fast_cycles})
    if (range->size() != 2 || !((*range)[0] > 0.0 && (*range)[0] <= (*range)[1]))
      throw ValidationError("cycle ranges must be [lo, hi] with 0 < lo <= hi");
  if (config.slow_bank < 0 || config.fast_bank < 0) throw ValidationError("pattern banks must be non-negative");
}

}  // namespace

std::vector<std::size_t> SyntheticActionDataset::split(bool train) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].train == train) out.push_back(i);
  return out;
}

TemplateBank::TemplateBank(const DatasetConfig& config, std::uint64_t seed) : channels_(config.channels) {
  validate(config);
  const int slow = config.slow_bank > 0 ? config.slow_bank : config.classes;
  const int fast = config.fast_bank > 0 ? config.fast_bank : config.classes;
  for (int label = 0; label < config.classes; ++label) {
    const int f = slow >= config.classes ? label % fast : (label / slow) % fast;
    const std::pair<int, int> p{label % slow, f};
    if (std::find(class_patterns_.begin(), class_patterns_.end(), p) != class_patterns_.end())
      throw ValidationError("slow_bank x fast_bank cannot give every class a distinct pattern pair");
    class_patterns_.push_back(p);
  }
  slow_.resize(static_cast<std::size_t>(slow));
  fast_.resize(static_cast<std::size_t>(fast));
  waves_.resize(static_cast<std::size_t>(config.classes));
  Rng rng(derive_seed(seed, 0x74706c /* "tpl" */));
  // Redraw the whole bank until every pair of class templates is decorrelated.
  for (;;) {
    if (++attempts_ > kMaxTemplateAttempts)
      throw NumericalError("could not draw class templates below the correlation limit");
    draw(config, rng);
    if (max_pairwise_correlation(config.frames) < config.max_template_correlation) break;
  }
}

void TemplateBank::draw(const DatasetConfig& config, Rng& rng) {
  auto fill = [&](std::vector<Pattern>& bank, int components, double amplitude, const std::vector<double>& cycles) {
    for (auto& pattern : bank) {
      pattern.assign(static_cast<std::size_t>(channels_), {});
      for (auto& waves : pattern)
        for (int i = 0; i < components; ++i)
          waves.push_back({amplitude * rng.uniform(0.5, 1.0), rng.uniform(cycles[0], cycles[1]), 0.0});
    }
  };
  fill(slow_, config.slow_components, 1.0, config.slow_cycles);
  fill(fast_, config.fast_components, config.fast_amplitude, config.fast_cycles);
  for (std::size_t label = 0; label < waves_.size(); ++label) {
    const auto [sl, fa] = class_patterns_[label];
    auto& pattern = waves_[label];
    pattern.assign(static_cast<std::size_t>(channels_), {});
    for (std::size_t ch = 0; ch < pattern.size(); ++ch)
      for (const auto* bank : {&slow_[static_cast<std::size_t>(sl)], &fast_[static_cast<std::size_t>(fa)]})
        for (Wave w : (*bank)[ch]) {
          w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
          pattern[ch].push_back(w);
        }
  }
}

double TemplateBank::value(int label, int channel, double u) const {
  double v = 0.0;
  for (const auto& w : waves_[static_cast<std::size_t>(label)][static_cast<std::size_t>(channel)])
    v += w.amplitude * std::sin(2.0 * std::numbers::pi * w.frequency * u + w.phase);
  return v;
}

Eigen::MatrixXd TemplateBank::render(int label, double speed, int frames, double offset) const {
  Eigen::MatrixXd out(frames, channels_);
  for (int f = 0; f < frames; ++f) {
    const double u = offset + speed * f / (frames - 1);
    for (int ch = 0; ch < channels_; ++ch) out(f, ch) = value(label, ch, u);
  }
  return out;
}

double TemplateBank::max_pairwise_correlation(int frames) const {
  double worst = 0.0;
  std::vector<Eigen::MatrixXd> rendered;
  for (int label = 0; label < classes(); ++label) rendered.push_back(render(label, 1, frames));
  for (std::size_t a = 0; a < rendered.size(); ++a)
    for (std::size_t b = a + 1; b < rendered.size(); ++b)
      worst = std::max(worst, std::abs(pearson(rendered[a], rendered[b])));
  return worst;
}

SyntheticActionDataset generate_dataset(const DatasetConfig& config, std::uint64_t seed) {
  const TemplateBank bank(config, seed);
  SyntheticActionDataset dataset;
  dataset.config = config;
  Rng rng(derive_seed(seed, 0x73616d70 /* "samp" */));
  for (int label = 0; label < config.classes; ++label) {
    // per-class train count, spread over speeds so every cell keeps a test sample
    const int cells = static_cast<int>(config.speeds.size());
    const int class_total = cells * config.samples_per_cell;
    const int class_train = static_cast<int>(std::lround(config.train_fraction * class_total));
    const int base = std::clamp(class_train / cells, 1, config.samples_per_cell - 1);
    int extra = std::max(0, class_train - base * cells);
    for (int s : config.speeds) {
      int train_here = base;
      if (extra > 0 && train_here < config.samples_per_cell - 1) {
        ++train_here;
        --extra;
      }
      for (int i = 0; i < config.samples_per_cell; ++i) {
        ActionSample sample;
        sample.label = label;
        sample.speed = s;
        sample.train = i < train_here;
        double rate = s;
        if (config.speed_jitter > 0.0) rate *= rng.uniform(1.0 - config.speed_jitter, 1.0 + config.speed_jitter);
        const double offset = config.max_offset > 0.0 ? rng.uniform(0.0, config.max_offset) : 0.0;
        sample.series =
            bank.render(label, rate, config.frames, offset) * rng.uniform(1.0 - config.jitter, 1.0 + config.jitter);
        if (config.noise > 0.0)
          for (Eigen::Index r = 0; r < sample.series.rows(); ++r)
            for (Eigen::Index c = 0; c < sample.series.cols(); ++c) sample.series(r, c) += rng.normal(0.0, config.noise);
        dataset.samples.push_back(std::move(sample));
      }
    }
  }
  return dataset;
}

nlohmann::json dataset_config_to_json(const DatasetConfig& c) {
  return {{"classes", c.classes},
          {"speeds", c.speeds},
          {"samples_per_cell", c.samples_per_cell},
          {"frames", c.frames},
          {"channels", c.channels},
          {"noise", c.noise},
          {"jitter", c.jitter},
          {"speed_jitter", c.speed_jitter},
          {"max_offset", c.max_offset},
          {"train_fraction", c.train_fraction},
          {"slow_components", c.slow_components},
          {"fast_components", c.fast_components},
          {"fast_amplitude", c.fast_amplitude},
          {"slow_cycles", c.slow_cycles},
          {"fast_cycles", c.fast_cycles},
          {"slow_bank", c.slow_bank},
          {"fast_bank", c.fast_bank},
          {"max_template_correlation", c.max_template_correlation}};
}

DatasetConfig dataset_config_from_json(const nlohmann::json& j, DatasetConfig c) {
  c.classes = j.value("classes", c.classes);
  c.speeds = j.value("speeds", c.speeds);
  c.samples_per_cell = j.value("samples_per_cell", c.samples_per_cell);
  c.frames = j.value("frames", c.frames);
  c.channels = j.value("channels", c.channels);
  c.noise = j.value("noise", c.noise);
  c.jitter = j.value("jitter", c.jitter);
  c.speed_jitter = j.value("speed_jitter", c.speed_jitter);
  c.max_offset = j.value("max_offset", c.max_offset);
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  c.slow_components = j.value("slow_components", c.slow_components);
  c.fast_components = j.value("fast_components", c.fast_components);
  c.fast_amplitude = j.value("fast_amplitude", c.fast_amplitude);
  c.slow_cycles = j.value("slow_cycles", c.slow_cycles);
  c.fast_cycles = j.value("fast_cycles", c.fast_cycles);
  c.slow_bank = j.value("slow_bank", c.slow_bank);
  c.fast_bank = j.value("fast_bank", c.fast_bank);
  c.max_template_correlation = j.value("max_template_correlation", c.max_template_correlation);
  return c;
}

void save_dataset(const SyntheticActionDataset& dataset, const std::filesystem::path& dir) {
  const auto& cfg = dataset.config;
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : dataset.samples)
    samples.push_back({{"label", s.label}, {"speed", s.speed}, {"split", s.train ? "train" : "test"}});
  const nlohmann::json doc{{"config", dataset_config_to_json(cfg)}, {"samples", std::move(samples)}};
  std::ofstream out(dir / "dataset.json");
  if (!out) throw IoError("cannot write " + (dir / "dataset.json").string());
  out << doc.dump(2) << '\n';

  MatrixContainer container;
  container.kind = "SERIES";
  container.data.resize(static_cast<Eigen::Index>(dataset.samples.size()) * cfg.frames, cfg.channels);
  for (std::size_t i = 0; i < dataset.samples.size(); ++i)
    container.data.middleRows(static_cast<Eigen::Index>(i) * cfg.frames, cfg.frames) = dataset.samples[i].series;
  write_container(dir / "series.bin", container);
}

SyntheticActionDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "dataset.json");
  if (!in) throw IoError("cannot open " + (dir / "dataset.json").string());
  SyntheticActionDataset dataset;
  try {
    const auto doc = nlohmann::json::parse(in);
    dataset.config = dataset_config_from_json(doc.at("config"), DatasetConfig{});
    for (const auto& s : doc.at("samples")) {
      ActionSample sample;
      sample.label = s.at("label").get<int>();
      sample.speed = s.at("speed").get<int>();
      sample.train = s.at("split").get<std::string>() == "train";
      dataset.samples.push_back(std::move(sample));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed dataset.json: " + std::string(e.what()));
  }
  const auto container = read_container(dir / "series.bin");
  const auto& cfg = dataset.config;
  if (container.data.rows() != static_cast<Eigen::Index>(dataset.samples.size()) * cfg.frames ||
      container.data.cols() != cfg.channels)
    throw ValidationError("series.bin shape does not match dataset.json");
  for (std::size_t i = 0; i < dataset.samples.size(); ++i)
    dataset.samples[i].series = container.data.middleRows(static_cast<Eigen::Index>(i) * cfg.frames, cfg.frames);
  return dataset;
}

}  // namespace mifs
