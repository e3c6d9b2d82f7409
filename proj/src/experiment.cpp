#include "mifs/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mifs/error.hpp"
#include "mifs/matrix_io.hpp"
#include "mifs/parallel.hpp"
#include "mifs/svg_plot.hpp"

namespace mifs {

namespace fs = std::filesystem;

namespace {

// Infinite values are written as the string "inf" in both CSV and JSON.
nlohmann::json number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

std::string cell(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<nlohmann::json> row) { rows_.push_back(std::move(row)); }

  std::string csv() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < header_.size(); ++i) out << (i ? "," : "") << header_[i];
    out << '\n';
    for (const auto& row : rows_) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        out << (i ? "," : "");
        const auto& v = row[i];
        if (v.is_number_float()) out << cell(v.get<double>());
        else if (v.is_string()) out << v.get<std::string>();
        else out << v.dump();
      }
      out << '\n';
    }
    return out.str();
  }

  nlohmann::json json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& row : rows_) {
      nlohmann::json obj;
      for (std::size_t i = 0; i < row.size(); ++i) obj[header_[i]] = row[i];
      out.push_back(std::move(obj));
    }
    return out;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<nlohmann::json>> rows_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void prepare_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

// Writes a table as CSV or JSON per config.format, returning the file name.
std::string emit_table(const ExperimentConfig& config, const std::string& stem, const Table& table) {
  if (config.format == "json") {
    write_json(config.out / (stem + ".json"), table.json());
    return stem + ".json";
  }
  write_text(config.out / (stem + ".csv"), table.csv());
  return stem + ".csv";
}

nlohmann::json bounds_json(const ConditionReport& r) {
  return {{"lower", number(r.bound_lower)},
          {"upper", number(r.bound_upper)},
          {"delta_tau", r.delta_tau},
          {"t_min_required", r.t_min_required}};
}

nlohmann::json summary_json(const CoverageSummary& s) {
  return {{"coverage", s.coverage},
          {"mean_beta", number(s.mean_beta)},
          {"var_beta", number(s.var_beta)},
          {"infinite", s.infinite},
          {"trials", s.trials.size()},
          {"bounds", bounds_json(s.bounds)}};
}

Table coverage_table(const CoverageSummary& s) {
  Table t({"trial", "beta", "lower", "upper", "within"});
  for (const auto& tr : s.trials)
    t.add({tr.trial, number(tr.beta), number(tr.lower), number(tr.upper), tr.within ? 1 : 0});
  return t;
}

SkipSchedule frame_schedule(int frames, int levels, std::vector<int> exclude = {}) {
  return SkipSchedule::for_frames(frames, levels, std::move(exclude));
}

std::vector<SeriesDescriptorSet> describe(const SyntheticActionDataset& dataset, const SkipSchedule& schedule,
                                          int window, unsigned threads) {
  std::vector<SeriesDescriptorSet> sets(dataset.samples.size());
  parallel_for(sets.size(), threads, [&](std::size_t i) {
    sets[i] = extract_series_descriptors(dataset.samples[i].series, schedule, window);
  });
  return sets;
}

SvmOptions svm_options(const ClassifierConfig& c, std::uint64_t seed, unsigned threads) {
  SvmOptions o;
  o.c = c.c;
  o.epochs = c.epochs;
  o.tol = c.tol;
  o.seed = seed;
  o.threads = threads;
  return o;
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& m, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

struct TrainedClassifier {
  LinearModel model;
  std::optional<CvResult> cv;
};

TrainedClassifier train_classifier(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                   const ClassifierConfig& config, std::uint64_t seed, unsigned threads) {
  SvmOptions options = svm_options(config, seed, threads);
  TrainedClassifier out;
  if (config.cross_validate) {
    out.cv = select_c_by_cv(x, labels, config.grid, config.folds, Protocol::macc, options);
    options.c = out.cv->best_c;
  }
  out.model = svm_train(x, labels, options);
  return out;
}

}  // namespace

SkipSchedule ScheduleConfig::schedule() const { return with_levels(levels); }

SkipSchedule ScheduleConfig::with_levels(int l) const {
  std::vector<int> kept;
  for (int e : exclude)
    if (e <= l) kept.push_back(e);
  if (frames > 0) return SkipSchedule::for_frames(frames, l, kept);
  return SkipSchedule(base_tau, l, kept);
}

std::uint64_t ExperimentConfig::require_seed() const {
  if (!seed) throw ValidationError("seed is required (set \"seed\" in the config or pass --seed)");
  return *seed;
}

LatentModel ExperimentConfig::build_model() const {
  return new_model(model.k, model.d, model.gammas, model.c, model.sigma, require_seed());
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  try {
    if (j.contains("model")) {
      const auto& m = j["model"];
      cfg.model.k = m.value("k", cfg.model.k);
      cfg.model.d = m.value("d", cfg.model.d);
      cfg.model.gammas = m.value("gammas", cfg.model.gammas);
      cfg.model.c = m.value("c", cfg.model.c);
      cfg.model.sigma = m.value("sigma", cfg.model.sigma);
    }
    if (j.contains("schedule")) {
      const auto& s = j["schedule"];
      cfg.schedule.base_tau = s.value("base_tau", cfg.schedule.base_tau);
      cfg.schedule.frames = s.value("frames", cfg.schedule.frames);
      cfg.schedule.levels = s.value("levels", cfg.schedule.levels);
      cfg.schedule.exclude = s.value("exclude", cfg.schedule.exclude);
    }
    if (j.contains("condition")) {
      const auto& c = j["condition"];
      cfg.condition.tau = c.value("tau", cfg.condition.tau);
      cfg.condition.columns = c.value("columns", cfg.condition.columns);
      cfg.condition.trials = c.value("trials", cfg.condition.trials);
      cfg.condition.delta = c.value("delta", cfg.condition.delta);
      cfg.condition.corollary_m = c.value("corollary_m", cfg.condition.corollary_m);
    }
    if (j.contains("bernstein")) {
      const auto& b = j["bernstein"];
      cfg.bernstein.p = b.value("p", cfg.bernstein.p);
      cfg.bernstein.n = b.value("n", cfg.bernstein.n);
      cfg.bernstein.b = b.value("b", cfg.bernstein.b);
      cfg.bernstein.deltas = b.value("deltas", cfg.bernstein.deltas);
      cfg.bernstein.trials = b.value("trials", cfg.bernstein.trials);
    }
    if (j.contains("dataset")) cfg.dataset = dataset_config_from_json(j["dataset"], cfg.dataset);
    if (j.contains("codec")) {
      const auto& c = j["codec"];
      cfg.codec.pca_dims = c.value("pca_dims", cfg.codec.pca_dims);
      cfg.codec.gmm.components = c.value("gmm_components", cfg.codec.gmm.components);
      cfg.codec.gmm.max_iters = c.value("max_iters", cfg.codec.gmm.max_iters);
      cfg.codec.gmm.tol = c.value("tol", cfg.codec.gmm.tol);
      cfg.codec.gmm.variance_floor = c.value("variance_floor", cfg.codec.gmm.variance_floor);
      cfg.codec.sample_budget = c.value("sample_budget", cfg.codec.sample_budget);
      cfg.codec.renormalize = c.value("renormalize", cfg.codec.renormalize);
    }
    if (j.contains("classifier")) {
      const auto& c = j["classifier"];
      cfg.classifier.c = c.value("c", cfg.classifier.c);
      cfg.classifier.cross_validate = c.value("cross_validate", cfg.classifier.cross_validate);
      cfg.classifier.grid = c.value("grid", cfg.classifier.grid);
      cfg.classifier.folds = c.value("folds", cfg.classifier.folds);
      cfg.classifier.epochs = c.value("epochs", cfg.classifier.epochs);
      cfg.classifier.tol = c.value("tol", cfg.classifier.tol);
    }
    if (j.contains("recognition")) {
      const auto& r = j["recognition"];
      cfg.recognition.max_level = r.value("max_level", cfg.recognition.max_level);
      cfg.recognition.window = r.value("window", cfg.recognition.window);
      cfg.recognition.repeats = r.value("repeats", cfg.recognition.repeats);
      cfg.recognition.masked_runs = r.value("masked_runs", cfg.recognition.masked_runs);
    }
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out")) cfg.out = j["out"].get<std::string>();
    cfg.threads = j.value("threads", cfg.threads);
    cfg.format = j.value("format", cfg.format);
    cfg.svg = j.value("svg", cfg.svg);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid config: ") + e.what());
  }
  if (cfg.format != "csv" && cfg.format != "json") throw ValidationError("format must be csv or json");
  return cfg;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j{
      {"model",
       {{"k", cfg.model.k}, {"d", cfg.model.d}, {"gammas", cfg.model.gammas}, {"c", cfg.model.c},
        {"sigma", cfg.model.sigma}}},
      {"schedule",
       {{"base_tau", cfg.schedule.base_tau}, {"frames", cfg.schedule.frames}, {"levels", cfg.schedule.levels},
        {"exclude", cfg.schedule.exclude}}},
      {"condition",
       {{"tau", cfg.condition.tau}, {"columns", cfg.condition.columns}, {"trials", cfg.condition.trials},
        {"delta", cfg.condition.delta}, {"corollary_m", cfg.condition.corollary_m}}},
      {"bernstein",
       {{"p", cfg.bernstein.p}, {"n", cfg.bernstein.n}, {"b", cfg.bernstein.b}, {"deltas", cfg.bernstein.deltas},
        {"trials", cfg.bernstein.trials}}},
      {"dataset", dataset_config_to_json(cfg.dataset)},
      {"codec",
       {{"pca_dims", cfg.codec.pca_dims}, {"gmm_components", cfg.codec.gmm.components},
        {"max_iters", cfg.codec.gmm.max_iters}, {"tol", cfg.codec.gmm.tol},
        {"variance_floor", cfg.codec.gmm.variance_floor}, {"sample_budget", cfg.codec.sample_budget},
        {"renormalize", cfg.codec.renormalize}}},
      {"classifier",
       {{"c", cfg.classifier.c}, {"cross_validate", cfg.classifier.cross_validate}, {"grid", cfg.classifier.grid},
        {"folds", cfg.classifier.folds}, {"epochs", cfg.classifier.epochs}, {"tol", cfg.classifier.tol}}},
      {"recognition",
       {{"max_level", cfg.recognition.max_level}, {"window", cfg.recognition.window},
        {"repeats", cfg.recognition.repeats}, {"masked_runs", cfg.recognition.masked_runs}}},
      {"format", cfg.format},
      {"svg", cfg.svg}};
  j["seed"] = cfg.seed ? nlohmann::json(*cfg.seed) : nlohmann::json(nullptr);
  return j;
}

ExperimentConfig load_config(const fs::path& path) { return config_from_json(read_json(path)); }

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_checksum(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream bytes;
  bytes << in.rdbuf();
  return fnv1a_hex(bytes.str());
}

void write_manifest(const fs::path& dir, const std::string& command, const ExperimentConfig& config,
                    const std::vector<std::string>& outputs) {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& name : outputs)
    files.push_back({{"file", name}, {"fnv1a64", file_checksum(dir / name)}, {"bytes", fs::file_size(dir / name)}});
  write_json(dir / "manifest.json", {{"command", command},
                                     {"tool_version", kToolVersion},
                                     {"config_hash", fnv1a_hex(config_to_json(config).dump())},
                                     {"outputs", std::move(files)}});
}

ConditionComparison compare_conditioning(const LatentModel& model, const FixedSkip& fixed,
                                         const SkipSchedule& schedule, double delta, std::size_t trials,
                                         std::uint64_t seed, unsigned threads) {
  const Rng rng(seed);
  return ConditionComparison{coverage_experiment(model, fixed, delta, trials, rng, threads),
                             coverage_experiment(model, schedule, delta, trials, rng, threads)};
}

std::vector<SpectrumCurve> spectrum_by_level(const LatentModel& model, const ScheduleConfig& schedule, int max_level,
                                             std::uint64_t seed, unsigned threads) {
  std::vector<SpectrumCurve> curves;
  const Rng rng(seed);
  for (int level = 0; level <= max_level; ++level) {
    const SkipSchedule s = schedule.with_levels(level);
    const FeatureMatrix fm = mifs_stack(model, s, rng, /*observe=*/true, threads);
    curves.push_back(spectrum_curve(fm.f, std::to_string(level)));
  }
  return curves;
}

RecognitionRun run_recognition_once(const SyntheticActionDataset& dataset, const SkipSchedule& schedule, int window,
                                    const CodecConfig& codec_config, const ClassifierConfig& classifier,
                                    std::uint64_t seed, unsigned threads) {
  const auto sets = describe(dataset, schedule, window, threads);
  const auto train_idx = dataset.split(true);
  const auto test_idx = dataset.split(false);
  std::vector<SeriesDescriptorSet> train_sets;
  for (auto i : train_idx) train_sets.push_back(sets[i]);
  Rng codec_rng(derive_seed(seed, 1));
  const FisherCodec codec = fit_codec(train_sets, codec_config, codec_rng);
  const EncodedDataset encoded = encode_dataset(codec, sets, threads);

  std::vector<int> train_labels, test_labels;
  for (auto i : train_idx) train_labels.push_back(dataset.samples[i].label);
  for (auto i : test_idx) test_labels.push_back(dataset.samples[i].label);
  const auto trained =
      train_classifier(rows_of(encoded.encodings, train_idx), train_labels, classifier, derive_seed(seed, 2), threads);
  RecognitionRun run;
  run.label = schedule.label();
  run.report = evaluate(trained.model, rows_of(encoded.encodings, test_idx), test_labels);
  run.relative_cost = level_cost_report(schedule).total_relative;
  return run;
}

RecognitionGrid recognition_grid(const ExperimentConfig& config) {
  const std::uint64_t seed = config.require_seed();
  const int levels = config.recognition.max_level;
  const int repeats = config.recognition.repeats;
  if (levels < 0) throw ValidationError("max_level must be non-negative");
  if (repeats < 1) throw ValidationError("repeats must be at least 1");
  const int frames = config.dataset.frames;

  RecognitionGrid grid;
  grid.single_macc.assign(static_cast<std::size_t>(levels + 1), 0.0);
  grid.mifs_macc.assign(static_cast<std::size_t>(levels + 1), 0.0);
  grid.single_map.assign(static_cast<std::size_t>(levels + 1), 0.0);
  grid.mifs_map.assign(static_cast<std::size_t>(levels + 1), 0.0);
  for (int r = 0; r < repeats; ++r) {
    const std::uint64_t rs = derive_seed(seed, static_cast<std::uint64_t>(r));
    const SyntheticActionDataset dataset = generate_dataset(config.dataset, rs);
    std::vector<double> single_row, mifs_row;
    for (int l = 0; l <= levels; ++l) {
      const auto single = run_recognition_once(dataset, SkipSchedule::single_level(1.0 / frames, l),
                                               config.recognition.window, config.codec, config.classifier, rs,
                                               config.threads);
      const auto stacked = l == 0 ? single
                                  : run_recognition_once(dataset, frame_schedule(frames, l), config.recognition.window,
                                                         config.codec, config.classifier, rs, config.threads);
      single_row.push_back(single.report.macc);
      mifs_row.push_back(stacked.report.macc);
      grid.single_macc[static_cast<std::size_t>(l)] += single.report.macc / repeats;
      grid.mifs_macc[static_cast<std::size_t>(l)] += stacked.report.macc / repeats;
      grid.single_map[static_cast<std::size_t>(l)] += single.report.map / repeats;
      grid.mifs_map[static_cast<std::size_t>(l)] += stacked.report.map / repeats;
    }
    grid.single_by_repeat.push_back(std::move(single_row));
    grid.mifs_by_repeat.push_back(std::move(mifs_row));
    if (r + 1 == repeats && config.recognition.masked_runs) {
      for (int l = 1; l <= std::min(2, levels); ++l)
        grid.masked.push_back(run_recognition_once(dataset, frame_schedule(frames, l, {0}), config.recognition.window,
                                                   config.codec, config.classifier, rs, config.threads));
    }
  }
  return grid;
}

// ---------------------------------------------------------------------------
// commands

std::vector<std::string> run_model_gen(const ExperimentConfig& config) {
  const LatentModel model = config.build_model();
  prepare_out(config.out);
  save_model(model, config.out / "model.json");
  std::vector<std::string> outputs{"model.json"};
  write_manifest(config.out, "model-gen", config, outputs);
  return outputs;
}

std::vector<std::string> run_sim_condition(const ExperimentConfig& config) {
  const LatentModel model = config.build_model();
  const auto& cc = config.condition;
  const SkipSchedule stacked(cc.tau, config.schedule.levels, config.schedule.exclude);
  const auto cmp = compare_conditioning(model, FixedSkip{cc.tau, cc.columns}, stacked, cc.delta, cc.trials,
                                        config.require_seed(), config.threads);
  prepare_out(config.out);
  write_text(config.out / "coverage_fixed.csv", coverage_table(cmp.fixed).csv());
  write_text(config.out / "coverage_mifs.csv", coverage_table(cmp.stacked).csv());
  write_json(config.out / "condition_summary.json",
             {{"delta", cc.delta},
              {"tau", cc.tau},
              {"schedule", stacked.label()},
              {"fixed", summary_json(cmp.fixed)},
              {"mifs", summary_json(cmp.stacked)},
              {"mean_beta_reduced", cmp.stacked.mean_beta < cmp.fixed.mean_beta},
              {"var_beta_reduced", cmp.stacked.var_beta < cmp.fixed.var_beta}});
  std::vector<std::string> outputs{"coverage_fixed.csv", "coverage_mifs.csv", "condition_summary.json"};
  if (config.svg) {
    write_text(config.out / "coverage_fixed.svg", render_svg(parse_csv(coverage_table(cmp.fixed).csv()), "coverage"));
    write_text(config.out / "coverage_mifs.svg", render_svg(parse_csv(coverage_table(cmp.stacked).csv()), "coverage"));
    outputs.insert(outputs.end(), {"coverage_fixed.svg", "coverage_mifs.svg"});
  }
  write_manifest(config.out, "sim-condition", config, outputs);
  return outputs;
}

std::vector<std::string> run_sim_bounds(const ExperimentConfig& config) {
  const auto& m = config.model;
  const auto& cc = config.condition;
  Table bounds({"kind", "label", "total_features", "delta_tau", "lower", "upper"});
  const std::size_t columns =
      cc.columns > 0 ? cc.columns : static_cast<std::size_t>(std::floor(1.0 / cc.tau + 1e-9));
  const auto t1 = theorem1_bounds(m.gammas.front(), m.gammas.back(), m.c, cc.tau, m.k, columns, cc.delta);
  bounds.add({"fixed", "tau", columns, t1.delta_tau, number(t1.bound_lower), number(t1.bound_upper)});
  for (int l = 0; l <= config.schedule.levels; ++l) {
    std::vector<int> kept;
    for (int e : config.schedule.exclude)
      if (e <= l) kept.push_back(e);
    const SkipSchedule s(cc.tau, l, kept);
    const auto t2 = theorem2_bounds(m.gammas, m.c, s, cc.delta);
    bounds.add({"stacked", s.label(), s.total_budget(), t2.delta_tau, number(t2.bound_lower), number(t2.bound_upper)});
  }
  Table corollary({"m", "exponential", "polynomial"});
  for (int mm = 0; mm <= cc.corollary_m; ++mm) {
    const auto cb = corollary1_lower(mm, m.gammas.front(), cc.tau, m.c);
    corollary.add({mm, number(cb.exponential), number(cb.polynomial)});
  }
  prepare_out(config.out);
  std::vector<std::string> outputs{emit_table(config, "bounds", bounds), emit_table(config, "corollary", corollary)};
  write_manifest(config.out, "sim-bounds", config, outputs);
  return outputs;
}

std::vector<std::string> run_bernstein_check(const ExperimentConfig& config) {
  const auto& bc = config.bernstein;
  const auto sample = bernstein_deviations(bc.p, bc.n, bc.b, bc.trials, Rng(config.require_seed()),
                                           VectorSampler::rademacher, config.threads);
  double worst = 0.0;
  for (double d : sample.deviations) worst = std::max(worst, d);
  Table t({"delta", "bound", "exceedance", "max_deviation"});
  for (double delta : bc.deltas)
    t.add({delta, bernstein_bound(bc.b, sample.norm_es, bc.p, bc.n, delta), exceedance_rate(sample, delta), worst});
  prepare_out(config.out);
  std::vector<std::string> outputs{emit_table(config, "bernstein", t)};
  write_manifest(config.out, "bernstein-check", config, outputs);
  return outputs;
}

std::vector<std::string> run_spectrum(const ExperimentConfig& config) {
  const LatentModel model = config.build_model();
  if (config.schedule.levels > 5) throw ValidationError("spectrum supports levels up to 5");
  const auto curves = spectrum_by_level(model, config.schedule, config.schedule.levels, config.require_seed(),
                                        config.threads);
  Table t({"level", "index", "sigma_normalized"});
  for (const auto& curve : curves)
    for (std::size_t i = 0; i < curve.sigmas.size(); ++i) t.add({curve.level_label, i + 1, curve.sigmas[i]});
  prepare_out(config.out);
  const std::string csv = t.csv();
  write_text(config.out / "spectrum.csv", csv);
  std::vector<std::string> outputs{"spectrum.csv"};
  if (config.svg) {
    write_text(config.out / "spectrum.svg", render_svg(parse_csv(csv), "spectrum"));
    outputs.push_back("spectrum.svg");
  }
  write_manifest(config.out, "spectrum", config, outputs);
  return outputs;
}

std::vector<std::string> run_dataset_gen(const ExperimentConfig& config) {
  const auto dataset = generate_dataset(config.dataset, config.require_seed());
  prepare_out(config.out);
  save_dataset(dataset, config.out);
  std::vector<std::string> outputs{"dataset.json", "series.bin"};
  write_manifest(config.out, "dataset-gen", config, outputs);
  return outputs;
}

std::vector<std::string> run_encode(const ExperimentConfig& config, const fs::path& input) {
  const std::uint64_t seed = config.require_seed();
  const auto dataset = load_dataset(input);
  const SkipSchedule schedule = frame_schedule(dataset.config.frames, config.schedule.levels, config.schedule.exclude);
  const auto sets = describe(dataset, schedule, config.recognition.window, config.threads);
  std::vector<SeriesDescriptorSet> train_sets;
  for (auto i : dataset.split(true)) train_sets.push_back(sets[i]);
  Rng rng(derive_seed(seed, 1));
  const FisherCodec codec = fit_codec(train_sets, config.codec, rng);
  const EncodedDataset encoded = encode_dataset(codec, sets, config.threads);

  prepare_out(config.out);
  save_codec(codec, config.out / "codec.json");
  write_container(config.out / "encodings.bin", MatrixContainer{"FV", encoded.encodings, {}, {}});
  nlohmann::json labels = nlohmann::json::array(), split = nlohmann::json::array(), empty = nlohmann::json::array();
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    labels.push_back(dataset.samples[i].label);
    split.push_back(dataset.samples[i].train ? "train" : "test");
    empty.push_back(static_cast<bool>(encoded.empty[i]));
  }
  write_json(config.out / "encodings.json", {{"schedule", schedule.label()},
                                             {"dim", codec.encoding_dim()},
                                             {"classes", dataset.config.classes},
                                             {"labels", labels},
                                             {"split", split},
                                             {"empty", empty}});
  std::vector<std::string> outputs{"codec.json", "encodings.bin", "encodings.json"};
  write_manifest(config.out, "encode", config, outputs);
  return outputs;
}

namespace {

struct EncodedSplit {
  Eigen::MatrixXd x;
  std::vector<int> labels;
};

EncodedSplit load_split(const fs::path& input, bool train) {
  const auto meta = read_json(input / "encodings.json");
  const auto container = read_container(input / "encodings.bin");
  if (container.kind != "FV") throw ValidationError("encodings.bin has kind " + container.kind + ", expected FV");
  std::vector<std::size_t> idx;
  EncodedSplit out;
  try {
    const auto labels = meta.at("labels").get<std::vector<int>>();
    const auto split = meta.at("split").get<std::vector<std::string>>();
    if (labels.size() != static_cast<std::size_t>(container.data.rows()) || split.size() != labels.size())
      throw ValidationError("encodings.json does not match encodings.bin");
    for (std::size_t i = 0; i < labels.size(); ++i)
      if ((split[i] == "train") == train) {
        idx.push_back(i);
        out.labels.push_back(labels[i]);
      }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed encodings.json: ") + e.what());
  }
  out.x = rows_of(container.data, idx);
  return out;
}

}  // namespace

std::vector<std::string> run_train(const ExperimentConfig& config, const fs::path& input) {
  const auto split = load_split(input, true);
  const auto trained = train_classifier(split.x, split.labels, config.classifier, derive_seed(config.require_seed(), 2),
                                        config.threads);
  prepare_out(config.out);
  save_linear_model(trained.model, config.out / "svm_model.json");
  std::vector<std::string> outputs{"svm_model.json"};
  if (trained.cv) {
    nlohmann::json scores = nlohmann::json::array();
    for (std::size_t i = 0; i < trained.cv->grid.size(); ++i)
      scores.push_back({{"c", trained.cv->grid[i]}, {"macc", trained.cv->fold_scores[i]}});
    write_json(config.out / "cv.json", {{"best_c", trained.cv->best_c}, {"folds", config.classifier.folds},
                                        {"scores", scores}});
    outputs.push_back("cv.json");
  }
  write_manifest(config.out, "train", config, outputs);
  return outputs;
}

std::vector<std::string> run_evaluate(const ExperimentConfig& config, const fs::path& input, const fs::path& model_path) {
  const auto split = load_split(input, false);
  const LinearModel model = load_linear_model(model_path.empty() ? input / "svm_model.json" : model_path);
  const EvalReport report = evaluate(model, split.x, split.labels);
  prepare_out(config.out);
  write_json(config.out / "eval.json", report_to_json(report));
  std::vector<std::string> outputs{"eval.json"};
  write_manifest(config.out, "evaluate", config, outputs);
  return outputs;
}

std::vector<std::string> run_recognition(const ExperimentConfig& config) {
  const RecognitionGrid grid = recognition_grid(config);
  const int frames = config.dataset.frames;
  Table t({"level", "single", "mifs", "single_map", "mifs_map", "single_cost", "mifs_cost"});
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t l = 0; l < grid.single_macc.size(); ++l) {
    const int level = static_cast<int>(l);
    const double single_cost = level_cost_report(SkipSchedule::single_level(1.0 / frames, level)).total_relative;
    const double mifs_cost = level_cost_report(frame_schedule(frames, level)).total_relative;
    t.add({l, grid.single_macc[l], grid.mifs_macc[l], grid.single_map[l], grid.mifs_map[l], single_cost, mifs_cost});
    rows.push_back({{"level", l},
                    {"single_macc", grid.single_macc[l]},
                    {"mifs_macc", grid.mifs_macc[l]},
                    {"single_map", grid.single_map[l]},
                    {"mifs_map", grid.mifs_map[l]},
                    {"single_cost", single_cost},
                    {"mifs_cost", mifs_cost}});
  }
  nlohmann::json masked = nlohmann::json::array();
  for (const auto& run : grid.masked)
    masked.push_back({{"schedule", run.label},
                      {"macc", run.report.macc},
                      {"map", run.report.map},
                      {"relative_cost", run.relative_cost}});
  prepare_out(config.out);
  const std::string csv = t.csv();
  write_text(config.out / "accuracy_grid.csv", csv);
  write_json(config.out / "recognition.json", {{"repeats", config.recognition.repeats},
                                               {"grid", rows},
                                               {"single_by_repeat", grid.single_by_repeat},
                                               {"mifs_by_repeat", grid.mifs_by_repeat},
                                               {"masked", masked}});
  std::vector<std::string> outputs{"accuracy_grid.csv", "recognition.json"};
  if (config.svg) {
    write_text(config.out / "accuracy_grid.svg", render_svg(parse_csv(csv), "accuracy-grid"));
    outputs.push_back("accuracy_grid.svg");
  }
  write_manifest(config.out, "run-recognition", config, outputs);
  return outputs;
}

std::vector<std::string> run_cost_report(const ExperimentConfig& config) {
  const SkipSchedule schedule = config.schedule.schedule();
  const CostReport report = level_cost_report(schedule);
  Table t({"level", "budget", "relative", "active"});
  for (const auto& lc : report.levels) t.add({lc.level, lc.budget, lc.relative, lc.active ? 1 : 0});
  t.add({"total", schedule.total_budget(), report.total_relative, 1});
  prepare_out(config.out);
  std::vector<std::string> outputs{emit_table(config, "cost", t)};
  write_manifest(config.out, "cost-report", config, outputs);
  return outputs;
}

std::vector<std::string> run_plot(const ExperimentConfig& config, const fs::path& csv, const std::string& kind) {
  const std::string svg = render_svg(read_csv(csv), kind);
  prepare_out(config.out);
  const std::string name = csv.stem().string() + ".svg";
  write_text(config.out / name, svg);
  std::vector<std::string> outputs{name};
  write_manifest(config.out, "plot", config, outputs);
  return outputs;
}

}  // namespace mifs
