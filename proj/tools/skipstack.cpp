#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mifs/error.hpp"
#include "mifs/experiment.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<unsigned> threads;
  std::string format;
  std::string input;
  std::string model;
  std::string csv;
  std::string kind;
  bool svg = false;
  bool no_renormalize = false;
};

unsigned env_threads() {
  const char* v = std::getenv("SKIPSTACK_THREADS");
  if (!v || !*v) return 0;
  char* end = nullptr;
  const unsigned long n = std::strtoul(v, &end, 10);
  if (*end != '\0' || n == 0) throw mifs::ValidationError("SKIPSTACK_THREADS must be a positive integer");
  return static_cast<unsigned>(n);
}

// File values first, then flags on top.
mifs::ExperimentConfig resolve(const Flags& f) {
  mifs::ExperimentConfig cfg = f.config.empty() ? mifs::ExperimentConfig{} : mifs::load_config(f.config);
  if (f.seed) cfg.seed = f.seed;
  if (!f.out.empty()) cfg.out = f.out;
  if (f.threads) cfg.threads = *f.threads;
  else if (unsigned t = env_threads()) cfg.threads = t;
  if (cfg.threads == 0) throw mifs::ValidationError("--threads must be positive");
  if (!f.format.empty()) cfg.format = f.format;
  if (f.svg) cfg.svg = true;
  if (f.no_renormalize) cfg.codec.renormalize = false;
  cfg.require_seed();
  return cfg;
}

std::string need(const std::string& value, const char* flag) {
  if (value.empty()) throw mifs::ValidationError(std::string(flag) + " is required");
  return value;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skipstack: multi-skip feature stacking experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mifs::kToolVersion));

  Flags f;
  app.add_option("--config", f.config, "JSON config file");
  app.add_option("--seed", f.seed, "random seed (overrides config)");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--threads", f.threads, "worker threads (fallback: SKIPSTACK_THREADS)");
  app.add_option("--format", f.format, "table format")->check(CLI::IsMember({"csv", "json"}));
  app.fallthrough();

  struct Verb {
    const char* name;
    const char* help;
  };
  const Verb verbs[] = {
      {"model-gen", "sample a latent model and write model.json"},
      {"sim-condition", "coverage of the condition-number sandwich, fixed skip vs stacked"},
      {"sim-bounds", "tabulate analytic bounds per level"},
      {"bernstein-check", "empirical exceedance of the matrix Bernstein bound"},
      {"spectrum", "normalized singular spectrum per stacked level"},
      {"dataset-gen", "generate the synthetic multi-speed action dataset"},
      {"encode", "extract descriptors and fit/apply the Fisher Vector codec"},
      {"train", "train one-vs-all linear SVMs on encodings"},
      {"evaluate", "evaluate a trained model on the test split"},
      {"run-recognition", "single-scale vs stacked recognition grid"},
      {"cost-report", "relative extraction cost of a schedule"},
      {"plot", "render a CSV as SVG"},
  };
  std::map<std::string, CLI::App*> sub;
  for (const auto& v : verbs) sub[v.name] = app.add_subcommand(v.name, v.help);

  for (const char* name : {"sim-condition", "spectrum", "run-recognition"})
    sub[name]->add_flag("--svg", f.svg, "also write SVG plots");
  for (const char* name : {"encode", "run-recognition"})
    sub[name]->add_flag("--no-renormalize", f.no_renormalize, "skip the final L2 renormalization");
  for (const char* name : {"encode", "train", "evaluate"})
    sub[name]->add_option("--input", f.input, "input directory");
  sub["evaluate"]->add_option("--model", f.model, "svm_model.json (default: <input>/svm_model.json)");
  sub["plot"]->add_option("--csv", f.csv, "input CSV")->required();
  sub["plot"]->add_option("--kind", f.kind, "plot kind")
      ->required()
      ->check(CLI::IsMember({"spectrum", "coverage", "accuracy-grid"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const mifs::ExperimentConfig cfg = resolve(f);
    std::vector<std::string> written;
    if (sub["model-gen"]->parsed()) written = mifs::run_model_gen(cfg);
    else if (sub["sim-condition"]->parsed()) written = mifs::run_sim_condition(cfg);
    else if (sub["sim-bounds"]->parsed()) written = mifs::run_sim_bounds(cfg);
    else if (sub["bernstein-check"]->parsed()) written = mifs::run_bernstein_check(cfg);
    else if (sub["spectrum"]->parsed()) written = mifs::run_spectrum(cfg);
    else if (sub["dataset-gen"]->parsed()) written = mifs::run_dataset_gen(cfg);
    else if (sub["encode"]->parsed()) written = mifs::run_encode(cfg, need(f.input, "--input"));
    else if (sub["train"]->parsed()) written = mifs::run_train(cfg, need(f.input, "--input"));
    else if (sub["evaluate"]->parsed()) written = mifs::run_evaluate(cfg, need(f.input, "--input"), f.model);
    else if (sub["run-recognition"]->parsed()) written = mifs::run_recognition(cfg);
    else if (sub["cost-report"]->parsed()) written = mifs::run_cost_report(cfg);
    else if (sub["plot"]->parsed()) written = mifs::run_plot(cfg, f.csv, f.kind);
    for (const auto& name : written) std::cout << (cfg.out / name).string() << '\n';
    return 0;
  } catch (const mifs::Error& e) {
    std::cerr << "skipstack: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "skipstack: " << e.what() << '\n';
    return 3;
  }
}
