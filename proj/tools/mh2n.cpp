// Command-line front end: experiment orchestration over the model, chain,
// Skorokhod, Gaussian and diffusion modules.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "mh2n/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"M/H2/n+M simulation and verification toolkit"};

  std::string config_path;
  std::string experiment;
  std::string out_dir;
  long seed = -1;
  long reps = -1;
  int parallel = -1;

  app.add_option("--config", config_path, "flat key-value configuration file")->required();
  app.add_option("--experiment", experiment,
                 "exponent | counterexample | simulate | dominance | skorokhod | gauss-sup | "
                 "limit-sim | report (overrides config)");
  app.add_option("--seed", seed, "master seed (overrides config)");
  app.add_option("--reps", reps, "replication count (overrides config)");
  app.add_option("--out", out_dir, "output directory (overrides config)");
  app.add_option("--parallel", parallel, "worker threads, 0 = all cores (overrides config)");

  CLI11_PARSE(app, argc, argv);

  mh2n::RunConfig cfg;
  try {
    cfg = mh2n::load_run_config(config_path);
    if (!experiment.empty()) cfg.experiment = experiment;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (reps >= 0) cfg.reps = static_cast<std::size_t>(reps);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (parallel >= 0) cfg.parallel = parallel;
    if (cfg.experiment.empty())
      throw std::invalid_argument("no experiment selected (config [experiment] id or --experiment)");
    cfg.params.validate(mh2n::RegimeCheck::kNone);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "invalid configuration: %s\n", e.what());
    return 2;
  }

  return mh2n::run_experiment(cfg) == 0 ? 0 : 1;
}
