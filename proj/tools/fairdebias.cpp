// Experiment CLI: generate synthetic datasets, run debiasing sweeps, and
// turn the per-iterate evaluations into Pareto/selection reports.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "debias/experiment.hpp"

using nlohmann::json;

int main(int argc, char** argv) {
  CLI::App app{"multi-attribute subgroup debiasing experiments"};
  app.require_subcommand(1);

  std::string spec_path, out_dir, config_path, model_dir;
  std::string features_path, metadata_path, schema_path;
  std::vector<std::string> run_dirs;
  std::vector<double> tradeoffs{0.05, 0.10};
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 0;
  int min_positives = 5;

  CLI::App* generate = app.add_subcommand("generate", "write synthetic dataset files from a spec");
  generate->add_option("--spec", spec_path, "synthetic spec JSON")->required()->check(CLI::ExistingFile);
  generate->add_option("--out", out_dir, "output directory")->required();

  CLI::App* run = app.add_subcommand("run", "execute an experiment sweep");
  run->add_option("--config", config_path, "experiment config JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "override the config's output directory");
  run->add_option("--seed", seed, "override the config's seed")->each([&](const std::string&) { seed_set = true; });
  run->add_option("--jobs", jobs, "parallel probe training threads");

  CLI::App* report = app.add_subcommand("report", "selection table and Pareto frontiers for runs");
  report->add_option("runs", run_dirs, "run directories")->required();
  report->add_option("--tradeoff", tradeoffs, "tradeoff fractions")->delimiter(',');
  report->add_option("--out", out_dir, "report output directory")->required();

  CLI::App* pareto = app.add_subcommand("pareto", "Pareto frontier CSVs only");
  pareto->add_option("runs", run_dirs, "run directories")->required();
  pareto->add_option("--out", out_dir, "report output directory")->required();

  CLI::App* evaluate = app.add_subcommand("evaluate", "re-score a stored model on a dataset");
  evaluate->add_option("--model", model_dir, "stored model directory")->required();
  evaluate->add_option("--features", features_path, "features CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--metadata", metadata_path, "metadata JSONL")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--schema", schema_path, "schema JSON")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--min-positives", min_positives, "per-group positive count bar");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      debias::cmd_generate(spec_path, out_dir);
      std::cout << "wrote dataset files to " << out_dir << "\n";
    } else if (run->parsed()) {
      debias::ExperimentConfig config = debias::load_experiment_config(config_path);
      if (!out_dir.empty()) config.out_dir = out_dir;
      if (seed_set) config.seed = seed;
      if (jobs > 0) config.jobs = jobs;
      const std::string dir = debias::cmd_run(config);
      std::cout << "run complete: " << dir << "/points.jsonl\n";
    } else if (report->parsed()) {
      debias::cmd_report(run_dirs, tradeoffs, out_dir);
      std::cout << "report written to " << out_dir << "\n";
    } else if (pareto->parsed()) {
      debias::cmd_pareto(run_dirs, out_dir);
      std::cout << "frontiers written to " << out_dir << "\n";
    } else if (evaluate->parsed()) {
      const debias::EvaluateResult r =
          debias::cmd_evaluate(model_dir, features_path, metadata_path, schema_path, min_positives);
      const json obj = {{"f1", r.f1},
                        {"accuracy", r.accuracy},
                        {"avg_violation", r.avg_violation},
                        {"max_violation", r.max_violation},
                        {"included_groups", r.included_groups},
                        {"total_groups", r.total_groups}};
      std::cout << obj.dump(2) << "\n";
    }
  } catch (const debias::Error& e) {
    const json err = {{"error", debias::to_string(e.code())}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    const json err = {{"error", "internal"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 2;
  }
  return 0;
}
