#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "debias/constrained.hpp"
#include "debias/inlp.hpp"

namespace debias {

// Experiment runner: dataset -> debiasing method sweep -> per-iterate dev and
// test evaluations in points.jsonl -> Pareto/selection reports.

struct FileSource {
  std::string features;
  std::string metadata;
  std::string schema;
  std::string splits;  // JSON {"train": [...], "dev": [...], "test": [...]}
};

struct BaselineSettings {
  ModelKind model_kind = ModelKind::Linear;
  Index hidden_dim = 64;
  int iterations = 100;
  double primal_lr = 1e-3;
  int batch_size = 64;
};

struct InlpSettings {
  InlpVariant variant = InlpVariant::Principal;
  int max_iterations = 10;
  ProbeConfig probe;
  int directions_per_iteration = 1;
  double early_stop_margin = 0.01;  // < -1 sweeps every requested iteration
};

struct ConstrainedSettings {
  ModelKind model_kind = ModelKind::Linear;
  Index hidden_dim = 64;
  int iterations = 50;  // T
  std::vector<double> nus{0.05};
  std::vector<GammaMode> gamma_modes{GammaMode::Uniform};
  double primal_lr = 1e-3;
  double dual_lr = 0.05;
  int batch_size = 64;
};

struct ExperimentConfig {
  std::optional<SyntheticSpec> synthetic;
  std::optional<FileSource> files;
  std::array<double, 3> fractions{0.7, 0.15, 0.15};
  bool stratify_by_group = false;
  std::string method;  // "biased-baseline" | "inlp" | "constrained"
  GroupKind grouping = GroupKind::Gerry;
  BaselineSettings baseline;
  InlpSettings inlp;
  ConstrainedSettings constrained;
  std::uint64_t seed = 0;
  std::string out_dir;
  int min_positives = 5;
  int jobs = 1;

  void validate() const;
};

ExperimentConfig load_experiment_config(const std::string& path);

struct DatasetBundle {
  Dataset train, dev, test;
};

DatasetBundle resolve_dataset(const ExperimentConfig& config, const std::string& out_dir);

// generate: synthetic spec JSON -> features.csv + metadata.jsonl +
// schema.json + splits.json under out_dir.
void cmd_generate(const std::string& spec_path, const std::string& out_dir);

// run: execute the configured sweep; returns the run directory. Writes
// points.jsonl (one record per hyperparameter/iterate/split), meta.json, and
// the stored models.
std::string cmd_run(const ExperimentConfig& config);

struct RunPoints {
  std::string method;
  std::string grouping;
  std::vector<EvalPoint> dev;
  std::vector<EvalPoint> test;
};

RunPoints load_run_points(const std::string& run_dir);

// report: tradeoff-selection table (one row per method plus the biased-model
// reference) and per-method Pareto frontier CSVs, written under report_dir.
void cmd_report(const std::vector<std::string>& run_dirs, const std::vector<double>& tradeoffs,
                const std::string& report_dir);

// pareto: frontier CSVs only.
void cmd_pareto(const std::vector<std::string>& run_dirs, const std::string& report_dir);

struct EvaluateResult {
  double f1 = 0.0;
  double accuracy = 0.0;
  double avg_violation = 0.0;
  double max_violation = 0.0;
  int included_groups = 0;  // groups clearing the min_positives bar
  int total_groups = 0;
};

// evaluate: re-score a stored model directory (task model, or projection +
// main-task probe) on a dataset given by file paths.
EvaluateResult cmd_evaluate(const std::string& model_dir, const std::string& features_path,
                            const std::string& metadata_path, const std::string& schema_path,
                            int min_positives = 5);

// selection table entry, exposed for tests
struct SelectionRow {
  std::string approach;  // e.g. "INLP-GERRY"
  double tradeoff = 0.0;
  EvalPoint test_point;
};

std::vector<SelectionRow> build_selection_rows(const std::vector<RunPoints>& runs,
                                               const std::vector<double>& tradeoffs);
std::string render_selection_table(const std::vector<SelectionRow>& rows,
                                   const std::vector<double>& tradeoffs);

}  // namespace debias
