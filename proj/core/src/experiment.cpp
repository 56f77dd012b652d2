#include "debias/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "debias/io.hpp"
#include "debias/rng.hpp"

namespace debias {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::Io, "cannot open " + path);
  json obj = json::parse(f, nullptr, false);
  if (obj.is_discarded()) fail(ErrorCode::Parse, "malformed JSON in " + path);
  return obj;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) fail(ErrorCode::Io, "cannot write " + path);
  f << text;
}

SyntheticSpec parse_synthetic_spec(const json& obj) {
  SyntheticSpec spec;
  spec.n = obj.at("n").get<Index>();
  spec.d = obj.at("d").get<Index>();
  for (const json& a : obj.at("schema").at("attributes"))
    spec.schema.attributes.push_back({a.at("name").get<std::string>(), a.at("cardinality").get<int>()});
  spec.label_signal = obj.value("label_signal", 0.0);
  spec.noise_std = obj.value("noise_std", 1.0);
  spec.seed = obj.value("seed", std::uint64_t{0});
  if (obj.contains("attribute_signal")) spec.attribute_signal = obj["attribute_signal"].get<std::vector<double>>();
  if (obj.contains("label_bias")) spec.label_bias = obj["label_bias"].get<std::vector<double>>();
  if (obj.contains("intersection_signal")) {
    for (const json& c : obj["intersection_signal"]) {
      IntersectionSignal s;
      s.signal = c.at("signal").get<double>();
      for (const auto& [name, value] : c.at("combo").items()) {
        const int idx = spec.schema.attribute_index(name);
        if (idx < 0) fail(ErrorCode::Parse, "synthetic spec combo names unknown attribute '" + name + "'");
        s.combo[idx] = value.get<int>();
      }
      spec.intersection_signal.push_back(std::move(s));
    }
  }
  spec.validate();
  return spec;
}

ProbeConfig parse_probe_config(const json& obj) {
  ProbeConfig cfg;
  cfg.learning_rate = obj.value("learning_rate", cfg.learning_rate);
  cfg.epochs = obj.value("epochs", cfg.epochs);
  cfg.l2 = obj.value("l2", cfg.l2);
  cfg.batch_size = obj.value("batch_size", cfg.batch_size);
  return cfg;
}

std::string family_name(const std::string& method, const std::string& grouping) {
  if (method == "biased-baseline") return "Biased model";
  if (method == "inlp") return "INLP-" + grouping;
  if (method == "constrained") return "CON-" + grouping;
  return method + "-" + grouping;
}

int family_rank(const std::string& family) {
  static const char* order[] = {"INLP-INDEP", "INLP-INTER", "INLP-GERRY",
                                "CON-INDEP",  "CON-INTER",  "CON-GERRY"};
  for (int i = 0; i < 6; ++i)
    if (family == order[i]) return i;
  if (family == "Biased model") return 100;
  return 50;
}

json point_record(const EvalPoint& p, std::optional<Index> rank) {
  json obj = {{"method", p.provenance.method},
              {"grouping", p.provenance.grouping},
              {"hparams", json::parse(p.provenance.hparams)},
              {"split", p.provenance.split},
              {"f1", p.f1},
              {"avg_violation", p.avg_violation},
              {"max_violation", p.max_violation}};
  if (p.provenance.iterate >= 0) obj["iterate"] = p.provenance.iterate;
  if (rank) obj["rank"] = *rank;
  return obj;
}

EvalPoint make_point(const std::string& method, const std::string& grouping, const std::string& hparams,
                     int iterate, const char* split, double f1, const ViolationReport& v) {
  EvalPoint p;
  p.f1 = f1;
  p.avg_violation = v.avg;
  p.max_violation = v.max;
  p.provenance = {method, grouping, hparams, iterate, split};
  return p;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!synthetic && !files) fail(ErrorCode::Config, "config: dataset needs \"synthetic\" or \"files\"");
  if (synthetic && files) fail(ErrorCode::Config, "config: dataset cannot have both sources");
  if (method != "biased-baseline" && method != "inlp" && method != "constrained")
    fail(ErrorCode::Config, "config: unknown method '" + method + "'");
  if (out_dir.empty()) fail(ErrorCode::Config, "config: missing output directory");
  if (min_positives < 1) fail(ErrorCode::Config, "config: min_positives must be >= 1");
  if (jobs < 1) fail(ErrorCode::Config, "config: jobs must be >= 1");
  // paper sweep ranges
  for (double nu : constrained.nus)
    if (nu < 1e-4 || nu > 1.0) fail(ErrorCode::Config, "config: nu must lie in [1e-4, 1]");
  if (constrained.iterations < 1 || constrained.iterations > 500)
    fail(ErrorCode::Config, "config: constrained iterations must lie in [1, 500]");
  if (constrained.nus.empty() || constrained.gamma_modes.empty())
    fail(ErrorCode::Config, "config: empty constrained sweep grid");
  if (inlp.max_iterations < 1) fail(ErrorCode::Config, "config: inlp max_iterations must be >= 1");
}

ExperimentConfig load_experiment_config(const std::string& path) {
  const json obj = read_json_file(path);
  ExperimentConfig cfg;
  try {
    const json& data = obj.at("dataset");
    if (data.contains("synthetic")) cfg.synthetic = parse_synthetic_spec(data["synthetic"]);
    if (data.contains("files")) {
      FileSource src;
      src.features = data["files"].at("features").get<std::string>();
      src.metadata = data["files"].at("metadata").get<std::string>();
      src.schema = data["files"].at("schema").get<std::string>();
      src.splits = data["files"].at("splits").get<std::string>();
      cfg.files = std::move(src);
    }
    if (data.contains("fractions")) {
      const auto fr = data["fractions"].get<std::vector<double>>();
      if (fr.size() != 3) fail(ErrorCode::Config, "config: fractions must have 3 entries");
      cfg.fractions = {fr[0], fr[1], fr[2]};
    }
    cfg.stratify_by_group = data.value("stratify_by_group", false);
    cfg.method = obj.at("method").get<std::string>();
    if (obj.contains("grouping")) cfg.grouping = group_kind_from_string(obj["grouping"].get<std::string>());
    if (obj.contains("baseline")) {
      const json& b = obj["baseline"];
      cfg.baseline.model_kind = model_kind_from_string(b.value("model", std::string("linear")));
      cfg.baseline.hidden_dim = b.value("hidden_dim", cfg.baseline.hidden_dim);
      cfg.baseline.iterations = b.value("iterations", cfg.baseline.iterations);
      cfg.baseline.primal_lr = b.value("primal_lr", cfg.baseline.primal_lr);
      cfg.baseline.batch_size = b.value("batch_size", cfg.baseline.batch_size);
    }
    if (obj.contains("inlp")) {
      const json& i = obj["inlp"];
      cfg.inlp.variant = inlp_variant_from_string(i.value("variant", std::string("principal")));
      cfg.inlp.max_iterations = i.value("max_iterations", cfg.inlp.max_iterations);
      cfg.inlp.directions_per_iteration = i.value("directions_per_iteration", 1);
      cfg.inlp.early_stop_margin = i.value("early_stop_margin", cfg.inlp.early_stop_margin);
      if (i.contains("probe")) cfg.inlp.probe = parse_probe_config(i["probe"]);
    }
    if (obj.contains("constrained")) {
      const json& c = obj["constrained"];
      cfg.constrained.model_kind = model_kind_from_string(c.value("model", std::string("linear")));
      cfg.constrained.hidden_dim = c.value("hidden_dim", cfg.constrained.hidden_dim);
      cfg.constrained.iterations = c.value("iterations", cfg.constrained.iterations);
      if (c.contains("nu")) {
        if (c["nu"].is_array()) cfg.constrained.nus = c["nu"].get<std::vector<double>>();
        else cfg.constrained.nus = {c["nu"].get<double>()};
      }
      if (c.contains("gamma")) {
        cfg.constrained.gamma_modes.clear();
        if (c["gamma"].is_array())
          for (const json& g : c["gamma"]) cfg.constrained.gamma_modes.push_back(gamma_mode_from_string(g.get<std::string>()));
        else cfg.constrained.gamma_modes = {gamma_mode_from_string(c["gamma"].get<std::string>())};
      }
      cfg.constrained.primal_lr = c.value("primal_lr", cfg.constrained.primal_lr);
      cfg.constrained.dual_lr = c.value("dual_lr", cfg.constrained.dual_lr);
      cfg.constrained.batch_size = c.value("batch_size", cfg.constrained.batch_size);
    }
    cfg.seed = obj.value("seed", std::uint64_t{0});
    cfg.out_dir = obj.value("out", std::string{});
    cfg.min_positives = obj.value("min_positives", 5);
    cfg.jobs = obj.value("jobs", 1);
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// dataset resolution
// ---------------------------------------------------------------------------

namespace {

void write_splits_json(const SplitIndices& idx, const std::string& path) {
  json obj = {{"train", json::array()}, {"dev", json::array()}, {"test", json::array()}};
  for (Index i : idx.train) obj["train"].push_back(i);
  for (Index i : idx.dev) obj["dev"].push_back(i);
  for (Index i : idx.test) obj["test"].push_back(i);
  write_text_file(path, obj.dump() + "\n");
}

SplitIndices read_splits_json(const std::string& path) {
  const json obj = read_json_file(path);
  SplitIndices idx;
  try {
    idx.train = obj.at("train").get<std::vector<Index>>();
    idx.dev = obj.at("dev").get<std::vector<Index>>();
    idx.test = obj.at("test").get<std::vector<Index>>();
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, "splits manifest " + path + ": " + e.what());
  }
  return idx;
}

}  // namespace

DatasetBundle resolve_dataset(const ExperimentConfig& config, const std::string& out_dir) {
  Dataset full;
  SplitIndices idx;
  if (config.synthetic) {
    full = generate_synthetic(*config.synthetic);
    idx = split_indices(full, config.fractions, config.synthetic->seed, config.stratify_by_group);
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      save_dataset(full, out_dir + "/features.csv", out_dir + "/metadata.jsonl");
      save_schema(full.schema, out_dir + "/schema.json");
      write_splits_json(idx, out_dir + "/splits.json");
    }
  } else {
    const AttributeSchema schema = load_schema(config.files->schema);
    full = load_dataset(config.files->features, config.files->metadata, schema);
    idx = read_splits_json(config.files->splits);
  }
  DatasetBundle bundle{take_rows(full, idx.train, Split::Train), take_rows(full, idx.dev, Split::Dev),
                       take_rows(full, idx.test, Split::Test)};
  return bundle;
}

void cmd_generate(const std::string& spec_path, const std::string& out_dir) {
  const json obj = read_json_file(spec_path);
  const SyntheticSpec spec = parse_synthetic_spec(obj);
  std::array<double, 3> fractions{0.7, 0.15, 0.15};
  if (obj.contains("fractions")) {
    const auto fr = obj["fractions"].get<std::vector<double>>();
    if (fr.size() != 3) fail(ErrorCode::Config, "generate spec: fractions must have 3 entries");
    fractions = {fr[0], fr[1], fr[2]};
  }
  const bool stratify_by_group = obj.value("stratify_by_group", false);
  const Dataset ds = generate_synthetic(spec);
  fs::create_directories(out_dir);
  save_dataset(ds, out_dir + "/features.csv", out_dir + "/metadata.jsonl");
  save_schema(ds.schema, out_dir + "/schema.json");
  write_splits_json(split_indices(ds, fractions, spec.seed, stratify_by_group), out_dir + "/splits.json");
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

namespace {

struct PointSink {
  std::vector<json> records;

  void add(const EvalPoint& p, std::optional<Index> rank = std::nullopt) {
    records.push_back(point_record(p, rank));
  }
  void write(const std::string& path) const {
    std::ofstream f(path);
    if (!f) fail(ErrorCode::Io, "cannot write " + path);
    for (const json& r : records) f << r.dump() << '\n';
  }
};

void run_baseline(const ExperimentConfig& config, const DatasetBundle& data, const std::string& dir,
                  PointSink& sink) {
  TrainOptions opts;
  opts.model_kind = config.baseline.model_kind;
  opts.hidden_dim = config.baseline.hidden_dim;
  opts.iterations = config.baseline.iterations;
  opts.primal_lr = config.baseline.primal_lr;
  opts.batch_size = config.baseline.batch_size;
  opts.seed = config.seed;
  opts.min_positives = config.min_positives;
  const ConstrainedTrainState state = train_unconstrained(data.train, data.dev, opts);

  const std::string hparams =
      json{{"model", to_string(opts.model_kind)}, {"T", opts.iterations}}.dump();
  const GroupSet dev_gerry = build_group_set(data.dev.schema, GroupKind::Gerry, data.dev);
  const GroupSet test_gerry = build_group_set(data.test.schema, GroupKind::Gerry, data.test);
  const std::vector<int> dev_preds = state.model.predict(data.dev.features);
  const std::vector<int> test_preds = state.model.predict(data.test.features);
  const char* grouping = to_string(config.grouping);
  sink.add(make_point("biased-baseline", grouping, hparams, opts.iterations, "dev",
                      f1_score(dev_preds, data.dev.labels),
                      tpr_violations(dev_preds, data.dev.labels, dev_gerry, config.min_positives)));
  sink.add(make_point("biased-baseline", grouping, hparams, opts.iterations, "test",
                      f1_score(test_preds, data.test.labels),
                      tpr_violations(test_preds, data.test.labels, test_gerry, config.min_positives)));
  save_task_model(state.model, dir + "/artifact");
}

void run_inlp(const ExperimentConfig& config, const DatasetBundle& data, const std::string& dir,
              PointSink& sink) {
  const GroupSet train_groups = build_group_set(data.train.schema, config.grouping, data.train);
  InlpConfig icfg;
  icfg.group_kind = config.grouping;
  icfg.variant = config.inlp.variant;
  icfg.max_iterations = config.inlp.max_iterations;
  icfg.probe_config = config.inlp.probe;
  icfg.probe_config.seed = mix_seed(config.seed, 1);
  icfg.directions_per_iteration = config.inlp.directions_per_iteration;
  icfg.early_stop_margin = config.inlp.early_stop_margin;
  icfg.audit_every = 1;
  icfg.jobs = config.jobs;

  const GroupSet dev_gerry = build_group_set(data.dev.schema, GroupKind::Gerry, data.dev);
  const GroupSet test_gerry = build_group_set(data.test.schema, GroupKind::Gerry, data.test);
  const std::string hparams = json{{"variant", to_string(icfg.variant)},
                                   {"max_iterations", icfg.max_iterations}}
                                  .dump();
  const char* grouping = to_string(config.grouping);

  auto observer = [&](const ProjectionState& state, const Matrix& proj_train, const Matrix& proj_dev) {
    const int iter = state.iteration;
    // same config the in-run audit uses, so points match the audit log
    const LinearProbe main =
        train_probe(proj_train, data.train.labels, audit_probe_config(icfg.probe_config, iter), "main-task");
    const std::vector<int> dev_preds = predict(main, proj_dev);
    const Matrix proj_test = apply_projection(state, data.test.features);
    const std::vector<int> test_preds = predict(main, proj_test);
    sink.add(make_point("inlp", grouping, hparams, iter, "dev", f1_score(dev_preds, data.dev.labels),
                        tpr_violations(dev_preds, data.dev.labels, dev_gerry, config.min_positives)),
             state.projector.rank);
    sink.add(make_point("inlp", grouping, hparams, iter, "test", f1_score(test_preds, data.test.labels),
                        tpr_violations(test_preds, data.test.labels, test_gerry, config.min_positives)),
             state.projector.rank);
  };

  const ProjectionState state = inlp_run(data.train, data.dev, train_groups, icfg, observer);
  save_projection_state(state, dir + "/artifact/projection");
  const Matrix proj_train = apply_projection(state, data.train.features);
  const LinearProbe final_main = train_probe(
      proj_train, data.train.labels, audit_probe_config(icfg.probe_config, state.iteration), "main-task");
  save_probe(final_main, dir + "/artifact/probe.json");
}

void run_constrained(const ExperimentConfig& config, const DatasetBundle& data, const std::string& dir,
                     PointSink& sink) {
  const GroupSet train_groups = build_group_set(data.train.schema, config.grouping, data.train);
  const GroupSet test_gerry = build_group_set(data.test.schema, GroupKind::Gerry, data.test);
  const char* grouping = to_string(config.grouping);

  // canonical grid order: nu ascending, then gamma mode
  std::vector<double> nus = config.constrained.nus;
  std::sort(nus.begin(), nus.end());
  std::vector<GammaMode> gammas = config.constrained.gamma_modes;
  std::sort(gammas.begin(), gammas.end());
  gammas.erase(std::unique(gammas.begin(), gammas.end()), gammas.end());

  std::string last_cell;
  for (double nu : nus) {
    for (GammaMode gamma : gammas) {
      ConstraintSpec spec{train_groups, nu, gamma};
      TrainOptions opts;
      opts.model_kind = config.constrained.model_kind;
      opts.hidden_dim = config.constrained.hidden_dim;
      opts.iterations = config.constrained.iterations;
      opts.primal_lr = config.constrained.primal_lr;
      opts.dual_lr = config.constrained.dual_lr;
      opts.batch_size = config.constrained.batch_size;
      opts.seed = config.seed;
      opts.min_positives = config.min_positives;

      const std::string hparams = json{{"model", to_string(opts.model_kind)},
                                       {"T", opts.iterations},
                                       {"nu", nu},
                                       {"gamma", to_string(gamma)}}
                                      .dump();
      std::vector<EvalPoint> test_points;
      auto observer = [&](int t, const TaskModel& model, const Vector&) {
        const std::vector<int> preds = model.predict(data.test.features);
        test_points.push_back(make_point("constrained", grouping, hparams, t, "test",
                                         f1_score(preds, data.test.labels),
                                         tpr_violations(preds, data.test.labels, test_gerry, config.min_positives)));
      };
      const ConstrainedTrainState state = constrained_train(data.train, data.dev, spec, opts, observer);
      for (std::size_t i = 0; i < state.iterate_log.size(); ++i) {
        const IterateSnapshot& snap = state.iterate_log[i];
        EvalPoint dev_point;
        dev_point.f1 = snap.dev_f1;
        dev_point.avg_violation = snap.dev_avg_violation;
        dev_point.max_violation = snap.dev_max_violation;
        dev_point.provenance = {"constrained", grouping, hparams, snap.t, "dev"};
        sink.add(dev_point);
        sink.add(test_points[i]);
      }
      std::ostringstream cell;
      cell << "nu=" << nu << ",gamma=" << to_string(gamma);
      const std::string cell_dir = dir + "/cells/" + cell.str();
      save_train_state(state, cell_dir);
      last_cell = cell_dir;
    }
  }
  if (!last_cell.empty()) {
    // convenience copy of the last cell's final model for `evaluate`
    fs::create_directories(dir + "/artifact");
    fs::copy(last_cell + "/model", dir + "/artifact", fs::copy_options::overwrite_existing | fs::copy_options::recursive);
  }
}

}  // namespace

std::string cmd_run(const ExperimentConfig& config) {
  config.validate();
  const std::string dir = config.out_dir;
  fs::create_directories(dir);
  const DatasetBundle data = resolve_dataset(config, config.synthetic ? dir + "/dataset" : "");

  write_text_file(dir + "/groups.json",
                  group_report_json(build_group_set(data.train.schema, config.grouping, data.train)) + "\n");

  PointSink sink;
  if (config.method == "biased-baseline") {
    run_baseline(config, data, dir, sink);
  } else if (config.method == "inlp") {
    run_inlp(config, data, dir, sink);
  } else {
    run_constrained(config, data, dir, sink);
  }
  sink.write(dir + "/points.jsonl");

  const json meta = {{"method", config.method},
                     {"grouping", to_string(config.grouping)},
                     {"seed", config.seed},
                     {"min_positives", config.min_positives}};
  write_text_file(dir + "/meta.json", meta.dump(2) + "\n");
  return dir;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

RunPoints load_run_points(const std::string& run_dir) {
  const json meta = read_json_file(run_dir + "/meta.json");
  RunPoints run;
  run.method = meta.at("method").get<std::string>();
  run.grouping = meta.at("grouping").get<std::string>();

  std::ifstream f(run_dir + "/points.jsonl");
  if (!f) fail(ErrorCode::Io, "cannot open " + run_dir + "/points.jsonl");
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded()) fail(ErrorCode::Parse, "malformed points record in " + run_dir);
    EvalPoint p;
    p.f1 = obj.at("f1").get<double>();
    p.avg_violation = obj.at("avg_violation").get<double>();
    p.max_violation = obj.at("max_violation").get<double>();
    p.provenance.method = obj.at("method").get<std::string>();
    p.provenance.grouping = obj.at("grouping").get<std::string>();
    p.provenance.hparams = obj.at("hparams").dump();
    p.provenance.iterate = obj.value("iterate", -1);
    p.provenance.split = obj.at("split").get<std::string>();
    if (p.provenance.split == "dev") run.dev.push_back(std::move(p));
    else run.test.push_back(std::move(p));
  }
  if (run.dev.empty() && run.test.empty()) fail(ErrorCode::Parse, "empty points file in " + run_dir);
  return run;
}

std::vector<SelectionRow> build_selection_rows(const std::vector<RunPoints>& runs,
                                               const std::vector<double>& tradeoffs) {
  std::vector<SelectionRow> rows;
  for (const RunPoints& run : runs) {
    const std::string family = family_name(run.method, run.grouping);
    if (run.method == "biased-baseline") {
      if (run.test.empty()) fail(ErrorCode::InvalidInput, "biased-baseline run has no test point");
      for (double tr : tradeoffs) rows.push_back({family, tr, run.test.front()});
      continue;
    }
    auto test_evaluator = [&run](const EvalPoint& dev_point) -> EvalPoint {
      for (const EvalPoint& t : run.test) {
        if (t.provenance.hparams == dev_point.provenance.hparams &&
            t.provenance.iterate == dev_point.provenance.iterate)
          return t;
      }
      fail(ErrorCode::InvalidInput, "no test evaluation matching a selected dev point");
    };
    for (double tr : tradeoffs)
      rows.push_back({family, tr, select_under_tradeoff(run.dev, test_evaluator, tr)});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SelectionRow& a, const SelectionRow& b) {
    return family_rank(a.approach) < family_rank(b.approach);
  });
  return rows;
}

std::string render_selection_table(const std::vector<SelectionRow>& rows,
                                   const std::vector<double>& tradeoffs) {
  std::vector<std::string> approaches;
  for (const SelectionRow& r : rows)
    if (std::find(approaches.begin(), approaches.end(), r.approach) == approaches.end())
      approaches.push_back(r.approach);

  std::ostringstream out;
  auto pct = [](double tr) {
    std::ostringstream s;
    s << tr * 100.0 << "%";
    return s.str();
  };
  out << std::left << std::setw(16) << "Approach";
  for (double tr : tradeoffs) out << std::setw(42) << ("Trade-off " + pct(tr));
  out << "\n" << std::setw(16) << "";
  for (std::size_t i = 0; i < tradeoffs.size(); ++i)
    out << std::setw(10) << "F1" << std::setw(16) << "Max violation" << std::setw(16) << "Avg violation";
  out << "\n";
  for (const std::string& approach : approaches) {
    out << std::setw(16) << approach;
    for (double tr : tradeoffs) {
      const SelectionRow* found = nullptr;
      for (const SelectionRow& r : rows)
        if (r.approach == approach && r.tradeoff == tr) found = &r;
      if (found) {
        out << std::setw(10) << std::fixed << std::setprecision(3) << found->test_point.f1
            << std::setw(16) << found->test_point.max_violation << std::setw(16)
            << found->test_point.avg_violation;
        out.unsetf(std::ios::fixed);
        out << std::setprecision(6);
      } else {
        out << std::setw(10) << "-" << std::setw(16) << "-" << std::setw(16) << "-";
      }
    }
    out << "\n";
  }
  return out.str();
}

namespace {

void write_frontiers(const std::vector<RunPoints>& runs, const std::string& report_dir) {
  for (const RunPoints& run : runs) {
    if (run.test.empty()) continue;
    const std::vector<EvalPoint> frontier = pareto_frontier(run.test);
    std::string family = family_name(run.method, run.grouping);
    std::replace(family.begin(), family.end(), ' ', '_');
    std::ofstream f(report_dir + "/frontier_" + family + ".csv");
    if (!f) fail(ErrorCode::Io, "cannot write frontier CSV");
    f << "f1,avg_violation,max_violation,fairness,iterate\n";
    for (const EvalPoint& p : frontier) {
      f << format_double(p.f1) << ',' << format_double(p.avg_violation) << ','
        << format_double(p.max_violation) << ',' << format_double(1.0 - p.avg_violation) << ','
        << p.provenance.iterate << '\n';
    }
  }
}

}  // namespace

void cmd_report(const std::vector<std::string>& run_dirs, const std::vector<double>& tradeoffs,
                const std::string& report_dir) {
  if (run_dirs.empty()) fail(ErrorCode::InvalidInput, "report: need at least one run directory");
  std::vector<RunPoints> runs;
  for (const std::string& dir : run_dirs) runs.push_back(load_run_points(dir));
  fs::create_directories(report_dir);

  const std::vector<SelectionRow> rows = build_selection_rows(runs, tradeoffs);
  const std::string table = render_selection_table(rows, tradeoffs);
  write_text_file(report_dir + "/table.txt", table);

  json jrows = json::array();
  for (const SelectionRow& r : rows) {
    jrows.push_back({{"approach", r.approach},
                     {"tradeoff", r.tradeoff},
                     {"f1", r.test_point.f1},
                     {"max_violation", r.test_point.max_violation},
                     {"avg_violation", r.test_point.avg_violation},
                     {"hparams", json::parse(r.test_point.provenance.hparams.empty()
                                                 ? std::string("null")
                                                 : r.test_point.provenance.hparams)},
                     {"iterate", r.test_point.provenance.iterate}});
  }
  write_text_file(report_dir + "/table.json", jrows.dump(2) + "\n");
  write_frontiers(runs, report_dir);
}

void cmd_pareto(const std::vector<std::string>& run_dirs, const std::string& report_dir) {
  if (run_dirs.empty()) fail(ErrorCode::InvalidInput, "pareto: need at least one run directory");
  std::vector<RunPoints> runs;
  for (const std::string& dir : run_dirs) runs.push_back(load_run_points(dir));
  fs::create_directories(report_dir);
  write_frontiers(runs, report_dir);
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

EvaluateResult cmd_evaluate(const std::string& model_dir, const std::string& features_path,
                            const std::string& metadata_path, const std::string& schema_path,
                            int min_positives) {
  const AttributeSchema schema = load_schema(schema_path);
  const Dataset ds = load_dataset(features_path, metadata_path, schema);
  const GroupSet gerry = build_group_set(schema, GroupKind::Gerry, ds);

  std::vector<int> preds;
  if (fs::exists(model_dir + "/projection/projector.csv")) {
    const ProjectionState state = load_projection_state(model_dir + "/projection");
    const LinearProbe probe = load_probe(model_dir + "/probe.json");
    preds = predict(probe, apply_projection(state, ds.features));
  } else if (fs::exists(model_dir + "/model.json")) {
    const TaskModel model = load_task_model(model_dir);
    preds = model.predict(ds.features);
  } else if (fs::exists(model_dir + "/probe.json")) {
    const LinearProbe probe = load_probe(model_dir + "/probe.json");
    preds = predict(probe, ds.features);
  } else {
    fail(ErrorCode::Io, "no stored model found under " + model_dir);
  }

  EvaluateResult result;
  result.f1 = f1_score(preds, ds.labels);
  result.accuracy = accuracy(preds, ds.labels);
  const ViolationReport report = tpr_violations(preds, ds.labels, gerry, min_positives);
  result.avg_violation = report.avg;
  result.max_violation = report.max;
  result.included_groups = report.included_count;
  result.total_groups = static_cast<int>(gerry.size());
  return result;
}

}  // namespace debias
