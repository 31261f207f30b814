// sdcda: command-line driver for data synthesis, pre-training, adaptation,
// evaluation, ablation and sweeps.
//
// Output layout under --out:
//   config.toml        resolved configuration (documented, reloadable)
//   report.json        results; reproducible bitwise for a fixed config and seed
//   timing.json        wall-clock times (kept apart because they never reproduce)
//   checkpoints/       model containers and training-state manifests
//   data/              datasets written by `synth`
//   tables/            CSV tables
//   plots/             SVG figures
//   error.json         written instead of report.json when a command fails
//
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 divergence, 1 other.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sdcda/config.hpp"
#include "sdcda/data.hpp"
#include "sdcda/eval.hpp"
#include "sdcda/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sdcda;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out;
};

struct Paths {
  std::string source, target, holdout, pretrained, model, data;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "config file, sectioned text or JSON (default: built-in defaults, see `sdcda config`)");
  cmd->add_option("--seed", c.seed, "master seed, overrides run.seed (default 0)");
  cmd->add_option("--threads", c.threads, "worker threads for independent cells, overrides run.threads (default 1)");
  cmd->add_option("--out", c.out, "output directory (default: $SDCDA_OUT, else run.out = sdcda-out)");
}

RunConfig resolve(const Common& c, const std::string& fallback_config = "") {
  RunConfig cfg;
  if (!c.config_path.empty()) cfg = load_config(c.config_path);
  else if (!fallback_config.empty()) cfg = load_config(fallback_config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads) cfg.threads = *c.threads;
  if (!c.out.empty()) cfg.out = c.out;
  else if (const char* env = std::getenv("SDCDA_OUT"); env && *env) cfg.out = env;
  validate(cfg);
  cfg.experiment.base_seed = cfg.seed;
  return cfg;
}

MatrixFormat format_of(const fs::path& p) { return p.extension() == ".csv" ? MatrixFormat::csv : MatrixFormat::container; }

DomainDataset load_dataset(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string(flag) + " is required");
  return load_matrix(path, format_of(path));
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  write_file_atomic(path, text);
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json report_header(const std::string& command, const RunConfig& cfg) {
  return {{"command", command}, {"config", config_json(result_relevant(cfg))}, {"config_digest", hex_digest(config_digest(cfg))}};
}

json dataset_json(const DomainDataset& d) {
  json j = {{"domain", d.domain}, {"samples", d.size()}, {"digest", hex_digest(digest(d.features))}};
  if (d.labels) j["class_counts"] = class_counts(d);
  return j;
}

json traces_json(const TrainState& s) {
  json t = json::object();
  for (const auto& [k, v] : s.traces) {
    json arr = json::array();
    for (double x : v) arr.push_back(std::isfinite(x) ? json(x) : json(nullptr));
    t[k] = arr;
  }
  return {{"iterations", s.iteration}, {"traces", t}, {"warnings", s.warnings}};
}

ModelSet initial_models(const RunConfig& cfg, const Shape& sample_shape) {
  ModelConfig m = cfg.experiment.model;
  m.extractor.input_shape = sample_shape;
  m.classes = cfg.experiment.synthetic.classes;
  return build_models(m, derive_seed(cfg.seed, "init"));
}

/// Class count for models trained on external data: the labeled source decides.
void adopt_class_count(RunConfig& cfg, const DomainDataset& source) {
  if (source.class_count >= 2) cfg.experiment.synthetic.classes = source.class_count;
}

// ----------------------------------------------------------------- commands

json cmd_config(const RunConfig& cfg) {
  std::cout << dump_config(cfg);
  return nullptr;
}

json cmd_synth(const RunConfig& cfg, const fs::path& out) {
  const Scenario sc = build_scenario(cfg.experiment, cfg.setting, cfg.seed);
  const DomainDataset target{sc.target.features, std::nullopt, sc.target.domain, sc.target_holdout.class_count};
  fs::create_directories(out / "data");
  save_dataset(out / "data" / "source.sdcd", sc.source);
  save_dataset(out / "data" / "target.sdcd", target);
  save_dataset(out / "data" / "target_holdout.sdcd", sc.target_holdout);
  std::string manifest = "setting=" + to_string(cfg.setting) + "\nseed=" + std::to_string(cfg.seed) +
                         "\nsource=source.sdcd\ntarget=target.sdcd\ntarget_holdout=target_holdout.sdcd\n";
  write_text(out / "data" / "manifest.txt", manifest);
  json r = report_header("synth", cfg);
  r["setting"] = to_string(cfg.setting);
  r["source"] = dataset_json(sc.source);
  r["target"] = dataset_json(target);
  r["target_holdout"] = dataset_json(sc.target_holdout);
  r["scenario_digest"] = scenario_digest(sc);
  return r;
}

json cmd_pretrain(RunConfig cfg, const Paths& p, const fs::path& out) {
  const DomainDataset source = load_dataset(p.source, "--source");
  const DomainDataset target = load_dataset(p.target, "--target");
  adopt_class_count(cfg, source);
  const ModelSet init = initial_models(cfg, source.sample_shape());
  IaClrConfig ic = cfg.experiment.iaclr;
  ic.seed = derive_seed(cfg.seed, "iaclr");
  const PretrainResult res = iaclr_pretrain(unlabeled_view(source), unlabeled_view(target), init.g, init.p, ic);
  Model g = init.g, pm = init.p;
  g.params = res.g;
  pm.params = res.p;
  fs::create_directories(out / "checkpoints");
  save_model(out / "checkpoints" / "g.sdcm", g);
  save_model(out / "checkpoints" / "p.sdcm", pm);
  save_train_state(out / "checkpoints", "pretrain", res.state, config_digest(cfg));
  json r = report_header("pretrain", cfg);
  r["source"] = dataset_json(source);
  r["target"] = dataset_json(target);
  r["init_digest"] = models_digest(init);
  r["extractor_digest"] = hex_digest(digest(g.params));
  r["training"] = traces_json(res.state);
  return r;
}

json cmd_adapt(RunConfig cfg, const Paths& p, const fs::path& out) {
  const DomainDataset source = load_dataset(p.source, "--source");
  const DomainDataset target = load_dataset(p.target, "--target");
  adopt_class_count(cfg, source);
  ModelSet models = initial_models(cfg, source.sample_shape());
  json r = report_header("adapt", cfg);
  if (!p.pretrained.empty()) {
    fs::path ck = p.pretrained;
    if (fs::is_directory(ck)) ck = ck / "checkpoints" / "g.sdcm";
    load_model_params(ck, models.g);
    r["pretrained_digest"] = hex_digest(digest(models.g.params));
  }
  BaAdaConfig bc = cfg.experiment.baada;
  bc.seed = derive_seed(cfg.seed, "baada");
  const AdaptResult res = baada_train(source, unlabeled_view(target), AdaptModels{models.g, models.c, models.d}, bc);
  models.g.params = res.g;
  models.c.params = res.c;
  models.d.params = res.d;
  fs::create_directories(out / "checkpoints");
  save_model(out / "checkpoints" / "g.sdcm", models.g);
  save_model(out / "checkpoints" / "c.sdcm", models.c);
  save_model(out / "checkpoints" / "d.sdcm", models.d);
  save_train_state(out / "checkpoints", "adapt", res.state, config_digest(cfg));
  r["source"] = dataset_json(source);
  r["target"] = dataset_json(target);
  r["model_digest"] = hex_digest(digest(models.c.params, digest(models.g.params)));
  r["training"] = traces_json(res.state);
  if (!p.holdout.empty()) {
    const DomainDataset holdout = load_dataset(p.holdout, "--holdout");
    const EvalReport e = evaluate(models.g, models.c, holdout);
    r["evaluation"] = to_json(e);
    write_text(out / "plots" / "classwise.svg", classwise_svg({{"adapted", e.per_class}}));
  }
  return r;
}

json cmd_eval(RunConfig cfg, const Paths& p, const fs::path& out) {
  if (p.model.empty()) throw ConfigError("--model is required");
  const DomainDataset data = load_dataset(p.data, "--data");
  if (!data.labels) throw IngestionError(p.data + ": evaluation data must be labeled");
  adopt_class_count(cfg, data);
  ModelSet models = initial_models(cfg, data.sample_shape());
  const fs::path ck = fs::path(p.model) / "checkpoints";
  load_model_params(ck / "g.sdcm", models.g);
  load_model_params(ck / "c.sdcm", models.c);
  const EvalReport e = evaluate(models.g, models.c, data);
  json r = report_header("eval", cfg);
  r["data"] = dataset_json(data);
  r["model_digest"] = hex_digest(digest(models.c.params, digest(models.g.params)));
  r["evaluation"] = to_json(e);
  write_text(out / "plots" / "classwise.svg", classwise_svg({{"model", e.per_class}}));
  return r;
}

/// Mean recall per class over the non-diverged runs of a cell.
std::vector<double> mean_recall(const CellSummary& s, std::size_t classes) {
  std::vector<double> sum(classes, 0.0);
  std::vector<std::size_t> n(classes, 0);
  for (const auto& r : s.runs) {
    if (r.diverged) continue;
    for (std::size_t k = 0; k < classes && k < r.eval.per_class.size(); ++k)
      if (std::isfinite(r.eval.per_class[k])) sum[k] += r.eval.per_class[k], ++n[k];
  }
  for (std::size_t k = 0; k < classes; ++k) sum[k] = n[k] ? sum[k] / static_cast<double>(n[k]) : std::nan("");
  return sum;
}

json cmd_ablate(const RunConfig& cfg, const fs::path& out, json& timing) {
  const AblationTable t = ablation_run(cfg.experiment, cfg.threads);
  write_text(out / "tables" / "ablation.csv", ablation_csv(t));
  write_text(out / "tables" / "ablation_long.csv", ablation_long_csv(t));
  for (std::size_t s = 0; s < t.settings.size(); ++s) {
    std::vector<std::pair<std::string, std::vector<double>>> series;
    for (std::size_t v = 0; v < t.variants.size(); ++v)
      series.emplace_back(t.variants[v].name(), mean_recall(t.cells[v][s], cfg.experiment.synthetic.classes));
    write_text(out / "plots" / ("classwise_" + to_string(t.settings[s]) + ".svg"), classwise_svg(series));
  }
  for (const auto& row : t.cells)
    for (const auto& cell : row)
      for (const auto& run : cell.runs)
        timing["runs"].push_back({{"variant", run.variant}, {"setting", run.setting}, {"seed", run.seed}, {"seconds", run.wall_time_seconds}});
  json r = report_header("ablate", cfg);
  r["ablation"] = to_json(t);
  return r;
}

json cmd_sweep(const RunConfig& cfg, const fs::path& out, json& timing) {
  const auto points = sweep(cfg.experiment, cfg.sweep_parameter, cfg.sweep_grid, cfg.sweep_setting, cfg.threads);
  const std::string stem = "sweep_" + to_string(cfg.sweep_parameter);
  write_text(out / "tables" / (stem + ".csv"), sweep_csv(points, cfg.sweep_parameter));
  write_text(out / "plots" / (stem + ".svg"), sweep_svg(points, cfg.sweep_parameter));
  for (const auto& pt : points)
    for (const auto& run : pt.summary.runs)
      timing["runs"].push_back({{"value", pt.value}, {"seed", run.seed}, {"seconds", run.wall_time_seconds}});
  json r = report_header("sweep", cfg);
  r["setting"] = to_string(cfg.sweep_setting);
  r["sweep"] = to_json(points, cfg.sweep_parameter);
  return r;
}

int fail(const fs::path& out, const std::string& kind, const std::string& message, int code, json extra = json::object()) {
  std::cerr << "sdcda: " << kind << " error: " << message << "\n";
  if (!out.empty()) {
    try {
      extra["error"] = kind;
      extra["message"] = message;
      extra["exit_code"] = code;
      write_json(out / "error.json", extra);
    } catch (const std::exception& e) {
      std::cerr << "sdcda: could not write error.json: " << e.what() << "\n";
    }
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sd-CDA: pruned contrastive pre-training and boundary-aware adversarial domain adaptation"};
  app.require_subcommand(1);
  Common common;
  Paths paths;

  auto* config = app.add_subcommand("config", "print the resolved configuration with every key documented");
  auto* synth = app.add_subcommand("synth", "generate a synthetic bi-imbalanced scenario (run.setting) into <out>/data");
  auto* pretrain = app.add_subcommand("pretrain", "pruned contrastive pre-training of the feature extractor");
  auto* adapt = app.add_subcommand("adapt", "boundary-aware adversarial adaptation (baada.lambda_bd = 0 gives DANN)");
  auto* eval = app.add_subcommand("eval", "evaluate a trained extractor and classifier on labeled data");
  auto* ablate = app.add_subcommand("ablate", "DANN / +Ia-CLR / +Ba-ADA / Sd-CDA over experiment.settings and seeds");
  auto* sweep_cmd = app.add_subcommand("sweep", "accuracy of the full framework along sweep.grid");
  for (auto* cmd : {config, synth, pretrain, adapt, eval, ablate, sweep_cmd}) add_common(cmd, common);

  for (auto* cmd : {pretrain, adapt}) {
    cmd->add_option("--source", paths.source, "labeled source dataset (.csv with manifest, or container)")->required();
    cmd->add_option("--target", paths.target, "target dataset; labels, if any, are ignored")->required();
  }
  adapt->add_option("--pretrained", paths.pretrained, "pretrain output directory or extractor checkpoint (default: random init)");
  adapt->add_option("--holdout", paths.holdout, "labeled target holdout to evaluate after training (default: none)");
  eval->add_option("--model", paths.model, "output directory of an adapt run")->required();
  eval->add_option("--data", paths.data, "labeled dataset to evaluate on")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  fs::path out;
  try {
    // eval reads the configuration echoed by the run that produced the model.
    const std::string fallback = eval->parsed() ? (fs::path(paths.model) / "config.toml").string() : "";
    // Known before the config loads, so config errors still land in error.json.
    if (!common.out.empty()) out = common.out;
    else if (const char* env = std::getenv("SDCDA_OUT"); env && *env) out = env;
    RunConfig cfg = resolve(common, fallback);
    if (config->parsed()) {
      cmd_config(cfg);
      return 0;
    }
    out = cfg.out;
    fs::create_directories(out);
    fs::remove(out / "error.json");
    const auto start = std::chrono::steady_clock::now();
    json timing = {{"runs", json::array()}};
    json report;
    if (synth->parsed()) report = cmd_synth(cfg, out);
    else if (pretrain->parsed()) report = cmd_pretrain(cfg, paths, out);
    else if (adapt->parsed()) report = cmd_adapt(cfg, paths, out);
    else if (eval->parsed()) report = cmd_eval(cfg, paths, out);
    else if (ablate->parsed()) report = cmd_ablate(cfg, out, timing);
    else report = cmd_sweep(cfg, out, timing);
    write_text(out / "config.toml", dump_config(cfg));
    write_json(out / "report.json", report);
    timing["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json(out / "timing.json", timing);
    return 0;
  } catch (const TrainingDiverged& e) {
    return fail(out, "divergence", e.what(), 4, {{"iteration", e.state().iteration}});
  } catch (const DivergenceError& e) {
    return fail(out, "divergence", e.what(), 4);
  } catch (const ConfigError& e) {
    return fail(out, "config", e.what(), 2);
  } catch (const IngestionError& e) {
    return fail(out, "data", e.what(), 3);
  } catch (const std::exception& e) {
    return fail(out, "internal", e.what(), 1);
  }
}
