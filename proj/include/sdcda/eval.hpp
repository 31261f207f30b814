#pragma once

// Metrics, the seeded experiment harness (ablation grid and hyper-parameter
// sweeps) and report emitters (JSON, CSV, SVG).

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdcda/data.hpp"
#include "sdcda/models.hpp"
#include "sdcda/network.hpp"
#include "sdcda/pipeline.hpp"

namespace sdcda {

/// Confusion-matrix metrics. confusion[true][predicted], classes 0-based.
struct EvalReport {
  double accuracy = 0.0;
  std::vector<double> per_class;  // recall per class; NaN when a class has no samples
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<std::size_t> class_counts;
  std::size_t total = 0;
};

inline EvalReport confusion_report(std::span<const int> predicted, std::span<const int> truth, std::size_t classes) {
  if (predicted.size() != truth.size()) throw DomainError("prediction and label counts differ");
  EvalReport r;
  r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  r.class_counts.assign(classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<std::size_t>(truth[i] - 1), p = static_cast<std::size_t>(predicted[i] - 1);
    if (t >= classes || p >= classes) throw DomainError("class id outside 1.." + std::to_string(classes));
    ++r.confusion[t][p];
    ++r.class_counts[t];
    correct += t == p;
  }
  r.total = truth.size();
  r.accuracy = r.total ? static_cast<double>(correct) / static_cast<double>(r.total) : 0.0;
  for (std::size_t k = 0; k < classes; ++k) {
    r.per_class.push_back(r.class_counts[k] ? static_cast<double>(r.confusion[k][k]) / static_cast<double>(r.class_counts[k])
                                            : std::numeric_limits<double>::quiet_NaN());
  }
  return r;
}

/// Argmax class ids (1-based) of C(G(x)) in eval mode; ties go to the lowest id.
inline std::vector<int> predict(const Model& g, const Model& c, const Tensor& x) {
  const Tensor probs = forward(c.net, c.params, forward(g.net, g.params, x, Mode::eval).output, Mode::eval).output;
  std::vector<int> out(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    auto row = probs.row(i);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()) + 1;
  }
  return out;
}

inline EvalReport evaluate(const Model& g, const Model& c, const DomainDataset& holdout) {
  if (!holdout.labels) throw ConfigError("evaluation needs a labeled holdout");
  const std::size_t k = shape_size(output_shape(c.net));
  if (k != holdout.class_count)
    throw ConfigError("classifier predicts " + std::to_string(k) + " classes but holdout has " + std::to_string(holdout.class_count));
  return confusion_report(predict(g, c, holdout.features), *holdout.labels, k);
}

/// 0-based index of the lowest class id among those with the fewest samples.
inline std::size_t scarcest_class(const std::vector<std::size_t>& counts) {
  if (counts.empty()) throw DomainError("scarcest_class: no classes");
  return static_cast<std::size_t>(std::min_element(counts.begin(), counts.end()) - counts.begin());
}

// ------------------------------------------------------------- experiments

// Benchmark defaults. The loss weights follow the paper's FNN case
// (lambda_c = 1, lambda_d = 1e-3 on the summed L_d) with lambda_bd kept below
// lambda_d as it recommends; sample counts and learning rates are sized so
// plain SGD converges at desk scale.
inline SyntheticSpec benchmark_synthetic() {
  SyntheticSpec s;
  s.samples_per_class = 1000;
  return s;
}

inline IaClrConfig benchmark_iaclr() {
  IaClrConfig c;
  c.lr = 1e-2;
  c.epochs = 20;
  return c;
}

inline BaAdaConfig benchmark_baada() {
  BaAdaConfig c;
  c.lr = 5e-2;
  c.epochs = 50;
  c.lambda_d = 1e-3;
  c.lambda_bd = 1e-4;
  return c;
}

/// Everything needed to run one seeded cell on synthetic data.
struct ExperimentConfig {
  SyntheticSpec synthetic = benchmark_synthetic();
  std::vector<double> source_ratios;  // empty: scenario defaults
  std::vector<double> target_ratios;
  ModelConfig model;
  IaClrConfig iaclr = benchmark_iaclr();
  BaAdaConfig baada = benchmark_baada();
  std::size_t seed_count = 10;
  std::uint64_t base_seed = 0;
  std::vector<Setting> settings{Setting::b2b, Setting::b2i, Setting::i2b, Setting::i2i};
};

inline std::vector<std::uint64_t> cell_seeds(const ExperimentConfig& cfg) {
  std::vector<std::uint64_t> s(cfg.seed_count);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = cfg.base_seed + i;
  return s;
}

/// Data for one seed and setting. Identical for every variant of a cell.
inline Scenario build_scenario(const ExperimentConfig& cfg, Setting setting, std::uint64_t seed) {
  SyntheticSpec synth = cfg.synthetic;
  synth.seed = derive_seed(seed, "data");
  auto [src, tgt] = synth_domains(synth);
  ScenarioSpec spec = ScenarioSpec::defaults(setting, synth.classes, derive_seed(seed, "scenario"));
  if (source_imbalanced(setting) && !cfg.source_ratios.empty()) spec.source_ratios = cfg.source_ratios;
  if (target_imbalanced(setting) && !cfg.target_ratios.empty()) spec.target_ratios = cfg.target_ratios;
  return make_scenario(src, tgt, spec);
}

inline ModelConfig resolved_model(const ExperimentConfig& cfg, const Shape& sample_shape) {
  ModelConfig m = cfg.model;
  m.extractor.input_shape = sample_shape;
  m.classes = cfg.synthetic.classes;
  return m;
}

struct RunReport {
  std::string variant;
  std::string setting;
  std::uint64_t seed = 0;
  bool diverged = false;
  std::string divergence;
  EvalReport eval;
  std::size_t minority_class = 0;  // scarcest class of the labeled source data, 0-based
  std::map<std::string, std::vector<double>> traces;
  std::vector<std::string> warnings;
  std::string data_digest;    // scenario data actually trained on
  std::string init_digest;    // initial parameters of all components
  std::string model_digest;   // final parameters
  double wall_time_seconds = 0.0;  // kept out of the JSON report (not reproducible)
};

inline std::string scenario_digest(const Scenario& s) {
  std::uint64_t h = digest(s.source.features);
  for (int y : *s.source.labels) h = fnv1a(&y, sizeof y, h);
  h = digest(s.target.features, h);
  return hex_digest(h);
}

inline std::string models_digest(const ModelSet& m) {
  std::uint64_t h = digest(m.g.params);
  h = digest(m.p.params, h);
  h = digest(m.d.params, h);
  return hex_digest(digest(m.c.params, h));
}

/// Trains and evaluates one (setting, variant, seed) cell. Divergence is
/// recorded in the report rather than thrown.
inline RunReport run_cell(const ExperimentConfig& cfg, Setting setting, Variant variant, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const Scenario sc = build_scenario(cfg, setting, seed);
  const ModelSet init = build_models(resolved_model(cfg, sc.source.sample_shape()), derive_seed(seed, "init"));
  IaClrConfig iaclr = cfg.iaclr;
  BaAdaConfig baada = cfg.baada;
  iaclr.seed = derive_seed(seed, "iaclr");
  baada.seed = derive_seed(seed, "baada");

  RunReport r;
  r.variant = variant.name();
  r.setting = to_string(setting);
  r.seed = seed;
  r.data_digest = scenario_digest(sc);
  r.init_digest = models_digest(init);
  r.minority_class = scarcest_class(class_counts(sc.source));
  try {
    const SdcdaResult res = sdcda_train(sc.source, sc.target, init, iaclr, baada, variant);
    for (const auto& [k, v] : res.pretrain_state.traces) r.traces[k] = v;
    for (const auto& [k, v] : res.adapt_state.traces) r.traces[k] = v;
    r.warnings = res.pretrain_state.warnings;
    r.warnings.insert(r.warnings.end(), res.adapt_state.warnings.begin(), res.adapt_state.warnings.end());
    r.eval = evaluate(res.models.g, res.models.c, sc.target_holdout);
    r.model_digest = models_digest(res.models);
  } catch (const TrainingDiverged& e) {
    r.diverged = true;
    r.divergence = e.what();
    r.traces = e.state().traces;
  } catch (const DivergenceError& e) {
    r.diverged = true;
    r.divergence = e.what();
  }
  r.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// Runs `jobs` on up to `threads` workers. Each job writes only its own slot,
/// so results do not depend on scheduling.
inline void run_parallel(std::size_t jobs, std::size_t threads, const std::function<void(std::size_t)>& job) {
  threads = std::max<std::size_t>(1, std::min(threads, jobs));
  if (threads == 1) {
    for (std::size_t i = 0; i < jobs; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

/// Mean and sample standard deviation over non-diverged runs.
struct CellSummary {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double stddev = std::numeric_limits<double>::quiet_NaN();
  double minority_recall = std::numeric_limits<double>::quiet_NaN();  // mean target recall of the scarcest source class
  std::size_t ok = 0;
  std::size_t diverged = 0;
  std::vector<RunReport> runs;
};

inline CellSummary summarize(std::vector<RunReport> runs) {
  CellSummary s;
  std::vector<double> acc, minority;
  for (const auto& r : runs) {
    if (r.diverged) {
      ++s.diverged;
      continue;
    }
    acc.push_back(r.eval.accuracy);
    minority.push_back(r.eval.per_class.at(r.minority_class));
  }
  s.ok = acc.size();
  if (!acc.empty()) {
    double sum = 0.0, msum = 0.0;
    for (std::size_t i = 0; i < acc.size(); ++i) {
      sum += acc[i];
      msum += minority[i];
    }
    s.mean = sum / static_cast<double>(acc.size());
    s.minority_recall = msum / static_cast<double>(acc.size());
    double sq = 0.0;
    for (double a : acc) sq += (a - s.mean) * (a - s.mean);
    s.stddev = acc.size() > 1 ? std::sqrt(sq / static_cast<double>(acc.size() - 1)) : 0.0;
  }
  s.runs = std::move(runs);
  return s;
}

inline const std::vector<Variant>& ablation_variants() {
  static const std::vector<Variant> v{{false, false}, {true, false}, {false, true}, {true, true}};
  return v;
}

/// variants x settings, each cell averaged over the shared seeds.
struct AblationTable {
  std::vector<Setting> settings;
  std::vector<Variant> variants;
  std::vector<std::vector<CellSummary>> cells;  // [variant][setting]

  const CellSummary& at(Variant v, Setting s) const {
    const auto vi = std::find(variants.begin(), variants.end(), v) - variants.begin();
    const auto si = std::find(settings.begin(), settings.end(), s) - settings.begin();
    return cells.at(static_cast<std::size_t>(vi)).at(static_cast<std::size_t>(si));
  }
};

inline AblationTable ablation_run(const ExperimentConfig& cfg, std::size_t threads = 1) {
  AblationTable t{cfg.settings, ablation_variants(), {}};
  const auto seeds = cell_seeds(cfg);
  const std::size_t nv = t.variants.size(), ns = t.settings.size(), nk = seeds.size();
  std::vector<RunReport> flat(nv * ns * nk);
  run_parallel(flat.size(), threads, [&](std::size_t i) {
    const std::size_t v = i / (ns * nk), s = (i / nk) % ns, k = i % nk;
    flat[i] = run_cell(cfg, t.settings[s], t.variants[v], seeds[k]);
  });
  t.cells.assign(nv, {});
  for (std::size_t v = 0; v < nv; ++v)
    for (std::size_t s = 0; s < ns; ++s) {
      std::vector<RunReport> runs(flat.begin() + static_cast<std::ptrdiff_t>((v * ns + s) * nk),
                                  flat.begin() + static_cast<std::ptrdiff_t>((v * ns + s + 1) * nk));
      t.cells[v].push_back(summarize(std::move(runs)));
    }
  return t;
}

enum class SweepParameter { alpha_d, lambda_bd };

inline std::string to_string(SweepParameter p) { return p == SweepParameter::alpha_d ? "alpha_d" : "lambda_bd"; }

inline SweepParameter parse_sweep_parameter(std::string_view s) {
  if (s == "alpha_d") return SweepParameter::alpha_d;
  if (s == "lambda_bd") return SweepParameter::lambda_bd;
  throw ConfigError("sweep parameter must be alpha_d or lambda_bd, got '" + std::string(s) + "'");
}

struct SweepPoint {
  double value = 0.0;
  CellSummary summary;
};

/// Full-framework accuracy as one hyper-parameter varies; diverged runs are
/// counted per point and excluded from its mean.
inline std::vector<SweepPoint> sweep(const ExperimentConfig& cfg, SweepParameter parameter, const std::vector<double>& grid,
                                     Setting setting, std::size_t threads = 1) {
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  if (!std::is_sorted(grid.begin(), grid.end())) throw ConfigError("sweep grid must be sorted ascending");
  const auto seeds = cell_seeds(cfg);
  std::vector<RunReport> flat(grid.size() * seeds.size());
  run_parallel(flat.size(), threads, [&](std::size_t i) {
    ExperimentConfig c = cfg;
    const double v = grid[i / seeds.size()];
    if (parameter == SweepParameter::alpha_d) c.baada.alpha_d = v;
    else c.baada.lambda_bd = v;
    flat[i] = run_cell(c, setting, Variant{true, true}, seeds[i % seeds.size()]);
  });
  std::vector<SweepPoint> out;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<RunReport> runs(flat.begin() + static_cast<std::ptrdiff_t>(g * seeds.size()),
                                flat.begin() + static_cast<std::ptrdiff_t>((g + 1) * seeds.size()));
    out.push_back({grid[g], summarize(std::move(runs))});
  }
  return out;
}

// ----------------------------------------------------------------- emitters

namespace detail {
inline nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
}  // namespace detail

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json per_class = nlohmann::json::array();
  for (double v : r.per_class) per_class.push_back(detail::number_or_null(v));
  return {{"accuracy", r.accuracy}, {"per_class_accuracy", per_class}, {"confusion", r.confusion},
          {"class_counts", r.class_counts}, {"total", r.total}};
}

inline nlohmann::json to_json(const RunReport& r, bool with_traces = true) {
  nlohmann::json j = {{"variant", r.variant}, {"setting", r.setting}, {"seed", r.seed}, {"diverged", r.diverged},
                      {"warnings", r.warnings}, {"data_digest", r.data_digest}, {"init_digest", r.init_digest},
                      {"minority_class", r.minority_class + 1}};
  if (r.diverged) {
    j["divergence"] = r.divergence;
  } else {
    j["evaluation"] = to_json(r.eval);
    j["model_digest"] = r.model_digest;
  }
  if (with_traces) {
    nlohmann::json traces = nlohmann::json::object();
    for (const auto& [k, v] : r.traces) {
      nlohmann::json arr = nlohmann::json::array();
      for (double x : v) arr.push_back(detail::number_or_null(x));
      traces[k] = arr;
    }
    j["traces"] = traces;
  }
  return j;
}

inline nlohmann::json to_json(const CellSummary& s, bool with_traces = false) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : s.runs) runs.push_back(to_json(r, with_traces));
  return {{"mean_accuracy", detail::number_or_null(s.mean)}, {"stddev", detail::number_or_null(s.stddev)},
          {"minority_recall", detail::number_or_null(s.minority_recall)}, {"ok", s.ok}, {"diverged", s.diverged},
          {"runs", runs}};
}

inline nlohmann::json to_json(const AblationTable& t) {
  nlohmann::json cells = nlohmann::json::array();
  for (std::size_t v = 0; v < t.variants.size(); ++v)
    for (std::size_t s = 0; s < t.settings.size(); ++s) {
      auto j = to_json(t.cells[v][s]);
      j["variant"] = t.variants[v].name();
      j["setting"] = to_string(t.settings[s]);
      cells.push_back(j);
    }
  return {{"kind", "ablation"}, {"cells", cells}};
}

inline nlohmann::json to_json(const std::vector<SweepPoint>& points, SweepParameter p) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& pt : points) {
    auto j = to_json(pt.summary);
    j["value"] = pt.value;
    arr.push_back(j);
  }
  return {{"kind", "sweep"}, {"parameter", to_string(p)}, {"points", arr}};
}

/// Shortest text that parses back to the same double.
inline std::string shortest(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string format_number(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// Wide table: one row per variant, one column of mean accuracy per setting.
inline std::string ablation_csv(const AblationTable& t) {
  std::ostringstream os;
  os << "variant";
  for (auto s : t.settings) os << "," << to_string(s);
  os << "\n";
  for (std::size_t v = 0; v < t.variants.size(); ++v) {
    os << t.variants[v].name();
    for (std::size_t s = 0; s < t.settings.size(); ++s) os << "," << format_number(t.cells[v][s].mean);
    os << "\n";
  }
  return os.str();
}

/// Long table: one row per cell with spread and divergence counts.
inline std::string ablation_long_csv(const AblationTable& t) {
  std::ostringstream os;
  os << "setting,variant,mean_accuracy,stddev,minority_recall,ok,diverged\n";
  for (std::size_t s = 0; s < t.settings.size(); ++s)
    for (std::size_t v = 0; v < t.variants.size(); ++v) {
      const auto& c = t.cells[v][s];
      os << to_string(t.settings[s]) << "," << t.variants[v].name() << "," << format_number(c.mean) << ","
         << format_number(c.stddev) << "," << format_number(c.minority_recall) << "," << c.ok << "," << c.diverged << "\n";
    }
  return os.str();
}

inline std::string sweep_csv(const std::vector<SweepPoint>& points, SweepParameter p) {
  std::ostringstream os;
  os << to_string(p) << ",mean_accuracy,stddev,ok,diverged\n";
  for (const auto& pt : points) {
    os << shortest(pt.value) << "," << format_number(pt.summary.mean) << "," << format_number(pt.summary.stddev) << "," << pt.summary.ok
       << "," << pt.summary.diverged << "\n";
  }
  return os.str();
}

/// Static SVG line plot of mean accuracy against the swept value (log axis for lambda_bd).
inline std::string sweep_svg(const std::vector<SweepPoint>& points, SweepParameter p) {
  const double w = 480, h = 320, left = 60, right = 20, top = 20, bottom = 50;
  const bool log_axis = p == SweepParameter::lambda_bd;
  auto xv = [&](double v) { return log_axis ? std::log10(v) : v; };
  double lo = xv(points.front().value), hi = xv(points.back().value);
  if (hi == lo) hi = lo + 1.0;
  auto px = [&](double v) { return left + (xv(v) - lo) / (hi - lo) * (w - left - right); };
  auto py = [&](double a) { return top + (1.0 - a) * (h - top - bottom); };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom << "\" stroke=\"black\"/>\n";
  for (double a : {0.0, 0.25, 0.5, 0.75, 1.0})
    os << "<text x=\"" << left - 8 << "\" y=\"" << py(a) + 4 << "\" font-size=\"11\" text-anchor=\"end\">" << a << "</text>\n";
  std::string path;
  for (const auto& pt : points) {
    char label[32];
    std::snprintf(label, sizeof label, "%g", pt.value);
    os << "<text x=\"" << px(pt.value) << "\" y=\"" << h - bottom + 16 << "\" font-size=\"11\" text-anchor=\"middle\">" << label
       << "</text>\n";
    if (!std::isfinite(pt.summary.mean)) {
      os << "<text x=\"" << px(pt.value) << "\" y=\"" << py(0.0) - 6 << "\" font-size=\"11\" fill=\"red\" text-anchor=\"middle\">diverged</text>\n";
      continue;
    }
    os << "<circle cx=\"" << px(pt.value) << "\" cy=\"" << py(pt.summary.mean) << "\" r=\"3\" fill=\"steelblue\"/>\n";
    path += (path.empty() ? "M" : " L") + std::to_string(px(pt.value)) + "," + std::to_string(py(pt.summary.mean));
  }
  if (!path.empty()) os << "<path d=\"" << path << "\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\"/>\n";
  os << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 10 << "\" font-size=\"12\" text-anchor=\"middle\">"
     << to_string(p) << "</text>\n";
  os << "<text x=\"14\" y=\"" << (top + h - bottom) / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 "
     << (top + h - bottom) / 2 << ")\" text-anchor=\"middle\">mean target accuracy</text>\n";
  os << "</svg>\n";
  return os.str();
}

/// Grouped bar chart of class-wise recall, one group per class, one bar per series.
inline std::string classwise_svg(const std::vector<std::pair<std::string, std::vector<double>>>& series) {
  static const char* kColors[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"};
  const std::size_t classes = series.empty() ? 0 : series.front().second.size();
  const double w = 520, h = 320, left = 50, bottom = 60, top = 20;
  const double group = classes ? (w - left - 20) / static_cast<double>(classes) : 0.0;
  const double bar = series.empty() ? 0.0 : group * 0.8 / static_cast<double>(series.size());
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double v = series[s].second[k];
      const double bh = std::isfinite(v) ? v * (h - top - bottom) : 0.0;
      os << "<rect x=\"" << left + k * group + s * bar << "\" y=\"" << h - bottom - bh << "\" width=\"" << bar * 0.95
         << "\" height=\"" << bh << "\" fill=\"" << kColors[s % 6] << "\"/>\n";
    }
    os << "<text x=\"" << left + (k + 0.4) * group << "\" y=\"" << h - bottom + 16
       << "\" font-size=\"11\" text-anchor=\"middle\">class " << k + 1 << "</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s)
    os << "<text x=\"" << left + s * 120 << "\" y=\"" << h - 12 << "\" font-size=\"11\" fill=\"" << kColors[s % 6] << "\">"
       << series[s].first << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace sdcda
