#pragma once

// Run configuration: one flat document with TOML-style sections, or the same
// structure as JSON. A single field table drives loading, dumping and the
// documented defaults, so the three cannot drift apart.
//
// Accepted text subset:
//   [section]
//   key = 1 | 0.25 | 1e-07 | true | "text" | [1, 2] | ["I2I", "B2B"]
//   # comment

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdcda/error.hpp"
#include "sdcda/eval.hpp"

namespace sdcda {

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string out = "sdcda-out";
  Setting setting = Setting::i2i;  // scenario used by synth, pretrain and adapt
  ExperimentConfig experiment;
  SweepParameter sweep_parameter = SweepParameter::alpha_d;
  std::vector<double> sweep_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  Setting sweep_setting = Setting::i2i;
};

namespace config_detail {

using json = nlohmann::json;

struct Field {
  std::string section;
  std::string key;
  std::string doc;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

inline std::string where(const Field& f) { return f.section + "." + f.key; }

inline double as_double(const json& v, const std::string& name) {
  if (!v.is_number()) throw ConfigError(name + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(name + ": must be finite");
  return d;
}

inline std::uint64_t as_unsigned(const json& v, const std::string& name) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  throw ConfigError(name + ": expected a non-negative integer");
}

inline std::string as_string(const json& v, const std::string& name) {
  if (!v.is_string()) throw ConfigError(name + ": expected a string");
  return v.get<std::string>();
}

template <class Proj>
Field real(std::string sec, std::string key, std::string doc, Proj proj) {
  Field f{std::move(sec), std::move(key), std::move(doc), {}, {}};
  f.get = [proj](const RunConfig& c) { return json(proj(c)); };
  f.set = [proj, name = where(f)](RunConfig& c, const json& v) { proj(c) = as_double(v, name); };
  return f;
}

template <class Proj>
Field integer(std::string sec, std::string key, std::string doc, Proj proj) {
  Field f{std::move(sec), std::move(key), std::move(doc), {}, {}};
  f.get = [proj](const RunConfig& c) { return json(static_cast<std::uint64_t>(proj(c))); };
  f.set = [proj, name = where(f)](RunConfig& c, const json& v) {
    using T = std::remove_reference_t<decltype(proj(c))>;
    proj(c) = static_cast<T>(as_unsigned(v, name));
  };
  return f;
}

template <class Proj>
Field boolean(std::string sec, std::string key, std::string doc, Proj proj) {
  Field f{std::move(sec), std::move(key), std::move(doc), {}, {}};
  f.get = [proj](const RunConfig& c) { return json(proj(c)); };
  f.set = [proj, name = where(f)](RunConfig& c, const json& v) {
    if (!v.is_boolean()) throw ConfigError(name + ": expected true or false");
    proj(c) = v.get<bool>();
  };
  return f;
}

template <class Proj>
Field text(std::string sec, std::string key, std::string doc, Proj proj) {
  Field f{std::move(sec), std::move(key), std::move(doc), {}, {}};
  f.get = [proj](const RunConfig& c) { return json(proj(c)); };
  f.set = [proj, name = where(f)](RunConfig& c, const json& v) { proj(c) = as_string(v, name); };
  return f;
}

/// Enum stored as its string name.
template <class Proj, class Parse>
Field choice(std::string sec, std::string key, std::string doc, Proj proj, Parse parse) {
  Field f{std::move(sec), std::move(key), std::move(doc), {}, {}};
  f.get = [proj](const RunConfig& c) { return json(to_string(proj(c))); };
  f.set = [proj, parse, name = where(f)](RunConfig& c, const json& v) {
    try {
      proj(c) = parse(as_string(v, name));
    } catch (const ConfigError& e) {
      throw ConfigError(name + ": " + e.what());
    }
  };
  return f;
}

template <class Proj>
Field reals(std::string sec, std::string key, std::string doc, Proj proj) {
  Field f{std::move(sec), std::move(key), std::move(doc), {}, {}};
  f.get = [proj](const RunConfig& c) { return json(proj(c)); };
  f.set = [proj, name = where(f)](RunConfig& c, const json& v) {
    if (!v.is_array()) throw ConfigError(name + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) out.push_back(as_double(e, name));
    proj(c) = std::move(out);
  };
  return f;
}

template <class Proj>
Field settings(std::string sec, std::string key, std::string doc, Proj proj) {
  Field f{std::move(sec), std::move(key), std::move(doc), {}, {}};
  f.get = [proj](const RunConfig& c) {
    json arr = json::array();
    for (auto s : proj(c)) arr.push_back(to_string(s));
    return arr;
  };
  f.set = [proj, name = where(f)](RunConfig& c, const json& v) {
    if (!v.is_array()) throw ConfigError(name + ": expected an array of setting names");
    std::vector<Setting> out;
    for (const auto& e : v) {
      try {
        out.push_back(parse_setting(as_string(e, name)));
      } catch (const ConfigError& err) {
        throw ConfigError(name + ": " + err.what());
      }
    }
    proj(c) = std::move(out);
  };
  return f;
}

inline const std::vector<Field>& fields() {
  // Projections are generic so one lambda serves both const and mutable access.
#define SDCDA_P(expr) [](auto& c) -> auto& { return c.expr; }
  static const std::vector<Field> table{
      integer("run", "seed", "master seed; every random stream derives from it", SDCDA_P(seed)),
      integer("run", "threads", "worker threads for independent ablation/sweep cells (results do not depend on it)", SDCDA_P(threads)),
      text("run", "out", "output directory (--out wins, then SDCDA_OUT, then this)", SDCDA_P(out)),
      choice("run", "setting", "scenario for synth/pretrain/adapt: B2B, B2I, I2B or I2I", SDCDA_P(setting), parse_setting),

      choice("synthetic", "generator", "gaussian-mixture or two-moons", SDCDA_P(experiment.synthetic.generator), parse_generator),
      integer("synthetic", "classes", "number of classes K", SDCDA_P(experiment.synthetic.classes)),
      integer("synthetic", "dim", "feature dimension", SDCDA_P(experiment.synthetic.dim)),
      integer("synthetic", "samples_per_class", "samples drawn per class and domain before imbalance sampling",
              SDCDA_P(experiment.synthetic.samples_per_class)),
      real("synthetic", "separation", "radius of the class-mean circle", SDCDA_P(experiment.synthetic.separation)),
      real("synthetic", "noise", "isotropic noise standard deviation", SDCDA_P(experiment.synthetic.noise)),
      real("synthetic", "shift_translation", "target offset along the diagonal", SDCDA_P(experiment.synthetic.shift_translation)),
      real("synthetic", "shift_rotation_deg", "target rotation of each coordinate pair, degrees",
           SDCDA_P(experiment.synthetic.shift_rotation_deg)),

      reals("scenario", "source_ratios", "per-class keep ratios of an imbalanced source; [] uses 1, 0.1, 0.05, ...",
            SDCDA_P(experiment.source_ratios)),
      reals("scenario", "target_ratios", "per-class keep ratios of an imbalanced target; [] uses the reversed source pattern",
            SDCDA_P(experiment.target_ratios)),

      choice("model", "extractor", "fnn or cnn", SDCDA_P(experiment.model.extractor.variant), parse_extractor),
      real("model", "dropout", "dropout rate of the fnn extractor", SDCDA_P(experiment.model.extractor.dropout)),
      integer("model", "fnn_hidden", "first fnn extractor width", SDCDA_P(experiment.model.extractor.fnn_hidden)),
      integer("model", "fnn_features", "fnn feature width", SDCDA_P(experiment.model.extractor.fnn_features)),
      integer("model", "hidden", "hidden width of the projection, discriminator and classifier heads", SDCDA_P(experiment.model.hidden)),
      integer("model", "projection_dim", "projection head output width", SDCDA_P(experiment.model.projection_dim)),

      real("iaclr", "alpha_g", "pruning proportion of the extractor, in [0,1); 0 is plain SimCLR", SDCDA_P(experiment.iaclr.alpha_g)),
      real("iaclr", "temperature", "contrastive temperature", SDCDA_P(experiment.iaclr.temperature)),
      real("iaclr", "lr", "pre-training learning rate", SDCDA_P(experiment.iaclr.lr)),
      integer("iaclr", "epochs", "pre-training epochs", SDCDA_P(experiment.iaclr.epochs)),
      integer("iaclr", "batch_size", "pre-training batch size", SDCDA_P(experiment.iaclr.batch_size)),
      choice("iaclr", "augmentation", "gaussian-noise or random-mask", SDCDA_P(experiment.iaclr.augmentation.kind), parse_augment_kind),
      real("iaclr", "augmentation_strength", "noise std, or masked fraction", SDCDA_P(experiment.iaclr.augmentation.strength)),
      integer("iaclr", "mask_cadence", "iterations between mask recomputations", SDCDA_P(experiment.iaclr.mask_cadence)),
      choice("iaclr", "pruning", "l1 or random", SDCDA_P(experiment.iaclr.strategy), parse_prune_strategy),
      integer("iaclr", "bottleneck_window", "iterations compared by the loss-bottleneck warning", SDCDA_P(experiment.iaclr.bottleneck_window)),

      real("baada", "lambda_c", "classification loss weight", SDCDA_P(experiment.baada.lambda_c)),
      real("baada", "lambda_d", "adversarial loss weight", SDCDA_P(experiment.baada.lambda_d)),
      real("baada", "lambda_bd", "boundary loss weight; 0 is plain DANN", SDCDA_P(experiment.baada.lambda_bd)),
      real("baada", "alpha_d", "pruning proportion of the discriminator, in [0,1)", SDCDA_P(experiment.baada.alpha_d)),
      real("baada", "lr", "adaptation learning rate", SDCDA_P(experiment.baada.lr)),
      integer("baada", "epochs", "adaptation epochs", SDCDA_P(experiment.baada.epochs)),
      integer("baada", "batch_size", "per-domain batch size", SDCDA_P(experiment.baada.batch_size)),
      real("baada", "temperature", "boundary contrastive temperature", SDCDA_P(experiment.baada.temperature)),
      boolean("baada", "normalize_adversarial", "divide each sum of the adversarial loss by its batch size",
              SDCDA_P(experiment.baada.normalize_adversarial)),
      real("baada", "bd_ceiling", "boundary loss above this aborts the run as diverged", SDCDA_P(experiment.baada.bd_ceiling)),
      integer("baada", "mask_cadence", "iterations between mask recomputations", SDCDA_P(experiment.baada.mask_cadence)),
      choice("baada", "pruning", "l1 or random", SDCDA_P(experiment.baada.strategy), parse_prune_strategy),

      integer("experiment", "seeds", "paired seeds per cell (seed, seed + 1, ...)", SDCDA_P(experiment.seed_count)),
      settings("experiment", "settings", "settings covered by ablate", SDCDA_P(experiment.settings)),

      choice("sweep", "parameter", "alpha_d or lambda_bd", SDCDA_P(sweep_parameter), parse_sweep_parameter),
      reals("sweep", "grid", "values to sweep, ascending", SDCDA_P(sweep_grid)),
      choice("sweep", "setting", "scenario swept", SDCDA_P(sweep_setting), parse_setting),
  };
#undef SDCDA_P
  return table;
}

inline std::vector<std::string> sections() {
  std::vector<std::string> out;
  for (const auto& f : fields())
    if (out.empty() || out.back() != f.section) out.push_back(f.section);
  return out;
}

// ------------------------------------------------------- text subset parser

inline std::string render(const json& v) {
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number()) return shortest(v.get<double>());
  if (v.is_string()) {
    std::string out = "\"";
    for (char ch : v.get<std::string>()) {
      if (ch == '"' || ch == '\\') out += '\\';
      out += ch;
    }
    return out + "\"";
  }
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + render(v[i]);
  return out + "]";
}

class Parser {
 public:
  Parser(std::string_view text, std::size_t line) : s_(text), line_(line) {}

  json value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char ch = s_[pos_];
    if (ch == '"') return string();
    if (ch == '[') return array();
    if (s_.substr(pos_, 4) == "true") return pos_ += 4, json(true);
    if (s_.substr(pos_, 5) == "false") return pos_ += 5, json(false);
    return number();
  }

  void finish() {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] != '#') fail("unexpected trailing text '" + std::string(s_.substr(pos_)) + "'");
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ConfigError("config line " + std::to_string(line_) + ": " + what); }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  json string() {
    std::string out;
    for (++pos_; pos_ < s_.size(); ++pos_) {
      char ch = s_[pos_];
      if (ch == '"') {
        ++pos_;
        return out;
      }
      if (ch == '\\') {
        if (++pos_ >= s_.size()) break;
        ch = s_[pos_];
        if (ch != '"' && ch != '\\') fail(std::string("unsupported escape \\") + ch);
      }
      out += ch;
    }
    fail("unterminated string");
  }

  json array() {
    json arr = json::array();
    ++pos_;
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') return ++pos_, arr;
    while (true) {
      arr.push_back(value());
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated array");
      if (s_[pos_] == ']') return ++pos_, arr;
      if (s_[pos_] != ',') fail("expected ',' or ']' in array");
      ++pos_;
    }
  }

  json number() {
    std::size_t end = pos_;
    while (end < s_.size() && std::string_view("+-.0123456789eE").find(s_[end]) != std::string_view::npos) ++end;
    const std::string_view tok = s_.substr(pos_, end - pos_);
    if (tok.empty()) fail("unrecognized value '" + std::string(s_.substr(pos_)) + "'");
    pos_ = end;
    if (tok.find_first_of(".eE") == std::string_view::npos && tok.front() != '-' && tok.front() != '+') {
      std::uint64_t u = 0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), u);
      if (ec == std::errc() && p == tok.data() + tok.size()) return u;
    }
    double d = 0.0;
    const char* first = tok.data() + (tok.front() == '+' ? 1 : 0);
    auto [p, ec] = std::from_chars(first, tok.data() + tok.size(), d);
    if (ec != std::errc() || p != tok.data() + tok.size()) fail("bad number '" + std::string(tok) + "'");
    return d;
  }

  std::string_view s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

/// Text subset -> {section: {key: value}}.
inline json parse_text(std::string_view text) {
  json doc = json::object();
  std::string section;
  std::size_t line_no = 0, start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos || line[first] == '#') continue;
    line.remove_prefix(first);
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      const auto close = line.find(']');
      if (close == std::string_view::npos) throw ConfigError(where + "unterminated section header");
      section = std::string(line.substr(1, close - 1));
      Parser(line.substr(close + 1), line_no).finish();
      if (doc.contains(section)) throw ConfigError(where + "section [" + section + "] repeated");
      doc[section] = json::object();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    std::string_view key = line.substr(0, eq);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.remove_suffix(1);
    if (section.empty()) throw ConfigError(where + "key '" + std::string(key) + "' outside any [section]");
    Parser p(line.substr(eq + 1), line_no);
    json v = p.value();
    p.finish();
    if (doc[section].contains(std::string(key))) throw ConfigError(where + "key '" + std::string(key) + "' repeated");
    doc[section][std::string(key)] = std::move(v);
    if (nl == text.size()) break;
  }
  return doc;
}

}  // namespace config_detail

/// Applies a {section: {key: value}} document on top of `base`; unknown
/// sections or keys are rejected.
inline RunConfig apply_config(RunConfig base, const nlohmann::json& doc) {
  using config_detail::fields;
  if (!doc.is_object()) throw ConfigError("config must be an object of sections");
  for (const auto& [section, body] : doc.items()) {
    if (!body.is_object()) throw ConfigError("config section '" + section + "' must be a table");
    for (const auto& [key, value] : body.items()) {
      auto it = std::find_if(fields().begin(), fields().end(), [&](const auto& f) { return f.section == section && f.key == key; });
      if (it == fields().end()) throw ConfigError("unknown config key " + section + "." + key);
      it->set(base, value);
    }
  }
  return base;
}

/// Parses either the sectioned text form or JSON (detected by a leading '{').
inline RunConfig parse_config(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config json: ") + e.what());
    }
    return apply_config(RunConfig{}, doc);
  }
  return apply_config(RunConfig{}, config_detail::parse_text(text));
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IngestionError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

/// Canonical text form. With `documented`, every key is preceded by its description.
inline std::string dump_config(const RunConfig& c, bool documented = true) {
  std::string out;
  std::string section;
  for (const auto& f : config_detail::fields()) {
    if (f.section != section) {
      out += (section.empty() ? "" : "\n") + ("[" + f.section + "]\n");
      section = f.section;
    }
    if (documented) out += "# " + f.doc + "\n";
    out += f.key + " = " + config_detail::render(f.get(c)) + "\n";
  }
  return out;
}

inline nlohmann::json config_json(const RunConfig& c) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& f : config_detail::fields()) doc[f.section][f.key] = f.get(c);
  return doc;
}

/// The config with settings that cannot change results (output location,
/// thread count) reset; this is what reports echo and digest.
inline RunConfig result_relevant(RunConfig c) {
  c.out = RunConfig{}.out;
  c.threads = 1;
  return c;
}

inline std::uint64_t config_digest(const RunConfig& c) {
  const std::string text = dump_config(result_relevant(c), false);
  return fnv1a(text.data(), text.size());
}

/// Cross-field checks, run before any command.
inline void validate(const RunConfig& c) {
  const auto& e = c.experiment;
  validate(e.synthetic);
  validate(e.iaclr);
  validate(e.baada);
  if (c.threads == 0) throw ConfigError("run.threads must be positive");
  if (e.seed_count == 0) throw ConfigError("experiment.seeds must be positive");
  if (e.settings.empty()) throw ConfigError("experiment.settings is empty");
  if (c.sweep_grid.empty()) throw ConfigError("sweep.grid is empty");
  if (!std::is_sorted(c.sweep_grid.begin(), c.sweep_grid.end())) throw ConfigError("sweep.grid must be sorted ascending");
  if (!(e.model.extractor.dropout >= 0.0 && e.model.extractor.dropout < 1.0)) throw ConfigError("model.dropout must lie in [0,1)");
  std::set<Setting> used(e.settings.begin(), e.settings.end());
  used.insert(c.setting);
  used.insert(c.sweep_setting);
  for (auto s : used) {
    ScenarioSpec spec = ScenarioSpec::defaults(s, e.synthetic.classes, 0);
    if (source_imbalanced(s) && !e.source_ratios.empty()) spec.source_ratios = e.source_ratios;
    if (target_imbalanced(s) && !e.target_ratios.empty()) spec.target_ratios = e.target_ratios;
    validate(spec, e.synthetic.classes);
  }
}

}  // namespace sdcda
