#pragma once

// Datasets, bi-imbalanced scenario construction, synthetic two-domain
// generators and file ingestion.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sdcda/container.hpp"
#include "sdcda/error.hpp"
#include "sdcda/random.hpp"
#include "sdcda/tensor.hpp"

namespace sdcda {

/// Labeled or unlabeled samples of one domain. Labels are 1..class_count.
struct DomainDataset {
  Tensor features;  // [n, ...sample shape]
  std::optional<std::vector<int>> labels;
  std::string domain;
  std::size_t class_count = 0;

  std::size_t size() const { return features.empty() ? 0 : features.rows(); }
  Shape sample_shape() const { return Shape(features.shape().begin() + 1, features.shape().end()); }
};

/// Trainer-facing target view. It has no label field, so target labels cannot
/// reach a trainer.
struct UnlabeledDataset {
  Tensor features;
  std::string domain;

  std::size_t size() const { return features.empty() ? 0 : features.rows(); }
};

inline UnlabeledDataset unlabeled_view(const DomainDataset& d) { return {d.features, d.domain}; }

inline void validate(const DomainDataset& d) {
  if (d.features.empty()) throw IngestionError("dataset '" + d.domain + "' is empty");
  if (!d.labels) return;
  if (d.labels->size() != d.size()) throw IngestionError("dataset '" + d.domain + "': label count differs from sample count");
  for (std::size_t i = 0; i < d.labels->size(); ++i) {
    const int y = (*d.labels)[i];
    if (y < 1 || static_cast<std::size_t>(y) > d.class_count)
      throw IngestionError("dataset '" + d.domain + "' sample " + std::to_string(i) + ": label " + std::to_string(y) +
                           " outside 1.." + std::to_string(d.class_count));
  }
}

inline std::vector<std::size_t> class_counts(const DomainDataset& d) {
  std::vector<std::size_t> counts(d.class_count, 0);
  if (d.labels)
    for (int y : *d.labels) ++counts.at(static_cast<std::size_t>(y - 1));
  return counts;
}

// ---------------------------------------------------------------- scenarios

enum class Setting { b2b, b2i, i2b, i2i };

inline std::string to_string(Setting s) {
  switch (s) {
    case Setting::b2b: return "B2B";
    case Setting::b2i: return "B2I";
    case Setting::i2b: return "I2B";
    case Setting::i2i: return "I2I";
  }
  return "?";
}

inline Setting parse_setting(std::string_view s) {
  std::string u(s);
  for (char& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (u == "B2B") return Setting::b2b;
  if (u == "B2I") return Setting::b2i;
  if (u == "I2B") return Setting::i2b;
  if (u == "I2I") return Setting::i2i;
  throw ConfigError("unknown imbalance setting '" + std::string(s) + "'");
}

inline bool source_imbalanced(Setting s) { return s == Setting::i2b || s == Setting::i2i; }
inline bool target_imbalanced(Setting s) { return s == Setting::b2i || s == Setting::i2i; }

/// Default minority pattern [1.0, 0.1, 0.05, 0.025, ...].
inline std::vector<double> default_imbalance(std::size_t classes) {
  std::vector<double> r(classes, 1.0);
  if (classes > 1) r[1] = 0.1;
  for (std::size_t k = 2; k < classes; ++k) r[k] = r[k - 1] / 2.0;
  return r;
}

struct ScenarioSpec {
  Setting setting = Setting::b2b;
  std::vector<double> source_ratios;  // per-class keep ratios
  std::vector<double> target_ratios;
  std::uint64_t seed = 0;

  /// Balanced sides are all ones; imbalanced sides use the default pattern,
  /// reversed on the target so that the source majority is the target minority.
  static ScenarioSpec defaults(Setting setting, std::size_t classes, std::uint64_t seed) {
    ScenarioSpec s{setting, std::vector<double>(classes, 1.0), std::vector<double>(classes, 1.0), seed};
    const auto imb = default_imbalance(classes);
    if (source_imbalanced(setting)) s.source_ratios = imb;
    if (target_imbalanced(setting)) s.target_ratios.assign(imb.rbegin(), imb.rend());
    return s;
  }
};

inline void validate(const ScenarioSpec& s, std::size_t classes) {
  auto check = [&](const std::vector<double>& r, bool imbalanced, const char* side) {
    if (r.size() != classes)
      throw ConfigError(std::string(side) + " ratios: expected " + std::to_string(classes) + " entries, got " + std::to_string(r.size()));
    for (double v : r)
      if (!(v > 0.0 && v <= 1.0)) throw ConfigError(std::string(side) + " ratios must lie in (0,1]");
    if (imbalanced) {
      if (std::none_of(r.begin(), r.end(), [](double v) { return v <= 0.5; }))
        throw ConfigError(std::string(side) + " side of " + to_string(s.setting) + " needs a minority ratio <= 0.5");
    } else if (std::any_of(r.begin(), r.end(), [](double v) { return v != 1.0; })) {
      throw ConfigError(std::string(side) + " side of " + to_string(s.setting) + " must be balanced (all ratios 1)");
    }
  };
  check(s.source_ratios, source_imbalanced(s.setting), "source");
  check(s.target_ratios, target_imbalanced(s.setting), "target");
}

/// Result of scenario sampling. Target labels live only in `target_holdout`.
struct Scenario {
  DomainDataset source;
  UnlabeledDataset target;
  DomainDataset target_holdout;
  std::vector<std::size_t> source_indices;  // rows kept from the input datasets
  std::vector<std::size_t> target_indices;
};

namespace detail {

inline std::size_t keep_count(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5));
}

inline std::vector<std::size_t> sample_classes(const DomainDataset& d, const std::vector<double>& ratios, Rng& rng) {
  std::vector<std::size_t> kept;
  for (std::size_t c = 0; c < d.class_count; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (static_cast<std::size_t>((*d.labels)[i]) == c + 1) members.push_back(i);
    const std::size_t keep = keep_count(ratios[c], members.size());
    if (keep == 0) {
      throw ConfigError("ratio " + std::to_string(ratios[c]) + " leaves class " + std::to_string(c + 1) + " of domain '" +
                        d.domain + "' empty (" + std::to_string(members.size()) + " samples)");
    }
    rng.shuffle(members);
    members.resize(keep);
    kept.insert(kept.end(), members.begin(), members.end());
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

inline DomainDataset subset(const DomainDataset& d, const std::vector<std::size_t>& idx) {
  DomainDataset out{d.features.gather_rows(idx), std::nullopt, d.domain, d.class_count};
  if (d.labels) {
    std::vector<int> y;
    y.reserve(idx.size());
    for (auto i : idx) y.push_back((*d.labels)[i]);
    out.labels = std::move(y);
  }
  return out;
}

}  // namespace detail

/// Keeps round(ratio_c * n_c) samples per class (half up), drawn without
/// replacement from the scenario seed.
inline Scenario make_scenario(const DomainDataset& source, const DomainDataset& target, const ScenarioSpec& spec) {
  if (!source.labels || !target.labels) throw ConfigError("make_scenario needs labeled source and target datasets");
  if (source.class_count != target.class_count) throw ConfigError("source and target class counts differ");
  if (source.sample_shape() != target.sample_shape()) throw ConfigError("source and target sample shapes differ");
  validate(source);
  validate(target);
  validate(spec, source.class_count);
  Rng src_rng(derive_seed(spec.seed, "scenario.source"));
  Rng tgt_rng(derive_seed(spec.seed, "scenario.target"));
  Scenario s;
  s.source_indices = detail::sample_classes(source, spec.source_ratios, src_rng);
  s.target_indices = detail::sample_classes(target, spec.target_ratios, tgt_rng);
  s.source = detail::subset(source, s.source_indices);
  s.target_holdout = detail::subset(target, s.target_indices);
  s.target = unlabeled_view(s.target_holdout);
  return s;
}

// --------------------------------------------------------------- synthetic

enum class Generator { gaussian_mixture, two_moons };

inline std::string to_string(Generator g) { return g == Generator::two_moons ? "two-moons" : "gaussian-mixture"; }

inline Generator parse_generator(std::string_view s) {
  if (s == "gaussian-mixture") return Generator::gaussian_mixture;
  if (s == "two-moons") return Generator::two_moons;
  throw ConfigError("unknown generator '" + std::string(s) + "'");
}

struct SyntheticSpec {
  Generator generator = Generator::gaussian_mixture;
  std::size_t classes = 4;
  std::size_t dim = 8;
  std::size_t samples_per_class = 400;
  double separation = 3.0;       // radius of the class-mean circle
  double noise = 1.0;            // isotropic standard deviation
  double shift_translation = 1.5;  // target offset along (1, ..., 1) / sqrt(dim)
  double shift_rotation_deg = 25.0;  // rotation applied to each coordinate pair (0,1), (2,3), ...
  std::uint64_t seed = 0;
};

inline void validate(const SyntheticSpec& s) {
  if (s.classes < 2) throw ConfigError("synthetic data needs K >= 2 classes");
  if (s.dim < 2) throw ConfigError("synthetic data needs dim >= 2");
  if (s.samples_per_class == 0) throw ConfigError("samples_per_class must be positive");
  if (s.generator == Generator::two_moons && s.classes != 2) throw ConfigError("two-moons generates exactly 2 classes");
  for (double v : {s.separation, s.noise, s.shift_translation, s.shift_rotation_deg})
    if (!std::isfinite(v)) throw ConfigError("synthetic parameters must be finite");
  if (s.noise < 0.0) throw ConfigError("noise must be non-negative");
}

/// Class means of the unshifted gaussian mixture, one row per class.
inline Tensor class_means(const SyntheticSpec& s) {
  validate(s);
  Tensor means({s.classes, s.dim});
  Rng rng(derive_seed(s.seed, "synth.means"));
  for (std::size_t k = 0; k < s.classes; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(s.classes);
    means.at(k, 0) = s.separation * std::cos(angle);
    means.at(k, 1) = s.separation * std::sin(angle);
    for (std::size_t j = 2; j < s.dim; ++j) means.at(k, j) = 0.5 * s.separation * rng.normal();
  }
  return means;
}

/// The affine domain shift x -> R x + t applied to target samples.
inline void apply_shift(const SyntheticSpec& s, std::span<double> x) {
  const double th = s.shift_rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(th), sn = std::sin(th);
  for (std::size_t j = 0; j + 1 < x.size(); j += 2) {
    const double a = x[j], b = x[j + 1];
    x[j] = c * a - sn * b;
    x[j + 1] = sn * a + c * b;
  }
  const double t = s.shift_translation / std::sqrt(static_cast<double>(x.size()));
  for (double& v : x) v += t;
}

namespace detail {

inline DomainDataset draw_domain(const SyntheticSpec& s, const Tensor& means, Rng& rng, bool shifted, std::string name) {
  const std::size_t n = s.classes * s.samples_per_class;
  DomainDataset d{Tensor({n, s.dim}), std::vector<int>(n), std::move(name), s.classes};
  for (std::size_t k = 0; k < s.classes; ++k) {
    for (std::size_t i = 0; i < s.samples_per_class; ++i) {
      const std::size_t r = k * s.samples_per_class + i;
      auto x = d.features.row(r);
      if (s.generator == Generator::gaussian_mixture) {
        for (std::size_t j = 0; j < s.dim; ++j) x[j] = means.at(k, j) + s.noise * rng.normal();
      } else {
        const double t = std::numbers::pi * rng.uniform();
        const double mx = k == 0 ? std::cos(t) : 1.0 - std::cos(t);
        const double my = k == 0 ? std::sin(t) : 0.5 - std::sin(t);
        x[0] = s.separation * mx + s.noise * rng.normal();
        x[1] = s.separation * my + s.noise * rng.normal();
        for (std::size_t j = 2; j < s.dim; ++j) x[j] = s.noise * rng.normal();
      }
      if (shifted) apply_shift(s, x);
      (*d.labels)[r] = static_cast<int>(k + 1);
    }
  }
  return d;
}

}  // namespace detail

/// Source and target draws from the same class-conditional generators; the
/// target additionally passes through the domain shift.
inline std::pair<DomainDataset, DomainDataset> synth_domains(const SyntheticSpec& s) {
  validate(s);
  const Tensor means = s.generator == Generator::gaussian_mixture ? class_means(s) : Tensor({s.classes, s.dim});
  Rng src(derive_seed(s.seed, "synth.source"));
  Rng tgt(derive_seed(s.seed, "synth.target"));
  return {detail::draw_domain(s, means, src, false, "source"), detail::draw_domain(s, means, tgt, true, "target")};
}

// ---------------------------------------------------------------- file I/O

enum class MatrixFormat { csv, container };

/// Sidecar manifest for csv ingestion: `<file>.manifest`, plain key=value lines.
///   shape=24 | shape=18x18 | shape=1x18x18   per-sample shape (default: csv width)
///   label_column=none|last                    (default none)
///   class_count=K                             (default: max label)
///   header=true|false                         (default false)
///   domain=<name>
inline std::map<std::string, std::string> read_manifest(const std::filesystem::path& path) {
  std::map<std::string, std::string> kv;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IngestionError(path.string() + " line " + std::to_string(lineno) + ": expected key=value");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

inline Shape parse_shape(std::string_view text) {
  Shape shape;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto next = text.find('x', pos);
    const auto part = text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || ptr != part.data() + part.size() || v == 0)
      throw IngestionError("malformed shape '" + std::string(text) + "'");
    shape.push_back(v);
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  if (shape.size() == 2) shape.insert(shape.begin(), 1);  // H x W images become single-channel
  return shape;
}

namespace detail {

inline double parse_number(std::string_view cell, std::size_t row) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
    throw IngestionError("row " + std::to_string(row) + ": malformed number '" + std::string(cell) + "'");
  return v;
}

inline DomainDataset load_csv(const std::filesystem::path& path) {
  std::map<std::string, std::string> manifest;
  auto sidecar = path;
  sidecar += ".manifest";
  if (std::filesystem::exists(sidecar)) manifest = read_manifest(sidecar);
  for (const auto& [k, v] : manifest) {
    if (k != "shape" && k != "label_column" && k != "class_count" && k != "header" && k != "domain")
      throw IngestionError(sidecar.string() + ": unknown key '" + k + "'");
  }
  const bool labeled = manifest.count("label_column") && manifest["label_column"] == "last";
  if (manifest.count("label_column") && !labeled && manifest["label_column"] != "none")
    throw IngestionError(sidecar.string() + ": label_column must be none or last");
  const bool header = manifest.count("header") && manifest["header"] == "true";

  std::istringstream in(read_file(path));
  std::string line;
  std::size_t row = 0, width = 0;
  std::vector<double> values;
  std::vector<int> labels;
  bool skipped_header = !header;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    if (line.empty()) continue;
    std::vector<double> cells;
    std::size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      cells.push_back(parse_number(std::string_view(line).substr(pos, comma == std::string::npos ? std::string::npos : comma - pos), row));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw IngestionError("row " + std::to_string(row) + ": expected " + std::to_string(width) + " columns, got " + std::to_string(cells.size()));
    if (labeled) {
      const double y = cells.back();
      if (y != std::floor(y) || y < 1.0) throw IngestionError("row " + std::to_string(row) + ": label must be an integer >= 1");
      labels.push_back(static_cast<int>(y));
      cells.pop_back();
    }
    values.insert(values.end(), cells.begin(), cells.end());
  }
  const std::size_t n = labeled ? labels.size() : (width == 0 ? 0 : values.size() / width);
  if (n == 0) throw IngestionError(path.string() + ": no data rows");
  const std::size_t features = values.size() / n;
  if (features == 0) throw IngestionError(path.string() + ": no feature columns");

  Shape sample{features};
  if (manifest.count("shape")) {
    sample = parse_shape(manifest["shape"]);
    if (shape_size(sample) != features)
      throw IngestionError("manifest shape " + manifest["shape"] + " holds " + std::to_string(shape_size(sample)) +
                           " elements but rows have " + std::to_string(features));
  }
  Shape full{n};
  full.insert(full.end(), sample.begin(), sample.end());

  DomainDataset d{Tensor(full, std::move(values)), std::nullopt, manifest.count("domain") ? manifest["domain"] : path.stem().string(), 0};
  if (labeled) {
    std::size_t k = 0;
    for (int y : labels) k = std::max(k, static_cast<std::size_t>(y));
    if (manifest.count("class_count")) {
      const auto declared = static_cast<std::size_t>(parse_number(manifest["class_count"], 0));
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (static_cast<std::size_t>(labels[i]) > declared)
          throw IngestionError("row " + std::to_string(i + 1 + (header ? 1 : 0)) + ": label " + std::to_string(labels[i]) +
                               " exceeds class_count " + std::to_string(declared));
      k = declared;
    }
    d.class_count = k;
    d.labels = std::move(labels);
  }
  return d;
}

}  // namespace detail

inline Container to_container(const DomainDataset& d) {
  Container c;
  c.spec_digest = fnv1a("dataset");
  c.attributes["kind"] = "dataset";
  c.attributes["domain"] = d.domain;
  c.attributes["class_count"] = std::to_string(d.class_count);
  c.tensors.add("features", d.features);
  if (d.labels) {
    Tensor y({d.labels->size()});
    for (std::size_t i = 0; i < d.labels->size(); ++i) y[i] = (*d.labels)[i];
    c.tensors.add("labels", std::move(y));
  }
  return c;
}

inline DomainDataset from_container(const Container& c) {
  if (!c.tensors.contains("features")) throw IngestionError("dataset container has no 'features' tensor");
  DomainDataset d{c.tensors.at("features"), std::nullopt, c.attributes.count("domain") ? c.attributes.at("domain") : "", 0};
  if (c.attributes.count("class_count")) d.class_count = static_cast<std::size_t>(std::stoull(c.attributes.at("class_count")));
  if (c.tensors.contains("labels")) {
    const Tensor& y = c.tensors.at("labels");
    std::vector<int> labels(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] != std::floor(y[i])) throw IngestionError("sample " + std::to_string(i) + ": non-integer label");
      labels[i] = static_cast<int>(y[i]);
    }
    d.labels = std::move(labels);
  }
  validate(d);
  return d;
}

inline void save_dataset(const std::filesystem::path& path, const DomainDataset& d) { write_container(path, to_container(d)); }

inline DomainDataset load_matrix(const std::filesystem::path& path, MatrixFormat format) {
  if (!std::filesystem::exists(path)) throw IngestionError("no such file: " + path.string());
  DomainDataset d = format == MatrixFormat::csv ? detail::load_csv(path) : from_container(read_container(path));
  validate(d);
  return d;
}

}  // namespace sdcda
