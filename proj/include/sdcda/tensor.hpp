#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sdcda/error.hpp"

namespace sdcda {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

/// Dense row-major float64 tensor.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), values_(shape_size(shape_), fill) {
    check_shape();
  }

  Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
    check_shape();
    if (shape_size(shape_) != values_.size()) {
      throw DomainError("tensor shape " + shape_string(shape_) + " does not hold " +
                        std::to_string(values_.size()) + " values");
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  // 2-D access for [rows, cols] tensors.
  double& at(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }

  /// Number of rows when viewed as [shape[0], rest].
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t row_size() const { return rows() == 0 ? 0 : values_.size() / rows(); }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * row_size(), row_size());
  }
  std::span<double> row(std::size_t r) { return std::span<double>(values_).subspan(r * row_size(), row_size()); }

  bool all_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), values_); }

  /// Selects rows (leading-axis slices) in the given order.
  Tensor gather_rows(std::span<const std::size_t> indices) const {
    Shape shape = shape_;
    shape[0] = indices.size();
    Tensor out(shape);
    const std::size_t stride = row_size();
    for (std::size_t i = 0; i < indices.size(); ++i) {
      std::memcpy(out.data() + i * stride, data() + indices[i] * stride, stride * sizeof(double));
    }
    return out;
  }

  Tensor& operator+=(const Tensor& other) {
    if (other.shape_ != shape_) throw InternalError("tensor += with mismatched shapes");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  void check_shape() const {
    for (std::size_t d : shape_)
      if (d == 0) throw DomainError("tensor dimensions must be positive: " + shape_string(shape_));
  }

  Shape shape_;
  std::vector<double> values_;
};

/// Bitwise comparison (distinguishes -0.0 from 0.0 and compares NaN payloads).
inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

/// Concatenates along the leading axis.
inline Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.row_size() != b.row_size()) throw DomainError("concat_rows: row sizes differ");
  Shape shape = a.shape();
  shape[0] = a.rows() + b.rows();
  std::vector<double> values(a.values().begin(), a.values().end());
  values.insert(values.end(), b.values().begin(), b.values().end());
  return Tensor(std::move(shape), std::move(values));
}

/// Ordered name -> tensor map. Insertion order is iteration order.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  void add(std::string name, Tensor tensor) {
    if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    entries_.push_back({std::move(name), std::move(tensor)});
  }

  bool contains(const std::string& name) const { return find(name) != nullptr; }

  const Tensor& at(const std::string& name) const {
    if (auto* t = find(name)) return *t;
    throw InternalError("unknown parameter '" + name + "'");
  }
  Tensor& at(const std::string& name) {
    if (auto* t = const_cast<Tensor*>(std::as_const(*this).find(name))) return *t;
    throw InternalError("unknown parameter '" + name + "'");
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  Entry& operator[](std::size_t i) { return entries_[i]; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
  }

  ParameterSet zeros_like() const {
    ParameterSet out;
    for (const auto& e : entries_) out.add(e.name, Tensor(e.tensor.shape()));
    return out;
  }

  /// True when both sets have the same names in the same order with equal shapes.
  bool aligns_with(const ParameterSet& other) const {
    if (other.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (entries_[i].name != other.entries_[i].name) return false;
      if (entries_[i].tensor.shape() != other.entries_[i].tensor.shape()) return false;
    }
    return true;
  }

  ParameterSet& operator+=(const ParameterSet& other) {
    if (!aligns_with(other)) throw InternalError("ParameterSet += with misaligned sets");
    for (std::size_t i = 0; i < size(); ++i) entries_[i].tensor += other.entries_[i].tensor;
    return *this;
  }

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  const Tensor* find(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return &e.tensor;
    return nullptr;
  }

  std::vector<Entry> entries_;
};

inline bool bitwise_equal(const ParameterSet& a, const ParameterSet& b) {
  if (!a.aligns_with(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!bitwise_equal(a[i].tensor, b[i].tensor)) return false;
  return true;
}

/// Returns lhs + scale * rhs entry-wise.
inline ParameterSet axpy(const ParameterSet& lhs, double scale, const ParameterSet& rhs) {
  if (!lhs.aligns_with(rhs)) throw InternalError("axpy with misaligned parameter sets");
  ParameterSet out = lhs;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto dst = out[i].tensor.values();
    auto src = rhs[i].tensor.values();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
  }
  return out;
}

// 64-bit FNV-1a, used for config/spec/data digests.
inline std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(s.data(), s.size(), h);
}

inline std::uint64_t digest(const Tensor& t, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::size_t d : t.shape()) {
    const std::uint64_t d64 = d;
    h = fnv1a(&d64, sizeof d64, h);
  }
  return fnv1a(t.data(), t.size() * sizeof(double), h);
}

inline std::uint64_t digest(const ParameterSet& p, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (const auto& e : p) {
    h = fnv1a(e.name, h);
    h = digest(e.tensor, h);
  }
  return h;
}

inline std::string hex_digest(std::uint64_t h) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

}  // namespace sdcda
