#pragma once

// Binary container shared by model checkpoints and datasets.
//
// Layout (all integers little-endian, values IEEE-754 binary64 little-endian):
//   magic        8 bytes  "SDCDABIN"
//   version      u32      kContainerVersion
//   spec_digest  u64      digest of whatever produced the tensors
//   attr_count   u32      then per attribute: u32 key_len, key, u32 val_len, val
//   tensor_count u32      then per tensor: u32 name_len, name, u32 rank,
//                         rank x u64 dims, product(dims) x f64 values
// Attributes are written in key order, tensors in insertion order, so equal
// contents always encode to identical bytes.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "sdcda/error.hpp"
#include "sdcda/tensor.hpp"

namespace sdcda {

inline constexpr char kContainerMagic[8] = {'S', 'D', 'C', 'D', 'A', 'B', 'I', 'N'};
inline constexpr std::uint32_t kContainerVersion = 1;

struct Container {
  std::uint64_t spec_digest = 0;
  std::map<std::string, std::string> attributes;
  ParameterSet tensors;
};

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
}

inline void put_string(std::string& out, std::string_view s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IngestionError("container truncated at byte " + std::to_string(pos_));
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode(const Container& c) {
  std::string out(kContainerMagic, sizeof kContainerMagic);
  detail::put_le<std::uint32_t>(out, kContainerVersion);
  detail::put_le<std::uint64_t>(out, c.spec_digest);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.attributes.size()));
  for (const auto& [k, v] : c.attributes) {
    detail::put_string(out, k);
    detail::put_string(out, v);
  }
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& e : c.tensors) {
    detail::put_string(out, e.name);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.tensor.rank()));
    for (std::size_t d : e.tensor.shape()) detail::put_le<std::uint64_t>(out, d);
    for (double v : e.tensor.values()) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

inline Container decode(std::string_view bytes) {
  detail::Reader r(bytes);
  if (r.take(sizeof kContainerMagic) != std::string_view(kContainerMagic, sizeof kContainerMagic)) {
    throw IngestionError("not a container (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kContainerVersion) throw IngestionError("unsupported container version " + std::to_string(version));
  Container c;
  c.spec_digest = r.get<std::uint64_t>();
  const auto attrs = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < attrs; ++i) {
    auto k = r.get_string();
    c.attributes[k] = r.get_string();
  }
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = r.get_string();
    const auto rank = r.get<std::uint32_t>();
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
    std::vector<double> values(shape_size(shape));
    for (double& v : values) v = std::bit_cast<double>(r.get<std::uint64_t>());
    try {
      c.tensors.add(std::move(name), Tensor(std::move(shape), std::move(values)));
    } catch (const Error& e) {
      throw IngestionError(std::string("container tensor: ") + e.what());
    }
  }
  if (!r.done()) throw IngestionError("trailing bytes after container payload");
  return c;
}

/// Writes via a sibling temp file and rename, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IngestionError("cannot write " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IngestionError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IngestionError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_container(const std::filesystem::path& path, const Container& c) { write_file_atomic(path, encode(c)); }
inline Container read_container(const std::filesystem::path& path) { return decode(read_file(path)); }

}  // namespace sdcda
