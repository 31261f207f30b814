#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdcda/tensor.hpp"

namespace sdcda {

/// Keep/drop map aligned with a ParameterSet: keep[i][j] == 1 marks a survivor.
struct PruneMask {
  struct Entry {
    std::string name;
    std::vector<std::uint8_t> keep;
    friend bool operator==(const Entry&, const Entry&) = default;
  };
  double alpha = 0.0;
  std::vector<Entry> entries;

  bool aligns_with(const ParameterSet& params) const {
    if (entries.size() != params.size()) return false;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].name != params[i].name || entries[i].keep.size() != params[i].tensor.size()) return false;
    }
    return true;
  }

  std::size_t kept(std::size_t entry) const {
    std::size_t k = 0;
    for (auto b : entries.at(entry).keep) k += b;
    return k;
  }

  static PruneMask all_kept(const ParameterSet& params) {
    PruneMask m;
    for (const auto& e : params) m.entries.push_back({e.name, std::vector<std::uint8_t>(e.tensor.size(), 1)});
    return m;
  }

  friend bool operator==(const PruneMask&, const PruneMask&) = default;
};

}  // namespace sdcda
