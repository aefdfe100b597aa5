#include "sgdlm/model/parent_structure.hpp"

#include <algorithm>
#include <string>

#include "sgdlm/core/errors.hpp"

namespace sgdlm {

void ParentStructure::validate() const {
  if (m <= 0) throw DimensionError("ParentStructure: m must be positive");
  if (k < 0 || k > m - 1) {
    throw DimensionError("ParentStructure: k = " + std::to_string(k) + " invalid for m = " +
                         std::to_string(m));
  }
  if (static_cast<int>(parents.size()) != m) {
    throw DimensionError("ParentStructure: expected " + std::to_string(m) + " parent lists");
  }
  for (int i = 0; i < m; ++i) {
    const auto& sp = parents[static_cast<std::size_t>(i)];
    if (static_cast<int>(sp.size()) != k) {
      throw DimensionError("ParentStructure: series " + std::to_string(i) + " has " +
                           std::to_string(sp.size()) + " parents, expected " + std::to_string(k));
    }
    for (std::size_t a = 0; a < sp.size(); ++a) {
      if (sp[a] < 0 || sp[a] >= m || sp[a] == i) {
        throw DimensionError("ParentStructure: series " + std::to_string(i) +
                             " has invalid parent " + std::to_string(sp[a]));
      }
      if (std::find(sp.begin(), sp.begin() + static_cast<long>(a), sp[a]) !=
          sp.begin() + static_cast<long>(a)) {
        throw DimensionError("ParentStructure: duplicate parent for series " + std::to_string(i));
      }
    }
  }
}

ParentStructure ParentStructure::none(int m) {
  return ParentStructure{m, 0, std::vector<std::vector<int>>(static_cast<std::size_t>(m))};
}

}  // namespace sgdlm
