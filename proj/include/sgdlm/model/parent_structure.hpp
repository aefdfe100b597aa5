#pragma once

#include <vector>

namespace sgdlm {

// The simultaneous-parent sets sp(i). Every series has the same number k of
// parents; parents[i] lists them in the order their gamma coefficients occupy
// theta[1..k].
struct ParentStructure {
  int m = 0;
  int k = 0;
  std::vector<std::vector<int>> parents;

  // Throws DimensionError when any invariant fails.
  void validate() const;

  [[nodiscard]] int state_dim() const { return k + 1; }

  static ParentStructure none(int m);

  bool operator==(const ParentStructure&) const = default;
};

}  // namespace sgdlm
