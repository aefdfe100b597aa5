#pragma once

#include <Eigen/LU>
#include <Eigen/SparseCore>

#include "sgdlm/core/normal_gamma.hpp"

namespace sgdlm {

using SparseMatrix = Eigen::SparseMatrix<double>;

// Determinants smaller than this in magnitude are treated as singular.
inline constexpr double kSingularDeterminant = 1e-300;

struct DetSolve {
  double det;
  Matrix solution;
};

// det(I - gamma) and (I - gamma)^{-1} rhs from one LU factorization with
// partial pivoting. Throws SingularityError when |det| < 1e-300.
DetSolve det_and_solve(const SparseMatrix& gamma, const Matrix& rhs);

}  // namespace sgdlm
