#include "sgdlm/model/linear_algebra.hpp"

#include <cmath>

#include "sgdlm/core/errors.hpp"

namespace sgdlm {

DetSolve det_and_solve(const SparseMatrix& gamma, const Matrix& rhs) {
  const auto m = gamma.rows();
  if (gamma.cols() != m || rhs.rows() != m) {
    throw DimensionError("det_and_solve: shape mismatch");
  }
  Matrix system = Matrix::Identity(m, m) - Matrix(gamma);
  Eigen::PartialPivLU<Matrix> lu(system);
  const double det = lu.determinant();
  if (!(std::abs(det) >= kSingularDeterminant) || !std::isfinite(det)) {
    throw SingularityError("det_and_solve: I - Gamma is singular");
  }
  return {det, lu.solve(rhs)};
}

}  // namespace sgdlm
