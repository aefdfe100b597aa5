#include "sgdlm/core/normal_gamma.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "sgdlm/core/errors.hpp"

namespace sgdlm {

namespace {

bool symmetric_within(const Matrix& a, double rel_tol) {
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

}  // namespace

void NormalGamma::validate() const {
  const auto p = location.size();
  if (p == 0) throw DimensionError("NormalGamma: empty location");
  if (scale_matrix.rows() != p || scale_matrix.cols() != p) {
    throw DimensionError("NormalGamma: scale matrix is " + std::to_string(scale_matrix.rows()) +
                         "x" + std::to_string(scale_matrix.cols()) + ", expected " +
                         std::to_string(p));
  }
  if (!(dof > 0.0) || !std::isfinite(dof)) throw DomainError("NormalGamma: dof must be positive");
  if (!(variance_estimate > 0.0) || !std::isfinite(variance_estimate)) {
    throw DomainError("NormalGamma: variance estimate must be positive");
  }
  if (!location.allFinite() || !scale_matrix.allFinite()) {
    throw DomainError("NormalGamma: non-finite parameters");
  }
  if (!symmetric_within(scale_matrix, 1e-12)) {
    throw DefinitenessError("NormalGamma: scale matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(scale_matrix, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) {
    throw DefinitenessError("NormalGamma: scale matrix is not positive definite");
  }
}

NormalGammaSampler::NormalGammaSampler(const NormalGamma& ng)
    : location_(ng.location),
      shape_(0.5 * ng.dof),
      gamma_scale_(2.0 / (ng.dof * ng.variance_estimate)) {
  if (ng.scale_matrix.rows() != ng.dim() || ng.scale_matrix.cols() != ng.dim() || ng.dim() == 0) {
    throw DimensionError("NormalGammaSampler: scale matrix does not match location");
  }
  if (!(ng.dof > 0.0) || !(ng.variance_estimate > 0.0)) {
    throw DomainError("NormalGammaSampler: dof and variance estimate must be positive");
  }
  const double trace = ng.scale_matrix.trace();
  Eigen::LLT<Matrix> llt(ng.scale_matrix);
  if (!(trace > 0.0) || llt.info() != Eigen::Success) {
    throw DefinitenessError("NormalGammaSampler: scale matrix is not positive definite");
  }
  // Cholesky succeeds on some numerically singular matrices; the eigenvalue
  // check is what enforces the relative floor.
  if (ng.dim() > 1) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(ng.scale_matrix, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < 1e-12 * trace) {
      throw DefinitenessError("NormalGammaSampler: scale matrix is numerically singular");
    }
  }
  factor_ = llt.matrixL();
  factor_ /= std::sqrt(ng.variance_estimate);
}

StateDraw NormalGammaSampler::draw(Engine& rng) const {
  StateDraw out;
  out.theta.resize(location_.size());
  out.lambda = draw(rng, out.theta);
  return out;
}

std::vector<StateDraw> sample_normal_gamma(const NormalGamma& ng, int count, Engine& rng) {
  if (count <= 0) throw DomainError("sample_normal_gamma: count must be positive");
  NormalGammaSampler sampler(ng);
  std::vector<StateDraw> draws;
  draws.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) draws.push_back(sampler.draw(rng));
  return draws;
}

NormalGamma make_block_prior(Eigen::Index dim, double dof, double variance_estimate, double r_phi,
                             double r_gamma) {
  NormalGamma ng;
  ng.location = Vector::Zero(dim);
  ng.scale_matrix = Matrix::Zero(dim, dim);
  ng.scale_matrix(0, 0) = r_phi;
  for (Eigen::Index j = 1; j < dim; ++j) ng.scale_matrix(j, j) = r_gamma;
  ng.dof = dof;
  ng.variance_estimate = variance_estimate;
  ng.validate();
  return ng;
}

}  // namespace sgdlm
