#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <vector>

#include "sgdlm/core/random.hpp"

namespace sgdlm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Conjugate normal-gamma parameters for one series:
//   lambda ~ Gamma(shape = dof / 2, rate = dof * variance_estimate / 2)
//   theta | lambda ~ N(location, scale_matrix / (variance_estimate * lambda))
// The same quadruple holds a prior (a, R, r, c) or a posterior (m, C, n, s).
struct NormalGamma {
  Vector location;
  Matrix scale_matrix;
  double dof = 1.0;
  double variance_estimate = 1.0;

  [[nodiscard]] Eigen::Index dim() const { return location.size(); }

  // Throws DimensionError, DomainError or DefinitenessError.
  void validate() const;

  bool operator==(const NormalGamma&) const = default;
};

// One joint draw of (theta, lambda) for a single series. theta is ordered
// (phi, gamma_1, ..., gamma_k) with gammas in parent-list order.
struct StateDraw {
  Vector theta;
  double lambda = 1.0;
};

// Precomputes the Cholesky factor so repeated draws cost one triangular
// multiply each. Rejects scale matrices whose smallest eigenvalue is below
// 1e-12 * trace.
class NormalGammaSampler {
 public:
  explicit NormalGammaSampler(const NormalGamma& ng);

  // Writes theta into `theta` (length dim) and returns lambda.
  template <typename Derived>
  double draw(Engine& rng, Eigen::MatrixBase<Derived> const& theta_out) const;

  [[nodiscard]] StateDraw draw(Engine& rng) const;
  [[nodiscard]] Eigen::Index dim() const { return location_.size(); }

 private:
  Vector location_;
  Matrix factor_;  // lower-triangular L with L L^T = scale_matrix / variance_estimate
  double shape_;
  double gamma_scale_;  // 1 / rate
};

std::vector<StateDraw> sample_normal_gamma(const NormalGamma& ng, int count, Engine& rng);

// Build a prior with block-diagonal scale diag(r_phi, r_gamma, ..., r_gamma).
NormalGamma make_block_prior(Eigen::Index dim, double dof, double variance_estimate, double r_phi,
                             double r_gamma);

template <typename Derived>
double NormalGammaSampler::draw(Engine& rng, Eigen::MatrixBase<Derived> const& theta_out) const {
  auto& theta = const_cast<Eigen::MatrixBase<Derived>&>(theta_out);
  std::gamma_distribution<double> gamma(shape_, gamma_scale_);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double lambda = gamma(rng);
  const Eigen::Index p = location_.size();
  thread_local Vector z;
  z.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) z[j] = normal(rng);
  theta = location_ + (factor_.triangularView<Eigen::Lower>() * z) / std::sqrt(lambda);
  return lambda;
}

}  // namespace sgdlm
