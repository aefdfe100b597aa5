#include "sgdlm/dlm/filter.hpp"

#include <cmath>
#include <string>

#include "sgdlm/core/errors.hpp"
#include "sgdlm/core/special_functions.hpp"

namespace sgdlm::dlm {

namespace {

void check_unit_interval(double v, const char* name) {
  if (!(v > 0.0 && v <= 1.0)) {
    throw DomainError(std::string("discount factor ") + name + " must lie in (0, 1], got " +
                      std::to_string(v));
  }
}

}  // namespace

void DiscountSet::validate() const {
  check_unit_interval(beta, "beta");
  check_unit_interval(delta_phi, "delta_phi");
  check_unit_interval(delta_gamma, "delta_gamma");
}

UpdateResult kalman_update(const NormalGamma& prior, const Vector& regressor, double observation) {
  if (regressor.size() != prior.dim()) {
    throw DimensionError("kalman_update: regressor length " + std::to_string(regressor.size()) +
                         " != state dimension " + std::to_string(prior.dim()));
  }
  const Vector rf = prior.scale_matrix * regressor;
  const double e = observation - regressor.dot(prior.location);
  const double q = prior.variance_estimate + regressor.dot(rf);
  if (!(q > 0.0) || !std::isfinite(q)) {
    throw NumericalDegeneracyError("kalman_update: forecast variance factor q = " +
                                   std::to_string(q));
  }
  const Vector gain = rf / q;
  const double z = (prior.dof + e * e / q) / (prior.dof + 1.0);

  UpdateResult out;
  out.forecast_error = e;
  out.forecast_variance_factor = q;
  NormalGamma& post = out.posterior;
  post.location = prior.location + e * gain;
  post.scale_matrix = z * (prior.scale_matrix - q * gain * gain.transpose());
  post.scale_matrix = 0.5 * (post.scale_matrix + post.scale_matrix.transpose()).eval();
  post.dof = prior.dof + 1.0;
  post.variance_estimate = z * prior.variance_estimate;
  return out;
}

NormalGamma evolve(const NormalGamma& posterior, double beta, double delta) {
  check_unit_interval(beta, "beta");
  check_unit_interval(delta, "delta");
  NormalGamma prior;
  prior.location = posterior.location;
  prior.scale_matrix = posterior.scale_matrix / delta;
  prior.dof = beta * posterior.dof;
  prior.variance_estimate = posterior.variance_estimate;
  return prior;
}

NormalGamma evolve_block(const NormalGamma& posterior, double beta, double delta_phi,
                         double delta_gamma) {
  check_unit_interval(beta, "beta");
  check_unit_interval(delta_phi, "delta_phi");
  check_unit_interval(delta_gamma, "delta_gamma");
  const auto p = posterior.dim();
  NormalGamma prior;
  prior.location = posterior.location;
  prior.scale_matrix = Matrix::Zero(p, p);
  prior.scale_matrix(0, 0) = posterior.scale_matrix(0, 0) / delta_phi;
  if (p > 1) {
    prior.scale_matrix.bottomRightCorner(p - 1, p - 1) =
        posterior.scale_matrix.bottomRightCorner(p - 1, p - 1) / delta_gamma;
  }
  prior.dof = beta * posterior.dof;
  prior.variance_estimate = posterior.variance_estimate;
  return prior;
}

StudentT one_step_predictive(const NormalGamma& prior, const Vector& regressor) {
  if (regressor.size() != prior.dim()) {
    throw DimensionError("one_step_predictive: regressor length mismatch");
  }
  return {prior.dof, regressor.dot(prior.location),
          prior.variance_estimate + regressor.dot(prior.scale_matrix * regressor)};
}

Filter::Filter(NormalGamma initial_prior, DiscountSet discounts, long t0)
    : state_{std::move(initial_prior), std::nullopt, t0}, discounts_(discounts) {
  discounts_.validate();
}

double Filter::step(const Vector& regressor, double observation) {
  const StudentT pred = one_step_predictive(state_.prior, regressor);
  const double log_density = student_t_log_density(observation, pred.dof, pred.mode, pred.scale);
  auto update = kalman_update(state_.prior, regressor, observation);
  state_.prior = evolve_block(update.posterior, discounts_);
  state_.posterior = std::move(update.posterior);
  ++state_.t;
  return log_density;
}

double log_likelihood(std::span<const double> series, const Matrix& regressors,
                      const NormalGamma& initial_prior, const DiscountSet& discounts, long t_start,
                      long t_end) {
  const auto length = static_cast<long>(series.size());
  if (regressors.rows() != length) {
    throw AlignmentError("log_likelihood: " + std::to_string(regressors.rows()) +
                         " regressor rows for " + std::to_string(length) + " observations");
  }
  if (t_start < 0 || t_end < t_start || t_end >= length) {
    throw AlignmentError("log_likelihood: range [" + std::to_string(t_start) + ", " +
                         std::to_string(t_end) + "] outside series of length " +
                         std::to_string(length));
  }
  if (regressors.cols() != initial_prior.dim()) {
    throw DimensionError("log_likelihood: regressor width does not match the prior");
  }
  Filter filter(initial_prior, discounts, t_start);
  double total = 0.0;
  Vector f(regressors.cols());
  for (long t = t_start; t <= t_end; ++t) {
    f = regressors.row(t).transpose();
    total += filter.step(f, series[static_cast<std::size_t>(t)]);
  }
  return total;
}

}  // namespace sgdlm::dlm
