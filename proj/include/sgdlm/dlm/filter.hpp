#pragma once

#include <optional>
#include <span>

#include "sgdlm/core/normal_gamma.hpp"

namespace sgdlm::dlm {

// Discount factors: beta for the precision degrees of freedom, delta_phi for
// the local level and delta_gamma for the coupling coefficients.
struct DiscountSet {
  double beta = 0.95;
  double delta_phi = 0.99;
  double delta_gamma = 0.99;

  void validate() const;
  bool operator==(const DiscountSet&) const = default;
};

struct StudentT {
  double dof;
  double mode;
  double scale;  // squared scale; variance is scale * dof / (dof - 2)
};

struct UpdateResult {
  NormalGamma posterior;
  double forecast_error;            // e_t
  double forecast_variance_factor;  // q_t
};

// Conjugate update of a stochastic-variance DLM prior by one observation.
UpdateResult kalman_update(const NormalGamma& prior, const Vector& regressor, double observation);

// a = m, R = C / delta, r = beta n, c = s.
NormalGamma evolve(const NormalGamma& posterior, double beta, double delta);

// Like evolve, but the first coordinate is discounted by delta_phi, the rest
// by delta_gamma, and the covariance between the two blocks is dropped. A
// one-dimensional state reduces to evolve(posterior, beta, delta_phi).
NormalGamma evolve_block(const NormalGamma& posterior, double beta, double delta_phi,
                         double delta_gamma);

inline NormalGamma evolve_block(const NormalGamma& posterior, const DiscountSet& d) {
  return evolve_block(posterior, d.beta, d.delta_phi, d.delta_gamma);
}

StudentT one_step_predictive(const NormalGamma& prior, const Vector& regressor);

struct DlmState {
  NormalGamma prior;
  std::optional<NormalGamma> posterior;
  long t = 0;
};

// Sequential filter for a single series. step() assimilates the day's
// observation and leaves the prior for the next day in place.
class Filter {
 public:
  Filter(NormalGamma initial_prior, DiscountSet discounts, long t0 = 0);

  // Returns the log predictive density of `observation` before updating.
  double step(const Vector& regressor, double observation);

  [[nodiscard]] const DlmState& state() const { return state_; }
  [[nodiscard]] const NormalGamma& prior() const { return state_.prior; }

 private:
  DlmState state_;
  DiscountSet discounts_;
};

// Sum over t in [t_start, t_end] of log p(y_t | D_{t-1}). regressors is a
// T x p matrix aligned with `series`; initial_prior is the prior for t_start.
double log_likelihood(std::span<const double> series, const Matrix& regressors,
                      const NormalGamma& initial_prior, const DiscountSet& discounts,
                      long t_start, long t_end);

}  // namespace sgdlm::dlm
