#pragma once

#include <vector>

#include "sgdlm/core/normal_gamma.hpp"
#include "sgdlm/core/random.hpp"
#include "sgdlm/dlm/filter.hpp"
#include "sgdlm/model/linear_algebra.hpp"
#include "sgdlm/model/parent_structure.hpp"

namespace sgdlm {

using NormalGammaSet = std::vector<NormalGamma>;

struct JointDraw {
  std::vector<StateDraw> series;
  SparseMatrix gamma;
};

// Draws of theta and lambda for one series across the whole sample, stored
// column-per-draw so the per-series moment sums stay contiguous.
struct SeriesSample {
  Matrix theta;   // p x N
  Vector lambda;  // N
};

struct WeightedPosterior {
  std::vector<SeriesSample> series;
  Vector weights;  // N, nonnegative, sums to 1

  [[nodiscard]] Eigen::Index size() const { return weights.size(); }
  [[nodiscard]] JointDraw draw(Eigen::Index n, const ParentStructure& structure) const;
  void validate() const;
};

struct DayDiagnostics {
  double ess = 0.0;
  double kl = 0.0;
  double kl_bound = 0.0;
  Eigen::Index sample_size = 0;
};

struct ForecastSummary {
  Vector y_hat;       // MC mean of (I - Gamma)^{-1} phi
  Matrix covariance;  // mean of A Lambda^{-1} A^T plus the spread of A phi
  Matrix draws;       // K x m simulated returns
  Eigen::Index singular_draws = 0;
};

// Gamma with gamma[i, sp(i)[j]] = draws[i].theta[j + 1].
SparseMatrix assemble_gamma(const std::vector<StateDraw>& draws, const ParentStructure& structure);

// Normalizes raw importance weights in place and returns ESS = 1 / sum w^2
// and KL = sum w ln(N w), both clamped to their bounds [1, N] and [0, ln N]
// against rounding. Throws DegenerateRecouplingError if every weight is zero.
DayDiagnostics normalize_weights(Vector& weights);

// Joint conditional log density of y given a joint draw, in factorized form:
// ln|det(I - Gamma)| + sum_i ln N(y_i | phi_i + sum_j gamma_ij y_j, 1 / lambda_i).
double factorized_log_density(const Vector& y, const std::vector<StateDraw>& draws,
                              const ParentStructure& structure);

// Regressor (1, y_sp(i)) for series i.
Vector regressor_for(const Vector& y, const ParentStructure& structure, int series);

ForecastSummary forecast_day(const NormalGammaSet& priors, const ParentStructure& structure,
                             int num_draws, StreamKey key);

NormalGammaSet naive_update(const NormalGammaSet& priors, const Vector& observations,
                            const ParentStructure& structure);

struct RecoupleResult {
  WeightedPosterior posterior;
  DayDiagnostics diagnostics;
};

RecoupleResult recouple(const NormalGammaSet& naive_posteriors, const ParentStructure& structure,
                        int sample_size, StreamKey key);

inline constexpr double kDefaultEssFloor = 10.0;

NormalGammaSet decouple(const WeightedPosterior& posterior, const ParentStructure& structure,
                        double ess_floor = kDefaultEssFloor);

struct StepOptions {
  bool forecast = true;
  double ess_floor = kDefaultEssFloor;
};

struct DayResult {
  NormalGammaSet next_priors;
  NormalGammaSet posteriors;  // decoupled time-t posteriors
  ForecastSummary forecast;   // empty when StepOptions::forecast is false
  DayDiagnostics diagnostics;
};

// One full cycle: forecast, naive update, recouple, decouple, block evolve.
DayResult step_day(const NormalGammaSet& priors, const Vector& observations,
                   const ParentStructure& structure, const dlm::DiscountSet& discounts,
                   int num_forecast_draws, int sample_size, StreamKey key,
                   const StepOptions& options = {});

}  // namespace sgdlm
