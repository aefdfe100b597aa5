#pragma once

#include <string>
#include <vector>

#include "sgdlm/core/normal_gamma.hpp"
#include "sgdlm/core/random.hpp"
#include "sgdlm/dlm/filter.hpp"
#include "sgdlm/model/coupled_model.hpp"
#include "sgdlm/model/parent_structure.hpp"

namespace sgdlm::selection {

// Inclusive range of panel rows.
struct RowRange {
  long first = 0;
  long last = -1;

  [[nodiscard]] long size() const { return last - first + 1; }
  [[nodiscard]] bool empty() const { return last < first; }
};

// Initial prior shared by every series: a = 0, R = diag(r_phi, r_gamma, ...),
// dof r0 and variance estimate c0.
struct PriorSpec {
  double r0 = 5.0;
  double c0 = 0.001;
  double r_phi = 0.0001;
  double r_gamma = 0.01;

  [[nodiscard]] NormalGamma build(Eigen::Index dim) const;
  [[nodiscard]] NormalGammaSet build_set(const ParentStructure& structure) const;
};

struct CandidateEffect {
  int candidate;
  double effect_size;  // |posterior mean of gamma|
};

struct ParentReport {
  int series = 0;
  std::vector<CandidateEffect> ranked;  // descending effect size, ties by lower index
  std::vector<int> chosen;              // top k of `ranked`
};

// Ranks candidates by |gamma_means| and keeps the top k.
ParentReport rank_candidates(int series, const std::vector<int>& candidates,
                             const Vector& gamma_means, int k);

// Runs the decoupled filter for every series with all other series as
// parents over `range` and picks the k largest posterior coupling means at
// the final day. `returns` is T x m.
std::vector<ParentReport> select_parents(const Matrix& returns, RowRange range, int k,
                                         const PriorSpec& prior, const dlm::DiscountSet& discounts);

ParentStructure structure_from(const std::vector<ParentReport>& reports, int k);

enum class Factor { kBeta, kDeltaPhi, kDeltaGamma };

std::string factor_name(Factor factor);
Factor parse_factor(const std::string& name);
double& factor_ref(dlm::DiscountSet& set, Factor factor);

struct DiscountGrid {
  Factor factor = Factor::kDeltaGamma;
  std::vector<double> values;   // ascending, each in (0, 1]
  dlm::DiscountSet held_fixed;  // values of the two factors not being searched

  void validate() const;
};

std::vector<double> default_grid(Factor factor);

struct DiscountChoice {
  Factor factor = Factor::kDeltaGamma;
  std::vector<double> per_series;  // argmax grid value per series
  double mean = 0.0;               // applied uniformly to every series
};

// Picks per-series argmaxes from a series x grid table of log-likelihoods.
// Non-finite entries are skipped; ties go to the earlier grid value.
DiscountChoice choose_discount(const DiscountGrid& grid,
                               const std::vector<std::vector<double>>& log_likelihoods);

// Series x grid table of decoupled predictive log-likelihoods over `range`,
// each filter started at prior.build(k + 1) on range.first.
std::vector<std::vector<double>> grid_log_likelihoods(const Matrix& returns,
                                                      const DiscountGrid& grid,
                                                      const ParentStructure& structure,
                                                      const PriorSpec& prior, RowRange range);

DiscountChoice select_discount(const Matrix& returns, const DiscountGrid& grid,
                               const ParentStructure& structure, const PriorSpec& prior,
                               RowRange range);

struct SweepOptions {
  std::vector<Factor> order{Factor::kDeltaGamma, Factor::kDeltaPhi, Factor::kBeta};
  std::vector<double> beta_grid = default_grid(Factor::kBeta);
  std::vector<double> delta_phi_grid = default_grid(Factor::kDeltaPhi);
  std::vector<double> delta_gamma_grid = default_grid(Factor::kDeltaGamma);
  dlm::DiscountSet provisional{};
  int iterations = 1;
};

struct SweepResult {
  dlm::DiscountSet discounts;
  std::vector<DiscountChoice> choices;  // in search order
};

// Coordinate-wise search: each factor in turn, the others held at their
// current values.
SweepResult select_discounts(const Matrix& returns, const ParentStructure& structure,
                             const PriorSpec& prior, RowRange range, const SweepOptions& options);

struct Phase2Result {
  NormalGammaSet priors;  // priors for the day after range.last
  std::vector<DayDiagnostics> diagnostics;
};

// Re-runs the coupled cycle without forecasting over `range`. Day t draws
// its importance sample from key.derive(t).
Phase2Result run_phase2(const Matrix& returns, const ParentStructure& structure,
                        const dlm::DiscountSet& discounts, const NormalGammaSet& initial_priors,
                        int sample_size, StreamKey key, RowRange range,
                        double ess_floor = kDefaultEssFloor);

}  // namespace sgdlm::selection
