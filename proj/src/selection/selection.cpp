#include "sgdlm/selection/selection.hpp"

#include <algorithm>
#include <cmath>
#include <span>

#include "sgdlm/core/errors.hpp"
#include "sgdlm/core/parallel.hpp"

namespace sgdlm::selection {

namespace {

void check_range(const Matrix& returns, RowRange range, const char* who) {
  if (range.first < 0 || range.last >= returns.rows() || range.last < range.first) {
    throw RangeError(std::string(who) + ": rows [" + std::to_string(range.first) + ", " +
                     std::to_string(range.last) + "] outside a panel of " +
                     std::to_string(returns.rows()) + " rows");
  }
}

// Columns (1, y_sp(i)) for every row of the panel.
Matrix regressors_for(const Matrix& returns, const std::vector<int>& parents) {
  Matrix f(returns.rows(), static_cast<Eigen::Index>(parents.size()) + 1);
  f.col(0).setOnes();
  for (std::size_t j = 0; j < parents.size(); ++j) {
    f.col(static_cast<Eigen::Index>(j) + 1) = returns.col(parents[j]);
  }
  return f;
}

std::span<const double> column(const Matrix& returns, int i) {
  return {returns.col(i).data(), static_cast<std::size_t>(returns.rows())};
}

}  // namespace

NormalGamma PriorSpec::build(Eigen::Index dim) const {
  return make_block_prior(dim, r0, c0, r_phi, r_gamma);
}

NormalGammaSet PriorSpec::build_set(const ParentStructure& structure) const {
  return NormalGammaSet(static_cast<std::size_t>(structure.m), build(structure.state_dim()));
}

ParentReport rank_candidates(int series, const std::vector<int>& candidates,
                             const Vector& gamma_means, int k) {
  if (gamma_means.size() != static_cast<Eigen::Index>(candidates.size())) {
    throw DimensionError("rank_candidates: one coefficient per candidate required");
  }
  if (k < 0 || k > static_cast<int>(candidates.size())) {
    throw DimensionError("rank_candidates: k exceeds the number of candidates");
  }
  ParentReport report;
  report.series = series;
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    report.ranked.push_back({candidates[j], std::abs(gamma_means[static_cast<Eigen::Index>(j)])});
  }
  std::sort(report.ranked.begin(), report.ranked.end(),
            [](const CandidateEffect& a, const CandidateEffect& b) {
              if (a.effect_size != b.effect_size) return a.effect_size > b.effect_size;
              return a.candidate < b.candidate;
            });
  for (int j = 0; j < k; ++j) report.chosen.push_back(report.ranked[static_cast<std::size_t>(j)].candidate);
  return report;
}

std::vector<ParentReport> select_parents(const Matrix& returns, RowRange range, int k,
                                         const PriorSpec& prior,
                                         const dlm::DiscountSet& discounts) {
  const auto m = static_cast<int>(returns.cols());
  if (range.size() < 2) throw RangeError("select_parents: need at least two rows");
  check_range(returns, range, "select_parents");
  if (k < 0 || k > m - 1) throw DimensionError("select_parents: k must be in [0, m - 1]");
  discounts.validate();

  std::vector<ParentReport> reports(static_cast<std::size_t>(m));
  parallel_for(m, [&](int i) {
    std::vector<int> candidates;
    for (int j = 0; j < m; ++j) {
      if (j != i) candidates.push_back(j);
    }
    const Matrix f = regressors_for(returns, candidates);
    dlm::Filter filter(prior.build(m), discounts, range.first);
    Vector row(m);
    for (long t = range.first; t <= range.last; ++t) {
      row = f.row(t).transpose();
      filter.step(row, returns(t, i));
    }
    const Vector& mean = filter.state().posterior->location;
    reports[static_cast<std::size_t>(i)] = rank_candidates(i, candidates, mean.tail(m - 1), k);
  });
  return reports;
}

ParentStructure structure_from(const std::vector<ParentReport>& reports, int k) {
  ParentStructure s;
  s.m = static_cast<int>(reports.size());
  s.k = k;
  for (const auto& r : reports) {
    if (static_cast<int>(r.chosen.size()) < k) {
      throw DimensionError("structure_from: report has fewer than k chosen parents");
    }
    s.parents.emplace_back(r.chosen.begin(), r.chosen.begin() + k);
  }
  s.validate();
  return s;
}

std::string factor_name(Factor factor) {
  switch (factor) {
    case Factor::kBeta: return "beta";
    case Factor::kDeltaPhi: return "delta_phi";
    case Factor::kDeltaGamma: return "delta_gamma";
  }
  return "unknown";
}

Factor parse_factor(const std::string& name) {
  if (name == "beta") return Factor::kBeta;
  if (name == "delta_phi") return Factor::kDeltaPhi;
  if (name == "delta_gamma") return Factor::kDeltaGamma;
  throw ConfigError("unknown discount factor '" + name + "'");
}

double& factor_ref(dlm::DiscountSet& set, Factor factor) {
  switch (factor) {
    case Factor::kBeta: return set.beta;
    case Factor::kDeltaPhi: return set.delta_phi;
    case Factor::kDeltaGamma: return set.delta_gamma;
  }
  return set.beta;
}

void DiscountGrid::validate() const {
  if (values.empty()) throw SelectionError("DiscountGrid: no candidate values");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0 && values[i] <= 1.0)) {
      throw SelectionError("DiscountGrid: candidate outside (0, 1]");
    }
    if (i > 0 && !(values[i] > values[i - 1])) {
      throw SelectionError("DiscountGrid: candidates must be strictly ascending");
    }
  }
  held_fixed.validate();
}

std::vector<double> default_grid(Factor factor) {
  if (factor == Factor::kDeltaGamma) return {0.859, 0.894, 0.929, 0.964, 0.999};
  std::vector<double> grid;
  // 0.850, 0.855, ..., 0.995, then 0.999.
  for (int i = 0; i <= 29; ++i) grid.push_back((850.0 + 5.0 * i) / 1000.0);
  grid.push_back(0.999);
  return grid;
}

DiscountChoice choose_discount(const DiscountGrid& grid,
                               const std::vector<std::vector<double>>& log_likelihoods) {
  grid.validate();
  if (log_likelihoods.empty()) throw SelectionError("choose_discount: no series");
  DiscountChoice choice;
  choice.factor = grid.factor;
  for (std::size_t i = 0; i < log_likelihoods.size(); ++i) {
    const auto& row = log_likelihoods[i];
    if (row.size() != grid.values.size()) {
      throw SelectionError("choose_discount: row " + std::to_string(i) +
                           " does not match the grid size");
    }
    std::size_t best = row.size();
    for (std::size_t g = 0; g < row.size(); ++g) {
      if (!std::isfinite(row[g])) continue;
      if (best == row.size() || row[g] > row[best]) best = g;
    }
    if (best == row.size()) {
      throw SelectionError("choose_discount: series " + std::to_string(i) +
                           " has no finite log-likelihood on the " + factor_name(grid.factor) +
                           " grid");
    }
    choice.per_series.push_back(grid.values[best]);
  }
  double total = 0.0;
  for (double v : choice.per_series) total += v;
  choice.mean = total / static_cast<double>(choice.per_series.size());
  return choice;
}

std::vector<std::vector<double>> grid_log_likelihoods(const Matrix& returns,
                                                      const DiscountGrid& grid,
                                                      const ParentStructure& structure,
                                                      const PriorSpec& prior, RowRange range) {
  grid.validate();
  structure.validate();
  if (returns.cols() != structure.m) throw DimensionError("grid_log_likelihoods: m mismatch");
  check_range(returns, range, "grid_log_likelihoods");
  const NormalGamma initial = prior.build(structure.state_dim());
  const auto m = structure.m;
  const auto points = grid.values.size();
  std::vector<std::vector<double>> table(static_cast<std::size_t>(m), std::vector<double>(points));

  parallel_for(m, [&](int i) {
    const Matrix f = regressors_for(returns, structure.parents[static_cast<std::size_t>(i)]);
    for (std::size_t g = 0; g < points; ++g) {
      dlm::DiscountSet d = grid.held_fixed;
      factor_ref(d, grid.factor) = grid.values[g];
      double value;
      try {
        value = dlm::log_likelihood(column(returns, i), f, initial, d, range.first, range.last);
      } catch (const NumericalDegeneracyError&) {
        value = std::nan("");
      }
      table[static_cast<std::size_t>(i)][g] = value;
    }
  });
  return table;
}

DiscountChoice select_discount(const Matrix& returns, const DiscountGrid& grid,
                               const ParentStructure& structure, const PriorSpec& prior,
                               RowRange range) {
  return choose_discount(grid, grid_log_likelihoods(returns, grid, structure, prior, range));
}

SweepResult select_discounts(const Matrix& returns, const ParentStructure& structure,
                             const PriorSpec& prior, RowRange range, const SweepOptions& options) {
  SweepResult result;
  result.discounts = options.provisional;
  result.discounts.validate();
  for (int it = 0; it < options.iterations; ++it) {
    for (Factor factor : options.order) {
      DiscountGrid grid;
      grid.factor = factor;
      grid.held_fixed = result.discounts;
      switch (factor) {
        case Factor::kBeta: grid.values = options.beta_grid; break;
        case Factor::kDeltaPhi: grid.values = options.delta_phi_grid; break;
        case Factor::kDeltaGamma: grid.values = options.delta_gamma_grid; break;
      }
      auto choice = select_discount(returns, grid, structure, prior, range);
      factor_ref(result.discounts, factor) = choice.mean;
      result.choices.push_back(std::move(choice));
    }
  }
  return result;
}

Phase2Result run_phase2(const Matrix& returns, const ParentStructure& structure,
                        const dlm::DiscountSet& discounts, const NormalGammaSet& initial_priors,
                        int sample_size, StreamKey key, RowRange range, double ess_floor) {
  Phase2Result result;
  result.priors = initial_priors;
  if (range.empty()) return result;
  check_range(returns, range, "run_phase2");
  if (returns.cols() != structure.m) throw DimensionError("run_phase2: m mismatch");
  const StepOptions options{.forecast = false, .ess_floor = ess_floor};
  for (long t = range.first; t <= range.last; ++t) {
    const Vector y = returns.row(t).transpose();
    auto day = step_day(result.priors, y, structure, discounts, 0, sample_size,
                        key.derive(static_cast<std::uint64_t>(t)), options);
    result.priors = std::move(day.next_priors);
    result.diagnostics.push_back(day.diagnostics);
  }
  return result;
}

}  // namespace sgdlm::selection
