#pragma once

#include <span>
#include <string>
#include <vector>

#include "sgdlm/core/normal_gamma.hpp"
#include "sgdlm/model/coupled_model.hpp"

namespace sgdlm::eval {

struct IntervalSpec {
  double level;  // fraction, e.g. 0.95
  double z;      // critical value z_{alpha/2}
};

// The seven levels 99, 95, 90, 80, 50, 20, 10 with their two-decimal z values.
std::vector<IntervalSpec> rounded_levels();
// The same levels with full-precision normal quantiles.
std::vector<IntervalSpec> exact_levels();
// Full-precision z for a level in (0, 1), via the inverse normal CDF.
double critical_value(double level);

struct Interval {
  double lo;
  double hi;
};

// y_hat +/- z sqrt(variance) sqrt(1 + 1/K).
Interval prediction_interval(double y_hat, double variance, int num_draws, double z);

struct CoverageTable {
  std::vector<IntervalSpec> levels;
  Matrix per_series;  // m x L, percent of days covered
  Vector aggregate;   // L, unweighted mean over series
};

// observations, forecasts and variances are T x m, aligned by row.
CoverageTable coverage(const Matrix& observations, const Matrix& forecasts,
                       const Matrix& variances, int num_draws,
                       const std::vector<IntervalSpec>& levels);

struct ErrorSummary {
  double rmse;
  double mad;
};

ErrorSummary rmse_mad(std::span<const double> observations, std::span<const double> forecasts);

// Trailing simple moving average; output has length - window + 1 entries.
std::vector<double> sma(std::span<const double> series, int window);

struct DiagnosticRow {
  std::string date;
  double ess;
  double kl;
  double kl_bound;
  bool flagged;
};

inline constexpr double kEssFlagFraction = 0.66;

// One row per day; days with ess < flag_fraction * N are flagged.
std::vector<DiagnosticRow> diagnostics_series(const std::vector<std::string>& dates,
                                              const std::vector<DayDiagnostics>& days,
                                              double flag_fraction = kEssFlagFraction);

}  // namespace sgdlm::eval
