#include "sgdlm/eval/eval.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "sgdlm/core/errors.hpp"

namespace sgdlm::eval {

std::vector<IntervalSpec> rounded_levels() {
  return {{0.99, 2.58}, {0.95, 1.96}, {0.90, 1.64}, {0.80, 1.28},
          {0.50, 0.67}, {0.20, 0.25}, {0.10, 0.13}};
}

double critical_value(double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("critical_value: level must be in (0, 1)");
  const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, 0.5 + level / 2.0);
}

std::vector<IntervalSpec> exact_levels() {
  auto levels = rounded_levels();
  for (auto& l : levels) l.z = critical_value(l.level);
  return levels;
}

Interval prediction_interval(double y_hat, double variance, int num_draws, double z) {
  if (!(variance > 0.0)) throw DomainError("prediction_interval: variance must be positive");
  if (num_draws < 1) throw DomainError("prediction_interval: K must be positive");
  const double half = z * std::sqrt(variance) * std::sqrt(1.0 + 1.0 / num_draws);
  return {y_hat - half, y_hat + half};
}

CoverageTable coverage(const Matrix& observations, const Matrix& forecasts,
                       const Matrix& variances, int num_draws,
                       const std::vector<IntervalSpec>& levels) {
  if (observations.rows() != forecasts.rows() || observations.cols() != forecasts.cols() ||
      observations.rows() != variances.rows() || observations.cols() != variances.cols()) {
    throw AlignmentError("coverage: observations, forecasts and variances must share a shape");
  }
  if (observations.rows() == 0) throw AlignmentError("coverage: no days");
  for (const auto& l : levels) {
    if (!(l.level > 0.0 && l.level < 1.0) || !(l.z > 0.0)) {
      throw DomainError("coverage: invalid interval spec");
    }
  }
  const auto days = observations.rows();
  const auto m = observations.cols();
  const auto num_levels = static_cast<Eigen::Index>(levels.size());
  CoverageTable table{levels, Matrix::Zero(m, num_levels), Vector::Zero(num_levels)};
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index l = 0; l < num_levels; ++l) {
      long hits = 0;
      for (Eigen::Index t = 0; t < days; ++t) {
        const auto iv = prediction_interval(forecasts(t, i), variances(t, i), num_draws,
                                            levels[static_cast<std::size_t>(l)].z);
        const double y = observations(t, i);
        if (iv.lo <= y && y <= iv.hi) ++hits;
      }
      table.per_series(i, l) = 100.0 * static_cast<double>(hits) / static_cast<double>(days);
    }
  }
  table.aggregate = table.per_series.colwise().mean().transpose();
  return table;
}

ErrorSummary rmse_mad(std::span<const double> observations, std::span<const double> forecasts) {
  if (observations.size() != forecasts.size()) throw AlignmentError("rmse_mad: length mismatch");
  if (observations.empty()) throw DomainError("rmse_mad: empty input");
  double sq = 0.0;
  double abs_sum = 0.0;
  for (std::size_t t = 0; t < observations.size(); ++t) {
    const double e = observations[t] - forecasts[t];
    sq += e * e;
    abs_sum += std::abs(e);
  }
  const auto n = static_cast<double>(observations.size());
  return {std::sqrt(sq / n), abs_sum / n};
}

std::vector<double> sma(std::span<const double> series, int window) {
  if (window < 1 || static_cast<std::size_t>(window) > series.size()) {
    throw DomainError("sma: window must be in [1, length]");
  }
  std::vector<double> out;
  out.reserve(series.size() - static_cast<std::size_t>(window) + 1);
  // Each window is summed directly; a running sum drifts over long series.
  for (std::size_t t = static_cast<std::size_t>(window) - 1; t < series.size(); ++t) {
    double total = 0.0;
    for (std::size_t j = t + 1 - static_cast<std::size_t>(window); j <= t; ++j) total += series[j];
    out.push_back(total / window);
  }
  return out;
}

std::vector<DiagnosticRow> diagnostics_series(const std::vector<std::string>& dates,
                                              const std::vector<DayDiagnostics>& days,
                                              double flag_fraction) {
  if (days.empty()) throw DomainError("diagnostics_series: no days");
  if (dates.size() != days.size()) throw AlignmentError("diagnostics_series: one date per day");
  std::vector<DiagnosticRow> rows;
  rows.reserve(days.size());
  for (std::size_t t = 0; t < days.size(); ++t) {
    const auto& d = days[t];
    const double threshold = flag_fraction * static_cast<double>(d.sample_size);
    rows.push_back({dates[t], d.ess, d.kl, d.kl_bound, d.ess < threshold});
  }
  return rows;
}

}  // namespace sgdlm::eval
