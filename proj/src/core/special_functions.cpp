#include "sgdlm/core/special_functions.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "sgdlm/core/errors.hpp"

namespace sgdlm {

double digamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("digamma: argument must be positive and finite, got " + std::to_string(x));
  }
  double shift = 0.0;
  while (x < 6.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  // Bernoulli terms B_2k / (2k) through k = 7; the next term is below 2e-13 at x = 6.
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv2 * (1.0 / 12.0 -
               inv2 * (1.0 / 120.0 -
                       inv2 * (1.0 / 252.0 -
                               inv2 * (1.0 / 240.0 -
                                       inv2 * (1.0 / 132.0 -
                                               inv2 * (691.0 / 32760.0 - inv2 * (1.0 / 12.0)))))));
  return shift + std::log(x) - 0.5 * inv - series;
}

double student_t_log_density(double y, double dof, double mode, double scale) {
  if (!(scale > 0.0)) throw DomainError("student_t_log_density: scale must be positive");
  if (!(dof > 0.0)) throw DomainError("student_t_log_density: dof must be positive");
  const double z = (y - mode) * (y - mode) / (dof * scale);
  // lgamma differences cancel badly at large dof; the ratio form does not.
  return -std::log(boost::math::tgamma_delta_ratio(0.5 * dof, 0.5)) -
         0.5 * std::log(dof * std::numbers::pi * scale) - 0.5 * (dof + 1.0) * std::log1p(z);
}

double normal_log_density(double y, double mean, double variance) {
  if (!(variance > 0.0)) throw DomainError("normal_log_density: variance must be positive");
  const double e = y - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + e * e / variance);
}

double mfvb_dof_residual(double n, double expected_lambda, double expected_log_lambda,
                         double p_minus_d) {
  return std::log(n + p_minus_d) - digamma(0.5 * n) - p_minus_d / n -
         std::log(2.0 * expected_lambda) + expected_log_lambda;
}

double solve_mfvb_dof(double expected_lambda, double expected_log_lambda, double p_minus_d) {
  if (!(expected_lambda > 0.0) || !std::isfinite(expected_lambda)) {
    throw DomainError("solve_mfvb_dof: expected_lambda must be positive");
  }
  constexpr double kFloor = 1e-6;
  constexpr double kCeiling = 1e8;
  auto f = [&](double n) {
    return mfvb_dof_residual(n, expected_lambda, expected_log_lambda, p_minus_d);
  };
  // ln(n + pd) needs n > -pd.
  const double lower_limit = std::max(kFloor, -p_minus_d * (1.0 + 1e-12) + kFloor);

  double lo = std::max(0.1, lower_limit);
  double hi = std::max(1000.0, 2.0 * lo);
  double f_lo = f(lo);
  double f_hi = f(hi);
  while (f_lo * f_hi > 0.0) {
    bool moved = false;
    if (lo > lower_limit) {
      lo = std::max(lower_limit, lo * 0.1);
      f_lo = f(lo);
      moved = true;
    }
    if (f_lo * f_hi > 0.0 && hi < kCeiling) {
      hi = std::min(kCeiling, hi * 10.0);
      f_hi = f(hi);
      moved = true;
    }
    if (!moved) break;
  }
  if (!std::isfinite(f_lo) || !std::isfinite(f_hi) || f_lo * f_hi > 0.0) {
    throw NoRootError("solve_mfvb_dof: no sign change on [1e-6, 1e8] (E[lambda]=" +
                      std::to_string(expected_lambda) +
                      ", E[ln lambda]=" + std::to_string(expected_log_lambda) + ")");
  }
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;

  while (true) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= 1e-12 * std::max(1.0, mid) || mid <= lo || mid >= hi) return mid;
    const double f_mid = f(mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid > 0.0) == (f_lo > 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
}

}  // namespace sgdlm
