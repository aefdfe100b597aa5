#pragma once

namespace sgdlm {

// Digamma function psi(x) for x > 0, accurate to ~1e-12 absolute on
// [1e-3, 1e6]. Uses upward recurrence to x >= 6 followed by the asymptotic
// expansion.
double digamma(double x);

// Log density of a Student-t with `dof` degrees of freedom, location `mode`
// and squared-scale `scale`. The variance is scale * dof / (dof - 2) for
// dof > 2.
double student_t_log_density(double y, double dof, double mode, double scale);

// Log density of N(mean, variance) at y.
double normal_log_density(double y, double mean, double variance);

// Solves for the MFVB degrees of freedom n > 0 in
//
//   ln(n + pd) - psi(n / 2) - pd / n - ln(2 E[lambda]) + E[ln lambda] = 0,
//
// with pd = p - d. Brackets from [0.1, 1000] outward within [1e-6, 1e8] and
// bisects. Throws NoRootError when no sign change exists, which happens when
// the weighted precisions carry no spread (E[ln lambda] ~ ln E[lambda]).
double solve_mfvb_dof(double expected_lambda, double expected_log_lambda, double p_minus_d);

// Residual of the equation above; exposed for tests.
double mfvb_dof_residual(double n, double expected_lambda, double expected_log_lambda,
                         double p_minus_d);

}  // namespace sgdlm
