#pragma once

namespace mcode {

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Regularized lower incomplete gamma P(a, x).
double incomplete_gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double incomplete_gamma_q(double a, double x);

double normal_cdf(double z);
/// Upper tail 1 - Phi(z), accurate for large z.
double normal_sf(double z);

double student_t_cdf(double t, double df);
/// P(|T| >= |t|) for T ~ t(df).
double student_t_two_sided_p(double t, double df);

double chi_squared_cdf(double x, double df);
double chi_squared_sf(double x, double df);
/// Inverse of chi_squared_cdf; p in [0, 1).
double chi_squared_quantile(double p, double df);

}  // namespace mcode
