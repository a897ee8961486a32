// Statistical distribution functions: incomplete beta, F-distribution tail, Student t quantiles.
#pragma once

namespace dwiplan {

// Natural log of the gamma function, x > 0.
double log_gamma(double x);

// Regularized incomplete beta function I_x(a, b), a > 0, b > 0, x in [0, 1].
// Continued-fraction evaluation, |error| < 1e-10 over the tested domain.
double incomplete_beta(double a, double b, double x);

// Survival function P(F >= f) of the F distribution with (d1, d2) degrees of freedom.
double f_survival(double d1, double d2, double f);

// Quantile of the Student t distribution with df degrees of freedom, 0 < p < 1.
double t_quantile(double p, double df);

} // namespace dwiplan
