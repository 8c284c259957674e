#pragma once

namespace weaksep {

/// Upper regularized incomplete gamma Q(a, x) = Gamma(a, x)/Gamma(a).
/// Power series for x < a+1, modified Lentz continued fraction otherwise.
/// Absolute error <= 1e-12 over the tested domain.
double regularized_gamma_q(double a, double x);

/// Lower regularized incomplete gamma P(a, x) = 1 - Q(a, x).
double regularized_gamma_p(double a, double x);

}  // namespace weaksep
