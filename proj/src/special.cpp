#include "weaksep/special.hpp"

#include <cmath>
#include <limits>

#include "weaksep/util.hpp"

namespace weaksep {
namespace {

constexpr int kMaxIter = 20000;
const double kEps = std::numeric_limits<double>::epsilon();

// Lower-tail power series, converges fast for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n <= kMaxIter; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper-tail continued fraction (modified Lentz), for x >= a + 1.
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0)) throw Error("regularized_gamma_q: shape a must be > 0");
  if (!(x >= 0.0)) throw Error("regularized_gamma_q: x must be >= 0");
  if (x == 0.0) return 1.0;
  double q = (x < a + 1.0) ? 1.0 - gamma_p_series(a, x) : gamma_q_cf(a, x);
  if (q < 0.0) return 0.0;
  if (q > 1.0) return 1.0;
  return q;
}

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0)) throw Error("regularized_gamma_p: shape a must be > 0");
  if (!(x >= 0.0)) throw Error("regularized_gamma_p: x must be >= 0");
  if (x == 0.0) return 0.0;
  double p = (x < a + 1.0) ? gamma_p_series(a, x) : 1.0 - gamma_q_cf(a, x);
  if (p < 0.0) return 0.0;
  if (p > 1.0) return 1.0;
  return p;
}

}  // namespace weaksep
