#include "hltmc/normal.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "hltmc/error.hpp"
#include "hltmc/numeric.hpp"

namespace hltmc {
namespace {

constexpr double kDegenerateMass = 1e-300;

void require_positive_sigma(double sigma) {
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("normal density requires sigma > 0, got " + std::to_string(sigma));
  }
}

// Acklam's rational approximation; about 1e-9 relative error before refinement.
double quantile_initial(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_log_pdf(double r, double mu, double sigma) {
  require_positive_sigma(sigma);
  const double z = (r - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - kLogSqrt2Pi;
}

double normal_pdf(double r, double mu, double sigma) { return std::exp(normal_log_pdf(r, mu, sigma)); }

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

double std_normal_sf(double z) { return 0.5 * std::erfc(z * M_SQRT1_2); }

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::invalid_argument("quantile requires p in [0,1]");
  }
  // Refine in the tail that holds p so the residual keeps its relative accuracy.
  const bool upper = p > 0.5;
  const double tail = upper ? 1.0 - p : p;
  double x = quantile_initial(tail);  // x <= 0
  const double e = std_normal_cdf(x) - tail;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return upper ? -x : x;
}

double unit_interval_mass(double mu, double sigma) {
  require_positive_sigma(sigma);
  const double a = (0.0 - mu) / sigma;
  const double b = (1.0 - mu) / sigma;
  if (a > 0.0) return std_normal_sf(a) - std_normal_sf(b);
  return std_normal_cdf(b) - std_normal_cdf(a);
}

double truncated_normal_log_pdf(double x, double mu, double sigma) {
  require_positive_sigma(sigma);
  if (x < 0.0 || x > 1.0) return kNegInf;
  const double mass = unit_interval_mass(mu, sigma);
  if (mass < kDegenerateMass) {
    throw NumericalError("truncated normal has no mass on [0,1] (mu=" + std::to_string(mu) +
                         ", sigma=" + std::to_string(sigma) + ")");
  }
  return normal_log_pdf(x, mu, sigma) - std::log(mass);
}

double truncated_normal_pdf(double x, double mu, double sigma) {
  if (x < 0.0 || x > 1.0) {
    require_positive_sigma(sigma);
    return 0.0;
  }
  return std::exp(truncated_normal_log_pdf(x, mu, sigma));
}

}  // namespace hltmc
