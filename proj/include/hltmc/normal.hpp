#pragma once

namespace hltmc {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

/// Density of N(mu, sigma^2) at r. Throws std::invalid_argument if sigma <= 0.
double normal_pdf(double r, double mu, double sigma);
double normal_log_pdf(double r, double mu, double sigma);

/// Standard normal CDF and its upper tail, both accurate far into the tails.
double std_normal_cdf(double z);
double std_normal_sf(double z);

/// Inverse of the standard normal CDF for p in (0,1). Relative error is at the
/// level of double rounding (rational start plus one Halley step).
double std_normal_quantile(double p);

/// Mass that N(mu, sigma^2) puts on [0,1].
double unit_interval_mass(double mu, double sigma);

/// Density of the normal truncated to [0,1]; zero outside the interval.
/// Throws NumericalError when the mass on [0,1] is below 1e-300.
double truncated_normal_pdf(double x, double mu, double sigma);
double truncated_normal_log_pdf(double x, double mu, double sigma);

}  // namespace hltmc
