#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace hltmc {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

inline double log_sum_exp(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf || !std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

// log((1/n) * sum exp(x)); -inf when every term is -inf.
inline double log_mean_exp(std::span<const double> xs) {
  if (xs.empty()) return kNegInf;
  const double lse = log_sum_exp(xs);
  if (lse == kNegInf) return lse;
  return lse - std::log(static_cast<double>(xs.size()));
}

}  // namespace hltmc
