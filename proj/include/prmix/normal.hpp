#pragma once

#include <numbers>

namespace prmix {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

double normal_pdf(double x, double mean = 0.0, double sd = 1.0);
double normal_log_pdf(double x, double mean = 0.0, double sd = 1.0);
double normal_cdf(double x);

/// Inverse of the standard normal CDF (Wichura's AS 241, relative error
/// about 1e-16).  Returns -inf / +inf at p = 0 / 1 and NaN outside [0, 1].
double normal_quantile(double p);

}  // namespace prmix
