#pragma once

namespace duq {

/// Inverse CDF of the standard normal distribution.
/// Rational approximation (Acklam coefficient set, |rel err| < 1.2e-9)
/// sharpened by one Halley step through erfc, which brings it to within a
/// few ulp over the full open interval. Throws DomainError unless 0 < p < 1.
double normal_quantile(double p);

/// CDF of the standard normal distribution.
double normal_cdf(double x);

}  // namespace duq
