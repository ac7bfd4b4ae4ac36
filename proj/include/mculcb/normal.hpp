#pragma once

namespace mculcb {

/// Standard normal CDF.
double normal_cdf(double z);

/// Standard normal quantile. Rational approximation refined by one Halley
/// step; |normal_cdf(result) - u| <= 1e-9. Throws DomainError unless 0 < u < 1.
double normal_inverse_cdf(double u);

}  // namespace mculcb
