#pragma once

#include <boost/math/special_functions/erf.hpp>
#include <cmath>

namespace gsx {

inline double norm_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double norm_cdf(double x) {
    static const double inv_sqrt2 = 0.7071067811865475244;
    return 0.5 * std::erfc(-x * inv_sqrt2);
}

/// Inverse standard normal CDF; p in (0, 1). Endpoints map to +/-infinity.
inline double norm_quantile(double p) {
    static const double sqrt2 = 1.4142135623730950488;
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    return -sqrt2 * boost::math::erfc_inv(2.0 * p);
}

}  // namespace gsx
