#pragma once

#include <cmath>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "errors.hpp"

namespace paneldml {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Two-sided p-value of a z statistic.
inline double two_sided_p_value(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("normal quantile needs p in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

struct Interval {
    double lower;
    double upper;
};

/// estimate +- z_{(1+level)/2} * se
inline Interval normal_interval(double estimate, double se, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
    const double z = normal_quantile(0.5 + 0.5 * level);
    return {estimate - z * se, estimate + z * se};
}

/// R's significance codes: *** < 0.001 <= ** < 0.01 <= * < 0.05 <= . < 0.1
inline std::string significance_stars(double p) {
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    if (p < 0.1) return ".";
    return " ";
}

}  // namespace paneldml
