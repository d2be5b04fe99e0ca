#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace nsp {

inline constexpr double kLog2Pi = 1.8378770664093454836;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)), tolerating -inf on either side.
inline double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    double m = std::max(a, b);
    return m + std::log1p(std::exp(std::min(a, b) - m));
}

inline double log_sum_exp(std::span<const double> v) {
    if (v.empty()) return kNegInf;
    double m = *std::max_element(v.begin(), v.end());
    if (m == kNegInf) return kNegInf;
    if (!std::isfinite(m)) return m;  // +inf or nan propagates
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

inline double log_sum_exp(const std::vector<double>& v) {
    return log_sum_exp(std::span<const double>(v));
}

inline double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

inline double normal_logpdf(double x, double mean, double var) {
    double d = x - mean;
    return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

// P(X in [lo, hi]) for X ~ N(mean, var).
inline double normal_box_mass(double lo, double hi, double mean, double var) {
    double sd = std::sqrt(var);
    return normal_cdf((hi - mean) / sd) - normal_cdf((lo - mean) / sd);
}

inline double log_poisson_pmf(long k, double mean) {
    if (k < 0) return kNegInf;
    if (mean == 0.0) return k == 0 ? 0.0 : kNegInf;
    return -mean + static_cast<double>(k) * std::log(mean) - std::lgamma(static_cast<double>(k) + 1.0);
}

// NB(k | r, p): pmf = Gamma(k+r)/(k! Gamma(r)) (1-p)^r p^k, p the per-count probability.
inline double log_neg_binomial_pmf(long k, double r, double p) {
    if (k < 0) return kNegInf;
    if (r == 0.0) return k == 0 ? 0.0 : kNegInf;
    return std::lgamma(static_cast<double>(k) + r) - std::lgamma(r) -
           std::lgamma(static_cast<double>(k) + 1.0) + r * std::log1p(-p) +
           static_cast<double>(k) * std::log(p);
}

inline double log_gamma_pdf(double x, double shape, double rate) {
    if (x <= 0.0) return kNegInf;
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

}  // namespace nsp
