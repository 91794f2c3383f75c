#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace nef {

inline double log_factorial(std::size_t n) {
    return std::lgamma(static_cast<double>(n) + 1.0);
}

// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// log Gamma(z) for complex z, Lanczos approximation (g = 7, 9 terms),
// reflection for Re z < 0.5. Accurate to ~1e-13 relative over the strips
// used here (|Im z| up to a few tens).
inline std::complex<double> log_gamma(std::complex<double> z) {
    static const double coef[9] = {
        0.99999999999980993,  676.5203681218851,    -1259.1392167224028,
        771.32342877765313,   -176.61502916214059,  12.507343278686905,
        -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
    const double pi = 3.14159265358979323846;
    if (z.real() < 0.5) {
        // log Gamma(z) = log(pi / sin(pi z)) - log Gamma(1 - z)
        return std::log(pi / std::sin(pi * z)) - log_gamma(1.0 - z);
    }
    z -= 1.0;
    std::complex<double> x = coef[0];
    for (int i = 1; i < 9; ++i) x += coef[i] / (z + static_cast<double>(i));
    std::complex<double> t = z + 7.5;
    return 0.5 * std::log(2.0 * pi) + (z + 0.5) * std::log(t) - t + std::log(x);
}

// log of sum of exp(terms): max-shifted for stability.
inline double log_sum_exp(const std::vector<double>& log_terms) {
    double m = -std::numeric_limits<double>::infinity();
    for (double t : log_terms) m = std::max(m, t);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double t : log_terms) s += std::exp(t - m);
    return m + std::log(s);
}

// Running max-shifted accumulator for sums of positive terms supplied in log
// scale. Yields log of the total.
class LogSumAccumulator {
public:
    void add(double log_term) {
        if (log_term == -std::numeric_limits<double>::infinity()) return;
        if (terms_ == 0 || log_term > max_) {
            if (terms_ > 0) sum_ = sum_ * std::exp(max_ - log_term) + 1.0;
            else sum_ = 1.0;
            max_ = log_term;
        } else {
            sum_ += std::exp(log_term - max_);
        }
        ++terms_;
    }
    double log_total() const {
        if (terms_ == 0) return -std::numeric_limits<double>::infinity();
        return max_ + std::log(sum_);
    }

private:
    double max_ = 0.0;
    double sum_ = 0.0;
    std::size_t terms_ = 0;
};

}  // namespace nef
