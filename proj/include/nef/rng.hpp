#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace nef {

// Counter-based generator (splitmix64 update). A stream is keyed by (seed,
// hi, lo); draws depend only on the key and how many values were consumed,
// so every (seed, cell) pair reproduces bitwise across runs and thread
// schedules.
inline std::uint64_t splitmix_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t hi = 0, std::uint64_t lo = 0) {
        std::uint64_t k = splitmix_mix(seed + 0x9E3779B97F4A7C15ULL);
        k = splitmix_mix(k ^ (hi + 0xD1B54A32D192ED03ULL));
        k = splitmix_mix(k ^ (lo + 0x8CB92BA72F3D8DD7ULL));
        state_ = k;
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return splitmix_mix(state_);
    }

    // Uniform on (0, 1), endpoints excluded.
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53; }

    double exponential(double rate = 1.0) { return -std::log(uniform()) / rate; }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.28318530717958647692 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Sequential inversion below mean 30, halving recursion above (sum of two
    // independent Poissons with half the mean).
    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean > 30.0) return poisson(0.5 * mean) + poisson(0.5 * mean);
        double p = std::exp(-mean);
        double cdf = p;
        double u = uniform();
        std::uint64_t n = 0;
        while (u > cdf && n < 2000) {
            ++n;
            p *= mean / static_cast<double>(n);
            cdf += p;
        }
        return n;
    }

    std::uint64_t binomial(std::uint64_t m, double p) {
        std::uint64_t s = 0;
        for (std::uint64_t i = 0; i < m; ++i)
            if (uniform() < p) ++s;
        return s;
    }

    // Failure count with pmf C(m+n-1, n) q^n (1-q)^m, 0 < q < 1.
    std::uint64_t negative_binomial(double m, double q) {
        double p = std::pow(1.0 - q, m);
        double cdf = p;
        double u = uniform();
        std::uint64_t n = 0;
        while (u > cdf && n < 4000000) {
            p *= q * (m + static_cast<double>(n)) / (static_cast<double>(n) + 1.0);
            ++n;
            cdf += p;
        }
        return n;
    }

    // Marsaglia-Tsang; shape < 1 handled by the boost u^{1/shape}.
    double gamma(double shape, double rate = 1.0) {
        if (shape < 1.0) {
            double u = uniform();
            return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
        }
    }

    // Inversion over an explicit pmf table (weights need not be normalized).
    std::size_t discrete(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u <= acc) return i;
        }
        return weights.size() - 1;
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace nef
