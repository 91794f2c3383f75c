#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "quadrature.hpp"
#include "rng.hpp"
#include "special.hpp"

namespace nef {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Atom weights on {0, 1, 2, ...}; index is the support point. The vector is
// the truncation: registration is responsible for picking a length whose
// neglected tail is below 1e-14 of the tilted sums at every probed theta.
struct AtomBasis {
    std::vector<double> weights;
};

// Density on (lo, hi). left_power < 0 flags an integrable algebraic
// singularity density ~ C (x-lo)^{left_power} at a finite left endpoint.
struct DensityBasis {
    std::function<double(double)> pdf;
    double lo = 0.0;
    double hi = kInf;
    double left_power = 0.0;
};

struct Cumulants {
    double kappa;
    double mean;
    double variance;
};

// One-parameter natural exponential family: basis measure plus the open
// parameter interval Theta containing 0. F_theta(dx) = e^{theta x}/L(theta) beta(dx).
class Nef {
public:
    using ContinuousSampler = std::function<double(RngStream&, double theta)>;

    Nef(std::string label, AtomBasis basis, double theta_lo, double theta_hi)
        : label_(std::move(label)),
          atomic_(true),
          atoms_(std::move(basis)),
          theta_lo_(theta_lo),
          theta_hi_(theta_hi) {
        validate_interval();
        std::size_t positive = 0;
        for (double w : atoms_.weights) {
            if (w < 0.0) throw Error(label_ + ": negative atom weight");
            if (w > 0.0) ++positive;
        }
        if (positive < 2) throw Error(label_ + ": basis concentrated on fewer than two points");
        log_atoms_.resize(atoms_.weights.size());
        for (std::size_t n = 0; n < atoms_.weights.size(); ++n)
            log_atoms_[n] = atoms_.weights[n] > 0.0 ? std::log(atoms_.weights[n])
                                                    : -kInf;
    }

    Nef(std::string label, DensityBasis basis, double theta_lo, double theta_hi)
        : label_(std::move(label)),
          atomic_(false),
          density_(std::move(basis)),
          theta_lo_(theta_lo),
          theta_hi_(theta_hi) {
        validate_interval();
    }

    const std::string& label() const { return label_; }
    bool is_atomic() const { return atomic_; }
    const std::vector<double>& atoms() const { return atoms_.weights; }
    const DensityBasis& density() const { return density_; }
    std::pair<double, double> theta_interval() const { return {theta_lo_, theta_hi_}; }

    void set_sampler(ContinuousSampler s) { sampler_ = std::move(s); }
    bool has_sampler() const { return atomic_ || static_cast<bool>(sampler_); }

    double total_mass() const {
        if (atomic_) {
            double s = 0.0;
            for (double w : atoms_.weights) s += w;
            return s;
        }
        return integrate_support([this](double x) { return density_.pdf(x); }, 1e-11);
    }

    double laplace(double theta) const {
        check_theta(theta);
        return std::exp(log_laplace(theta));
    }

    double log_laplace(double theta) const {
        check_theta(theta);
        if (atomic_) {
            LogSumAccumulator acc;
            for (std::size_t n = 0; n < log_atoms_.size(); ++n)
                if (log_atoms_[n] > -kInf)
                    acc.add(log_atoms_[n] + static_cast<double>(n) * theta);
            return acc.log_total();
        }
        double L = integrate_support(tilted_density(theta), 1e-11);
        return std::log(L);
    }

    // e^{theta x} pdf(x) evaluated through logs so an underflowed density
    // never meets an overflowed tilt (0 * inf) in the far tail.
    std::function<double(double)> tilted_density(double theta) const {
        return [pdf = density_.pdf, theta](double x) {
            double f = pdf(x);
            return f > 0.0 ? std::exp(std::log(f) + theta * x) : 0.0;
        };
    }

    // kappa and its first two theta-derivatives by tilted-moment summation /
    // quadrature (never finite differences).
    Cumulants cumulant_derivs(double theta) const {
        check_theta(theta);
        if (atomic_) {
            double logL = log_laplace(theta);
            double mean = 0.0;
            std::vector<double> w(log_atoms_.size(), 0.0);
            for (std::size_t n = 0; n < log_atoms_.size(); ++n) {
                if (log_atoms_[n] == -kInf) continue;
                w[n] = std::exp(log_atoms_[n] + static_cast<double>(n) * theta - logL);
                mean += static_cast<double>(n) * w[n];
            }
            double var = 0.0;
            for (std::size_t n = 0; n < w.size(); ++n) {
                double d = static_cast<double>(n) - mean;
                var += d * d * w[n];
            }
            return {logL, mean, var};
        }
        auto tilted = tilted_density(theta);
        double L = integrate_support(tilted, 1e-11);
        double m1 = integrate_support([&](double x) { return x * tilted(x); }, 1e-11);
        double mean = m1 / L;
        double m2c = integrate_support(
            [&](double x) {
                double d = x - mean;
                return d * d * tilted(x);
            },
            1e-11);
        return {std::log(L), mean, m2c / L};
    }

    double mean_map(double theta) const { return cumulant_derivs(theta).mean; }

    // Solves kappa'(theta) = mu; safeguarded Newton inside a bisection
    // bracket, the bracket grown toward the open endpoints.
    double mean_inverse(double mu) const {
        double a, b;
        if (!bracket_mean(mu, a, b)) throw MeanOutOfDomain(label_ + ": mean outside mean domain");
        double fa = mean_map(a) - mu;
        double theta = 0.5 * (a + b);
        for (int it = 0; it < 200; ++it) {
            Cumulants c = cumulant_derivs(theta);
            double f = c.mean - mu;
            if (std::abs(f) < 1e-10 * std::max(1.0, std::abs(mu))) return theta;
            if ((f > 0.0) == (fa > 0.0)) {
                a = theta;
                fa = f;
            } else {
                b = theta;
            }
            double step = c.variance > 0.0 ? f / c.variance : 0.0;
            double cand = theta - step;
            theta = (cand > a && cand < b) ? cand : 0.5 * (a + b);
            if (b - a < 1e-15 * std::max(1.0, std::abs(theta))) break;
        }
        Cumulants c = cumulant_derivs(theta);
        if (std::abs(c.mean - mu) < 1e-8 * std::max(1.0, std::abs(mu))) return theta;
        throw NonConvergent(label_ + ": mean_inverse failed to converge");
    }

    double tilted_pmf_or_pdf(double theta, double x) const {
        check_theta(theta);
        double logL = log_laplace(theta);
        if (atomic_) {
            auto n = static_cast<std::size_t>(std::llround(x));
            if (n >= log_atoms_.size() || log_atoms_[n] == -kInf) return 0.0;
            return std::exp(log_atoms_[n] + static_cast<double>(n) * theta - logL);
        }
        double f = density_.pdf(x);
        return f > 0.0 ? std::exp(std::log(f) + theta * x - logL) : 0.0;
    }

    // Tilted pmf over the retained support (atom families only).
    std::vector<double> tilted_pmf_table(double theta) const {
        check_theta(theta);
        double logL = log_laplace(theta);
        std::vector<double> p(log_atoms_.size(), 0.0);
        for (std::size_t n = 0; n < p.size(); ++n)
            if (log_atoms_[n] > -kInf)
                p[n] = std::exp(log_atoms_[n] + static_cast<double>(n) * theta - logL);
        return p;
    }

    std::vector<double> sample(double theta, std::uint64_t seed, std::size_t count) const {
        check_theta(theta);
        RngStream stream(seed);
        std::vector<double> out(count);
        if (atomic_) {
            std::vector<double> pmf = tilted_pmf_table(theta);
            std::vector<double> cdf(pmf.size());
            double acc = 0.0;
            for (std::size_t n = 0; n < pmf.size(); ++n) {
                acc += pmf[n];
                cdf[n] = acc;
            }
            for (std::size_t i = 0; i < count; ++i) {
                double u = stream.uniform() * acc;
                auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
                out[i] = static_cast<double>(it - cdf.begin());
            }
            return out;
        }
        if (!sampler_) throw SamplerUnavailable(label_ + ": no sampler registered");
        for (std::size_t i = 0; i < count; ++i) out[i] = sampler_(stream, theta);
        return out;
    }

    // Integrates g over the support interval, handling infinite tails and a
    // flagged left algebraic singularity. Relative tolerance via two passes.
    double integrate_support(const std::function<double(double)>& g, double rel_tol) const {
        double rough = integrate_support_abs(g, rel_tol);
        double scale = std::abs(rough);
        if (scale <= 1.0) return rough;
        return integrate_support_abs(g, rel_tol * scale);
    }

private:
    void validate_interval() const {
        if (!(theta_lo_ < 0.0 && 0.0 < theta_hi_))
            throw Error(label_ + ": parameter interval must contain 0");
    }

    void check_theta(double theta) const {
        if (!(theta > theta_lo_ && theta < theta_hi_))
            throw ThetaOutOfDomain(label_ + ": theta outside open parameter interval");
    }

    // Finds where |g| lives on (start, inf) so the tail fold-back sees only
    // decay; returns a split point past the last significant log-spaced probe.
    static double find_split(const std::function<double(double)>& g, double start) {
        double best = 0.0;
        double last_sig = start + 1.0;
        for (int k = 0; k <= 60; ++k) {
            double x = start + std::ldexp(0.25, k);  // start + 0.25 * 2^k
            if (k > 45 && best > 0.0) break;
            double v = std::abs(g(x));
            if (v > best) best = v;
            if (v > 1e-18 * best && v > 0.0) last_sig = x;
        }
        return std::max(start + 8.0, 4.0 * last_sig);
    }

    double integrate_support_abs(const std::function<double(double)>& g, double tol) const {
        const double lo = density_.lo;
        const double hi = density_.hi;
        double total = 0.0;
        if (lo == -kInf && hi == kInf) {
            auto right = [&](double x) { return g(x); };
            auto left = [&](double x) { return g(-x); };
            total += integrate_semi_infinite(right, 0.0, 0.5 * tol, find_split(right, 0.0));
            total += integrate_semi_infinite(left, 0.0, 0.5 * tol, find_split(left, 0.0));
            return total;
        }
        double start = lo;
        if (density_.left_power < 0.0) {
            double m = std::max(2.0, std::ceil(2.0 / (1.0 + density_.left_power)));
            double cut = std::min(lo + 1.0, hi);
            total += integrate_singular_left(g, lo, cut, m, 0.5 * tol);
            start = cut;
            if (start >= hi) return total;
            tol *= 0.5;
        }
        if (hi == kInf)
            total += integrate_semi_infinite(g, start, tol, find_split(g, start));
        else
            total += integrate(g, start, hi, tol);
        return total;
    }

    bool bracket_mean(double mu, double& a, double& b) const {
        // start from theta = 0 (always interior) and expand toward the ends
        auto approach = [](double from, double endpoint, int k) {
            if (endpoint == kInf) return from + std::ldexp(1.0, k);
            if (endpoint == -kInf) return from - std::ldexp(1.0, k);
            return endpoint - (endpoint - from) / std::ldexp(1.0, k + 1);
        };
        double m0 = mean_map(0.0);
        if (m0 == mu) {
            a = -1e-12;
            b = 1e-12;
        }
        if (mu > m0) {
            a = 0.0;
            double prev = 0.0;
            for (int k = 0; k <= 48; ++k) {
                double t = approach(0.0, theta_hi_, k);
                double m;
                try {
                    m = mean_map(t);
                } catch (const Error&) {
                    return false;
                }
                if (!std::isfinite(m)) return false;
                if (m >= mu) {
                    a = prev;
                    b = t;
                    return true;
                }
                prev = t;
            }
            return false;
        }
        b = 0.0;
        double prev = 0.0;
        for (int k = 0; k <= 48; ++k) {
            double t = approach(0.0, theta_lo_, k);
            double m;
            try {
                m = mean_map(t);
            } catch (const Error&) {
                return false;
            }
            if (!std::isfinite(m)) return false;
            if (m <= mu) {
                a = t;
                b = prev;
                return true;
            }
            prev = t;
        }
        return false;
    }

    std::string label_;
    bool atomic_;
    AtomBasis atoms_;
    std::vector<double> log_atoms_;
    DensityBasis density_;
    double theta_lo_;
    double theta_hi_;
    ContinuousSampler sampler_;
};

// limsup beta_n^{1/n} from the last retained coefficients; the right end of
// Theta for an atom basis is -log of that. Families with known endpoints
// override instead of trusting the estimate.
inline double estimate_theta_right(const std::vector<double>& beta, std::size_t window = 10) {
    double best = -kInf;
    std::size_t seen = 0;
    for (std::size_t i = beta.size(); i-- > 1 && seen < window;) {
        if (beta[i] <= 0.0) continue;
        best = std::max(best, std::log(beta[i]) / static_cast<double>(i));
        ++seen;
    }
    if (best == -kInf) return kInf;
    return -best;
}

}  // namespace nef
