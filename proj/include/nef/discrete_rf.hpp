#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"
#include "nef.hpp"
#include "reduction.hpp"
#include "series.hpp"

namespace nef {

// Taylor coefficients c_n of psi(z) = log(sum beta_n z^n), so that
// kappa(theta) = psi(e^theta) = sum c_n e^{n theta}. An infinitely divisible
// basis on the nonneg integers has c_n >= 0 for n >= 1; a clear negative
// coefficient is reported as NotInfinitelyDivisible.
inline std::vector<double> cumulant_coeffs(const std::vector<double>& beta) {
    if (beta.empty() || beta[0] <= 0.0)
        throw Error("cumulant_coeffs: basis must put positive mass at 0");
    std::size_t positive = 0;
    for (double b : beta) {
        if (b < 0.0) throw Error("cumulant_coeffs: negative atom weight");
        if (b > 0.0) ++positive;
    }
    if (positive < 2) throw Error("cumulant_coeffs: basis concentrated on one point");
    TruncatedSeries<> f(beta);
    auto psi = log_series(f);
    std::vector<double> c(psi.coeffs());
    for (std::size_t n = 1; n < c.size(); ++n)
        if (c[n] < -1e-8)
            throw NotInfinitelyDivisible("cumulant coefficient c_" + std::to_string(n) +
                                         " = " + std::to_string(c[n]) + " < 0");
    return c;
}

// rho_n = n^2 c_n: the atom weights of the measure with
// sum rho_n e^{n theta} = kappa''(theta).
inline std::vector<double> rho_from_c(const std::vector<double>& c) {
    std::vector<double> rho(c.size(), 0.0);
    for (std::size_t n = 1; n < c.size(); ++n)
        rho[n] = static_cast<double>(n) * static_cast<double>(n) * c[n];
    return rho;
}

// alpha = beta * rho (measure convolution on the integers).
inline std::vector<double> alpha_convolve(const std::vector<double>& beta,
                                          const std::vector<double>& rho) {
    std::size_t n = std::min(beta.size(), rho.size());
    std::vector<double> alpha(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k <= i; ++k) alpha[i] += beta[i - k] * rho[k];
    return alpha;
}

struct DiscreteIdFamily {
    std::vector<double> beta;
    std::vector<double> c;
    std::vector<double> rho;
    std::vector<double> alpha;

    static DiscreteIdFamily from_beta(std::vector<double> beta_in) {
        DiscreteIdFamily f;
        f.beta = std::move(beta_in);
        f.c = cumulant_coeffs(f.beta);
        f.rho = rho_from_c(f.c);
        f.alpha = alpha_convolve(f.beta, f.rho);
        return f;
    }

    // phi(n) = alpha_n / beta_n on the support of beta.
    ReductionFunction reduction() const {
        double alpha_max = 0.0;
        for (double a : alpha) alpha_max = std::max(alpha_max, std::abs(a));
        std::vector<double> phi(beta.size(), 0.0);
        std::vector<bool> present(beta.size(), false);
        for (std::size_t n = 0; n < beta.size() && n < alpha.size(); ++n) {
            if (beta[n] > 0.0) {
                phi[n] = alpha[n] / beta[n];
                present[n] = true;
            } else if (std::abs(alpha[n]) > 1e-14 * alpha_max) {
                throw AbsoluteContinuityViolated(
                    "alpha puts mass at n = " + std::to_string(n) + " where beta has none");
            }
        }
        return ReductionFunction::atom_table(std::move(phi), std::move(present));
    }
};

// Family defined implicitly by h(w) = w g(h(w)): basis weights are
// beta_n = [w^n] h(w)/w, then the c/rho/alpha pipeline applies.
inline DiscreteIdFamily lagrange_family(const TruncatedSeries<>& g, std::size_t order) {
    for (std::size_t k = 0; k <= g.order(); ++k)
        if (g.at(k) < 0.0) throw Error("lagrange_family: generator has a negative coefficient");
    return DiscreteIdFamily::from_beta(lagrange_coefficients(g, order));
}

// Multiply a series by its own argument (coefficients shift up one slot; the
// top coefficient falls off the truncation).
inline TruncatedSeries<> shifted(const TruncatedSeries<>& s) {
    TruncatedSeries<> out(s.order());
    for (std::size_t k = s.order(); k >= 1; --k) out[k] = s.at(k - 1);
    out[0] = 0.0;
    return out;
}

// Second, independent route to rho: the generating function of rho is
// H(h(w)) with H(x) = x (1 - x g'/g)^{-3} (g'/g + x g''/g - x (g'/g)^2),
// all ratios evaluated as power series in x. Needs g to order N+2 because
// of g''.
inline std::vector<double> rho_via_generator(const TruncatedSeries<>& g_in, std::size_t N) {
    if (g_in.order() < N + 2)
        throw Error("rho_via_generator: generator must carry order N+2");
    if (g_in.at(0) == 0.0) throw ZeroConstantTerm("rho_via_generator: g(0) = 0");
    auto g = g_in.truncated(N + 2);
    auto gp = g.derivative();
    auto gpp = gp.derivative();
    auto ginv = g.truncated(N).inverse();
    auto G1 = gp.truncated(N) * ginv;
    auto G2 = gpp.truncated(N) * ginv;

    auto one = TruncatedSeries<>::constant(1.0, N);
    auto denom = one - shifted(G1);
    auto dinv = denom.inverse();
    auto dinv3 = dinv * dinv * dinv;
    auto B = G1 + shifted(G2) - shifted(G1 * G1);
    auto H = shifted(dinv3 * B);

    auto h = lagrange_invert(g.truncated(N), N);
    auto f = compose(H, h);
    std::vector<double> rho(N + 1, 0.0);
    for (std::size_t n = 0; n <= N; ++n) rho[n] = f.at(n);
    return rho;
}

// p_{2n}(t) = prod_{k=0}^{n-1} (t^2 + 4k^2), p_{2n+1}(t) = t prod_{k=0}^{n-1} (t^2 + (2k+1)^2).
inline double arcsine_polynomial(double t, std::size_t n) {
    if (n == 0) return 1.0;
    double v = (n % 2 == 1) ? t : 1.0;
    std::size_t half = n / 2;
    for (std::size_t k = 0; k < half; ++k) {
        double odd_or_even = (n % 2 == 1) ? static_cast<double>(2 * k + 1)
                                          : static_cast<double>(2 * k);
        v *= t * t + odd_or_even * odd_or_even;
    }
    return v;
}

// log p_n(t) for t > 0; the products overflow doubles near n ~ 150, the log
// sum does not.
inline double log_arcsine_polynomial(double t, std::size_t n) {
    if (n == 0) return 0.0;
    double v = (n % 2 == 1) ? std::log(t) : 0.0;
    std::size_t half = n / 2;
    for (std::size_t k = 0; k < half; ++k) {
        double odd_or_even = (n % 2 == 1) ? static_cast<double>(2 * k + 1)
                                          : static_cast<double>(2 * k);
        v += std::log(t * t + odd_or_even * odd_or_even);
    }
    return v;
}

// Max over the theta grid of |kappa''(theta) - v(kappa'(theta))| where v is
// a polynomial in the mean; certifies a claimed variance function.
inline double vf_parametric_check(const Nef& family, const std::vector<double>& v_coeffs,
                                  const std::vector<double>& theta_grid) {
    double worst = 0.0;
    for (double th : theta_grid) {
        auto c = family.cumulant_derivs(th);
        double v = 0.0;
        for (std::size_t k = v_coeffs.size(); k-- > 0;) v = v * c.mean + v_coeffs[k];
        worst = std::max(worst, std::abs(c.variance - v));
    }
    return worst;
}

// --- stock generators for the Lagrangian families ---

inline TruncatedSeries<> abel_generator(std::size_t order) { return exp_series(order); }

inline TruncatedSeries<> takacs_generator(std::size_t order) { return geometric_series(order); }

inline TruncatedSeries<> large_arcsine_generator(std::size_t order) {
    return exp_series_of(arcsin_series(order));
}

inline std::vector<double> strict_arcsine_beta(std::size_t count) {
    std::vector<double> beta(count + 1);
    for (std::size_t n = 0; n <= count; ++n)
        beta[n] = std::exp(log_arcsine_polynomial(1.0, n) - log_factorial(n));
    return beta;
}

}  // namespace nef
