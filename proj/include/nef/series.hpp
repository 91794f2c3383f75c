#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "errors.hpp"

namespace nef {

namespace detail {

template <typename T>
struct is_complex : std::false_type {};
template <typename T>
struct is_complex<std::complex<T>> : std::true_type {};

template <typename T>
double abs_value(const T& x) {
    using std::abs;
    return static_cast<double>(abs(x));
}

}  // namespace detail

// Formal power series truncated at order N: coeffs_[k] is the coefficient of
// z^k, k = 0..N. Truncation is the only approximation; the retained
// coefficients of sums/products/compositions are exact (up to roundoff).
// Arithmetic between series of different orders truncates to the shorter one.
// Values are immutable in spirit: every operation returns a new series.
template <typename T = double>
class TruncatedSeries {
public:
    explicit TruncatedSeries(std::size_t order) : coeffs_(order + 1, T{}) {}

    TruncatedSeries(std::initializer_list<T> coeffs) : coeffs_(coeffs) {
        if (coeffs_.empty()) coeffs_.push_back(T{});
    }

    explicit TruncatedSeries(std::vector<T> coeffs) : coeffs_(std::move(coeffs)) {
        if (coeffs_.empty()) coeffs_.push_back(T{});
    }

    static TruncatedSeries constant(const T& c, std::size_t order) {
        TruncatedSeries s(order);
        s.coeffs_[0] = c;
        return s;
    }

    // The monomial z (zero if order ends up 0).
    static TruncatedSeries identity(std::size_t order) {
        TruncatedSeries s(order);
        if (order >= 1) s.coeffs_[1] = T{1};
        return s;
    }

    std::size_t order() const { return coeffs_.size() - 1; }
    const std::vector<T>& coeffs() const { return coeffs_; }

    const T& operator[](std::size_t k) const { return coeffs_[k]; }
    T& operator[](std::size_t k) { return coeffs_[k]; }

    // Coefficient of z^k, zero beyond the truncation order.
    T at(std::size_t k) const { return k < coeffs_.size() ? coeffs_[k] : T{}; }

    TruncatedSeries truncated(std::size_t new_order) const {
        std::vector<T> c(new_order + 1, T{});
        for (std::size_t k = 0; k <= std::min(new_order, order()); ++k) c[k] = coeffs_[k];
        return TruncatedSeries(std::move(c));
    }

    TruncatedSeries operator+(const TruncatedSeries& rhs) const {
        const std::size_t n = std::min(order(), rhs.order());
        TruncatedSeries out(n);
        for (std::size_t k = 0; k <= n; ++k) out.coeffs_[k] = coeffs_[k] + rhs.coeffs_[k];
        return out;
    }

    TruncatedSeries operator-(const TruncatedSeries& rhs) const {
        const std::size_t n = std::min(order(), rhs.order());
        TruncatedSeries out(n);
        for (std::size_t k = 0; k <= n; ++k) out.coeffs_[k] = coeffs_[k] - rhs.coeffs_[k];
        return out;
    }

    TruncatedSeries operator-() const {
        TruncatedSeries out(order());
        for (std::size_t k = 0; k <= order(); ++k) out.coeffs_[k] = -coeffs_[k];
        return out;
    }

    TruncatedSeries operator*(const T& scalar) const {
        TruncatedSeries out(order());
        for (std::size_t k = 0; k <= order(); ++k) out.coeffs_[k] = coeffs_[k] * scalar;
        return out;
    }

    // Cauchy product truncated to the shorter operand.
    TruncatedSeries operator*(const TruncatedSeries& rhs) const {
        const std::size_t n = std::min(order(), rhs.order());
        TruncatedSeries out(n);
        for (std::size_t k = 0; k <= n; ++k) {
            T acc{};
            for (std::size_t j = 0; j <= k; ++j) acc += coeffs_[j] * rhs.coeffs_[k - j];
            out.coeffs_[k] = acc;
        }
        return out;
    }

    // Termwise d/dz; the result honestly carries one order less.
    TruncatedSeries derivative() const {
        if (order() == 0) return TruncatedSeries(std::size_t{0});
        TruncatedSeries out(order() - 1);
        for (std::size_t k = 1; k <= order(); ++k)
            out.coeffs_[k - 1] = coeffs_[k] * T(static_cast<double>(k));
        return out;
    }

    // Multiplicative inverse 1/a; requires a nonzero constant term.
    TruncatedSeries inverse() const {
        if (detail::abs_value(coeffs_[0]) == 0.0)
            throw ZeroConstantTerm("series inverse requires a nonzero constant term");
        TruncatedSeries out(order());
        out.coeffs_[0] = T{1} / coeffs_[0];
        for (std::size_t n = 1; n <= order(); ++n) {
            T acc{};
            for (std::size_t k = 1; k <= n; ++k) acc += coeffs_[k] * out.coeffs_[n - k];
            out.coeffs_[n] = -acc / coeffs_[0];
        }
        return out;
    }

    bool all_finite() const {
        for (const T& c : coeffs_) {
            if constexpr (detail::is_complex<T>::value) {
                if (!std::isfinite(static_cast<double>(c.real())) ||
                    !std::isfinite(static_cast<double>(c.imag())))
                    return false;
            } else {
                if (!std::isfinite(static_cast<double>(c))) return false;
            }
        }
        return true;
    }

private:
    std::vector<T> coeffs_;
};

template <typename T>
TruncatedSeries<T> operator*(const T& scalar, const TruncatedSeries<T>& s) {
    return s * scalar;
}

// result[k] = sum_{j<=k} a[j] b[k-j], k <= min order.
template <typename T>
TruncatedSeries<T> cauchy_product(const TruncatedSeries<T>& a, const TruncatedSeries<T>& b) {
    return a * b;
}

// Coefficients of outer(inner(z)) to the shared order, by Horner evaluation
// in the series ring. inner must vanish at the origin.
template <typename T>
TruncatedSeries<T> compose(const TruncatedSeries<T>& outer, const TruncatedSeries<T>& inner) {
    if (detail::abs_value(inner.at(0)) != 0.0)
        throw NonzeroInnerConstant("compose: inner series must have zero constant term");
    const std::size_t n = std::min(outer.order(), inner.order());
    TruncatedSeries<T> in = inner.truncated(n);
    TruncatedSeries<T> acc = TruncatedSeries<T>::constant(outer.at(n), n);
    for (std::size_t k = n; k-- > 0;) {
        acc = acc * in;
        acc[0] += outer.at(k);
    }
    return acc;
}

// b = log(a) with exp(b) = a to the truncation order; requires a[0] > 0.
// Recurrence from b' a = a':  n b_n a_0 = n a_n - sum_{k=1}^{n-1} k b_k a_{n-k}.
template <typename T>
TruncatedSeries<T> log_series(const TruncatedSeries<T>& a) {
    static_assert(!detail::is_complex<T>::value,
                  "log_series is defined for real series only");
    if (!(a.at(0) > T{0}))
        throw NonpositiveConstantTerm("log_series requires a positive constant term");
    TruncatedSeries<T> b(a.order());
    b[0] = std::log(a.at(0));
    for (std::size_t n = 1; n <= a.order(); ++n) {
        T acc = static_cast<T>(n) * a.at(n);
        for (std::size_t k = 1; k < n; ++k)
            acc -= static_cast<T>(k) * b[k] * a.at(n - k);
        b[n] = acc / (static_cast<T>(n) * a.at(0));
    }
    return b;
}

// b = exp(a); recurrence from b' = a' b.
template <typename T>
TruncatedSeries<T> exp_series_of(const TruncatedSeries<T>& a) {
    TruncatedSeries<T> b(a.order());
    using std::exp;
    b[0] = exp(a.at(0));
    for (std::size_t n = 1; n <= a.order(); ++n) {
        T acc{};
        for (std::size_t k = 1; k <= n; ++k)
            acc += static_cast<T>(k) * a.at(k) * b[n - k];
        b[n] = acc / static_cast<T>(n);
    }
    return b;
}

// --- stock expansions ---

// e^z
inline TruncatedSeries<double> exp_series(std::size_t order) {
    TruncatedSeries<double> s(order);
    double c = 1.0;
    for (std::size_t k = 0; k <= order; ++k) {
        s[k] = c;
        c /= static_cast<double>(k + 1);
    }
    return s;
}

// 1/(1-z)
inline TruncatedSeries<double> geometric_series(std::size_t order) {
    TruncatedSeries<double> s(order);
    for (std::size_t k = 0; k <= order; ++k) s[k] = 1.0;
    return s;
}

// arcsin z = sum_{k>=0} (2k)! / (4^k (k!)^2 (2k+1)) z^{2k+1}
inline TruncatedSeries<double> arcsin_series(std::size_t order) {
    TruncatedSeries<double> s(order);
    double c = 1.0;  // coefficient of z^{2k+1} times (2k+1)
    for (std::size_t k = 0; 2 * k + 1 <= order; ++k) {
        s[2 * k + 1] = c / static_cast<double>(2 * k + 1);
        c *= static_cast<double>(2 * k + 1) / static_cast<double>(2 * k + 2);
    }
    return s;
}

// Solves h(w) = w g(h(w)) for h with h(0) = 0, via the coefficient formula
// beta_n = [z^n] g(z)^{n+1} / (n+1); returns h(w) = sum_n beta_n w^{n+1}
// truncated at the requested order (so beta_n for n <= order-1).
// Only g[0] != 0 is required.
template <typename T>
TruncatedSeries<T> lagrange_invert(const TruncatedSeries<T>& g, std::size_t order) {
    if (detail::abs_value(g.at(0)) == 0.0)
        throw ZeroConstantTerm("lagrange_invert requires g(0) != 0");
    TruncatedSeries<T> h(order);
    if (order == 0) return h;
    TruncatedSeries<T> gw = g.truncated(order - 1);
    TruncatedSeries<T> power = gw;  // g^{n+1} at step n
    for (std::size_t n = 0; n + 1 <= order; ++n) {
        h[n + 1] = power.at(n) / T(static_cast<double>(n + 1));
        if (n + 2 <= order) power = power * gw;
    }
    if (!h.all_finite())
        throw CoefficientOverflow("lagrange_invert: coefficients left double range");
    return h;
}

// beta_0 .. beta_count for the implicit h(w) = w g(h(w)).
template <typename T>
std::vector<T> lagrange_coefficients(const TruncatedSeries<T>& g, std::size_t count) {
    TruncatedSeries<T> h = lagrange_invert(g, count + 1);
    std::vector<T> beta(count + 1);
    for (std::size_t n = 0; n <= count; ++n) beta[n] = h.at(n + 1);
    return beta;
}

}  // namespace nef
