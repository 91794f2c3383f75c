#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"

namespace nef {

// v(u) = a0 u ((u - u1)(u - conj u1))^n, the conjecture's VF candidate shape.
// The quadratic factor pair is real on the real line: (u-u1)(u-conj u1)
// = u^2 - 2 Re(u1) u + |u1|^2 = |u - u1|^2 > 0, so v(u) > 0 for u > 0.
struct ConjectureVf {
    double a0 = 1.0;
    std::complex<double> u1{0.0, 1.0};
    int n = 1;

    ConjectureVf(double a0_, std::complex<double> u1_, int n_) : a0(a0_), u1(u1_), n(n_) {
        if (!(a0 > 0.0)) throw Error("conjecture vf: a0 must be positive");
        if (!(u1.imag() > 0.0)) throw Error("conjecture vf: Im(u1) must be positive");
        if (n < 1) throw Error("conjecture vf: n must be a positive integer");
    }

    double vprime0() const { return a0 * std::pow(std::abs(u1), 2.0 * n); }
    double d() const { return 2.0 * 3.14159265358979323846 / vprime0(); }

    double quad(double z) const { return z * z - 2.0 * u1.real() * z + std::norm(u1); }
    double v(double u) const { return a0 * u * std::exp(n * std::log(quad(u))); }
};

struct TauResult {
    std::complex<double> tau;
    std::string method;  // "series-residue" or "contour-quadrature"
    double tail_error = 0.0;
};

namespace residue_detail {

constexpr double kPi = 3.14159265358979323846;

// Sign-magnitude big integer, little-endian 64-bit limbs. The residue's real
// part is exponentially smaller than the expansion terms (cancellation of up
// to ~30 digits at n = 25 with Re(u1) >> Im(u1)), so the accumulation runs
// in exact integer arithmetic; floats appear only in the final conversion.
class BigInt {
public:
    BigInt() = default;

    static BigInt from_i64(std::int64_t v) {
        BigInt b;
        if (v == 0) return b;
        b.neg_ = v < 0;
        b.limbs_.push_back(b.neg_ ? ~static_cast<std::uint64_t>(v) + 1
                                  : static_cast<std::uint64_t>(v));
        return b;
    }

    bool is_zero() const { return limbs_.empty(); }
    bool negative() const { return neg_; }
    void negate() {
        if (!limbs_.empty()) neg_ = !neg_;
    }

    BigInt shl(unsigned bits) const {
        if (is_zero() || bits == 0) return *this;
        BigInt out;
        out.neg_ = neg_;
        const unsigned words = bits / 64, rem = bits % 64;
        out.limbs_.assign(words, 0);
        std::uint64_t carry = 0;
        for (std::uint64_t limb : limbs_) {
            out.limbs_.push_back(rem ? ((limb << rem) | carry) : limb);
            carry = rem ? (limb >> (64 - rem)) : 0;
        }
        if (carry) out.limbs_.push_back(carry);
        return out;
    }

    friend BigInt operator+(const BigInt& a, const BigInt& b) {
        if (a.neg_ == b.neg_) {
            BigInt out;
            out.limbs_ = add_mag(a.limbs_, b.limbs_);
            out.neg_ = out.limbs_.empty() ? false : a.neg_;
            return out;
        }
        const int c = cmp_mag(a.limbs_, b.limbs_);
        BigInt out;
        if (c == 0) return out;
        if (c > 0) {
            out.limbs_ = sub_mag(a.limbs_, b.limbs_);
            out.neg_ = a.neg_;
        } else {
            out.limbs_ = sub_mag(b.limbs_, a.limbs_);
            out.neg_ = b.neg_;
        }
        return out;
    }

    friend BigInt operator-(const BigInt& a, const BigInt& b) {
        BigInt nb = b;
        nb.negate();
        return a + nb;
    }

    friend BigInt operator*(const BigInt& a, const BigInt& b) {
        BigInt out;
        if (a.is_zero() || b.is_zero()) return out;
        out.limbs_.assign(a.limbs_.size() + b.limbs_.size(), 0);
        for (std::size_t i = 0; i < a.limbs_.size(); ++i) {
            std::uint64_t carry = 0;
            for (std::size_t j = 0; j < b.limbs_.size(); ++j) {
                const unsigned __int128 t =
                    static_cast<unsigned __int128>(a.limbs_[i]) * b.limbs_[j] +
                    out.limbs_[i + j] + carry;
                out.limbs_[i + j] = static_cast<std::uint64_t>(t);
                carry = static_cast<std::uint64_t>(t >> 64);
            }
            out.limbs_[i + b.limbs_.size()] = carry;
        }
        out.trim();
        out.neg_ = a.neg_ != b.neg_;
        return out;
    }

    BigInt mul_u64(std::uint64_t m) const {
        BigInt out;
        if (is_zero() || m == 0) return out;
        out.neg_ = neg_;
        std::uint64_t carry = 0;
        for (std::uint64_t limb : limbs_) {
            const unsigned __int128 t = static_cast<unsigned __int128>(limb) * m + carry;
            out.limbs_.push_back(static_cast<std::uint64_t>(t));
            carry = static_cast<std::uint64_t>(t >> 64);
        }
        if (carry) out.limbs_.push_back(carry);
        return out;
    }

    // exact division only; remainders indicate a caller bug
    BigInt div_u64_exact(std::uint64_t q) const {
        BigInt out;
        out.neg_ = neg_;
        out.limbs_.assign(limbs_.size(), 0);
        unsigned __int128 rem = 0;
        for (std::size_t i = limbs_.size(); i-- > 0;) {
            const unsigned __int128 cur = (rem << 64) | limbs_[i];
            out.limbs_[i] = static_cast<std::uint64_t>(cur / q);
            rem = cur % q;
        }
        if (rem != 0) throw Error("BigInt: inexact small division");
        out.trim();
        if (out.limbs_.empty()) out.neg_ = false;
        return out;
    }

    // value = m * 2^e with m in [1,2) (or m = 0); keeps exponents symbolic so
    // huge intermediates never hit the long double range limits prematurely
    struct LdExp {
        long double m = 0.0L;
        long e = 0;
    };

    LdExp to_ld_exp() const {
        if (is_zero()) return {};
        long double acc = 0.0L;
        const std::size_t top = limbs_.size();
        const std::size_t take = top >= 2 ? 2 : 1;
        for (std::size_t i = 0; i < take; ++i)
            acc = acc * 1.8446744073709551616e19L +
                  static_cast<long double>(limbs_[top - 1 - i]);
        long e = static_cast<long>(64 * (top - take));
        int sh = 0;
        acc = frexpl(acc, &sh);  // acc in [0.5, 1)
        acc *= 2.0L;
        e += sh - 1;
        if (neg_) acc = -acc;
        return {acc, e};
    }

private:
    void trim() {
        while (!limbs_.empty() && limbs_.back() == 0) limbs_.pop_back();
    }

    static int cmp_mag(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
        if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
        for (std::size_t i = a.size(); i-- > 0;)
            if (a[i] != b[i]) return a[i] < b[i] ? -1 : 1;
        return 0;
    }

    static std::vector<std::uint64_t> add_mag(const std::vector<std::uint64_t>& a,
                                              const std::vector<std::uint64_t>& b) {
        const auto& big = a.size() >= b.size() ? a : b;
        const auto& small = a.size() >= b.size() ? b : a;
        std::vector<std::uint64_t> out(big.size(), 0);
        unsigned __int128 carry = 0;
        for (std::size_t i = 0; i < big.size(); ++i) {
            unsigned __int128 t = carry + big[i];
            if (i < small.size()) t += small[i];
            out[i] = static_cast<std::uint64_t>(t);
            carry = t >> 64;
        }
        if (carry) out.push_back(static_cast<std::uint64_t>(carry));
        return out;
    }

    // requires |a| >= |b|
    static std::vector<std::uint64_t> sub_mag(const std::vector<std::uint64_t>& a,
                                              const std::vector<std::uint64_t>& b) {
        std::vector<std::uint64_t> out(a.size(), 0);
        std::int64_t borrow = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            unsigned __int128 sub = borrow;
            if (i < b.size()) sub += b[i];
            if (a[i] >= sub) {
                out[i] = a[i] - static_cast<std::uint64_t>(sub);
                borrow = 0;
            } else {
                out[i] = static_cast<std::uint64_t>(
                    (static_cast<unsigned __int128>(1) << 64) + a[i] - sub);
                borrow = 1;
            }
        }
        while (!out.empty() && out.back() == 0) out.pop_back();
        return out;
    }

    bool neg_ = false;
    std::vector<std::uint64_t> limbs_;
};

struct Gaussian {
    BigInt re, im;

    friend Gaussian operator*(const Gaussian& a, const Gaussian& b) {
        return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
    }
    Gaussian scaled(const BigInt& c) const { return {re * c, im * c}; }
    friend Gaussian operator+(const Gaussian& a, const Gaussian& b) {
        return {a.re + b.re, a.im + b.im};
    }
};

// x * 2^k as an exact integer; valid whenever x's binary exponent allows it
inline BigInt dyadic_shift(double x, int k) {
    if (x == 0.0) return {};
    int e = 0;
    const double fr = std::frexp(x, &e);  // x = fr * 2^e, |fr| in [0.5, 1)
    const auto m = static_cast<std::int64_t>(std::ldexp(fr, 53));
    const int shift = e - 53 + k;
    if (shift < 0) throw Error("residue: dyadic scaling underflow");
    return BigInt::from_i64(m).shl(static_cast<unsigned>(shift));
}

}  // namespace residue_detail

// tau = -2 pi i Res(1/v, u1). The residue is [zeta^{n-1}] of
// 1/(a0 (u1+zeta)(b+zeta)^n) with b = u1 - conj(u1) = 2i Im(u1):
//   Res = (-1)^{n-1}/a0 * sum_{j<n} C(n+j-1,j) u1^{-(n-j)} b^{-(n+j)}.
// With U = 2^k u1 and B = 2^k b integer (doubles are dyadic), the sum is
// N / (U^n B^{2n-1}) * 2^{2kn} for the Gaussian integer
//   N = sum_j C(n+j-1,j) U^j B^{n-1-j},
// and both N and the denominator are accumulated exactly, so the tiny real
// part of the residue survives the cancellation losslessly.
inline TauResult residue_series(const ConjectureVf& vf) {
    using residue_detail::BigInt;
    using residue_detail::Gaussian;

    int e_re = 0, e_im = 0;
    if (vf.u1.real() != 0.0) std::frexp(vf.u1.real(), &e_re);
    std::frexp(vf.u1.imag(), &e_im);
    if (vf.u1.real() == 0.0) e_re = e_im;
    if (std::abs(e_re - e_im) > 512)
        throw Error("residue_series: u1 component magnitudes differ too widely");
    const int k = 54 - std::min(e_re, e_im);

    const Gaussian U{residue_detail::dyadic_shift(vf.u1.real(), k),
                     residue_detail::dyadic_shift(vf.u1.imag(), k)};
    const Gaussian B{BigInt{}, residue_detail::dyadic_shift(2.0 * vf.u1.imag(), k)};

    const int n = vf.n;
    std::vector<Gaussian> upow(n), bpow(2 * n);
    upow[0] = {BigInt::from_i64(1), BigInt{}};
    bpow[0] = upow[0];
    for (int i = 1; i < n; ++i) upow[i] = upow[i - 1] * U;
    for (int i = 1; i < 2 * n; ++i) bpow[i] = bpow[i - 1] * B;

    Gaussian N{};
    BigInt binom = BigInt::from_i64(1);  // C(n+j-1, j), updated exactly
    for (int j = 0; j < n; ++j) {
        if (j > 0)
            binom = binom.mul_u64(static_cast<std::uint64_t>(n + j - 1))
                        .div_u64_exact(static_cast<std::uint64_t>(j));
        N = N + (upow[j] * bpow[n - 1 - j]).scaled(binom);
    }
    const Gaussian D = (upow[n - 1] * U) * bpow[2 * n - 1];

    // complex division done exactly: Re and Im of N/D via Gaussian products
    const BigInt p_re = N.re * D.re + N.im * D.im;
    const BigInt p_im = N.im * D.re - N.re * D.im;
    const BigInt q = D.re * D.re + D.im * D.im;

    const auto pr = p_re.to_ld_exp();
    const auto pi = p_im.to_ld_exp();
    const auto qq = q.to_ld_exp();
    const long shift = 2L * k * n;
    const long double sign = (n % 2 == 1) ? 1.0L : -1.0L;
    const long double res_re =
        sign * ldexpl(pr.m / qq.m, static_cast<int>(pr.e - qq.e + shift)) / vf.a0;
    const long double res_im =
        sign * ldexpl(pi.m / qq.m, static_cast<int>(pi.e - qq.e + shift)) / vf.a0;

    TauResult out;
    out.tau = std::complex<double>(static_cast<double>(2.0L * residue_detail::kPi * res_im),
                                   static_cast<double>(-2.0L * residue_detail::kPi * res_re));
    out.method = "series-residue";
    out.tail_error = 0.0;
    return out;
}

// Integrand of the real-line representation of Re(tau):
//   alpha(z) = (quad(z)^{-n} - quad(-z)^{-n}) / z.
// quad(z) = quad(-z) - 4 Re(u1) z, so the difference is evaluated through
// expm1/log1p; the naive two-exponential form loses ~10 digits near z = 0
// and its roundoff noise stalls the adaptive quadrature. quad > 0 on the
// real line, and the log1p argument quad(z)/quad(-z) - 1 stays above -1.
// alpha extends continuously to 0 with value 4 n Re(u1) / |u1|^{2(n+1)}.
inline double alpha_integrand(const ConjectureVf& vf, double z) {
    const double a = vf.u1.real();
    if (a == 0.0) return 0.0;  // quad is even: exact cancellation
    const double c2 = std::norm(vf.u1);
    if (z == 0.0) return 4.0 * vf.n * a * std::exp(-(vf.n + 1.0) * std::log(c2));
    const double qm = vf.quad(-z);
    const double t2 = std::exp(-static_cast<double>(vf.n) * std::log(qm));
    return t2 * std::expm1(-vf.n * std::log1p(-4.0 * a * z / qm)) / z;
}

// Re(tau) = -(1/a0) integral of alpha over (0, inf), run from
// eps = 1e-10 |u1| with the head bounded by continuity and the tail by
//   |alpha(z)| <= 2 / (z (z - |u1|)^{2n})  for z > |u1|.
// Im(tau) is pi/v'(0) exactly (the small-circle term of the contour).
inline TauResult contour_tau(const ConjectureVf& vf, double tol) {
    if (!(tol > 0.0)) throw Error("contour_tau: tol must be positive");
    const double au = std::abs(vf.u1);
    const double eps = 1e-10 * au;

    double r_end = std::max(4.0 * au, 8.0);
    double tail = 0.0;
    for (;;) {
        const double shrink = std::pow(1.0 - au / r_end, 2.0 * vf.n);
        tail = 2.0 / (2.0 * vf.n * shrink) * std::exp(-2.0 * vf.n * std::log(r_end)) / vf.a0;
        if (tail < 0.5 * tol) break;
        r_end *= 2.0;
        if (r_end > 1e13) throw ToleranceNotMet("contour_tau: tail bound cannot reach tolerance");
    }
    const double head =
        2.0 * eps / vf.a0 *
        std::max(std::abs(alpha_integrand(vf, 0.0)), std::abs(alpha_integrand(vf, eps)));

    std::vector<std::pair<double, double>> segs;
    double hi = std::min(au, r_end);
    segs.emplace_back(eps, hi);
    while (hi < r_end) {
        const double nxt = std::min(2.0 * hi, r_end);
        segs.emplace_back(hi, nxt);
        hi = nxt;
    }
    const double seg_tol = 0.5 * tol * vf.a0 / static_cast<double>(segs.size());
    double integral = 0.0;
    for (const auto& [a, b] : segs)
        integral += integrate([&](double z) { return alpha_integrand(vf, z); }, a, b, seg_tol);

    TauResult out;
    out.tau = std::complex<double>(-integral / vf.a0, residue_detail::kPi / vf.vprime0());
    out.method = "contour-quadrature";
    out.tail_error = tail + head;
    return out;
}

// theta0 = integral of 1/v from mu0 to infinity; integrand ~ t^{-(2n+1)}.
inline double theta0(const ConjectureVf& vf, double mu0) {
    if (!(mu0 > 0.0)) throw Error("theta0: mu0 must be positive");
    const double rough = mu0 / vf.v(mu0) / (2.0 * vf.n);
    return integrate_semi_infinite([&](double t) { return 1.0 / vf.v(t); }, mu0, 1e-9 * rough);
}

// Membership report for theta1 = theta0 + tau against S0+ and Theta + id/2,
// with Theta = (-inf, theta0). Im(tau) = d/2 lands theta1 on the boundary of
// S0+, so membership there is always false; membership in Theta + id/2
// reduces to Re(tau) < 0, which is the verdict switch. Re(tau) within
// 1e-10 |tau| of zero is classified as zero (the symmetric case).
struct NecessityReport {
    double theta0_value = 0.0;
    double d = 0.0;
    std::complex<double> tau;
    std::complex<double> theta1;
    bool in_s0_plus = false;
    bool in_theta_half_id = false;
    std::string verdict;
};

inline NecessityReport necessity_predicate(const ConjectureVf& vf, double mu0) {
    NecessityReport rep;
    rep.theta0_value = theta0(vf, mu0);
    rep.d = vf.d();
    rep.tau = residue_series(vf).tau;
    rep.theta1 = rep.theta0_value + rep.tau;
    const bool re_zero = std::abs(rep.tau.real()) <= 1e-10 * std::abs(rep.tau);
    rep.in_s0_plus = !re_zero && rep.theta1.real() < rep.theta0_value &&
                     rep.theta1.imag() > 0.0 &&
                     rep.theta1.imag() < 0.5 * rep.d * (1.0 - 1e-10);
    rep.in_theta_half_id = !re_zero && rep.tau.real() < 0.0 &&
                           std::abs(rep.theta1.imag() - 0.5 * rep.d) <= 1e-10 * rep.d;
    rep.verdict = rep.in_theta_half_id ? "VF impossible" : "no contradiction";
    return rep;
}

struct ScanCell {
    int n = 1;
    std::complex<double> u1;
    std::complex<double> tau_series;
    std::complex<double> tau_contour;
    double d = 0.0;
    double method_gap = 0.0;
    bool sign_ok = false;
    bool im_ok = false;
    bool gap_ok = false;
    std::string verdict;  // "ok" or semicolon-joined failure labels
};

struct ScanResult {
    std::vector<ScanCell> cells;
    std::vector<std::string> violations;  // expected empty

    bool clean() const { return violations.empty(); }
};

// Criterion grid: Re(u1) x Im(u1) cross product.
inline std::vector<std::complex<double>> default_u1_grid() {
    std::vector<std::complex<double>> g;
    for (double re : {-2.0, -0.3, 0.0, 0.3, 2.0})
        for (double im : {0.5, 1.0, 3.0}) g.emplace_back(re, im);
    return g;
}

inline ScanCell scan_cell(int n, std::complex<double> u1) {
    const ConjectureVf vf(1.0, u1, n);
    ScanCell cell;
    cell.n = n;
    cell.u1 = u1;
    cell.d = vf.d();
    cell.tau_series = residue_series(vf).tau;
    const double scale = std::abs(cell.tau_series);
    cell.tau_contour = contour_tau(vf, 1e-7 * scale).tau;
    cell.method_gap = std::abs(cell.tau_series - cell.tau_contour);

    cell.im_ok = std::abs(cell.tau_series.imag() - 0.5 * cell.d) < 1e-8 * cell.d;
    cell.gap_ok = cell.method_gap < 1e-6 * scale;
    // zero threshold is relative to |tau|: the natural scale |u1|^{-2n}
    // ranges over ~35 decades across the grid
    const double re = cell.tau_series.real();
    const int sign_tau = std::abs(re) <= 1e-10 * scale ? 0 : (re > 0.0 ? 1 : -1);
    const int sign_u = u1.real() == 0.0 ? 0 : (u1.real() > 0.0 ? 1 : -1);
    cell.sign_ok = sign_tau == -sign_u;

    std::string bad;
    if (!cell.sign_ok) bad += "sign-law";
    if (!cell.im_ok) bad += std::string(bad.empty() ? "" : ";") + "imag-part";
    if (!cell.gap_ok) bad += std::string(bad.empty() ? "" : ";") + "method-gap";
    cell.verdict = bad.empty() ? "ok" : bad;
    return cell;
}

// Full scan: n = 1..n_max outer, grid order inner. Cells are independent and
// run on the capped worker pool; results land by index, so the table is
// deterministic regardless of schedule. Violations are reported, not thrown.
inline ScanResult conjecture_scan(int n_max, const std::vector<std::complex<double>>& grid) {
    if (n_max < 1) throw Error("conjecture_scan: n_max must be >= 1");
    for (const auto& u1 : grid)
        if (!(u1.imag() > 0.0)) throw Error("conjecture_scan: grid points need Im > 0");

    ScanResult out;
    out.cells.resize(static_cast<std::size_t>(n_max) * grid.size());
    parallel_for(out.cells.size(), [&](std::size_t idx) {
        const int n = 1 + static_cast<int>(idx / grid.size());
        const auto u1 = grid[idx % grid.size()];
        out.cells[idx] = scan_cell(n, u1);
    });
    for (const auto& cell : out.cells)
        if (cell.verdict != "ok")
            out.violations.push_back("n=" + std::to_string(cell.n) + " u1=(" +
                                     std::to_string(cell.u1.real()) + "," +
                                     std::to_string(cell.u1.imag()) + "): " + cell.verdict);
    return out;
}

}  // namespace nef
