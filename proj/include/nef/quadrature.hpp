#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>

#include "errors.hpp"

namespace nef {

// Adaptive Simpson with the classic 15x error sharing. Tolerances here are
// absolute; callers that want a relative tolerance scale and re-run (see
// integrate_rel). Depth exhaustion throws NonConvergent rather than
// returning a silently bad value.
namespace quad_detail {

struct Eval {
    double x, f;
};

template <typename F>
double simpson_step(F&& f, double a, double fa, double b, double fb, double m, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double adaptive(F&& f, double a, double fa, double m, double fm, double b, double fb,
                double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = simpson_step(f, a, fa, m, fm, lm, flm);
    const double right = simpson_step(f, m, fm, b, fb, rm, frm);
    const double err = left + right - whole;
    if (std::abs(err) <= 15.0 * tol || (b - a) < 1e-300)
        return left + right + err / 15.0;
    if (depth <= 0)
        throw NonConvergent("adaptive quadrature: depth limit reached before tolerance");
    return adaptive(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1) +
           adaptive(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace quad_detail

// Composite paneling before adaptive refinement: a single coarse Simpson
// estimate over a long interval can "converge" before it has seen a narrow
// bump, so the interval is cut into panels first and each panel refined
// independently.
template <typename F>
double integrate(F&& f, double a, double b, double abs_tol = 1e-12, int max_depth = 48,
                 int panels = 16) {
    if (a == b) return 0.0;
    double total = 0.0;
    const double w = (b - a) / panels;
    const double panel_tol = abs_tol / panels;
    for (int i = 0; i < panels; ++i) {
        const double pa = a + i * w;
        const double pb = (i == panels - 1) ? b : pa + w;
        const double m = 0.5 * (pa + pb);
        const double fa = f(pa), fb = f(pb), fm = f(m);
        if (!std::isfinite(fa) || !std::isfinite(fb) || !std::isfinite(fm))
            throw NonConvergent("adaptive quadrature: non-finite integrand value");
        const double whole = quad_detail::simpson_step(f, pa, fa, pb, fb, m, fm);
        total += quad_detail::adaptive(f, pa, fa, m, fm, pb, fb, whole, panel_tol, max_depth);
    }
    return total;
}

// Two-pass relative-tolerance wrapper.
template <typename F>
double integrate_rel(F&& f, double a, double b, double rel_tol = 1e-10) {
    double rough = integrate(f, a, b, rel_tol);
    double scale = std::abs(rough);
    if (scale <= 1.0) return rough;
    return integrate(f, a, b, rel_tol * scale);
}

// Integral over [a, inf). The tail beyond the split point is folded back to a
// bounded interval with x = 1/w, which assumes f decays at least like x^-2
// out there; every integrand we feed this (exp-tilted densities with theta
// inside the domain) decays much faster.
template <typename F>
double integrate_semi_infinite(F&& f, double a, double abs_tol = 1e-12, double split = -1.0) {
    double b = split > a ? split : std::max({a + 1.0, 2.0 * std::abs(a), 8.0});
    // geometric segments toward the split so short-scale structure near a is
    // resolved even when b is far out
    double head = 0.0;
    double seg_lo = a;
    double step = std::min(0.25, (b - a) / 4.0);
    int segs = 0;
    while (seg_lo < b) {
        double seg_hi = std::min(b, seg_lo + step);
        ++segs;
        head += integrate(f, seg_lo, seg_hi, 0.0625 * abs_tol, 48, 4);
        seg_lo = seg_hi;
        step *= 2.0;
    }
    (void)segs;
    auto tail_f = [&](double w) {
        if (w <= 0.0) return 0.0;
        double x = 1.0 / w;
        return f(x) * x * x;
    };
    double tail = integrate(tail_f, 0.0, 1.0 / b, 0.25 * abs_tol, 48, 8);
    return head + tail;
}

// Integral over [a, b] where f ~ C (x-a)^p with p in (-1, 0) near a.
// Substituting x = a + u^m with m >= 1/(1+p) makes the integrand continuous.
template <typename F>
double integrate_singular_left(F&& f, double a, double b, double m, double abs_tol = 1e-12) {
    auto g = [&](double u) {
        if (u <= 0.0) return 0.0;
        double x = a + std::pow(u, m);
        return f(x) * m * std::pow(u, m - 1.0);
    };
    return integrate(g, 0.0, std::pow(b - a, 1.0 / m), abs_tol);
}

}  // namespace nef
