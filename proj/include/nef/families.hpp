#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "continuous_rf.hpp"
#include "discrete_rf.hpp"
#include "errors.hpp"
#include "nef.hpp"
#include "reduction.hpp"
#include "rng.hpp"
#include "special.hpp"

namespace nef {

// Open interval of attainable means; requests outside raise MeanOutOfDomain.
struct MeanDomain {
    double lo = 0.0;
    double hi = kInf;
    bool contains(double u) const { return u > lo && u < hi; }
};

// A registered family. The basis is standardized so that 0 lies in Theta
// (heavy-tailed bases are exponentially tilted first; tilt_anchor records
// the multiplier e^{anchor x} that was applied). phi is tilt invariant, so
// the reduction function of the standardized family equals that of the raw
// one. Cumulant closures are exact where closed forms exist and otherwise
// fall back on the Nef numerics.
struct Family {
    std::string name;
    bool discrete = false;
    double tilt_anchor = 0.0;
    double identity_tol = 1e-6;
    std::shared_ptr<Nef> nef;                    // null for pvf (atom + density mix)
    std::shared_ptr<DiscreteIdFamily> pipeline;  // discrete families only
    ReductionFunction phi;
    std::vector<double> v_coeffs;  // polynomial VF, lowest degree first; empty if none
    std::function<double(double)> vf;
    std::vector<double> probes;  // standardized thetas for identity checks
    MeanDomain mean_domain;
    std::function<Cumulants(double)> exact_cumulants;
    std::function<double(double)> expectation_override;
    std::function<double(RngStream&, double)> sampler_by_mean;

    Cumulants cumulants(double theta) const {
        if (exact_cumulants) return exact_cumulants(theta);
        return nef->cumulant_derivs(theta);
    }

    double variance_at_mean(double u) const { return vf(u); }

    // E_theta[phi], the left side of the master identity. Computed against
    // the tilted basis with phi as a black box; never via the alpha
    // transform, which would make the identity checks circular.
    double expectation_phi(double theta) const {
        if (expectation_override) return expectation_override(theta);
        if (nef->is_atomic()) {
            const std::vector<double> pmf = nef->tilted_pmf_table(theta);
            double s = 0.0;
            for (std::size_t n = 0; n < pmf.size(); ++n)
                s += pmf[n] * phi.eval(static_cast<double>(n));
            return s;
        }
        const double L = nef->laplace(theta);
        const DensityBasis& d = nef->density();
        return nef->integrate_support(
                   [this, &d, theta](double x) {
                       const double f = d.pdf(x);
                       if (f == 0.0) return 0.0;
                       return phi.eval(x) * f * std::exp(theta * x);
                   },
                   1e-9) /
               L;
    }

    bool has_sampler() const { return static_cast<bool>(sampler_by_mean); }

    double sample_by_mean(RngStream& rng, double mean) const {
        if (!sampler_by_mean) throw SamplerUnavailable(name + ": no sampler registered");
        if (!mean_domain.contains(mean))
            throw MeanOutOfDomain(name + ": mean " + std::to_string(mean) + " outside mean domain");
        return sampler_by_mean(rng, mean);
    }
};

namespace fam_detail {

inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i)
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    return v;
}

inline double polyval(const std::vector<double>& c, double u) {
    double s = 0.0;
    for (std::size_t i = c.size(); i-- > 0;) s = s * u + c[i];
    return s;
}

// Standardized atom weights w_n proportional to exp(log_beta(n) + anchor n),
// normalized in log space. The table is extended until the tilted tail at
// theta_max (the largest theta any probe uses) is below 1e-15 of the total,
// so truncation never shows up in the 1e-10 invariants.
inline std::vector<double> tilted_atoms(const std::function<double(std::size_t)>& log_beta,
                                        double anchor, double theta_max, std::size_t n0 = 256) {
    for (std::size_t count = n0; count <= 8192; count *= 2) {
        std::vector<double> lw(count), lt(count);
        for (std::size_t n = 0; n < count; ++n) {
            lw[n] = log_beta(n) + anchor * static_cast<double>(n);
            lt[n] = lw[n] + theta_max * static_cast<double>(n);
        }
        const double s = log_sum_exp(lt);
        if (lt[count - 1] < s + std::log(1e-15) && lt[count - 1] < lt[count - 2]) {
            const double z = log_sum_exp(lw);
            std::vector<double> w(count);
            for (std::size_t n = 0; n < count; ++n) w[n] = std::exp(lw[n] - z);
            return w;
        }
    }
    throw NonConvergent("tilted_atoms: tilted tail does not clear 1e-15 by n = 8192");
}

constexpr std::size_t kPipelineOrder = 220;

inline std::shared_ptr<DiscreteIdFamily> pipeline_from_log_beta(
    const std::function<double(std::size_t)>& log_beta, std::size_t order = kPipelineOrder) {
    std::vector<double> beta(order);
    for (std::size_t n = 0; n < order; ++n) beta[n] = std::exp(log_beta(n));
    return std::make_shared<DiscreteIdFamily>(DiscreteIdFamily::from_beta(std::move(beta)));
}

inline std::size_t positive_integer(double m, const char* who) {
    if (!(m >= 1.0) || m != std::floor(m))
        throw Error(std::string(who) + ": parameter must be a positive integer");
    return static_cast<std::size_t>(m);
}

inline std::string format_param(double p) {
    std::string s = std::to_string(p);
    while (s.size() > 1 && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

inline Family make_poisson() {
    Family f;
    f.name = "poisson";
    f.discrete = true;
    auto lb = [](std::size_t n) { return -1.0 - log_factorial(n); };
    f.nef = std::make_shared<Nef>("poisson", AtomBasis{tilted_atoms(lb, 0.0, 2.0, 64)}, -30.0, 3.0);
    f.pipeline = pipeline_from_log_beta([](std::size_t n) { return -log_factorial(n); });
    f.phi = qvf_rf(QvfSpec{0.0, 1.0, 0.0});
    f.v_coeffs = {0.0, 1.0};
    f.vf = [](double u) { return u; };
    f.probes = linspace(-2.0, 2.0, 12);
    f.mean_domain = {0.0, std::exp(3.0)};
    f.exact_cumulants = [](double th) {
        const double e = std::exp(th);
        return Cumulants{e - 1.0, e, e};
    };
    f.sampler_by_mean = [](RngStream& g, double mean) {
        return static_cast<double>(g.poisson(mean));
    };
    return f;
}

inline Family make_binomial(double md) {
    const std::size_t m = positive_integer(md, "binomial");
    Family f;
    f.name = "binomial(" + format_param(md) + ")";
    f.discrete = true;
    f.phi = qvf_rf(qvf_binomial(static_cast<double>(m)));  // m = 1 raises BernoulliNoRf
    const double dm = static_cast<double>(m);
    auto lb = [m, dm](std::size_t n) {
        if (n > m) return -kInf;
        return log_factorial(m) - log_factorial(n) - log_factorial(m - n) - dm * std::log(2.0);
    };
    std::vector<double> w(m + 1);
    for (std::size_t n = 0; n <= m; ++n) w[n] = std::exp(lb(n));
    f.nef = std::make_shared<Nef>(f.name, AtomBasis{w}, -30.0, 30.0);
    // no pipeline: the binomial basis is not infinitely divisible (c_2 < 0)
    f.v_coeffs = {0.0, 1.0, -1.0 / dm};
    f.vf = [dm](double u) { return u - u * u / dm; };
    f.probes = linspace(-2.0, 2.0, 12);
    f.mean_domain = {0.0, dm};
    f.exact_cumulants = [dm](double th) {
        const double p = std::exp(th) / (1.0 + std::exp(th));
        return Cumulants{dm * std::log((1.0 + std::exp(th)) / 2.0), dm * p, dm * p * (1.0 - p)};
    };
    f.sampler_by_mean = [m, dm](RngStream& g, double mean) {
        return static_cast<double>(g.binomial(m, mean / dm));
    };
    return f;
}

inline Family make_negbin(double m) {
    if (!(m > 0.0)) throw Error("negbin: parameter must be positive");
    Family f;
    f.name = "negbin(" + format_param(m) + ")";
    f.discrete = true;
    // basis NB(m, q = 1/2): C(m+n-1, n) q^n (1-q)^m, normalized exactly
    auto lb = [m](std::size_t n) {
        const double dn = static_cast<double>(n);
        return std::lgamma(m + dn) - std::lgamma(m) - log_factorial(n) -
               (m + dn) * std::log(2.0);
    };
    f.nef = std::make_shared<Nef>(f.name, AtomBasis{tilted_atoms(lb, 0.0, 0.5)}, -30.0,
                                  std::log(2.0));
    f.pipeline = pipeline_from_log_beta([m, lb](std::size_t n) {
        return lb(n) + (m + static_cast<double>(n)) * std::log(2.0);
    });
    f.phi = qvf_rf(qvf_negbin(m));
    f.v_coeffs = {0.0, 1.0, 1.0 / m};
    f.vf = [m](double u) { return u + u * u / m; };
    f.probes = linspace(-2.0, 0.5, 12);
    f.mean_domain = {0.0, kInf};
    f.exact_cumulants = [m](double th) {
        const double t = 0.5 * std::exp(th);
        return Cumulants{m * std::log(0.5 / (1.0 - t)), m * t / (1.0 - t),
                         m * t / ((1.0 - t) * (1.0 - t))};
    };
    f.sampler_by_mean = [m](RngStream& g, double mean) {
        return static_cast<double>(g.negative_binomial(m, mean / (m + mean)));
    };
    return f;
}

inline Family make_gamma(double m) {
    if (!(m > 0.0)) throw Error("gamma: parameter must be positive");
    Family f;
    f.name = "gamma(" + format_param(m) + ")";
    DensityBasis d;
    d.pdf = [m](double x) {
        if (x <= 0.0) return 0.0;
        return std::exp((m - 1.0) * std::log(x) - x - std::lgamma(m));
    };
    d.lo = 0.0;
    d.hi = kInf;
    d.left_power = m < 1.0 ? m - 1.0 : 0.0;
    f.nef = std::make_shared<Nef>(f.name, d, -50.0, 1.0);
    f.phi = qvf_rf(qvf_gamma(m));
    f.v_coeffs = {0.0, 0.0, 1.0 / m};
    f.vf = [m](double u) { return u * u / m; };
    f.probes = linspace(-2.0, 0.5, 12);
    f.mean_domain = {0.0, kInf};
    f.exact_cumulants = [m](double th) {
        const double s = 1.0 - th;
        return Cumulants{-m * std::log(s), m / s, m / (s * s)};
    };
    f.sampler_by_mean = [m](RngStream& g, double mean) { return g.gamma(m, m / mean); };
    return f;
}

inline Family make_normal() {
    Family f;
    f.name = "normal";
    DensityBasis d;
    d.pdf = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846); };
    d.lo = -kInf;
    d.hi = kInf;
    f.nef = std::make_shared<Nef>("normal", d, -30.0, 30.0);
    f.phi = qvf_rf(QvfSpec{1.0, 0.0, 0.0});
    f.v_coeffs = {1.0};
    f.vf = [](double) { return 1.0; };
    f.probes = linspace(-2.0, 2.0, 12);
    f.mean_domain = {-kInf, kInf};
    f.exact_cumulants = [](double th) { return Cumulants{0.5 * th * th, th, 1.0}; };
    f.sampler_by_mean = [](RngStream& g, double mean) { return mean + g.normal(); };
    return f;
}

// Generalized hyperbolic secant. Density 2^{m-2}/(pi Gamma(m)) |Gamma(m/2 + ix/2)|^2
// on the whole line; Theta = (-pi/2, pi/2). No standard sampler.
inline Family make_ghs(double m) {
    if (!(m > 0.0)) throw Error("ghs: parameter must be positive");
    Family f;
    f.name = "ghs(" + format_param(m) + ")";
    const double logpref = (m - 2.0) * std::log(2.0) - std::log(3.14159265358979323846) -
                           std::lgamma(m);
    DensityBasis d;
    d.pdf = [m, logpref](double x) {
        const std::complex<double> lg = log_gamma(std::complex<double>(0.5 * m, 0.5 * x));
        return std::exp(logpref + 2.0 * lg.real());
    };
    d.lo = -kInf;
    d.hi = kInf;
    f.nef = std::make_shared<Nef>(f.name, d, -1.5707963267948966, 1.5707963267948966);
    f.phi = qvf_rf(qvf_ghs(m));
    f.v_coeffs = {m, 0.0, 1.0 / m};
    f.vf = [m](double u) { return m + u * u / m; };
    f.probes = linspace(-1.3, 1.3, 12);
    f.mean_domain = {-kInf, kInf};
    f.exact_cumulants = [m](double th) {
        return Cumulants{-m * std::log(std::cos(th)), m * std::tan(th),
                         m / (std::cos(th) * std::cos(th))};
    };
    return f;
}

// Shared scaffolding for the four Lagrange-route discrete families. The raw
// bases have radius e^{theta_r} < inf, so the registered Nef uses the basis
// tilted to anchor = theta_r - 1, placing the standardized Theta right edge
// at +1. phi comes from the raw pipeline and is unchanged by the tilt.
inline Family make_lagrange_discrete(const std::string& name, double theta_r,
                                     const std::function<double(std::size_t)>& log_beta,
                                     std::shared_ptr<DiscreteIdFamily> pipeline,
                                     std::vector<double> v_coeffs) {
    Family f;
    f.name = name;
    f.discrete = true;
    f.tilt_anchor = theta_r - 1.0;
    f.nef = std::make_shared<Nef>(name, AtomBasis{tilted_atoms(log_beta, f.tilt_anchor, 0.5)},
                                  -30.0, 1.0);
    f.pipeline = std::move(pipeline);
    f.phi = f.pipeline->reduction();
    f.v_coeffs = std::move(v_coeffs);
    const std::vector<double> vc = f.v_coeffs;
    f.vf = [vc](double u) { return polyval(vc, u); };
    f.probes = linspace(-2.0, 0.5, 12);
    f.mean_domain = {0.0, kInf};
    return f;
}

inline Family make_abel() {
    auto lb = [](std::size_t n) {
        if (n == 0) return 0.0;
        return (static_cast<double>(n) - 1.0) * std::log(static_cast<double>(n) + 1.0) -
               log_factorial(n);
    };
    return make_lagrange_discrete("abel", -1.0, lb, pipeline_from_log_beta(lb),
                                  {0.0, 1.0, 2.0, 1.0});
}

inline Family make_takacs() {
    auto lb = [](std::size_t n) {
        return log_factorial(2 * n) - 2.0 * log_factorial(n) -
               std::log(static_cast<double>(n) + 1.0);
    };
    return make_lagrange_discrete("takacs", -std::log(4.0), lb, pipeline_from_log_beta(lb),
                                  {0.0, 1.0, 3.0, 2.0});
}

inline Family make_strict_arcsine() {
    auto lb = [](std::size_t n) { return log_arcsine_polynomial(1.0, n) - log_factorial(n); };
    return make_lagrange_discrete("strict-arcsine", 0.0, lb, pipeline_from_log_beta(lb),
                                  {0.0, 1.0, 0.0, 1.0});
}

inline Family make_large_arcsine() {
    // atoms from the closed product form p_n(n+1)/(n+1)!; the pipeline runs
    // the constructive Lagrange route, and the two are cross-checked in tests
    auto lb = [](std::size_t n) {
        return log_arcsine_polynomial(static_cast<double>(n) + 1.0, n) - log_factorial(n + 1);
    };
    auto pipe = std::make_shared<DiscreteIdFamily>(
        lagrange_family(large_arcsine_generator(kPipelineOrder + 2), kPipelineOrder));
    const double theta_r = -(0.25 * 3.14159265358979323846 + 0.5 * std::log(2.0));
    return make_lagrange_discrete("large-arcsine", theta_r, lb, std::move(pipe),
                                  {0.0, 1.0, 2.0, 2.0});
}

inline Family make_inverse_gaussian() {
    Family f;
    f.name = "inverse-gaussian";
    f.tilt_anchor = -1.0;
    f.identity_tol = 1e-4;
    const double logL1 = -std::sqrt(2.0);  // log transform of the raw basis at -1
    DensityBasis d;
    d.pdf = [logL1](double x) {
        if (x <= 0.0) return 0.0;
        return ig_basis_density(x) * std::exp(-x - logL1);
    };
    d.lo = 0.0;
    d.hi = kInf;
    f.nef = std::make_shared<Nef>("inverse-gaussian", d, -50.0, 1.0);
    f.phi = ig_rf();  // validated against the transform oracle at construction
    f.v_coeffs = {0.0, 0.0, 0.0, 1.0};
    f.vf = [](double u) { return u * u * u; };
    f.probes = linspace(-4.0, 0.5, 12);
    f.mean_domain = {0.0, kInf};
    f.exact_cumulants = [](double th) {
        const double s = 2.0 * (1.0 - th);
        return Cumulants{std::sqrt(2.0) - std::sqrt(s), 1.0 / std::sqrt(s), std::pow(s, -1.5)};
    };
    return f;
}

inline Family make_ressel() {
    Family f;
    f.name = "ressel";
    f.tilt_anchor = -1.0;
    f.identity_tol = 1e-2;  // grid path
    const double L1 = laplace_oracle(ressel_basis_density, -1.0);
    DensityBasis d;
    d.pdf = [L1](double x) {
        if (x <= 0.0) return 0.0;
        return ressel_basis_density(x) * std::exp(-x) / L1;
    };
    d.lo = 0.0;
    d.hi = kInf;
    f.nef = std::make_shared<Nef>("ressel", d, -50.0, 1.0);
    f.phi = ressel_rf();
    // the x^x log cusp at 0 plus the 8001-node lerp in phi stall the generic
    // support quadrature; the smoothing substitution in laplace_oracle is the
    // path the grid build was validated on, so the identity uses it too
    {
        ReductionFunction phi = f.phi;
        f.expectation_override = [phi](double th) {
            const double tp = th - 1.0;
            const double num = laplace_oracle(
                [&phi](double x) { return phi.eval(x) * ressel_basis_density(x); }, tp);
            return num / laplace_oracle(ressel_basis_density, tp);
        };
    }
    f.v_coeffs = {0.0, 0.0, 1.0, 1.0};
    f.vf = [](double u) { return u * u * (1.0 + u); };
    f.probes = linspace(-2.0, 0.2, 12);
    f.mean_domain = {0.0, kInf};
    // kappa'' = L^2/(1-L)^3 (transform of rho = sum_m C(m,2) beta^{*m});
    // integrating the ODE kappa''= d kappa'/d theta with L' = L kappa' and
    // kappa' -> 0 as L -> 0 gives kappa' = L/(1-L) exactly.
    f.exact_cumulants = [L1](double th) {
        const double L = laplace_oracle(ressel_basis_density, th - 1.0);
        const double om = 1.0 - L;
        return Cumulants{std::log(L / L1), L / om, L * L / (om * om * om)};
    };
    return f;
}

inline Family make_pvf(double r) {
    const PvfSpec spec(r);
    Family f;
    f.name = "pvf(" + format_param(r) + ")";
    f.tilt_anchor = -1.0;
    f.identity_tol = spec.atom_case() ? 1e-4 : 1e-3;
    f.phi = pvf_rf(spec);
    f.vf = [spec](double u) { return spec.a * std::pow(u, spec.r); };
    // raw thetas span [-3, -0.5], the window the grid build is validated on
    f.probes = linspace(-2.0, 0.5, 12);
    f.mean_domain = {0.0, kInf};
    const double k_anchor = spec.kappa(-1.0);
    f.exact_cumulants = [spec, k_anchor](double th) {
        return Cumulants{spec.kappa(th - 1.0) - k_anchor, spec.kappa1(th - 1.0),
                         spec.kappa2(th - 1.0)};
    };
    // beta is delta_0 + density (case 1) or a pure density (case 2); the Nef
    // class carries neither mixture, so the expectation is wired directly.
    // phi(0) = 0 in the atom case, so the atom never contributes.
    if (spec.atom_case()) {
        ReductionFunction phi = f.phi;
        f.expectation_override = [spec, phi](double th) {
            const double tp = th - 1.0;
            const double num = laplace_oracle(
                [&spec, &phi](double x) { return phi.eval(x) * pvf_beta_density(spec, x); }, tp);
            return num / spec.laplace(tp);
        };
    } else {
        auto qgrid = std::make_shared<GridDensity>(pvf_density(spec, PvfKind::beta, 60.0, 4001));
        ReductionFunction phi = f.phi;
        f.expectation_override = [spec, phi, qgrid](double th) {
            const double tp = th - 1.0;
            const double num = laplace_oracle(
                [&phi, &qgrid](double x) { return phi.eval(x) * qgrid->value_at(x); }, tp);
            return num / spec.laplace(tp);
        };
    }
    return f;
}

}  // namespace fam_detail

// Template names accepted by make_family; parameterized ones take a numeric
// argument in parentheses, e.g. "binomial(2)" or "pvf(1.5)".
inline std::vector<std::string> registry_names() {
    return {"poisson",        "binomial(m)",   "negbin(m)",        "gamma(m)",
            "normal",         "ghs(m)",        "abel",             "takacs",
            "strict-arcsine", "large-arcsine", "inverse-gaussian", "ressel",
            "pvf(r)"};
}

// Concrete instances covering every registered name (both pvf branches).
inline std::vector<std::string> registry_default_instances() {
    return {"poisson",        "binomial(2)",   "negbin(2)",        "gamma(2)",
            "normal",         "ghs(2)",        "abel",             "takacs",
            "strict-arcsine", "large-arcsine", "inverse-gaussian", "ressel",
            "pvf(1.5)",       "pvf(2.5)"};
}

inline Family make_family(const std::string& request) {
    std::string s;
    for (char c : request)
        if (c != ' ' && c != '\t') s.push_back(c);
    std::string head = s;
    double param = 0.0;
    bool has_param = false;
    const std::size_t open = s.find('(');
    if (open != std::string::npos) {
        if (s.back() != ')') throw Error("make_family: malformed request '" + request + "'");
        head = s.substr(0, open);
        const std::string inner = s.substr(open + 1, s.size() - open - 2);
        try {
            std::size_t used = 0;
            param = std::stod(inner, &used);
            if (used != inner.size()) throw Error("");
        } catch (...) {
            throw Error("make_family: bad parameter '" + inner + "' in '" + request + "'");
        }
        has_param = true;
    }
    auto need = [&](bool want) {
        if (want != has_param)
            throw Error("make_family: '" + head + "' " +
                        (want ? "requires a parameter" : "takes no parameter"));
    };
    using namespace fam_detail;
    if (head == "poisson") { need(false); return make_poisson(); }
    if (head == "binomial") { need(true); return make_binomial(param); }
    if (head == "negbin") { need(true); return make_negbin(param); }
    if (head == "gamma") { need(true); return make_gamma(param); }
    if (head == "normal") { need(false); return make_normal(); }
    if (head == "ghs") { need(true); return make_ghs(param); }
    if (head == "abel") { need(false); return make_abel(); }
    if (head == "takacs") { need(false); return make_takacs(); }
    if (head == "strict-arcsine") { need(false); return make_strict_arcsine(); }
    if (head == "large-arcsine") { need(false); return make_large_arcsine(); }
    if (head == "inverse-gaussian") { need(false); return make_inverse_gaussian(); }
    if (head == "ressel") { need(false); return make_ressel(); }
    if (head == "pvf") { need(true); return make_pvf(param); }
    std::string known;
    for (const auto& n : registry_names()) known += (known.empty() ? "" : ", ") + n;
    throw Error("make_family: unknown family '" + request + "'; known: " + known);
}

}  // namespace nef
