#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "continuous_rf.hpp"
#include "errors.hpp"
#include "families.hpp"
#include "parallel.hpp"

namespace nef {

struct IdentityCheck {
    double theta = 0.0;
    double expectation = 0.0;  // E_theta[phi]
    double kappa2 = 0.0;
    double rel_error = 0.0;
};

struct FamilyValidation {
    std::string family;

    double identity_tol = 0.0;
    std::vector<IdentityCheck> identity;
    double identity_max_rel = 0.0;
    bool identity_pass = false;

    std::string vf_path;  // which cumulant evaluation certified the vf
    double vf_tol = 0.0;  // absolute, on |kappa'' - v(kappa')|
    double vf_max_abs = 0.0;
    bool vf_pass = false;

    // transform-oracle reports for the series formulas; rows whose candidate
    // is a "displayed" variant measure known discrepancies and stay red by
    // design, so they are excluded from the aggregate verdict
    std::vector<FormulaReport> formula;
    bool formula_pass = true;

    bool pass = false;
};

namespace validation_detail {

// Standardized ressel moments straight from the transform; the basis density
// has a log cusp at 0, so everything routes through the smoothing oracle.
// The anchor normalization cancels in the ratios.
inline std::pair<double, double> ressel_moments(double theta) {
    const double t = theta - 1.0;
    const double l0 = laplace_oracle(ressel_basis_density, t);
    const double l1 =
        laplace_oracle([](double x) { return x * ressel_basis_density(x); }, t);
    const double l2 =
        laplace_oracle([](double x) { return x * x * ressel_basis_density(x); }, t);
    const double mean = l1 / l0;
    return {mean, l2 / l0 - mean * mean};
}

inline double parse_parameter(const std::string& name) {
    const auto open = name.find('(');
    const auto close = name.rfind(')');
    return std::stod(name.substr(open + 1, close - open - 1));
}

}  // namespace validation_detail

// Master identity E_theta[phi(X)] = kappa''(theta) at every probe, the
// variance-function certification kappa'' = v(kappa'), and (where a series
// formula ships) the transform-oracle reports. tol_override replaces the
// family's identity tolerance when positive.
inline FamilyValidation validate_family(const std::string& request,
                                        double identity_tol_override = 0.0) {
    const Family fam = make_family(request);
    FamilyValidation out;
    out.family = fam.name;
    out.identity_tol = identity_tol_override > 0.0 ? identity_tol_override : fam.identity_tol;

    for (double th : fam.probes) {
        IdentityCheck chk;
        chk.theta = th;
        chk.expectation = fam.expectation_phi(th);
        chk.kappa2 = fam.cumulants(th).variance;
        chk.rel_error = std::abs(chk.expectation - chk.kappa2) / std::abs(chk.kappa2);
        out.identity_max_rel = std::max(out.identity_max_rel, chk.rel_error);
        out.identity.push_back(chk);
    }
    out.identity_pass = out.identity_max_rel <= out.identity_tol;

    if (fam.name.rfind("pvf", 0) == 0) {
        // fractional-power vf; the closed cumulant forms are certified for
        // mutual consistency (the transform itself is covered below)
        out.vf_path = "closed-form cumulants";
        out.vf_tol = 1e-8;
        for (double th : fam.probes) {
            const auto c = fam.cumulants(th);
            out.vf_max_abs = std::max(out.vf_max_abs, std::abs(c.variance - fam.vf(c.mean)));
        }
    } else if (fam.name == "ressel") {
        out.vf_path = "transform moments";
        out.vf_tol = 1e-5;
        for (double th : fam.probes) {
            const auto [mean, var] = validation_detail::ressel_moments(th);
            out.vf_max_abs = std::max(out.vf_max_abs, std::abs(var - fam.vf(mean)));
        }
    } else {
        // basis numerics, independent of the closed cumulant forms
        out.vf_path = fam.nef->is_atomic() ? "tilted atom sums" : "density quadrature";
        out.vf_tol = fam.nef->is_atomic() ? 1e-8 : 1e-5;
        for (double th : fam.probes) {
            const auto c = fam.nef->cumulant_derivs(th);
            out.vf_max_abs = std::max(out.vf_max_abs, std::abs(c.variance - fam.vf(c.mean)));
        }
    }
    out.vf_pass = out.vf_max_abs <= out.vf_tol;

    if (fam.name == "inverse-gaussian") {
        out.formula.push_back(ig_validation_report(false));
        out.formula.push_back(ig_validation_report(true));  // displayed variant, stays red
    } else if (fam.name.rfind("pvf", 0) == 0) {
        const PvfSpec spec(validation_detail::parse_parameter(fam.name));
        out.formula = pvf_validation_reports(spec);
    }
    for (const auto& rep : out.formula)
        if (rep.candidate.find("displayed") == std::string::npos && !rep.pass)
            out.formula_pass = false;

    out.pass = out.identity_pass && out.vf_pass && out.formula_pass;
    return out;
}

// Whole-registry sweep; families are independent, so the cells run on the
// capped pool and land in registry order.
inline std::vector<FamilyValidation> validate_registry(double identity_tol_override = 0.0) {
    const auto names = registry_default_instances();
    std::vector<FamilyValidation> out(names.size());
    parallel_for(names.size(), [&](std::size_t i) {
        out[i] = validate_family(names[i], identity_tol_override);
    });
    return out;
}

}  // namespace nef
