#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "nef/nef.hpp"

namespace {

nef::Nef poisson1(std::size_t nmax = 80) {
    std::vector<double> w(nmax + 1);
    double t = std::exp(-1.0);
    for (std::size_t n = 0; n <= nmax; ++n) {
        w[n] = t;
        t /= static_cast<double>(n + 1);
    }
    return nef::Nef("poisson", nef::AtomBasis{w}, -30.0, 3.5);
}

nef::Nef binom2() {
    return nef::Nef("binomial2", nef::AtomBasis{{0.25, 0.5, 0.25}}, -40.0, 40.0);
}

nef::Nef gamma1() {
    nef::DensityBasis d;
    d.pdf = [](double x) { return std::exp(-x); };
    d.lo = 0.0;
    d.hi = nef::kInf;
    return nef::Nef("gamma1", d, -nef::kInf, 1.0);
}

nef::Nef std_normal() {
    nef::DensityBasis d;
    d.pdf = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846); };
    d.lo = -nef::kInf;
    d.hi = nef::kInf;
    return nef::Nef("normal", d, -nef::kInf, nef::kInf);
}

}  // namespace

TEST_CASE("laplace transform of atom bases") {
    auto p = poisson1();
    CHECK(std::abs(p.laplace(0.0) - 1.0) < 1e-12);
    CHECK(std::abs(p.laplace(std::log(2.0)) - std::exp(1.0)) < 1e-12);

    auto b = binom2();
    for (double th : {-1.0, 0.0, 0.7, 2.0}) {
        double want = std::pow(1.0 + std::exp(th), 2.0) / 4.0;
        CHECK(std::abs(b.laplace(th) - want) < 1e-12 * want);
    }
}

TEST_CASE("laplace transform of density bases by quadrature") {
    auto g = gamma1();
    for (double th : {-2.0, -0.5, 0.0, 0.5, 0.9}) {
        double want = 1.0 / (1.0 - th);
        CHECK(std::abs(g.laplace(th) - want) < 1e-9 * want);
    }
    auto n = std_normal();
    for (double th : {-2.0, 0.0, 1.5, 3.0}) {
        double want = std::exp(0.5 * th * th);
        CHECK(std::abs(n.laplace(th) - want) < 1e-8 * want);
    }
}

TEST_CASE("cumulant derivatives: closed-form families") {
    auto p = poisson1();
    auto c0 = p.cumulant_derivs(0.0);
    CHECK(std::abs(c0.kappa) < 1e-12);
    CHECK(std::abs(c0.mean - 1.0) < 1e-12);
    CHECK(std::abs(c0.variance - 1.0) < 1e-12);

    auto b = binom2();
    auto cb = b.cumulant_derivs(0.0);
    CHECK(std::abs(cb.variance - 0.5) < 1e-12);

    auto nrm = std_normal();
    for (double th : {-2.0, 0.0, 1.5}) {
        auto c = nrm.cumulant_derivs(th);
        CHECK(std::abs(c.kappa - 0.5 * th * th) < 1e-8 * std::max(1.0, 0.5 * th * th));
        CHECK(std::abs(c.mean - th) < 1e-8);
        CHECK(std::abs(c.variance - 1.0) < 1e-7);
    }

    auto g = gamma1();
    for (double th : {-1.0, 0.0, 0.5}) {
        auto c = g.cumulant_derivs(th);
        CHECK(std::abs(c.mean - 1.0 / (1.0 - th)) < 1e-8);
        CHECK(std::abs(c.variance - 1.0 / ((1.0 - th) * (1.0 - th))) < 1e-7);
    }
}

TEST_CASE("finite-difference oracle for cumulant derivatives") {
    auto p = poisson1();
    double th = 0.3;
    auto c = p.cumulant_derivs(th);
    std::vector<double> hs{1e-3, 1e-4};
    std::vector<double> errs1, errs2;
    for (double h : hs) {
        auto plus = p.cumulant_derivs(th + h);
        auto minus = p.cumulant_derivs(th - h);
        double kp = (plus.kappa - minus.kappa) / (2.0 * h);
        double kpp = (plus.mean - minus.mean) / (2.0 * h);
        errs1.push_back(std::abs(kp - c.mean));
        errs2.push_back(std::abs(kpp - c.variance));
    }
    // error ~ C h^2: going from h=1e-3 to 1e-4 should shrink ~100x (order >= 1.9),
    // unless already at roundoff
    if (errs1[1] > 1e-11)
        CHECK(std::log10(errs1[0] / errs1[1]) >= 1.9);
    if (errs2[1] > 1e-11)
        CHECK(std::log10(errs2[0] / errs2[1]) >= 1.9);
}

TEST_CASE("tilted pmf and pdf values") {
    auto p = poisson1();
    CHECK(std::abs(p.tilted_pmf_or_pdf(std::log(2.0), 0.0) - std::exp(-2.0)) < 1e-13);
    auto b = binom2();
    for (double th : {-0.5, 0.8}) {
        double want = std::exp(2.0 * th) / std::pow(1.0 + std::exp(th), 2.0);
        CHECK(std::abs(b.tilted_pmf_or_pdf(th, 2.0) - want) < 1e-13);
    }
    auto table = p.tilted_pmf_table(0.7);
    double s = 0.0;
    for (double v : table) s += v;
    CHECK(std::abs(s - 1.0) < 1e-10);
}

TEST_CASE("mean_inverse recovers theta") {
    auto p = poisson1();
    CHECK(std::abs(p.mean_inverse(1.0)) < 1e-10);
    CHECK(std::abs(p.mean_inverse(2.0) - std::log(2.0)) < 1e-10);
    auto g = gamma1();
    CHECK(std::abs(g.mean_inverse(2.0) - 0.5) < 1e-9);
    for (double th = -1.5; th <= 1.5; th += 0.25) {
        double mu = p.cumulant_derivs(th).mean;
        CHECK(std::abs(p.mean_inverse(mu) - th) < 1e-9);
    }
}

TEST_CASE("mean_inverse rejects means outside the range") {
    auto b = binom2();  // means live in (0, 2)
    CHECK_THROWS_AS(b.mean_inverse(2.5), nef::MeanOutOfDomain);
    CHECK_THROWS_AS(b.mean_inverse(-0.1), nef::MeanOutOfDomain);
}

TEST_CASE("theta domain is enforced") {
    auto g = gamma1();
    CHECK_THROWS_AS(g.laplace(1.0), nef::ThetaOutOfDomain);
    CHECK_THROWS_AS(g.cumulant_derivs(1.2), nef::ThetaOutOfDomain);
    auto p = poisson1();
    CHECK_THROWS_AS(p.laplace(5.0), nef::ThetaOutOfDomain);
}

TEST_CASE("sampling: CLT band, empirical pmf, determinism") {
    auto p = poisson1();
    auto draws = p.sample(0.0, 42u, 100000);
    double mean = 0.0;
    for (double d : draws) mean += d;
    mean /= static_cast<double>(draws.size());
    CHECK(std::abs(mean - 1.0) < 4.0 / std::sqrt(100000.0));

    auto b = binom2();
    auto bd = b.sample(0.0, 7u, 100000);
    double f0 = 0, f1 = 0, f2 = 0;
    for (double d : bd) {
        if (d == 0.0) ++f0;
        else if (d == 1.0) ++f1;
        else ++f2;
    }
    CHECK(std::abs(f0 / 1e5 - 0.25) < 0.01);
    CHECK(std::abs(f1 / 1e5 - 0.5) < 0.01);
    CHECK(std::abs(f2 / 1e5 - 0.25) < 0.01);

    auto s1 = p.sample(0.4, 123u, 5);
    auto s2 = p.sample(0.4, 123u, 5);
    REQUIRE(s1.size() == s2.size());
    for (std::size_t i = 0; i < s1.size(); ++i) CHECK(s1[i] == s2[i]);
}

TEST_CASE("continuous sampling requires a registered sampler") {
    auto g = gamma1();
    CHECK_THROWS_AS(g.sample(0.0, 1u, 3), nef::SamplerUnavailable);
    g.set_sampler([](nef::RngStream& rng, double th) { return rng.gamma(1.0, 1.0 - th); });
    auto d = g.sample(0.5, 11u, 50000);
    double mean = 0.0;
    for (double x : d) mean += x;
    mean /= static_cast<double>(d.size());
    CHECK(std::abs(mean - 2.0) < 4.0 * 2.0 / std::sqrt(50000.0));
}

TEST_CASE("theta right-endpoint estimate from coefficient decay") {
    std::vector<double> geo(60);
    for (std::size_t n = 0; n < geo.size(); ++n) geo[n] = std::pow(0.5, static_cast<double>(n));
    CHECK(std::abs(nef::estimate_theta_right(geo) - std::log(2.0)) < 1e-12);
}
