#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "nef/discrete_rf.hpp"
#include "nef/nef.hpp"

namespace {

std::vector<double> poisson_beta(std::size_t nmax) {
    std::vector<double> w(nmax + 1);
    double t = std::exp(-1.0);
    for (std::size_t n = 0; n <= nmax; ++n) {
        w[n] = t;
        t /= static_cast<double>(n + 1);
    }
    return w;
}

std::vector<double> negbin_beta(double m, std::size_t nmax) {
    // C(m+n-1, n) (1/2)^{m+n}
    std::vector<double> w(nmax + 1);
    w[0] = std::pow(0.5, m);
    for (std::size_t n = 0; n < nmax; ++n)
        w[n + 1] = w[n] * 0.5 * (m + static_cast<double>(n)) / (static_cast<double>(n) + 1.0);
    return w;
}

}  // namespace

TEST_CASE("cumulant coefficients: poisson and strict arcsine") {
    auto c = nef::cumulant_coeffs(poisson_beta(40));
    CHECK(std::abs(c[0] + 1.0) < 1e-14);
    CHECK(std::abs(c[1] - 1.0) < 1e-14);
    for (std::size_t n = 2; n <= 40; ++n) CHECK(std::abs(c[n]) < 1e-13);

    auto ca = nef::cumulant_coeffs(nef::strict_arcsine_beta(30));
    CHECK(std::abs(ca[0]) < 1e-14);
    CHECK(std::abs(ca[1] - 1.0) < 1e-13);
    CHECK(std::abs(ca[3] - 1.0 / 6.0) < 1e-13);
    CHECK(std::abs(ca[5] - 3.0 / 40.0) < 1e-13);
    for (std::size_t n = 2; n <= 30; n += 2) CHECK(std::abs(ca[n]) < 1e-12);
}

TEST_CASE("cumulant coefficients reject bad bases") {
    CHECK_THROWS_AS(nef::cumulant_coeffs({1.0, 0.0, 0.0}), nef::Error);
    std::vector<double> bernoulli(12, 0.0);
    bernoulli[0] = 0.5;
    bernoulli[1] = 0.5;
    CHECK_THROWS_AS(nef::cumulant_coeffs(bernoulli), nef::NotInfinitelyDivisible);
}

TEST_CASE("rho: poisson is a unit mass at 1, strict arcsine matches the direct expansion") {
    auto rho = nef::rho_from_c(nef::cumulant_coeffs(poisson_beta(40)));
    CHECK(std::abs(rho[1] - 1.0) < 1e-13);
    for (std::size_t n = 2; n <= 40; ++n) CHECK(std::abs(rho[n]) < 1e-10);
    CHECK(rho[0] == 0.0);

    // oracle: kappa'' = e^t (1 - e^{2t})^{-3/2} = sum_k a_k e^{(2k+1)t}
    // with a_0 = 1, a_k = a_{k-1} (2k+1)/(2k)
    auto rho_a = nef::rho_from_c(nef::cumulant_coeffs(nef::strict_arcsine_beta(41)));
    double a = 1.0;
    for (std::size_t k = 0; 2 * k + 1 <= 41; ++k) {
        if (k > 0) a *= static_cast<double>(2 * k + 1) / static_cast<double>(2 * k);
        CHECK(std::abs(rho_a[2 * k + 1] - a) < 1e-10 * a);
    }
    CHECK(std::abs(rho_a[3] - 1.5) < 1e-12);
    CHECK(std::abs(rho_a[5] - 15.0 / 8.0) < 1e-12);
}

TEST_CASE("alpha convolution") {
    auto beta = poisson_beta(40);
    auto fam = nef::DiscreteIdFamily::from_beta(beta);
    for (std::size_t n = 1; n <= 40; ++n)
        CHECK(std::abs(fam.alpha[n] - beta[n - 1]) < 1e-12 * beta[n - 1]);
    std::vector<double> zero_rho(10, 0.0);
    auto alpha = nef::alpha_convolve(beta, zero_rho);
    for (double v : alpha) CHECK(v == 0.0);
}

TEST_CASE("reduction function: poisson and negative binomial closed forms") {
    auto pois = nef::DiscreteIdFamily::from_beta(poisson_beta(40)).reduction();
    for (std::size_t n = 0; n <= 30; ++n)
        CHECK(std::abs(pois.table[n] - static_cast<double>(n)) < 1e-9);

    auto nb = nef::DiscreteIdFamily::from_beta(negbin_beta(2.0, 40)).reduction();
    for (std::size_t n = 0; n <= 20; ++n) {
        double x = static_cast<double>(n);
        double want = (2.0 * x + x * x) / 3.0;
        CHECK(std::abs(nb.table[n] - want) < 1e-8 * std::max(1.0, want));
    }
}

TEST_CASE("reduction function refuses alpha mass off the basis support") {
    nef::DiscreteIdFamily broken;
    broken.beta = {1.0, 0.0};
    broken.rho = {0.0, 1.0};
    broken.alpha = {0.0, 1.0};
    CHECK_THROWS_AS(broken.reduction(), nef::AbsoluteContinuityViolated);
}

TEST_CASE("lagrange families: abel, takacs, large arcsine bases") {
    auto abel = nef::lagrange_family(nef::abel_generator(40), 30);
    double nfact = 1.0;
    for (std::size_t n = 0; n <= 30; ++n) {
        if (n > 0) nfact *= static_cast<double>(n);
        double want = std::pow(static_cast<double>(n + 1), static_cast<double>(n) - 1.0) / nfact;
        CHECK(std::abs(abel.beta[n] - want) < 1e-10 * want);
    }

    auto takacs = nef::lagrange_family(nef::takacs_generator(40), 30);
    double cat = 1.0;  // C_0; C_{n+1} = C_n * 2(2n+1)/(n+2)
    for (std::size_t n = 0; n <= 30; ++n) {
        if (n > 0)
            cat *= 2.0 * (2.0 * static_cast<double>(n) - 1.0) / (static_cast<double>(n) + 1.0);
        CHECK(std::abs(takacs.beta[n] - cat) < 1e-10 * cat);
    }

    auto larc = nef::lagrange_family(nef::large_arcsine_generator(40), 30);
    for (std::size_t n = 0; n <= 20; ++n) {
        double want = std::exp(nef::log_arcsine_polynomial(static_cast<double>(n + 1), n) -
                               nef::log_factorial(n + 1));
        CHECK(std::abs(larc.beta[n] - want) < 1e-9 * want);
    }
}

TEST_CASE("two independent rho routes agree") {
    const std::size_t N = 30;
    struct Case {
        const char* name;
        nef::TruncatedSeries<double> g;
    };
    std::vector<Case> cases{{"abel", nef::abel_generator(N + 2)},
                            {"takacs", nef::takacs_generator(N + 2)},
                            {"large-arcsine", nef::large_arcsine_generator(N + 2)}};
    for (auto& cs : cases) {
        INFO(cs.name);
        auto fam = nef::lagrange_family(cs.g, N);
        auto rho_pipeline = nef::rho_from_c(nef::cumulant_coeffs(fam.beta));
        auto rho_gen = nef::rho_via_generator(cs.g, N);
        for (std::size_t n = 0; n <= N; ++n) {
            double scale = std::max(1e-30, std::abs(rho_pipeline[n]));
            CHECK(std::abs(rho_pipeline[n] - rho_gen[n]) < 1e-8 * scale);
        }
    }
}

TEST_CASE("abel rho closed form n^n/(n-1)!") {
    auto fam = nef::lagrange_family(nef::abel_generator(32), 30);
    auto rho = nef::rho_from_c(nef::cumulant_coeffs(fam.beta));
    double nm1fact = 1.0;
    for (std::size_t n = 1; n <= 25; ++n) {
        if (n > 1) nm1fact *= static_cast<double>(n - 1);
        double want = std::pow(static_cast<double>(n), static_cast<double>(n)) / nm1fact;
        CHECK(std::abs(rho[n] - want) < 1e-9 * want);
    }
}

TEST_CASE("rho generator route: constant g gives zero rho") {
    auto g = nef::TruncatedSeries<double>::constant(1.0, 12);
    auto rho = nef::rho_via_generator(g, 10);
    for (double v : rho) CHECK(v == 0.0);
}

TEST_CASE("arcsine polynomials") {
    CHECK(nef::arcsine_polynomial(0.7, 0) == 1.0);
    CHECK(nef::arcsine_polynomial(0.7, 1) == 0.7);
    CHECK(nef::arcsine_polynomial(2.0, 2) == 4.0);
    CHECK(nef::arcsine_polynomial(1.0, 3) == 2.0);
    CHECK(nef::arcsine_polynomial(1.0, 4) == 5.0);
    CHECK(std::abs(nef::log_arcsine_polynomial(1.0, 4) - std::log(5.0)) < 1e-14);
}

TEST_CASE("variance-function certification on a theta grid") {
    std::vector<double> grid;
    for (double th = -1.5; th <= 1.5; th += 0.25) grid.push_back(th);
    nef::Nef pois("poisson", nef::AtomBasis{poisson_beta(80)}, -30.0, 3.0);
    CHECK(nef::vf_parametric_check(pois, {0.0, 1.0}, grid) < 1e-10);

    // strict arcsine tilted to anchor theta* = -1 so the parameter interval
    // contains 0; the variance function is tilt-invariant
    auto raw = nef::strict_arcsine_beta(250);
    double s = 0.0;
    for (std::size_t n = 0; n < raw.size(); ++n) raw[n] *= std::exp(-static_cast<double>(n));
    for (double v : raw) s += v;
    for (double& v : raw) v /= s;
    nef::Nef arc("strict-arcsine", nef::AtomBasis{raw}, -40.0, 1.0);
    std::vector<double> grid2;
    for (double th = -2.0; th <= 0.8; th += 0.2) grid2.push_back(th);
    CHECK(nef::vf_parametric_check(arc, {0.0, 1.0, 0.0, 1.0}, grid2) < 1e-8);
}
