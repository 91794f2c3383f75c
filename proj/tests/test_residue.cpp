#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <cstdlib>
#include <random>

#include "nef/parallel.hpp"
#include "nef/residue.hpp"
#include "nef/series.hpp"

using Catch::Approx;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Independent residue oracle: expand 1/(a0 (u1+z)(b+z)^n) as a truncated
// complex series and read off the z^{n-1} coefficient. Long double keeps
// roundoff harmless at the benign cells this is used on.
std::complex<double> tau_series_oracle(const nef::ConjectureVf& vf) {
    using C = std::complex<long double>;
    const std::size_t ord = static_cast<std::size_t>(vf.n);
    const C u1(vf.u1.real(), vf.u1.imag());
    const C b(0.0L, 2.0L * vf.u1.imag());

    nef::TruncatedSeries<C> lin_u(ord);
    lin_u[0] = u1;
    lin_u[1] = C(1.0L);
    nef::TruncatedSeries<C> lin_b(ord);
    lin_b[0] = b;
    lin_b[1] = C(1.0L);

    nef::TruncatedSeries<C> denom = lin_u;
    for (int i = 0; i < vf.n; ++i) denom = denom * lin_b;
    const auto w = denom.inverse();
    const C res = w.at(ord - 1) / C(static_cast<long double>(vf.a0));
    const C tau = C(0.0L, -2.0L * 3.14159265358979323846L) * res;
    return {static_cast<double>(tau.real()), static_cast<double>(tau.imag())};
}

double rel_gap(std::complex<double> a, std::complex<double> b) {
    return std::abs(a - b) / std::abs(b);
}

}  // namespace

TEST_CASE("conjecture vf validates inputs and exposes the basic geometry") {
    CHECK_THROWS_AS(nef::ConjectureVf(0.0, {1.0, 1.0}, 1), nef::Error);
    CHECK_THROWS_AS(nef::ConjectureVf(-2.0, {1.0, 1.0}, 1), nef::Error);
    CHECK_THROWS_AS(nef::ConjectureVf(1.0, {1.0, 0.0}, 1), nef::Error);
    CHECK_THROWS_AS(nef::ConjectureVf(1.0, {1.0, -1.0}, 2), nef::Error);
    CHECK_THROWS_AS(nef::ConjectureVf(1.0, {0.0, 1.0}, 0), nef::Error);

    const nef::ConjectureVf vf(1.0, {1.0, 1.0}, 2);
    CHECK(vf.vprime0() == Approx(4.0));
    CHECK(vf.d() == Approx(kPi / 2.0));
    CHECK(vf.quad(3.0) == Approx(std::norm(std::complex<double>(3.0, 0.0) - vf.u1)));
    for (double u : {0.1, 1.0, 7.5}) CHECK(vf.v(u) > 0.0);
    CHECK(vf.v(1.0) == Approx(1.0 * std::pow(vf.quad(1.0), 2)));
}

TEST_CASE("big integer arithmetic matches native oracles") {
    using nef::residue_detail::BigInt;
    std::mt19937_64 gen(991);

    auto to_ld = [](const BigInt& b) {
        const auto [m, e] = b.to_ld_exp();
        return ldexpl(m, static_cast<int>(e));
    };

    std::uniform_int_distribution<std::int64_t> small(-3'000'000'000LL, 3'000'000'000LL);
    for (int trial = 0; trial < 200; ++trial) {
        const std::int64_t a = small(gen), b = small(gen);
        CHECK(to_ld(BigInt::from_i64(a) + BigInt::from_i64(b)) == static_cast<long double>(a + b));
        CHECK(to_ld(BigInt::from_i64(a) - BigInt::from_i64(b)) == static_cast<long double>(a - b));
        const __int128 prod = static_cast<__int128>(a) * b;
        CHECK(to_ld(BigInt::from_i64(a) * BigInt::from_i64(b)) ==
              static_cast<long double>(prod));
    }

    // exact scaling and exact small division invert multiplication
    std::uniform_int_distribution<std::int64_t> wide(-(1LL << 60), 1LL << 60);
    for (int trial = 0; trial < 50; ++trial) {
        const std::int64_t a = wide(gen);
        const std::uint64_t m = 1 + (gen() % 1'000'000);
        const BigInt big = BigInt::from_i64(a).shl(200);
        CHECK(to_ld(big.mul_u64(m).div_u64_exact(m)) == to_ld(big));
        const auto [mant, exp2] = big.to_ld_exp();
        const auto [mant0, exp0] = BigInt::from_i64(a).to_ld_exp();
        CHECK(mant == mant0);
        CHECK(exp2 == exp0 + 200);
    }
    CHECK_THROWS_AS(BigInt::from_i64(7).div_u64_exact(2), nef::Error);
    CHECK(BigInt{}.is_zero());
    CHECK(to_ld(BigInt::from_i64(5) - BigInt::from_i64(5)) == 0.0L);
}

TEST_CASE("residue series reproduces the closed forms") {
    const auto t1 = nef::residue_series(nef::ConjectureVf(1.0, {0.0, 1.0}, 1));
    CHECK(t1.method == "series-residue");
    CHECK(t1.tail_error == 0.0);
    CHECK(t1.tau.real() == 0.0);
    CHECK(t1.tau.imag() == Approx(kPi).epsilon(1e-14));

    const auto t2 = nef::residue_series(nef::ConjectureVf(1.0, {1.0, 1.0}, 1));
    CHECK(t2.tau.real() == Approx(-kPi / 2.0).epsilon(1e-14));
    CHECK(t2.tau.imag() == Approx(kPi / 2.0).epsilon(1e-14));

    const auto t3 = nef::residue_series(nef::ConjectureVf(2.0, {0.0, 1.0}, 1));
    CHECK(t3.tau.real() == 0.0);
    CHECK(t3.tau.imag() == Approx(kPi / 2.0).epsilon(1e-14));

    const auto t4 = nef::residue_series(nef::ConjectureVf(1.0, {0.0, 1.0}, 2));
    CHECK(t4.tau.real() == 0.0);
    CHECK(t4.tau.imag() == Approx(kPi).epsilon(1e-14));

    // n = 1 closed form tau = -pi / (a0 u1 Im u1) at a generic cell
    const std::complex<double> u1(0.7, 2.3);
    const double a0 = 3.0;
    const auto tg = nef::residue_series(nef::ConjectureVf(a0, u1, 1));
    const std::complex<double> expect = -kPi / (a0 * u1 * u1.imag());
    CHECK(rel_gap(tg.tau, expect) < 1e-14);
}

TEST_CASE("residue series agrees with a long double series oracle at benign cells") {
    const std::complex<double> cells[] = {{0.0, 1.0}, {1.0, 1.0}, {-0.3, 0.5}, {0.3, 3.0}};
    for (int n = 1; n <= 6; ++n)
        for (const auto& u1 : cells)
            for (double a0 : {1.0, 2.5}) {
                const nef::ConjectureVf vf(a0, u1, n);
                const auto got = nef::residue_series(vf).tau;
                const auto want = tau_series_oracle(vf);
                INFO("n=" << n << " u1=(" << u1.real() << "," << u1.imag() << ") a0=" << a0);
                CHECK(rel_gap(got, want) < 1e-12);
            }
}

TEST_CASE("imaginary part of tau survives severe cancellation") {
    // At |u1| >> 2 Im(u1) the real part of the residue is ~30 decades below
    // the expansion terms; the exact integer path must still pin
    // Im(tau) = pi / v'(0) and the sign law Re(tau) < 0 for Re(u1) > 0.
    struct Cell {
        double a0;
        std::complex<double> u1;
        int n;
    };
    const Cell cells[] = {
        {1.0, {2.0, 0.5}, 25}, {1.0, {-2.0, 0.5}, 25}, {2.0, {2.0, 0.5}, 13},
        {1.0, {0.3, 0.5}, 25}, {1.0, {2.0, 3.0}, 25},  {1.5, {2.0, 1.0}, 20},
    };
    for (const auto& cell : cells) {
        const nef::ConjectureVf vf(cell.a0, cell.u1, cell.n);
        const auto tau = nef::residue_series(vf).tau;
        const double want_im = kPi / vf.vprime0();
        INFO("u1=(" << cell.u1.real() << "," << cell.u1.imag() << ") n=" << cell.n);
        CHECK(std::abs(tau.imag() - want_im) < 1e-10 * want_im);
        if (cell.u1.real() > 0.0) CHECK(tau.real() < 0.0);
        if (cell.u1.real() < 0.0) CHECK(tau.real() > 0.0);
    }
}

TEST_CASE("mirroring u1 across the imaginary axis flips Re(tau) exactly") {
    for (int n : {1, 2, 5, 25})
        for (double im : {0.5, 1.0, 3.0}) {
            const auto plus = nef::residue_series(nef::ConjectureVf(1.0, {0.3, im}, n)).tau;
            const auto minus = nef::residue_series(nef::ConjectureVf(1.0, {-0.3, im}, n)).tau;
            CHECK(minus.real() == -plus.real());
            CHECK(minus.imag() == plus.imag());
        }
    // purely imaginary u1: the residue is real, so Re(tau) vanishes exactly
    for (int n : {1, 3, 25}) {
        const auto tau = nef::residue_series(nef::ConjectureVf(1.0, {0.0, 2.0}, n)).tau;
        CHECK(tau.real() == 0.0);
    }
}

TEST_CASE("contour quadrature matches the series path") {
    const auto c1 = nef::contour_tau(nef::ConjectureVf(1.0, {1.0, 1.0}, 1), 1e-8);
    CHECK(c1.method == "contour-quadrature");
    CHECK(c1.tau.real() == Approx(-kPi / 2.0).margin(1e-7));
    CHECK(c1.tau.imag() == Approx(kPi / 2.0).epsilon(1e-15));
    CHECK(c1.tail_error >= 0.0);
    CHECK(c1.tail_error < 1e-7);

    // purely imaginary u1: alpha vanishes identically
    const auto c2 = nef::contour_tau(nef::ConjectureVf(1.0, {0.0, 1.0}, 3), 1e-10);
    CHECK(c2.tau.real() == 0.0);
    CHECK(c2.tau.imag() == Approx(kPi).epsilon(1e-15));

    for (const auto& [u1, n] : std::vector<std::pair<std::complex<double>, int>>{
             {{1.0, 1.0}, 4}, {{2.0, 0.5}, 8}, {{-0.3, 1.0}, 6}}) {
        const nef::ConjectureVf vf(1.0, u1, n);
        const auto ts = nef::residue_series(vf).tau;
        const auto tc = nef::contour_tau(vf, 1e-8 * std::abs(ts)).tau;
        INFO("u1=(" << u1.real() << "," << u1.imag() << ") n=" << n);
        CHECK(std::abs(ts - tc) < 1e-6 * std::abs(ts));
    }

    CHECK_THROWS_AS(nef::contour_tau(nef::ConjectureVf(1.0, {0.0, 1.0}, 1), 0.0), nef::Error);
}

TEST_CASE("alpha has the sign of Re(u1) along the positive axis") {
    for (const auto& [u1, n] : std::vector<std::pair<std::complex<double>, int>>{
             {{2.0, 3.0}, 2}, {{0.3, 0.5}, 4}, {{1.0, 1.0}, 1}}) {
        const nef::ConjectureVf pos(1.0, u1, n);
        const nef::ConjectureVf neg(1.0, {-u1.real(), u1.imag()}, n);
        for (int i = 1; i <= 120; ++i) {
            const double z = 0.1 * i;
            CHECK(nef::alpha_integrand(pos, z) > 0.0);
            CHECK(nef::alpha_integrand(neg, z) < 0.0);
        }
        CHECK(nef::alpha_integrand(pos, 0.0) ==
              Approx(4.0 * n * u1.real() / std::pow(std::norm(u1), n + 1.0)));
    }
}

TEST_CASE("theta0 integrates the reciprocal variance function") {
    const nef::ConjectureVf vf(1.0, {0.0, 1.0}, 1);
    // 1/v = 1/(t (t^2+1)); from 1 to infinity this is (log 2)/2
    CHECK(nef::theta0(vf, 1.0) == Approx(0.5 * std::log(2.0)).epsilon(1e-9));
    CHECK(nef::theta0(vf, 1e3) == Approx(0.5 * std::log1p(1e-6)).epsilon(1e-6));

    double prev = nef::theta0(vf, 0.5);
    for (double mu0 : {1.0, 2.0, 4.0}) {
        const double cur = nef::theta0(vf, mu0);
        CHECK(cur < prev);
        prev = cur;
    }
    CHECK_THROWS_AS(nef::theta0(vf, 0.0), nef::Error);

    const nef::ConjectureVf deep(2.0, {1.0, 2.0}, 3);
    const double direct = nef::integrate_semi_infinite(
        [&](double t) { return 1.0 / deep.v(t); }, 2.0, 1e-14);
    CHECK(nef::theta0(deep, 2.0) == Approx(direct).epsilon(1e-7));
}

TEST_CASE("necessity predicate separates the three sign regimes") {
    const auto hit = nef::necessity_predicate(nef::ConjectureVf(1.0, {1.0, 1.0}, 1), 1.0);
    CHECK(hit.verdict == "VF impossible");
    CHECK(hit.in_theta_half_id);
    CHECK_FALSE(hit.in_s0_plus);
    CHECK(hit.tau.real() < 0.0);
    CHECK(hit.theta1.real() == Approx(hit.theta0_value + hit.tau.real()));
    CHECK(std::abs(hit.theta1.imag() - 0.5 * hit.d) <= 1e-12 * hit.d);

    const auto boundary = nef::necessity_predicate(nef::ConjectureVf(1.0, {0.0, 1.0}, 1), 1.0);
    CHECK(boundary.verdict == "no contradiction");
    CHECK_FALSE(boundary.in_theta_half_id);
    CHECK_FALSE(boundary.in_s0_plus);
    CHECK(boundary.tau.real() == 0.0);
    CHECK(boundary.d == Approx(2.0 * kPi));

    const auto away = nef::necessity_predicate(nef::ConjectureVf(1.0, {-1.0, 1.0}, 2), 1.0);
    CHECK(away.verdict == "no contradiction");
    CHECK(away.tau.real() > 0.0);
    CHECK_FALSE(away.in_theta_half_id);
}

TEST_CASE("conjecture scan over the default grid is clean at small n") {
    const auto grid = nef::default_u1_grid();
    REQUIRE(grid.size() == 15);

    const auto scan = nef::conjecture_scan(3, grid);
    CHECK(scan.clean());
    REQUIRE(scan.cells.size() == 45);

    // deterministic ordering: n outer, grid order inner
    CHECK(scan.cells[0].n == 1);
    CHECK(scan.cells[0].u1 == grid[0]);
    CHECK(scan.cells[14].u1 == grid[14]);
    CHECK(scan.cells[15].n == 2);

    for (const auto& cell : scan.cells) {
        CHECK(cell.verdict == "ok");
        CHECK(cell.im_ok);
        CHECK(cell.gap_ok);
        CHECK(cell.sign_ok);
        CHECK(cell.d == Approx(2.0 * kPi / std::pow(std::abs(cell.u1), 2.0 * cell.n)));
        CHECK(cell.method_gap < 1e-6 * std::abs(cell.tau_series));
    }

    CHECK_THROWS_AS(nef::conjecture_scan(0, grid), nef::Error);
    CHECK_THROWS_AS(nef::conjecture_scan(1, {{1.0, -1.0}}), nef::Error);
}

TEST_CASE("thread cap honors the environment override") {
    unsetenv("NEF_TOOLKIT_THREADS");
    const std::size_t base = nef::toolkit_thread_cap();
    CHECK(base >= 1);

    setenv("NEF_TOOLKIT_THREADS", "1", 1);
    CHECK(nef::toolkit_thread_cap() == 1);
    setenv("NEF_TOOLKIT_THREADS", "0", 1);
    CHECK(nef::toolkit_thread_cap() == base);
    setenv("NEF_TOOLKIT_THREADS", "junk", 1);
    CHECK(nef::toolkit_thread_cap() == base);
    unsetenv("NEF_TOOLKIT_THREADS");
}

TEST_CASE("parallel for covers every index once and propagates failures") {
    std::vector<int> hits(257, 0);
    nef::parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);

    CHECK_THROWS_AS(nef::parallel_for(64,
                                      [&](std::size_t i) {
                                          if (i == 33) throw nef::Error("worker failure");
                                      }),
                    nef::Error);
}
