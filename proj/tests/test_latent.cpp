#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "nef/latent.hpp"

using Catch::Approx;

namespace {

nef::Matrix constant_mean_model_loadings(std::size_t k, double value) {
    nef::Matrix l(k, 1);
    for (double& x : l.a) x = value;
    return l;
}

double column_mean(const nef::Matrix& y, std::size_t j) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.rows; ++i) s += y.at(i, j);
    return s / static_cast<double>(y.rows);
}

double column_variance(const nef::Matrix& y, std::size_t j) {
    const double m = column_mean(y, j);
    double s = 0.0;
    for (std::size_t i = 0; i < y.rows; ++i) {
        const double d = y.at(i, j) - m;
        s += d * d;
    }
    return s / static_cast<double>(y.rows - 1);
}

}  // namespace

TEST_CASE("jacobi eigensolver meets the residual and orthonormality bars") {
    // random symmetric 8x8 with a fixed stream
    nef::RngStream g(7);
    nef::Matrix a(8, 8);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = i; j < 8; ++j) {
            const double v = 2.0 * g.uniform() - 1.0;
            a.at(i, j) = v;
            a.at(j, i) = v;
        }
    const auto eig = nef::jacobi_eigen(a);
    for (std::size_t j = 0; j + 1 < 8; ++j) CHECK(eig.values[j] >= eig.values[j + 1]);
    for (std::size_t j = 0; j < 8; ++j) {
        for (std::size_t i = 0; i < 8; ++i) {
            double gv = 0.0;
            for (std::size_t t = 0; t < 8; ++t) gv += a.at(i, t) * eig.vectors.at(t, j);
            CHECK(std::abs(gv - eig.values[j] * eig.vectors.at(i, j)) < 1e-10);
        }
        for (std::size_t j2 = 0; j2 < 8; ++j2) {
            double dot = 0.0;
            for (std::size_t t = 0; t < 8; ++t) dot += eig.vectors.at(t, j) * eig.vectors.at(t, j2);
            CHECK(std::abs(dot - (j == j2 ? 1.0 : 0.0)) < 1e-10);
        }
    }
    CHECK_THROWS_AS(nef::jacobi_eigen(nef::Matrix(65, 65)), nef::Error);
}

TEST_CASE("top subspace extraction and the degenerate spectrum guard") {
    nef::Matrix d(3, 3);
    d.at(0, 0) = 3.0;
    d.at(1, 1) = 2.0;
    d.at(2, 2) = 1.0;
    const auto basis = nef::top_r_subspace(d, 2);
    REQUIRE(basis.rows == 3);
    REQUIRE(basis.cols == 2);
    // span of e1, e2: bottom row vanishes
    CHECK(std::abs(basis.at(2, 0)) < 1e-12);
    CHECK(std::abs(basis.at(2, 1)) < 1e-12);
    CHECK(std::abs(std::abs(basis.at(0, 0)) - 1.0) < 1e-12);

    nef::Matrix eye(3, 3);
    for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    CHECK_THROWS_AS(nef::top_r_subspace(eye, 1), nef::DegenerateSpectrum);

    nef::Matrix close = d;
    close.at(2, 2) = 2.0 - 5e-9;  // within the 1e-8 gap guard of lambda_2
    CHECK_THROWS_AS(nef::top_r_subspace(close, 2), nef::DegenerateSpectrum);
    CHECK_THROWS_AS(nef::top_r_subspace(d, 0), nef::Error);
    CHECK_THROWS_AS(nef::top_r_subspace(d, 4), nef::Error);
}

TEST_CASE("eigenvector invariance under spectrum shifts") {
    nef::RngStream g(19);
    nef::Matrix a(6, 6);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = i; j < 6; ++j) {
            const double v = g.normal();
            a.at(i, j) = v;
            a.at(j, i) = v;
        }
    const auto base = nef::top_r_subspace(a, 2);
    for (double c : {-3.0, 0.25, 10.0}) {
        nef::Matrix shifted = a;
        for (std::size_t i = 0; i < 6; ++i) shifted.at(i, i) += c;
        const auto moved = nef::top_r_subspace(shifted, 2);
        CHECK(nef::subspace_distance(base, moved) < 1e-10);
    }
}

TEST_CASE("subspace distance matches the projector metric") {
    nef::Matrix a(4, 2), b(4, 2), c(4, 2);
    a.at(0, 0) = 1.0;
    a.at(1, 1) = 1.0;
    b.at(2, 0) = 1.0;
    b.at(3, 1) = 1.0;
    CHECK(nef::subspace_distance(a, a) == 0.0);
    CHECK(nef::subspace_distance(a, b) == Approx(2.0));  // orthogonal complements, r = 2

    const double ang = 0.73;
    c.at(0, 0) = std::cos(ang);
    c.at(1, 0) = std::sin(ang);
    c.at(0, 1) = -std::sin(ang);
    c.at(1, 1) = std::cos(ang);
    CHECK(nef::subspace_distance(a, c) < 1e-12);  // rotated basis of the same span

    CHECK_THROWS_AS(nef::subspace_distance(a, nef::Matrix(3, 2)), nef::Error);
}

TEST_CASE("model validation enforces rank, shape, and mean domain") {
    const nef::Family fam = nef::make_family("poisson");

    nef::LatentModel model;
    model.family = "poisson";
    model.loadings = constant_mean_model_loadings(40, 1.0);
    model.factors = nef::Matrix(1, 4);
    for (double& x : model.factors.a) x = 3.0;
    CHECK_NOTHROW(nef::validate_model(model, fam));

    nef::LatentModel tiny = model;
    tiny.loadings = constant_mean_model_loadings(2, 1.0);  // k < n
    CHECK_THROWS_AS(nef::validate_model(tiny, fam), nef::Error);

    nef::LatentModel deficient;
    deficient.family = "poisson";
    deficient.loadings = nef::Matrix(40, 2);
    for (double& x : deficient.loadings.a) x = 0.5;
    deficient.factors = nef::Matrix(2, 4);
    for (std::size_t j = 0; j < 4; ++j) {
        deficient.factors.at(0, j) = 1.0;
        deficient.factors.at(1, j) = 1.0;  // duplicated row: rank 1
    }
    CHECK_THROWS_AS(nef::validate_model(deficient, fam), nef::Error);

    nef::LatentModel outside = model;
    outside.factors.at(0, 2) = 40.0;  // Poisson mean cap breached in column 2
    CHECK_THROWS_AS(nef::validate_model(outside, fam), nef::MeanOutOfDomain);
    try {
        nef::validate_model(outside, fam);
    } catch (const nef::MeanOutOfDomain& e) {
        CHECK(std::string(e.what()).find("(0, 2)") != std::string::npos);
    }
}

TEST_CASE("generation hits the requested moments and is reproducible") {
    // centered normal: zero means need zero loadings, rank lives in factors
    nef::LatentModel centered;
    centered.family = "normal";
    centered.loadings = nef::Matrix(400, 2);
    centered.factors = nef::Matrix(2, 4);
    centered.factors.at(0, 0) = 1.0;
    centered.factors.at(1, 1) = 1.0;
    const nef::Matrix y0 = nef::generate(centered, 5);
    for (std::size_t j = 0; j < 4; ++j)
        CHECK(std::abs(column_mean(y0, j)) < 4.0 / std::sqrt(400.0));

    nef::LatentModel pois;
    pois.family = "poisson";
    pois.loadings = constant_mean_model_loadings(10000, 3.0);
    pois.factors = nef::Matrix(1, 3);
    for (double& x : pois.factors.a) x = 1.0;
    const nef::Matrix y = nef::generate(pois, 11);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(std::abs(column_mean(y, j) - 3.0) < 4.0 * std::sqrt(3.0 / 10000.0));
        CHECK(std::abs(column_variance(y, j) - 3.0) < 5.0 * std::sqrt(21.0 / 10000.0));
    }

    const nef::Matrix again = nef::generate(pois, 11);
    CHECK(again.a == y.a);
    const nef::Matrix other = nef::generate(pois, 12);
    CHECK(other.a != y.a);

    // counter streams make the k-row experiment the top block of a larger one
    nef::LatentModel shallow = pois;
    shallow.loadings = constant_mean_model_loadings(100, 3.0);
    const nef::Matrix top = nef::generate(shallow, 11);
    for (std::size_t i = 0; i < 100; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(top.at(i, j) == y.at(i, j));
}

TEST_CASE("diagonal estimates are unbiased and exact where the rf is constant") {
    const nef::Family pois = nef::make_family("poisson");
    nef::LatentModel model;
    model.family = "poisson";
    model.loadings = constant_mean_model_loadings(20000, 3.0);
    model.factors = nef::Matrix(1, 2);
    for (double& x : model.factors.a) x = 1.0;
    const nef::Matrix y = nef::generate(model, 21);
    const auto hat = nef::dk_hat(y, pois);
    for (double h : hat) CHECK(std::abs(h - 3.0) < 4.0 * std::sqrt(3.0 / 20000.0));

    const auto truth = nef::dk_true(model.means(), pois);
    for (double t : truth) CHECK(t == Approx(3.0));

    // normal: phi is identically 1, so the estimate is exact
    const nef::Family norm = nef::make_family("normal");
    nef::LatentModel nm;
    nm.family = "normal";
    nm.loadings = constant_mean_model_loadings(500, 0.4);
    nm.factors = nef::Matrix(1, 3);
    for (double& x : nm.factors.a) x = 1.0;
    const auto nhat = nef::dk_hat(nef::generate(nm, 3), norm);
    for (double h : nhat) CHECK(h == 1.0);

    // negbin(2) at mean 2: V = mu + mu^2/m = 4
    const nef::Family nb = nef::make_family("negbin(2)");
    nef::LatentModel nbm;
    nbm.family = "negbin(2)";
    nbm.loadings = constant_mean_model_loadings(20000, 2.0);
    nbm.factors = nef::Matrix(1, 2);
    for (double& x : nbm.factors.a) x = 1.0;
    const nef::Matrix nby = nef::generate(nbm, 31);
    const auto nbhat = nef::dk_hat(nby, nb);
    for (std::size_t j = 0; j < 2; ++j) {
        double var_phi = 0.0, mean_phi = 0.0;
        for (std::size_t i = 0; i < nby.rows; ++i) mean_phi += nb.phi.eval(nby.at(i, j));
        mean_phi /= static_cast<double>(nby.rows);
        for (std::size_t i = 0; i < nby.rows; ++i) {
            const double d = nb.phi.eval(nby.at(i, j)) - mean_phi;
            var_phi += d * d;
        }
        var_phi /= static_cast<double>(nby.rows - 1);
        CHECK(std::abs(nbhat[j] - 4.0) < 4.0 * std::sqrt(var_phi / 20000.0));
    }

    nef::Family broken = pois;
    broken.phi = nef::ReductionFunction{};
    CHECK_THROWS_AS(nef::dk_hat(y, broken), nef::RfUnavailable);
}

TEST_CASE("adjusted gram removes the diagonal noise bias") {
    nef::Matrix zero(6, 3);
    const auto g0 = nef::gram_adjusted(zero, {0.0, 0.0, 0.0});
    for (double v : g0.a) CHECK(v == 0.0);

    nef::Matrix ortho(4, 4);
    for (std::size_t i = 0; i < 4; ++i) ortho.at(i, i) = 2.0;  // columns of squared norm 4 = k
    const auto gi = nef::gram_adjusted(ortho, std::vector<double>(4, 0.0));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(gi.at(i, j) == (i == j ? 1.0 : 0.0));

    CHECK_THROWS_AS(nef::gram_adjusted(ortho, {1.0}), nef::Error);

    // Monte Carlo bias cancellation: Poisson, two columns with means 3 and 5;
    // E[G_k] diagonal should be k^{-1} sum mu^2 once the noise term is removed
    const nef::Family pois = nef::make_family("poisson");
    nef::LatentModel model;
    model.family = "poisson";
    model.loadings = constant_mean_model_loadings(200, 1.0);
    model.factors = nef::Matrix(1, 2);
    model.factors.at(0, 0) = 3.0;
    model.factors.at(0, 1) = 5.0;
    const int reps = 200;
    std::vector<double> diag0(reps), diag1(reps), off(reps);
    for (int rep = 0; rep < reps; ++rep) {
        const nef::Matrix y = nef::generate(model, 1000 + static_cast<std::uint64_t>(rep));
        const auto g = nef::gram_adjusted(y, nef::dk_hat(y, pois));
        CHECK(g.at(0, 1) == g.at(1, 0));
        diag0[rep] = g.at(0, 0);
        diag1[rep] = g.at(1, 1);
        off[rep] = g.at(0, 1);
    }
    auto mean_and_se = [&](const std::vector<double>& xs) {
        const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
        double v = 0.0;
        for (double x : xs) v += (x - m) * (x - m);
        return std::pair<double, double>(m, std::sqrt(v / (xs.size() - 1.0) / xs.size()));
    };
    const auto [m0, se0] = mean_and_se(diag0);
    const auto [m1, se1] = mean_and_se(diag1);
    const auto [mo, seo] = mean_and_se(off);
    CHECK(std::abs(m0 - 9.0) < 3.0 * se0);
    CHECK(std::abs(m1 - 25.0) < 3.0 * se1);
    CHECK(std::abs(mo - 15.0) < 3.0 * seo);
}

TEST_CASE("experiment ladder is deterministic and contracts toward the truth") {
    nef::ExperimentConfig cfg;
    cfg.family = "poisson";
    cfg.n = 5;
    cfg.r = 2;
    cfg.k_ladder = {100, 800};
    cfg.replicates = 8;
    cfg.seed = 17;

    const auto results = nef::run_experiment(cfg);
    REQUIRE(results.size() == 16);
    for (std::size_t rep = 0; rep < 8; ++rep) {
        CHECK(results[2 * rep].replicate == rep);
        CHECK(results[2 * rep].k == 100);
        CHECK(results[2 * rep + 1].k == 800);
    }
    const double bound = std::sqrt(2.0 * cfg.r);
    for (std::size_t rep = 0; rep < 8; ++rep) {
        const auto& small = results[2 * rep];
        const auto& big = results[2 * rep + 1];
        CHECK(small.distance >= 0.0);
        CHECK(small.distance <= bound);
        CHECK(big.dk_max_error < small.dk_max_error + 0.5);
    }

    const auto again = nef::run_experiment(cfg);
    for (std::size_t i = 0; i < results.size(); ++i) {
        CHECK(again[i].distance == results[i].distance);
        CHECK(again[i].dk_hat == results[i].dk_hat);
        CHECK(again[i].gram.a == results[i].gram.a);
    }

    nef::ExperimentConfig bad = cfg;
    bad.k_ladder = {3};  // below n
    CHECK_THROWS_AS(nef::run_experiment(bad), nef::Error);
    bad = cfg;
    bad.r = 0;
    CHECK_THROWS_AS(nef::run_experiment(bad), nef::Error);
}

TEST_CASE("median distance contracts along the k ladder") {
    // the second factor direction emerges from the noise floor only once
    // k dwarfs n; medians over replicates carry the consistency trend
    nef::ExperimentConfig cfg;
    cfg.family = "poisson";
    cfg.n = 10;
    cfg.r = 2;
    cfg.k_ladder = {200, 2000, 20000};
    cfg.replicates = 10;
    cfg.seed = 17;

    const auto results = nef::run_experiment(cfg);
    std::vector<double> medians;
    for (std::size_t li = 0; li < 3; ++li) {
        std::vector<double> d;
        for (std::size_t rep = 0; rep < cfg.replicates; ++rep)
            d.push_back(results[rep * 3 + li].distance);
        std::sort(d.begin(), d.end());
        medians.push_back(0.5 * (d[4] + d[5]));
    }
    CHECK(medians[1] <= medians[0]);
    CHECK(medians[2] <= medians[1]);
    CHECK(medians[2] < medians[0] - 0.3);
}

TEST_CASE("normal family: the adjustment shifts the spectrum but not the subspace") {
    nef::ExperimentConfig cfg;
    cfg.family = "normal";
    cfg.n = 5;
    cfg.r = 2;
    cfg.k_ladder = {400};
    cfg.replicates = 3;
    cfg.seed = 29;

    auto adjusted = nef::run_experiment(cfg);
    cfg.adjusted = false;
    auto plain = nef::run_experiment(cfg);
    REQUIRE(adjusted.size() == plain.size());
    for (std::size_t i = 0; i < adjusted.size(); ++i) {
        for (double h : adjusted[i].dk_hat) CHECK(h == 1.0);
        CHECK(nef::subspace_distance(adjusted[i].subspace, plain[i].subspace) < 1e-10);
    }
}

TEST_CASE("diagonal estimates stay within three standard errors over replicates") {
    nef::ExperimentConfig cfg;
    cfg.family = "poisson";
    cfg.n = 4;
    cfg.r = 2;
    cfg.k_ladder = {200};
    cfg.replicates = 200;
    cfg.seed = 41;

    const auto results = nef::run_experiment(cfg);
    REQUIRE(results.size() == 200);
    // Models differ per replicate, so aggregate the centered errors
    for (std::size_t j = 0; j < cfg.n; ++j) {
        std::vector<double> err(results.size());
        for (std::size_t i = 0; i < results.size(); ++i)
            err[i] = results[i].dk_hat[j] - results[i].dk_true[j];
        const double m = std::accumulate(err.begin(), err.end(), 0.0) / err.size();
        double v = 0.0;
        for (double e : err) v += (e - m) * (e - m);
        const double se = std::sqrt(v / (err.size() - 1.0) / err.size());
        CHECK(std::abs(m) <= 3.0 * se);
    }
}
