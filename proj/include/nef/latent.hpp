#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "families.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace nef {

// Row-major dense matrix at desk scale; no aliasing tricks, no views.
struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    Matrix head_rows(std::size_t k) const {
        Matrix out(k, cols);
        std::copy(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(k * cols), out.a.begin());
        return out;
    }
};

inline Matrix matmul(const Matrix& x, const Matrix& y) {
    if (x.cols != y.rows) throw Error("matmul: inner dimensions disagree");
    Matrix out(x.rows, y.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t k = 0; k < x.cols; ++k) {
            const double v = x.at(i, k);
            for (std::size_t j = 0; j < y.cols; ++j) out.at(i, j) += v * y.at(k, j);
        }
    return out;
}

// Data layout follows the source convention: Y is k x n, the k rows are the
// replicated measurements and the n columns are the objects; per-column
// statistics average over the k rows.
struct LatentModel {
    Matrix loadings;  // k x r
    Matrix factors;   // r x n, full row rank
    std::string family;

    std::size_t k() const { return loadings.rows; }
    std::size_t r() const { return loadings.cols; }
    std::size_t n() const { return factors.cols; }

    Matrix means() const { return matmul(loadings, factors); }
};

struct EigenDecomposition {
    std::vector<double> values;  // descending
    Matrix vectors;              // columns follow values
};

// Cyclic Jacobi on a symmetric matrix; self-contained and exactly invariant
// under spectrum shifts, which the adjustment tests rely on.
inline EigenDecomposition jacobi_eigen(const Matrix& g) {
    const std::size_t n = g.rows;
    if (n == 0 || g.cols != n) throw Error("jacobi_eigen: matrix must be square");
    if (n > 64) throw Error("jacobi_eigen: desk-scale solver handles n <= 64");

    Matrix a = g;
    Matrix v(n, n);
    for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * a.at(p, q) * a.at(p, q);
        if (std::sqrt(off) < 1e-12) {
            EigenDecomposition out;
            std::vector<std::size_t> order(n);
            for (std::size_t i = 0; i < n; ++i) order[i] = i;
            std::sort(order.begin(), order.end(),
                      [&](std::size_t x, std::size_t y) { return a.at(x, x) > a.at(y, y); });
            out.values.resize(n);
            out.vectors = Matrix(n, n);
            for (std::size_t j = 0; j < n; ++j) {
                out.values[j] = a.at(order[j], order[j]);
                for (std::size_t i = 0; i < n; ++i) out.vectors.at(i, j) = v.at(i, order[j]);
            }
            return out;
        }
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (apq == 0.0) continue;
                const double tau = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a.at(i, p), aiq = a.at(i, q);
                    a.at(i, p) = c * aip - s * aiq;
                    a.at(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a.at(p, i), aqi = a.at(q, i);
                    a.at(p, i) = c * api - s * aqi;
                    a.at(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v.at(i, p), viq = v.at(i, q);
                    v.at(i, p) = c * vip - s * viq;
                    v.at(i, q) = s * vip + c * viq;
                }
            }
    }
    throw NonConvergent("jacobi_eigen: off-diagonal norm did not reach 1e-12");
}

inline void validate_model(const LatentModel& model, const Family& fam) {
    const std::size_t k = model.k(), n = model.n(), r = model.r();
    if (r < 1 || n < r || k < n)
        throw Error("latent model: dimensions must satisfy k >= n >= r >= 1");
    if (model.factors.rows != r) throw Error("latent model: loadings/factors rank mismatch");

    // rank(M) = r via the spectrum of the r x r factor Gram matrix
    Matrix gram(r, r);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = i; j < r; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < n; ++c) s += model.factors.at(i, c) * model.factors.at(j, c);
            gram.at(i, j) = s;
            gram.at(j, i) = s;
        }
    const auto eig = jacobi_eigen(gram);
    if (!(eig.values.back() > 1e-10 * std::max(eig.values.front(), 1e-300)))
        throw Error("latent model: factors do not have full row rank");

    const Matrix mu = model.means();
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (!fam.mean_domain.contains(mu.at(i, j)))
                throw MeanOutOfDomain("latent model: mean out of domain at (" +
                                      std::to_string(i) + ", " + std::to_string(j) + ")");
}

// Independent draws y_ij ~ F_{theta(mu_ij)}; every cell has its own counter
// stream keyed by (seed, row, column), so the draw is independent of
// evaluation order and of k-ladder truncation.
inline Matrix generate(const LatentModel& model, std::uint64_t seed) {
    const Family fam = make_family(model.family);
    validate_model(model, fam);
    const Matrix mu = model.means();
    Matrix y(model.k(), model.n());
    for (std::size_t i = 0; i < y.rows; ++i)
        for (std::size_t j = 0; j < y.cols; ++j) {
            RngStream g(seed, i, j);
            y.at(i, j) = fam.sample_by_mean(g, mu.at(i, j));
        }
    return y;
}

// sigma_hat_i = k^{-1} sum over the column's k entries of phi(y); unbiased
// for the column-averaged variance because E_theta[phi] = kappa''(theta).
inline std::vector<double> dk_hat(const Matrix& y, const Family& fam) {
    if (!fam.phi.eval) throw RfUnavailable(fam.name + ": no reduction function registered");
    std::vector<double> out(y.cols, 0.0);
    for (std::size_t j = 0; j < y.cols; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < y.rows; ++i) s += fam.phi.eval(y.at(i, j));
        out[j] = s / static_cast<double>(y.rows);
    }
    return out;
}

inline std::vector<double> dk_true(const Matrix& mu, const Family& fam) {
    std::vector<double> out(mu.cols, 0.0);
    for (std::size_t j = 0; j < mu.cols; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < mu.rows; ++i) s += fam.variance_at_mean(mu.at(i, j));
        out[j] = s / static_cast<double>(mu.rows);
    }
    return out;
}

// G_k = k^{-1} Y^T Y - diag(dk); each off-diagonal entry is computed once and
// mirrored, so symmetry holds exactly rather than to roundoff.
inline Matrix gram_adjusted(const Matrix& y, const std::vector<double>& dk) {
    if (dk.size() != y.cols) throw Error("gram_adjusted: diagonal length mismatch");
    const double inv_k = 1.0 / static_cast<double>(y.rows);
    Matrix g(y.cols, y.cols);
    for (std::size_t i = 0; i < y.cols; ++i)
        for (std::size_t j = i; j < y.cols; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < y.rows; ++t) s += y.at(t, i) * y.at(t, j);
            const double val = s * inv_k - (i == j ? dk[i] : 0.0);
            g.at(i, j) = val;
            g.at(j, i) = val;
        }
    return g;
}

inline Matrix top_r_subspace(const Matrix& g, std::size_t r) {
    if (r < 1 || r > g.rows) throw Error("top_r_subspace: r out of range");
    const auto eig = jacobi_eigen(g);
    if (r < g.rows && eig.values[r - 1] - eig.values[r] < 1e-8)
        throw DegenerateSpectrum("top_r_subspace: eigenvalue gap below 1e-8");
    Matrix out(g.rows, r);
    for (std::size_t j = 0; j < r; ++j)
        for (std::size_t i = 0; i < g.rows; ++i) out.at(i, j) = eig.vectors.at(i, j);
    return out;
}

// ||P_A - P_B||_F for column-orthonormal A, B; equals
// sqrt(2r - 2 ||A^T B||_F^2), but that form cancels to a sqrt(eps) floor
// when the subspaces nearly coincide, so the projectors are formed
// explicitly. Result clamped into [0, sqrt(2r)].
inline double subspace_distance(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw Error("subspace_distance: shapes disagree");
    double sq = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.rows; ++j) {
            double pa = 0.0, pb = 0.0;
            for (std::size_t t = 0; t < a.cols; ++t) {
                pa += a.at(i, t) * a.at(j, t);
                pb += b.at(i, t) * b.at(j, t);
            }
            sq += (pa - pb) * (pa - pb);
        }
    return std::min(std::sqrt(sq), std::sqrt(2.0 * static_cast<double>(a.cols)));
}

// Orthonormal basis of the row space of the factors (columns of M^T),
// modified Gram-Schmidt with one re-orthogonalization pass.
inline Matrix row_space_basis(const Matrix& factors) {
    const std::size_t r = factors.rows, n = factors.cols;
    Matrix q(n, r);
    for (std::size_t j = 0; j < r; ++j) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = factors.at(j, i);
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t prev = 0; prev < j; ++prev) {
                double dot = 0.0;
                for (std::size_t i = 0; i < n; ++i) dot += v[i] * q.at(i, prev);
                for (std::size_t i = 0; i < n; ++i) v[i] -= dot * q.at(i, prev);
            }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (!(norm > 1e-12)) throw Error("row_space_basis: rank-deficient factors");
        for (std::size_t i = 0; i < n; ++i) q.at(i, j) = v[i] / norm;
    }
    return q;
}

struct ExperimentConfig {
    std::string family = "poisson";
    std::size_t n = 10;
    std::size_t r = 2;
    std::vector<std::size_t> k_ladder{200, 2000, 20000};
    std::size_t replicates = 20;
    std::uint64_t seed = 1;
    bool adjusted = true;  // false: D set to 0, the comparison arm
};

struct ExperimentResult {
    std::size_t replicate = 0;
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::vector<double> dk_hat;
    std::vector<double> dk_true;
    Matrix gram;
    Matrix subspace;
    double distance = 0.0;
    double dk_max_error = 0.0;
    double gen_seconds = 0.0;
    double eig_seconds = 0.0;
};

// Parameter draws stay bounded away from the mean-domain boundary for
// positive-mean families; no rejection loops needed.
inline LatentModel draw_model(const ExperimentConfig& cfg, std::size_t replicate,
                              std::size_t k_max) {
    LatentModel model;
    model.family = cfg.family;
    model.loadings = Matrix(k_max, cfg.r);
    model.factors = Matrix(cfg.r, cfg.n);
    RngStream params(cfg.seed, (1ULL << 32) | replicate, 0);
    for (double& x : model.loadings.a) x = 0.2 + params.uniform();
    for (double& x : model.factors.a) x = 0.5 + params.uniform();
    return model;
}

// One replicate covers the whole k-ladder with nested data: the stream for
// cell (i, j) is keyed by (seed', i, j), so the k-row experiment is exactly
// the top block of the larger one and the ladder isolates the effect of k.
inline std::vector<ExperimentResult> run_experiment(const ExperimentConfig& cfg) {
    if (cfg.r < 1 || cfg.n < cfg.r) throw Error("experiment: need n >= r >= 1");
    if (cfg.k_ladder.empty()) throw Error("experiment: k ladder must be nonempty");
    for (std::size_t k : cfg.k_ladder)
        if (k < cfg.n) throw Error("experiment: every k must be >= n");
    if (cfg.replicates < 1) throw Error("experiment: need at least one replicate");

    const Family fam = make_family(cfg.family);
    std::vector<std::size_t> ladder = cfg.k_ladder;
    std::sort(ladder.begin(), ladder.end());
    const std::size_t k_max = ladder.back();

    std::vector<ExperimentResult> results(cfg.replicates * ladder.size());
    parallel_for(cfg.replicates, [&](std::size_t rep) {
        const std::uint64_t data_seed =
            splitmix_mix(cfg.seed ^ ((2ULL << 32) | static_cast<std::uint64_t>(rep)));
        const LatentModel model = draw_model(cfg, rep, k_max);
        validate_model(model, fam);
        const Matrix mu = model.means();
        const Matrix truth = row_space_basis(model.factors);

        const auto t0 = std::chrono::steady_clock::now();
        Matrix y(k_max, cfg.n);
        for (std::size_t i = 0; i < k_max; ++i)
            for (std::size_t j = 0; j < cfg.n; ++j) {
                RngStream g(data_seed, i, j);
                y.at(i, j) = fam.sample_by_mean(g, mu.at(i, j));
            }
        const auto t1 = std::chrono::steady_clock::now();
        const double gen_total = std::chrono::duration<double>(t1 - t0).count();

        for (std::size_t li = 0; li < ladder.size(); ++li) {
            const std::size_t k = ladder[li];
            ExperimentResult res;
            res.replicate = rep;
            res.k = k;
            res.seed = cfg.seed;
            const Matrix yk = y.head_rows(k);
            res.dk_hat = dk_hat(yk, fam);
            res.dk_true = dk_true(mu.head_rows(k), fam);
            const std::vector<double> adj =
                cfg.adjusted ? res.dk_hat : std::vector<double>(cfg.n, 0.0);
            res.gram = gram_adjusted(yk, adj);
            const auto e0 = std::chrono::steady_clock::now();
            res.subspace = top_r_subspace(res.gram, cfg.r);
            const auto e1 = std::chrono::steady_clock::now();
            res.eig_seconds = std::chrono::duration<double>(e1 - e0).count();
            res.gen_seconds = gen_total * static_cast<double>(k) / static_cast<double>(k_max);
            res.distance = subspace_distance(res.subspace, truth);
            res.dk_max_error = 0.0;
            for (std::size_t j = 0; j < cfg.n; ++j)
                res.dk_max_error = std::max(res.dk_max_error,
                                            std::abs(res.dk_hat[j] - res.dk_true[j]));
            results[rep * ladder.size() + li] = std::move(res);
        }
    });
    return results;
}

}  // namespace nef
