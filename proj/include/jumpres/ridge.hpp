#ifndef JUMPRES_RIDGE_HPP
#define JUMPRES_RIDGE_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "jumpres/errors.hpp"

namespace jumpres {

/// Ridge regression through the normal equations (X^T X + lambda I) b = X^T y,
/// solved by conjugate gradients restarted on the true residual every K
/// steps. X is row-major S x K. Tolerance is on the relative residual
/// ||A b - r|| / ||r||, with an iteration cap of 10 K; hitting the cap
/// raises CgStalled, the signature of a lambda too small for the
/// conditioning at hand.
inline std::vector<double> ridge_regress(const double* X, std::size_t S, std::size_t K,
                                         const double* y, double lambda,
                                         double tolerance = 1e-12) {
    if (!(lambda >= 0.0)) throw Error("ridge_regress: lambda must be nonnegative");
    if (S == 0 || K == 0) throw Error("ridge_regress: empty system");

    std::vector<double> G(K * K, 0.0), rhs(K, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
        const double* row = X + s * K;
        for (std::size_t i = 0; i < K; ++i) {
            rhs[i] += row[i] * y[s];
            for (std::size_t j = i; j < K; ++j) G[i * K + j] += row[i] * row[j];
        }
    }
    for (std::size_t i = 0; i < K; ++i) {
        G[i * K + i] += lambda;
        for (std::size_t j = 0; j < i; ++j) G[i * K + j] = G[j * K + i];
    }

    auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
        for (std::size_t i = 0; i < K; ++i) {
            double acc = 0.0;
            const double* gi = G.data() + i * K;
            for (std::size_t j = 0; j < K; ++j) acc += gi[j] * v[j];
            out[i] = acc;
        }
    };

    double rhs_norm2 = 0.0;
    for (double v : rhs) rhs_norm2 += v * v;
    std::vector<double> beta(K, 0.0);
    if (rhs_norm2 == 0.0) return beta;
    const double target2 = tolerance * tolerance * rhs_norm2;

    std::vector<double> r(K), p(K), Ap(K);
    const std::size_t cap = 10 * K;
    std::size_t iters = 0;
    while (true) {
        apply(beta, Ap);
        double rr = 0.0;
        for (std::size_t i = 0; i < K; ++i) {
            r[i] = rhs[i] - Ap[i];
            rr += r[i] * r[i];
        }
        if (rr <= target2) return beta;
        if (iters >= cap)
            throw CgStalled("conjugate gradient stalled at relative residual " +
                                std::to_string(std::sqrt(rr / rhs_norm2)),
                            std::sqrt(rr / rhs_norm2));
        p = r;
        for (std::size_t inner = 0; inner < K && iters < cap && rr > target2; ++inner) {
            ++iters;
            apply(p, Ap);
            double pAp = 0.0;
            for (std::size_t i = 0; i < K; ++i) pAp += p[i] * Ap[i];
            if (!(pAp > 0.0)) break;  // numerically semi-definite direction; restart
            const double step = rr / pAp;
            for (std::size_t i = 0; i < K; ++i) {
                beta[i] += step * p[i];
                r[i] -= step * Ap[i];
            }
            double rr_new = 0.0;
            for (std::size_t i = 0; i < K; ++i) rr_new += r[i] * r[i];
            const double ratio = rr_new / rr;
            rr = rr_new;
            for (std::size_t i = 0; i < K; ++i) p[i] = r[i] + ratio * p[i];
        }
    }
}

inline std::vector<double> ridge_regress(const std::vector<double>& X, std::size_t K,
                                         const std::vector<double>& y, double lambda,
                                         double tolerance = 1e-12) {
    if (K == 0 || X.size() % K != 0 || X.size() / K != y.size())
        throw Error("ridge_regress: shape mismatch");
    return ridge_regress(X.data(), y.size(), K, y.data(), lambda, tolerance);
}

}  // namespace jumpres

#endif
