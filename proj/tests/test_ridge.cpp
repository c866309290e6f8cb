#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "jumpres/ridge.hpp"
#include "jumpres/rng.hpp"

using namespace jumpres;

TEST_CASE("one-dimensional ridge has the textbook closed form") {
    // beta = sum(x y) / (sum(x^2) + lambda) = 10 / (5 + 5) = 1
    const std::vector<double> X{1.0, 2.0};
    const std::vector<double> y{2.0, 4.0};
    const auto beta = ridge_regress(X, 1, y, 5.0);
    REQUIRE(beta.size() == 1);
    REQUIRE(beta[0] == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exact linear data is interpolated at lambda zero") {
    Rng rng(8, 0);
    const std::size_t S = 400, K = 4;
    const std::vector<double> truth{1.5, -2.0, 0.25, 3.0};
    std::vector<double> X(S * K), y(S);
    for (std::size_t s = 0; s < S; ++s) {
        X[s * K] = 1.0;
        for (std::size_t k = 1; k < K; ++k) X[s * K + k] = 10.0 * (rng.uniform() - 0.5);
        double acc = 0.0;
        for (std::size_t k = 0; k < K; ++k) acc += truth[k] * X[s * K + k];
        y[s] = acc;
    }
    const auto beta = ridge_regress(X, K, y, 0.0);
    for (std::size_t k = 0; k < K; ++k) REQUIRE(beta[k] == Catch::Approx(truth[k]).margin(1e-10));
}

TEST_CASE("total shrinkage as lambda grows") {
    Rng rng(9, 0);
    const std::size_t S = 100;
    std::vector<double> X(S), y(S);
    for (std::size_t s = 0; s < S; ++s) {
        X[s] = rng.uniform();
        y[s] = 3.0 * X[s] + 0.1 * (rng.uniform() - 0.5);
    }
    double prev = 1e300;
    for (double lambda : {1.0, 1e3, 1e6, 1e9}) {
        const double b = ridge_regress(X, 1, y, lambda)[0];
        REQUIRE(std::fabs(b) < prev);
        prev = std::fabs(b);
    }
    REQUIRE(prev < 1e-6);
}

TEST_CASE("zero right-hand side returns the zero vector without iterating") {
    const std::vector<double> X{1.0, 0.0, 0.0, 1.0};
    const std::vector<double> y{0.0, 0.0};
    const auto beta = ridge_regress(X, 2, y, 0.0);
    REQUIRE(beta == std::vector<double>{0.0, 0.0});
}

TEST_CASE("consistent singular systems are solved despite lambda zero") {
    // duplicated column: X^T X is singular but the rhs lies in its range
    const std::size_t S = 50;
    std::vector<double> X(S * 2), y(S);
    Rng rng(10, 0);
    for (std::size_t s = 0; s < S; ++s) {
        const double v = rng.uniform();
        X[s * 2] = v;
        X[s * 2 + 1] = v;
        y[s] = 2.0 * v;
    }
    const auto beta = ridge_regress(X, 2, y, 0.0);
    REQUIRE(beta[0] + beta[1] == Catch::Approx(2.0).margin(1e-9));
}

TEST_CASE("hopeless conditioning with tiny lambda stalls the solver") {
    // two nearly identical columns and an inconsistent target component
    const std::size_t S = 64;
    std::vector<double> X(S * 2), y(S);
    Rng rng(11, 0);
    for (std::size_t s = 0; s < S; ++s) {
        const double v = 1.0 + 1e-14 * rng.uniform();
        X[s * 2] = v;
        X[s * 2 + 1] = 1.0;
        y[s] = rng.uniform();
    }
    bool stalled = false;
    try {
        (void)ridge_regress(X, 2, y, 0.0, 1e-16);
    } catch (const CgStalled& e) {
        stalled = true;
        REQUIRE(e.residual > 0.0);
    }
    REQUIRE(stalled);
}

TEST_CASE("shape and argument validation") {
    REQUIRE_THROWS_AS(ridge_regress(std::vector<double>{1.0}, 1, {1.0}, -1.0), Error);
    REQUIRE_THROWS_AS(ridge_regress(std::vector<double>{1.0, 2.0}, 2, {1.0, 2.0}, 0.0), Error);
}
