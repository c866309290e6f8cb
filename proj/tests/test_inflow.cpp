#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "jumpres/inflow.hpp"

using namespace jumpres;

namespace {

InflowModel mild_model() {
    InflowModel m;
    m.q_min = 0.5;
    m.rho = 1.0;
    m.ts = {0.5, 0.3, 1.0};
    m.q_initial = 0.5;
    return m;
}

InflowModel fitted_model() {
    InflowModel m;
    m.q_min = 0.5;
    m.rho = 0.295;
    m.ts = {0.923, 0.0493, 0.007};
    m.q_initial = 0.5;
    return m;
}

}  // namespace

TEST_CASE("jump-free step is pure deterministic decay") {
    InflowModel m;
    m.q_min = 0.5;
    m.rho = 0.295;
    m.ts = {0.5, 0.0, 1.0};
    m.q_initial = 5.0;
    const auto grid = simulate_inflow_paths(m, 1.0, 1, 3, 7);
    for (std::size_t p = 0; p < 3; ++p)
        REQUIRE(grid.at(p, 1) == Catch::Approx(3.6725).epsilon(1e-14));
}

TEST_CASE("ensemble mean follows the exact relaxation curve") {
    auto m = mild_model();
    m.q_initial = 5.0;
    const double h = 0.05;
    const std::size_t n = 200, S = 20000;
    const auto grid = simulate_inflow_paths(m, h, n, S, 11);
    for (std::size_t node : {std::size_t{40}, std::size_t{120}, std::size_t{200}}) {
        double sum = 0.0, sum2 = 0.0;
        for (std::size_t p = 0; p < S; ++p) {
            sum += grid.at(p, node);
            sum2 += grid.at(p, node) * grid.at(p, node);
        }
        const double mean = sum / S;
        const double sd = std::sqrt(sum2 / S - mean * mean);
        const double expect = mean_inflow_exact(m, node * h);
        // Euler bias is O(h); with rho h = 0.05 it is well under one
        // standard error at this ensemble size
        REQUIRE(std::fabs(mean - expect) < 4.0 * sd / std::sqrt(static_cast<double>(S)) +
                                               0.02 * expect);
    }
}

TEST_CASE("paths are nonnegative and deterministic across worker counts") {
    const auto m = fitted_model();
    const auto g1 = simulate_inflow_paths(m, 0.5, 400, 256, 99, 1);
    const auto g3 = simulate_inflow_paths(m, 0.5, 400, 256, 99, 3);
    REQUIRE(g1 == g3);
    for (double v : g1.raw()) REQUIRE(v >= 0.0);
}

TEST_CASE("first stationary moment and the second-moment balance") {
    const auto m = fitted_model();
    const double m1 = m.branching_ratio();
    const auto mom = stationary_raw_moments(m, 2);
    REQUIRE(mom[0] == Catch::Approx(m.q_min / (1.0 - m1)).epsilon(1e-12));
    const double m2k = tempering_moment(m.ts, 2);
    const double balance =
        2.0 * m.q_min * mom[0] - 2.0 * mom[1] + m2k * mom[0] + 2.0 * m1 * mom[1];
    REQUIRE(std::fabs(balance) <= 1e-10 * mom[1]);
}

TEST_CASE("standard deviation matches its closed form") {
    const auto m = fitted_model();
    const auto s = stationary_moment_summary(m);
    const double m1 = m.branching_ratio();
    const double m2k = tempering_moment(m.ts, 2);
    REQUIRE(s.sta ==
            Catch::Approx(std::sqrt(m2k * s.ave / (2.0 * (1.0 - m1)))).epsilon(1e-12));
}

TEST_CASE("moment recursion agrees with a long-horizon simulation up to order four") {
    const auto m = mild_model();
    const auto exact = stationary_raw_moments(m, 4);
    const double h = 0.02;
    const std::size_t n = 2500, S = 30000;  // burn-in of 50 time units at rate ~0.47
    const auto grid = simulate_inflow_paths(m, h, n, S, 31);
    for (int k = 1; k <= 4; ++k) {
        double sum = 0.0, sum2 = 0.0;
        for (std::size_t p = 0; p < S; ++p) {
            const double v = std::pow(grid.at(p, n), k);
            sum += v;
            sum2 += v * v;
        }
        const double mean = sum / S;
        const double se = std::sqrt((sum2 / S - mean * mean) / S);
        INFO("k=" << k << " mc=" << mean << " exact=" << exact[k - 1] << " se=" << se);
        REQUIRE(std::fabs(mean - exact[k - 1]) < 4.0 * se);
    }
}

TEST_CASE("variance never goes negative in the summary") {
    const auto s = stationary_moment_summary(mild_model());
    REQUIRE(s.sta >= 0.0);
}

TEST_CASE("zero jump mass degenerates the distribution") {
    InflowModel m;
    m.ts = {0.5, 0.0, 1.0};
    const auto mom = stationary_raw_moments(m, 4);
    REQUIRE(mom[0] == Catch::Approx(m.q_min));
    REQUIRE_THROWS_AS(stationary_moment_summary(m), DegenerateDistribution);
}

TEST_CASE("raising the jump frequency raises the stationary mean") {
    double prev = 0.0;
    for (double a : {0.01, 0.02, 0.03, 0.04}) {
        InflowModel m = fitted_model();
        m.ts.a = a;
        const double ave = stationary_raw_moments(m, 1)[0];
        REQUIRE(ave > prev);
        prev = ave;
    }
}

TEST_CASE("autocorrelation decay rate") {
    const auto m = fitted_model();
    REQUIRE(autocorrelation_decay_rate(m) ==
            Catch::Approx((1.0 - m.branching_ratio()) * m.rho).epsilon(1e-14));
    REQUIRE(autocorrelation_decay_rate(m) == Catch::Approx(0.028).epsilon(0.05));
    InflowModel no_jumps = m;
    no_jumps.ts.a = 0.0;
    REQUIRE(autocorrelation_decay_rate(no_jumps) == Catch::Approx(m.rho).epsilon(1e-14));
}

TEST_CASE("unstable kernels are rejected") {
    InflowModel m = fitted_model();
    m.ts.a = 0.06;  // pushes M1 past 1
    REQUIRE(m.branching_ratio() > 1.0);
    REQUIRE_THROWS_AS(stationary_raw_moments(m, 1), NonStationary);
    REQUIRE_THROWS_AS(m.validate(), NonStationary);
}
