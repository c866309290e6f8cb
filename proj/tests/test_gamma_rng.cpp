#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "jumpres/gamma.hpp"
#include "jumpres/rng.hpp"

using namespace jumpres;

TEST_CASE("gamma function matches sqrt(pi) at one half") {
    REQUIRE(gamma_fn(0.5) == Catch::Approx(std::sqrt(3.14159265358979323846)).epsilon(1e-12));
}

TEST_CASE("gamma function reproduces integer factorials") {
    double fact = 1.0;
    for (int n = 1; n <= 12; ++n) {
        REQUIRE(gamma_fn(static_cast<double>(n)) == Catch::Approx(fact).epsilon(1e-11));
        fact *= n;
    }
}

TEST_CASE("gamma recurrence holds across the reflection split") {
    Rng rng(7, 0);
    for (int i = 0; i < 200; ++i) {
        const double x = 0.02 + 3.0 * rng.uniform();
        REQUIRE(gamma_fn(x + 1.0) == Catch::Approx(x * gamma_fn(x)).epsilon(1e-10));
    }
}

TEST_CASE("rng streams are reproducible and distinct") {
    Rng a(123, 5), b(123, 5), c(123, 6);
    bool all_equal_cross = true;
    for (int i = 0; i < 64; ++i) {
        const auto va = a.next_u64();
        REQUIRE(va == b.next_u64());
        all_equal_cross = all_equal_cross && (va == c.next_u64());
    }
    REQUIRE_FALSE(all_equal_cross);
}

TEST_CASE("uniform draws live in their documented ranges") {
    Rng rng(99, 0);
    double mean = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        const double up = rng.uniform_pos();
        REQUIRE(up > 0.0);
        REQUIRE(up <= 1.0);
        mean += u;
    }
    REQUIRE(mean / 20000.0 == Catch::Approx(0.5).margin(0.01));
}

TEST_CASE("exponential draws have unit mean") {
    Rng rng(2024, 0);
    double mean = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) mean += rng.exponential();
    mean /= n;
    REQUIRE(mean == Catch::Approx(1.0).margin(0.01));
}
