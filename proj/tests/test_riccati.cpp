#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <sstream>

#include "jumpres/riccati.hpp"

using namespace jumpres;

namespace {

InflowModel nominal_model() {
    InflowModel m;
    m.q_min = 0.5;
    m.rho = 0.295;
    m.ts = {0.923, 0.0493, 0.007};
    return m;
}

ObjectiveSpec nominal_objective(double horizon) {
    ObjectiveSpec obj;
    obj.w1 = 1.0;
    obj.w2 = 4.0 / (6e7 / 3600.0);
    obj.w3 = 2000.0;
    obj.w4 = 0.0;
    obj.delta = 0.5;
    obj.horizon = horizon;
    obj.target.kind = TargetKind::constant;
    obj.target.v_ref = 6e7 / 3600.0;
    obj.target.base_frac = 0.5;
    return obj;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b,
                    std::size_t stride_b = 1) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::fabs(a[i] - b[i * stride_b]));
    return m;
}

}  // namespace

TEST_CASE("one backward Euler step from zero terminal data") {
    const auto model = nominal_model();
    const double T = 24.0, dt = 0.5;
    const auto obj = nominal_objective(T);
    const auto tab = solve_riccati(model, obj, dt);
    const std::size_t k = tab.nodes() - 2;  // node T - dt
    const double vhat = 0.5 * obj.target.v_ref;
    REQUIRE(tab.F[k] == Catch::Approx(-dt * obj.w1).epsilon(1e-14));
    REQUIRE(tab.L[k] == Catch::Approx(-dt * obj.w2).epsilon(1e-14));
    REQUIRE(tab.A[k] == Catch::Approx(-dt * obj.w1).epsilon(1e-14));
    REQUIRE(tab.B[k] == Catch::Approx(dt * obj.w1).epsilon(1e-14));
    REQUIRE(tab.O[k] == Catch::Approx(dt * obj.w2 * vhat).epsilon(1e-14));
    REQUIRE(tab.C[k] == 0.0);
    REQUIRE(tab.D[k] == 0.0);
    REQUIRE(tab.G[k] == 0.0);
    REQUIRE(tab.I[k] == 0.0);
}

TEST_CASE("terminal condition is exactly zero") {
    const auto tab = solve_riccati(nominal_model(), nominal_objective(48.0), 0.5);
    const std::size_t last = tab.nodes() - 1;
    for (const auto* v : {&tab.A, &tab.B, &tab.C, &tab.D, &tab.E, &tab.F, &tab.G, &tab.I, &tab.J,
                          &tab.K, &tab.L, &tab.O})
        REQUIRE((*v)[last] == 0.0);
}

TEST_CASE("zero-cost problem yields the identically zero table") {
    auto obj = nominal_objective(48.0);
    obj.w1 = 0.0;
    obj.w2 = 0.0;
    const auto tab = solve_riccati(nominal_model(), obj, 0.5);
    for (const auto* v : {&tab.A, &tab.B, &tab.C, &tab.D, &tab.E, &tab.F, &tab.G, &tab.I, &tab.J,
                          &tab.K, &tab.L, &tab.O})
        for (double x : *v) REQUIRE(x == 0.0);
}

TEST_CASE("full twelve-equation system confirms the symmetry") {
    const auto model = nominal_model();
    const auto obj = nominal_objective(30.0 * 24.0);
    const auto full = solve_riccati_full(model, obj, 0.25);
    const auto red = solve_riccati(model, obj, 0.25);
    for (std::size_t k = 0; k < full.nodes(); ++k) {
        REQUIRE(std::fabs(full.E[k] - full.B[k]) <= 1e-8);
        REQUIRE(std::fabs(full.J[k] - full.C[k]) <= 1e-8);
        REQUIRE(std::fabs(full.K[k] - full.G[k]) <= 1e-8);
        REQUIRE(std::fabs(full.E[k] - red.E[k]) <= 1e-8);
        REQUIRE(std::fabs(full.F[k] - red.F[k]) <= 1e-8);
        REQUIRE(std::fabs(full.A[k] - red.A[k]) <= 1e-8);
        REQUIRE(std::fabs(full.D[k] - red.D[k]) <= 1e-8);
    }
    // reduced table carries the symmetry exactly
    REQUIRE(max_abs_diff(red.E, red.B) == 0.0);
    REQUIRE(max_abs_diff(red.J, red.C) == 0.0);
    REQUIRE(max_abs_diff(red.K, red.G) == 0.0);
}

TEST_CASE("halving dt halves the error (first-order refinement)") {
    const auto model = nominal_model();
    const auto obj = nominal_objective(240.0);
    const auto t1 = solve_riccati(model, obj, 1.0);
    const auto t2 = solve_riccati(model, obj, 0.5);
    const auto t4 = solve_riccati(model, obj, 0.25);
    auto series_diff = [](const std::vector<double>& coarse, const std::vector<double>& fine,
                          std::size_t stride) {
        double acc = 0.0;
        for (std::size_t i = 0; i < coarse.size(); ++i)
            acc += std::fabs(coarse[i] - fine[i * stride]);
        return acc / static_cast<double>(coarse.size());
    };
    for (auto member : {&RiccatiTable::E, &RiccatiTable::F, &RiccatiTable::G, &RiccatiTable::I,
                        &RiccatiTable::L, &RiccatiTable::O, &RiccatiTable::A, &RiccatiTable::D}) {
        const double d12 = series_diff(t1.*member, t2.*member, 2);
        const double d24 = series_diff(t2.*member, t4.*member, 2);
        if (d24 < 1e-14) continue;
        const double ratio = d12 / d24;
        REQUIRE(ratio > 1.5);
        REQUIRE(ratio < 2.5);
    }
}

TEST_CASE("the D-equation variant only affects A and D") {
    const auto model = nominal_model();
    const auto obj = nominal_objective(240.0);
    RiccatiOptions printed, adjoint;
    adjoint.d_variant = DEquationVariant::adjoint;
    const auto tp = solve_riccati(model, obj, 0.5, printed);
    const auto ta = solve_riccati(model, obj, 0.5, adjoint);
    REQUIRE(tp.E == ta.E);
    REQUIRE(tp.F == ta.F);
    REQUIRE(tp.G == ta.G);
    REQUIRE(tp.I == ta.I);
    REQUIRE(tp.L == ta.L);
    REQUIRE(tp.O == ta.O);
    REQUIRE(tp.B == ta.B);
    REQUIRE(tp.C == ta.C);
    REQUIRE(tp.K == ta.K);
    // and with the reduced symmetry in force both variants give identical D
    REQUIRE(tp.D == ta.D);
}

TEST_CASE("adjoints vanish at the terminal time and expose intercepts at the origin") {
    const auto tab = solve_riccati(nominal_model(), nominal_objective(48.0), 0.5);
    const auto at_T = lq_adjoints(tab, 48.0, {3.0, 2.0, 1.0});
    REQUIRE(at_T[0] == 0.0);
    REQUIRE(at_T[1] == 0.0);
    REQUIRE(at_T[2] == 0.0);
    const auto origin = lq_adjoints(tab, 12.0, {0.0, 0.0, 0.0});
    const std::size_t k = 24;  // 12.0 / 0.5
    REQUIRE(origin[0] == Catch::Approx(tab.D[k]));
    REQUIRE(origin[1] == Catch::Approx(tab.I[k]));
    REQUIRE(origin[2] == Catch::Approx(tab.O[k]));
    REQUIRE_THROWS_AS(lq_adjoints(tab, 48.6, {0, 0, 0}), OutOfHorizon);
}

TEST_CASE("adjoint affine form is the stated linear combination") {
    RiccatiTable tab;
    tab.dt = 1.0;
    tab.horizon = 1.0;
    tab.resize(2);
    tab.t = {0.0, 1.0};
    tab.E[0] = 1.0;
    tab.F[0] = 2.0;
    tab.G[0] = 3.0;
    tab.I[0] = 4.0;
    const auto p = lq_adjoints(tab, 0.0, {1.0, 1.0, 1.0});
    REQUIRE(p[1] == Catch::Approx(10.0));
}

TEST_CASE("jump response maps scale linearly in z") {
    const auto tab = solve_riccati(nominal_model(), nominal_objective(48.0), 0.5);
    const auto z0 = lq_theta(tab, 10.0, 0.0);
    REQUIRE(z0[0] == 0.0);
    REQUIRE(z0[1] == 0.0);
    REQUIRE(z0[2] == 0.0);
    const auto zT = lq_theta(tab, 48.0, 5.0);
    REQUIRE(zT[0] == 0.0);
    REQUIRE(zT[1] == 0.0);
    REQUIRE(zT[2] == 0.0);
    RiccatiTable unit;
    unit.dt = 1.0;
    unit.horizon = 1.0;
    unit.resize(2);
    unit.t = {0.0, 1.0};
    unit.A[0] = 2.0;
    REQUIRE(lq_theta(unit, 0.0, 3.0)[0] == Catch::Approx(6.0));
}

TEST_CASE("optimal acceleration clips at the cap") {
    RiccatiTable tab;
    tab.dt = 1.0;
    tab.horizon = 1.0;
    tab.resize(2);
    tab.t = {0.0, 1.0};
    tab.I[0] = 1000.0;  // p_q = 1000 at the origin state
    const StateTriple zero{0.0, 0.0, 0.0};
    REQUIRE(lq_optimal_accel(tab, 0.0, zero, 2000.0,
                             std::numeric_limits<double>::infinity()) == Catch::Approx(0.5));
    tab.I[0] = 3e5;
    REQUIRE(lq_optimal_accel(tab, 0.0, zero, 2000.0, 100.0) == Catch::Approx(100.0));
    tab.I[0] = 0.0;
    REQUIRE(lq_optimal_accel(tab, 0.0, zero, 2000.0, 100.0) == 0.0);
}

TEST_CASE("blow-up is detected and reported with its onset time") {
    auto model = nominal_model();
    auto obj = nominal_objective(24.0 * 200.0);
    obj.delta = 1e-9;   // effectively undiscounted
    obj.w3 = 1e-9;      // enormous feedback gain drives the quadratic terms
    obj.w1 = 1e6;
    RiccatiOptions opts;
    opts.blow_up_cap = 1e9;
    bool threw = false;
    try {
        solve_riccati(model, obj, 0.5, opts);
    } catch (const BlowUp& e) {
        threw = true;
        REQUIRE(e.time >= 0.0);
        REQUIRE(e.time < obj.horizon);
    }
    REQUIRE(threw);
}

TEST_CASE("csv serialization carries all coefficient columns") {
    const auto tab = solve_riccati(nominal_model(), nominal_objective(4.0), 1.0);
    std::ostringstream os;
    write_riccati_csv(tab, os);
    const std::string text = os.str();
    REQUIRE(text.rfind("t,A,B,C,D,E,F,G,I,J,K,L,O\n", 0) == 0);
    std::size_t rows = 0;
    for (char ch : text)
        if (ch == '\n') ++rows;
    REQUIRE(rows == tab.nodes() + 1);
}
