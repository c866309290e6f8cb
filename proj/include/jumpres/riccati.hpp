#ifndef JUMPRES_RICCATI_HPP
#define JUMPRES_RICCATI_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include "jumpres/dynamics.hpp"
#include "jumpres/errors.hpp"
#include "jumpres/inflow.hpp"

namespace jumpres {

/// Which drift to use in the D equation. The two forms are algebraically
/// identical once the symmetry E=B, J=C holds, but they differ when the
/// twelve coupled equations are integrated without assuming it.
enum class DEquationVariant {
    printed,   ///< -rho M1 (A + B + C)
    adjoint,   ///< -rho M1 (A + E + J)
};

struct RiccatiOptions {
    double blow_up_cap = 1e12;  ///< magnitude cap; exceeding it raises BlowUp
    DEquationVariant d_variant = DEquationVariant::printed;
};

/// Time-gridded coefficients of the affine adjoint representation
///   p_Q = A Q + B q + C V + D,
///   p_q = E Q + F q + G V + I,
///   p_V = J Q + K q + L V + O,
/// with every coefficient zero at the terminal time.
struct RiccatiTable {
    double dt = 0.0;
    double horizon = 0.0;
    std::vector<double> t;
    std::vector<double> A, B, C, D, E, F, G, I, J, K, L, O;

    std::size_t nodes() const { return t.size(); }

    void resize(std::size_t n) {
        t.assign(n, 0.0);
        for (auto* v : {&A, &B, &C, &D, &E, &F, &G, &I, &J, &K, &L, &O}) v->assign(n, 0.0);
    }
};

namespace detail {

struct RiccatiRates {
    double rho, q_min, m1, delta, w1, w2, w3;
    double rc() const { return rho * (1.0 - m1); }
};

inline void check_cap(double value, double cap, double when) {
    if (!(std::fabs(value) <= cap))
        throw BlowUp("Riccati coefficient exceeded " + std::to_string(cap) +
                         " at t = " + std::to_string(when),
                     when);
}

}  // namespace detail

/// Integrate the reduced block backward from zero terminal data with an
/// explicit Euler march, then recover (A, D) from the already-known
/// coefficients. E = B, J = C, K = G hold exactly by construction. The
/// target volume may vary in time; it is sampled at the node where the
/// derivatives are evaluated (the larger-t end of each backward step).
inline RiccatiTable solve_riccati(const InflowModel& model, const ObjectiveSpec& obj, double dt,
                                  const RiccatiOptions& opts = {}) {
    if (!(dt > 0.0)) throw Error("solve_riccati: dt must be positive");
    if (obj.w4 != 0.0) throw Error("solve_riccati: exact solution requires w4 = 0");
    const std::size_t n = static_cast<std::size_t>(std::llround(obj.horizon / dt));
    if (n < 1 || std::fabs(static_cast<double>(n) * dt - obj.horizon) > 1e-9 * obj.horizon)
        throw Error("solve_riccati: dt must divide the horizon");

    detail::RiccatiRates r{model.rho, model.q_min, model.branching_ratio(),
                           obj.delta,  obj.w1,      obj.w2,
                           obj.w3};

    RiccatiTable tab;
    tab.dt = dt;
    tab.horizon = obj.horizon;
    tab.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) tab.t[k] = static_cast<double>(k) * dt;

    const double rc = r.rc();
    // backward march of (E, J, F, G, I, L, O); terminal node already zero
    for (std::size_t k = n; k > 0; --k) {
        const double tk = tab.t[k];
        const double vhat = target_volume(obj.target, tk, obj.horizon);
        const double E = tab.E[k], J = tab.J[k], F = tab.F[k], G = tab.G[k];
        const double I = tab.I[k], L = tab.L[k], O = tab.O[k];
        const double dE = -r.w1 + (rc + r.delta) * E + J - G - E * F / r.w3;
        const double dJ = (rc + r.delta) * J - L - E * G / r.w3;
        const double dF = r.w1 + r.delta * F + 2.0 * G - F * F / r.w3;
        const double dG = r.delta * G + L - F * G / r.w3;
        const double dI = -r.rho * r.q_min * E + r.delta * I + O - F * I / r.w3;
        const double dL = r.w2 + r.delta * L - G * G / r.w3;
        const double dO = -r.rho * r.q_min * J - r.w2 * vhat + r.delta * O - G * I / r.w3;
        tab.E[k - 1] = E - dt * dE;
        tab.J[k - 1] = J - dt * dJ;
        tab.F[k - 1] = F - dt * dF;
        tab.G[k - 1] = G - dt * dG;
        tab.I[k - 1] = I - dt * dI;
        tab.L[k - 1] = L - dt * dL;
        tab.O[k - 1] = O - dt * dO;
        for (double v : {tab.E[k - 1], tab.J[k - 1], tab.F[k - 1], tab.G[k - 1], tab.I[k - 1],
                         tab.L[k - 1], tab.O[k - 1]})
            detail::check_cap(v, opts.blow_up_cap, tab.t[k - 1]);
    }
    tab.B = tab.E;
    tab.C = tab.J;
    tab.K = tab.G;

    // recover (A, D); they never feed back into the block above
    for (std::size_t k = n; k > 0; --k) {
        const double A = tab.A[k], D = tab.D[k];
        const double B = tab.B[k], C = tab.C[k], E = tab.E[k], F = tab.F[k];
        const double I = tab.I[k], J = tab.J[k], O = tab.O[k];
        const double dA = r.w1 + (2.0 * rc + r.delta) * A - 2.0 * C - B * E / r.w3;
        const double coupling = opts.d_variant == DEquationVariant::printed ? (A + B + C)
                                                                            : (A + E + J);
        const double dD = -r.rho * r.q_min * A + (rc + r.delta) * D - O - B * I / r.w3 -
                          r.rho * r.m1 * coupling;
        tab.A[k - 1] = A - dt * dA;
        tab.D[k - 1] = D - dt * dD;
        detail::check_cap(tab.A[k - 1], opts.blow_up_cap, tab.t[k - 1]);
        detail::check_cap(tab.D[k - 1], opts.blow_up_cap, tab.t[k - 1]);
    }
    return tab;
}

/// Integrate all twelve coefficient equations without assuming the
/// E = B, J = C, K = G symmetry. Used to verify that the reduced march
/// above reproduces the full system.
inline RiccatiTable solve_riccati_full(const InflowModel& model, const ObjectiveSpec& obj,
                                       double dt, const RiccatiOptions& opts = {}) {
    if (!(dt > 0.0)) throw Error("solve_riccati_full: dt must be positive");
    if (obj.w4 != 0.0) throw Error("solve_riccati_full: exact solution requires w4 = 0");
    const std::size_t n = static_cast<std::size_t>(std::llround(obj.horizon / dt));
    if (n < 1 || std::fabs(static_cast<double>(n) * dt - obj.horizon) > 1e-9 * obj.horizon)
        throw Error("solve_riccati_full: dt must divide the horizon");

    detail::RiccatiRates r{model.rho, model.q_min, model.branching_ratio(),
                           obj.delta,  obj.w1,      obj.w2,
                           obj.w3};
    const double rc = r.rc();

    RiccatiTable tab;
    tab.dt = dt;
    tab.horizon = obj.horizon;
    tab.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) tab.t[k] = static_cast<double>(k) * dt;

    for (std::size_t k = n; k > 0; --k) {
        const double tk = tab.t[k];
        const double vhat = target_volume(obj.target, tk, obj.horizon);
        const double A = tab.A[k], B = tab.B[k], C = tab.C[k], D = tab.D[k];
        const double E = tab.E[k], F = tab.F[k], G = tab.G[k], I = tab.I[k];
        const double J = tab.J[k], K = tab.K[k], L = tab.L[k], O = tab.O[k];

        const double dA = r.w1 + (2.0 * rc + r.delta) * A - J - C - B * E / r.w3;
        const double dB = -r.w1 + (rc + r.delta) * B + C - K - B * F / r.w3;
        const double dC = (rc + r.delta) * C - L - B * G / r.w3;
        const double coupling = opts.d_variant == DEquationVariant::printed ? (A + B + C)
                                                                            : (A + E + J);
        const double dD = -r.rho * r.q_min * A + (rc + r.delta) * D - O - B * I / r.w3 -
                          r.rho * r.m1 * coupling;
        const double dE = -r.w1 + (rc + r.delta) * E + J - G - E * F / r.w3;
        const double dF = r.w1 + r.delta * F + K + G - F * F / r.w3;
        const double dG = r.delta * G + L - F * G / r.w3;
        const double dI = -r.rho * r.q_min * E + r.delta * I + O - F * I / r.w3;
        const double dJ = (rc + r.delta) * J - L - E * K / r.w3;
        const double dK = r.delta * K + L - K * F / r.w3;
        const double dL = r.w2 + r.delta * L - G * K / r.w3;
        const double dO = -r.rho * r.q_min * J - r.w2 * vhat + r.delta * O - I * K / r.w3;

        tab.A[k - 1] = A - dt * dA;
        tab.B[k - 1] = B - dt * dB;
        tab.C[k - 1] = C - dt * dC;
        tab.D[k - 1] = D - dt * dD;
        tab.E[k - 1] = E - dt * dE;
        tab.F[k - 1] = F - dt * dF;
        tab.G[k - 1] = G - dt * dG;
        tab.I[k - 1] = I - dt * dI;
        tab.J[k - 1] = J - dt * dJ;
        tab.K[k - 1] = K - dt * dK;
        tab.L[k - 1] = L - dt * dL;
        tab.O[k - 1] = O - dt * dO;
        for (auto* v : {&tab.A, &tab.B, &tab.C, &tab.D, &tab.E, &tab.F, &tab.G, &tab.I, &tab.J,
                        &tab.K, &tab.L, &tab.O})
            detail::check_cap((*v)[k - 1], opts.blow_up_cap, tab.t[k - 1]);
    }
    return tab;
}

namespace detail {

/// Linear interpolation weights at time t on the table grid.
struct TableLocator {
    std::size_t k0, k1;
    double w1;
};

inline TableLocator locate_time(const RiccatiTable& tab, double t) {
    if (!(t >= 0.0) || t > tab.horizon * (1.0 + 1e-12) + 1e-12)
        throw OutOfHorizon("time " + std::to_string(t) + " is outside [0, " +
                           std::to_string(tab.horizon) + "]");
    const double pos = std::min(t / tab.dt, static_cast<double>(tab.nodes() - 1));
    const std::size_t k0 = std::min(static_cast<std::size_t>(pos), tab.nodes() - 2);
    return {k0, k0 + 1, pos - static_cast<double>(k0)};
}

inline double lerp(const std::vector<double>& v, const TableLocator& loc) {
    return v[loc.k0] * (1.0 - loc.w1) + v[loc.k1] * loc.w1;
}

}  // namespace detail

/// The three affine adjoints (p_Q, p_q, p_V) at time t and the given state.
inline std::array<double, 3> lq_adjoints(const RiccatiTable& tab, double t,
                                         const StateTriple& x) {
    const auto loc = detail::locate_time(tab, t);
    using detail::lerp;
    const double p_Q = lerp(tab.A, loc) * x.Q + lerp(tab.B, loc) * x.q + lerp(tab.C, loc) * x.V +
                       lerp(tab.D, loc);
    const double p_q = lerp(tab.E, loc) * x.Q + lerp(tab.F, loc) * x.q + lerp(tab.G, loc) * x.V +
                       lerp(tab.I, loc);
    const double p_V = lerp(tab.J, loc) * x.Q + lerp(tab.K, loc) * x.q + lerp(tab.L, loc) * x.V +
                       lerp(tab.O, loc);
    return {p_Q, p_q, p_V};
}

/// Jump-response maps (theta_Q, theta_q, theta_V)(t, z) = (A z, E z, J z).
inline std::array<double, 3> lq_theta(const RiccatiTable& tab, double t, double z) {
    if (!(z >= 0.0)) throw Error("lq_theta: jump size must be nonnegative");
    const auto loc = detail::locate_time(tab, t);
    using detail::lerp;
    return {lerp(tab.A, loc) * z, lerp(tab.E, loc) * z, lerp(tab.J, loc) * z};
}

/// Optimal acceleration p_q / w3 clipped to [-a_cap, a_cap].
inline double lq_optimal_accel(const RiccatiTable& tab, double t, const StateTriple& x, double w3,
                               double a_cap) {
    if (!(w3 > 0.0)) throw Error("lq_optimal_accel: w3 must be positive");
    const double raw = lq_adjoints(tab, t, x)[1] / w3;
    if (std::isinf(a_cap)) return raw;
    return std::clamp(raw, -a_cap, a_cap);
}

/// One row per node: t,A,...,O with 9 significant digits.
inline void write_riccati_csv(const RiccatiTable& tab, std::ostream& os) {
    os << "t,A,B,C,D,E,F,G,I,J,K,L,O\n";
    char buf[64];
    auto put = [&](double v, char sep) {
        std::snprintf(buf, sizeof buf, "%.9g%c", v, sep);
        os << buf;
    };
    for (std::size_t k = 0; k < tab.nodes(); ++k) {
        put(tab.t[k], ',');
        put(tab.A[k], ',');
        put(tab.B[k], ',');
        put(tab.C[k], ',');
        put(tab.D[k], ',');
        put(tab.E[k], ',');
        put(tab.F[k], ',');
        put(tab.G[k], ',');
        put(tab.I[k], ',');
        put(tab.J[k], ',');
        put(tab.K[k], ',');
        put(tab.L[k], ',');
        put(tab.O[k], '\n');
    }
}

inline void write_riccati_csv(const RiccatiTable& tab, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    write_riccati_csv(tab, os);
}

}  // namespace jumpres

#endif
