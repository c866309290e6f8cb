#ifndef JUMPRES_DYNAMICS_HPP
#define JUMPRES_DYNAMICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "jumpres/errors.hpp"
#include "jumpres/inflow.hpp"
#include "jumpres/parallel.hpp"
#include "jumpres/path_grid.hpp"

namespace jumpres {

/// Inflow, outflow, and scaled water volume. Volume is physical m3 divided
/// by 3600, so dV = (Q - q) dt holds with discharges in m3/s and time in
/// hours; a 6e7 m3 reservoir has capacity 16666.7 in this unit.
struct StateTriple {
    double Q = 0.0;
    double q = 0.0;
    double V = 0.0;
};

/// Reservoir limits. `constrained` selects hard state constraints
/// (q in [0, q_max], V in [0, v_max]) versus the free-state relaxation.
struct ReservoirSpec {
    double v_max = 6e7 / 3600.0;  ///< capacity, scaled volume units
    double q_max = 120.0;         ///< outflow cap (m3/s)
    double a_max = 100.0;         ///< acceleration cap (m3/s/h); may be +inf
    bool constrained = true;

    void validate() const {
        if (!(v_max > 0.0)) throw Error("v_max must be positive");
        if (!(q_max > 0.0)) throw Error("q_max must be positive");
        if (!(a_max > 0.0)) throw Error("a_max must be positive");
    }
};

enum class TargetKind { constant, sine, cosine, sudden_decrease, sudden_increase, piecewise_table };

/// Target-volume profile V_hat(t). Smooth kinds use
/// base_frac * v_ref +/- amp_frac * v_ref modulation; the sudden kinds
/// shift by amp_frac * v_ref inside the open window
/// (window_lo * T, window_hi * T).
struct TargetProfile {
    TargetKind kind = TargetKind::constant;
    double v_ref = 6e7 / 3600.0;  ///< volume scale the fractions refer to
    double base_frac = 0.5;
    double amp_frac = 0.25;
    double window_lo = 0.25;
    double window_hi = 0.75;
    std::vector<std::pair<double, double>> knots;  ///< (t, volume) for piecewise_table

    void validate() const {
        auto in_range = [&](double v) { return v >= 0.0 && v <= v_ref; };
        if (kind == TargetKind::piecewise_table) {
            if (knots.empty()) throw Error("piecewise target needs at least one knot");
            for (std::size_t i = 0; i < knots.size(); ++i) {
                if (!in_range(knots[i].second)) throw Error("target knot outside [0, v_max]");
                if (i > 0 && !(knots[i].first > knots[i - 1].first))
                    throw Error("target knots must have increasing times");
            }
            return;
        }
        if (!in_range(base_frac * v_ref)) throw Error("target base outside [0, v_max]");
        if (kind != TargetKind::constant) {
            if (!in_range((base_frac + amp_frac) * v_ref) ||
                !in_range((base_frac - amp_frac) * v_ref))
                throw Error("target excursion outside [0, v_max]");
        }
    }
};

inline double target_volume(const TargetProfile& profile, double t, double horizon,
                            double v_max) {
    static const double two_pi = 6.28318530717958647692;
    switch (profile.kind) {
        case TargetKind::constant:
            return profile.base_frac * v_max;
        case TargetKind::sine:
            return (profile.base_frac + profile.amp_frac * std::sin(two_pi * t / horizon)) * v_max;
        case TargetKind::cosine:
            return (profile.base_frac + profile.amp_frac * std::cos(two_pi * t / horizon)) * v_max;
        case TargetKind::sudden_decrease:
        case TargetKind::sudden_increase: {
            const bool inside =
                t > profile.window_lo * horizon && t < profile.window_hi * horizon;
            const double sign = profile.kind == TargetKind::sudden_decrease ? -1.0 : 1.0;
            return (profile.base_frac + (inside ? sign * profile.amp_frac : 0.0)) * v_max;
        }
        case TargetKind::piecewise_table: {
            const auto& k = profile.knots;
            if (t <= k.front().first) return k.front().second;
            if (t >= k.back().first) return k.back().second;
            std::size_t j = 1;
            while (k[j].first < t) ++j;
            const double w = (t - k[j - 1].first) / (k[j].first - k[j - 1].first);
            return k[j - 1].second * (1.0 - w) + k[j].second * w;
        }
    }
    return 0.0;
}

inline double target_volume(const TargetProfile& profile, double t, double horizon) {
    return target_volume(profile, t, horizon, profile.v_ref);
}

/// Cost weights, discount, environmental-flow threshold, and horizon.
struct ObjectiveSpec {
    double w1 = 1.0;     ///< run-of-river weight
    double w2 = 0.0;     ///< volume-tracking weight (0 resolves to 4/v_max)
    double w3 = 2000.0;  ///< acceleration weight
    double w4 = 0.0;     ///< low-flow penalty weight; 0 gives the quadratic case
    double delta = 0.5;  ///< discount rate (1/h)
    double q_env = 5.0;  ///< environmental flow threshold (m3/s)
    double horizon = 60.0 * 24.0;  ///< terminal time (h)
    TargetProfile target;

    void validate() const {
        if (!(w1 > 0.0 && w2 > 0.0 && w3 > 0.0)) throw Error("w1, w2, w3 must be positive");
        if (!(w4 >= 0.0)) throw Error("w4 must be nonnegative");
        if (!(delta > 0.0)) throw Error("delta must be positive");
        if (!(horizon > 0.0)) throw Error("horizon must be positive");
        target.validate();
    }
};

/// Low-flow penalty j(q) = (w4/2) max(q_env - q, 0)^2 and its derivative
/// -w4 max(q_env - q, 0); continuously differentiable across the kink.
inline std::pair<double, double> env_penalty(double q, double w4, double q_env) {
    const double gap = q_env - q;
    if (gap <= 0.0) return {0.0, 0.0};
    return {0.5 * w4 * gap * gap, -w4 * gap};
}

/// Nonnegative running cost; the objective integrand is its negation.
inline double running_cost(const StateTriple& x, double a, double t, const ObjectiveSpec& obj) {
    const double vhat = target_volume(obj.target, t, obj.horizon);
    const double dq = x.Q - x.q;
    const double dv = x.V - vhat;
    return 0.5 * obj.w1 * dq * dq + 0.5 * obj.w2 * dv * dv + 0.5 * obj.w3 * a * a +
           env_penalty(x.q, obj.w4, obj.q_env).first;
}

struct ControlRange {
    double lo, hi;
};

/// State-dependent admissible acceleration range. At the outflow bounds
/// only inward accelerations are allowed; in the unconstrained mode the
/// range is [-a_max, a_max] (all reals when a_max is infinite).
inline ControlRange admissible_range(double q, const ReservoirSpec& spec) {
    const double cap = spec.a_max;
    if (!spec.constrained) return {-cap, cap};
    if (q >= spec.q_max) return {-cap, 0.0};
    if (q <= 0.0) return {0.0, cap};
    return {-cap, cap};
}

/// Projection of the candidate control p_q / w3 onto the range.
inline double clip_control(double p_q, double w3, const ControlRange& range) {
    const double raw = p_q / w3;
    if (raw < range.lo) return range.lo;
    if (raw > range.hi) return range.hi;
    return raw;
}

/// One Euler step of the controlled system given the jump increment Z.
/// Returns the new state and the volume projection residual (V' - V_raw,
/// zero in the unconstrained mode).
inline std::pair<StateTriple, double> step_forward(const StateTriple& x, double a, double Z,
                                                   double h, const InflowModel& model,
                                                   const ReservoirSpec& spec) {
    StateTriple next;
    next.Q = x.Q + model.rho * h * (model.q_min - x.Q) + Z;
    if (next.Q < 0.0) next.Q = 0.0;
    next.q = x.q + a * h;
    const double v_raw = x.V + (x.Q - x.q) * h;
    if (spec.constrained) {
        next.q = std::clamp(next.q, 0.0, spec.q_max);
        next.V = std::clamp(v_raw, 0.0, spec.v_max);
        return {next, next.V - v_raw};
    }
    next.V = v_raw;
    return {next, 0.0};
}

/// Markov policy: maps (step index, state) to an acceleration.
using Policy = std::function<double(std::size_t, const StateTriple&)>;

struct InitialState {
    double q0 = 0.5;
    double v0 = 0.5 * 6e7 / 3600.0;
};

/// A policy-driven ensemble plus per-step volume-boundary diagnostics.
struct ControlledEnsemble {
    double h = 0.0;
    PathGrid Q, q, V;  ///< S x (n+1)
    PathGrid a;        ///< S x n
    std::vector<std::int64_t> touch_lower, touch_upper;  ///< per step, paths projected
    std::vector<double> projection_residual;             ///< per step, summed V' - V_raw

    std::size_t paths() const { return Q.paths(); }
    std::size_t steps() const { return a.nodes(); }
};

/// Simulate S paths under `policy`. The policy output is projected onto the
/// admissible range before stepping, so every path satisfies the state
/// constraints in constrained mode no matter what the policy returns.
/// Jump streams are keyed by (seed, path), making the result independent of
/// the worker count.
inline ControlledEnsemble simulate_ensemble(const Policy& policy, const InflowModel& model,
                                            const ReservoirSpec& spec, const ObjectiveSpec& obj,
                                            const InitialState& init, double h, std::size_t n,
                                            std::size_t S, std::uint64_t seed,
                                            unsigned workers = 0) {
    model.validate();
    spec.validate();
    obj.validate();
    if (!(h > 0.0) || n < 1 || S < 1) throw Error("simulate_ensemble: bad grid");

    ControlledEnsemble ens;
    ens.h = h;
    ens.Q = PathGrid(S, n + 1);
    ens.q = PathGrid(S, n + 1);
    ens.V = PathGrid(S, n + 1);
    ens.a = PathGrid(S, n);
    parallel_for(S, workers, [&](std::size_t p) {
        Rng rng(seed, p);
        StateTriple x{model.q_initial, init.q0, init.v0};
        ens.Q.at(p, 0) = x.Q;
        ens.q.at(p, 0) = x.q;
        ens.V.at(p, 0) = x.V;
        const double jump_scale = (model.jump_scale_includes_rho ? model.rho : 1.0) * model.ts.a;
        for (std::size_t i = 0; i < n; ++i) {
            const auto range = admissible_range(x.q, spec);
            double a = policy(i, x);
            a = std::clamp(a, range.lo, range.hi);
            const double Z =
                sample_tempered_stable(model.ts.alpha, jump_scale * x.Q * h, model.ts.b, rng);
            x = step_forward(x, a, Z, h, model, spec).first;
            ens.a.at(p, i) = a;
            ens.Q.at(p, i + 1) = x.Q;
            ens.q.at(p, i + 1) = x.q;
            ens.V.at(p, i + 1) = x.V;
        }
    });

    // Boundary diagnostics from the stored grids; recomputing V_raw with the
    // same expression keeps the residuals exact in floating point, and the
    // sequential reduction keeps them identical across worker counts.
    ens.touch_lower.assign(n, 0);
    ens.touch_upper.assign(n, 0);
    ens.projection_residual.assign(n, 0.0);
    if (spec.constrained) {
        for (std::size_t i = 0; i < n; ++i) {
            const double* Qi = ens.Q.node_slice(i);
            const double* qi = ens.q.node_slice(i);
            const double* Vi = ens.V.node_slice(i);
            const double* Vn = ens.V.node_slice(i + 1);
            for (std::size_t p = 0; p < S; ++p) {
                const double v_raw = Vi[p] + (Qi[p] - qi[p]) * h;
                if (v_raw > spec.v_max) ++ens.touch_upper[i];
                if (v_raw < 0.0) ++ens.touch_lower[i];
                ens.projection_residual[i] += Vn[p] - v_raw;
            }
        }
    }
    return ens;
}

/// Monte-Carlo estimate of the discounted objective: the path average of
/// sum_i exp(-delta t_i) (-cost_i) h over the left nodes.
inline double evaluate_objective(const ControlledEnsemble& ens, const ObjectiveSpec& obj) {
    const std::size_t S = ens.paths();
    const std::size_t n = ens.steps();
    double total = 0.0;
    for (std::size_t p = 0; p < S; ++p) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) * ens.h;
            const StateTriple x{ens.Q.at(p, i), ens.q.at(p, i), ens.V.at(p, i)};
            acc -= std::exp(-obj.delta * t) * running_cost(x, ens.a.at(p, i), t, obj) * ens.h;
        }
        total += acc;
    }
    return total / static_cast<double>(S);
}

}  // namespace jumpres

#endif
