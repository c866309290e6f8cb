#ifndef JUMPRES_INFLOW_HPP
#define JUMPRES_INFLOW_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "jumpres/errors.hpp"
#include "jumpres/parallel.hpp"
#include "jumpres/path_grid.hpp"
#include "jumpres/rng.hpp"
#include "jumpres/tempered_stable.hpp"

namespace jumpres {

/// Self-excited inflow model: mean reversion toward q_min at rate rho,
/// excited by tempered-stable jumps whose intensity is proportional to the
/// current discharge (a branching mechanism that clusters floods).
struct InflowModel {
    double q_min = 0.5;  ///< minimum inflow (m3/s)
    double rho = 0.295;  ///< recession rate (1/h)
    TemperedStableParams ts;
    double q_initial = 0.5;  ///< initial inflow used by path simulation

    /// The per-step jump scale is rho * a * Q * h. The recession rate is
    /// part of the kernel normalization; flip this off to reproduce the
    /// alternative convention where `a` is taken to absorb rho already.
    bool jump_scale_includes_rho = true;

    double branching_ratio() const { return tempering_moment(ts, 1); }

    void validate() const {
        ts.validate();
        if (!(q_min > 0.0)) throw Error("q_min must be positive");
        if (!(rho > 0.0)) throw Error("rho must be positive");
        if (!(q_initial >= 0.0)) throw Error("initial inflow must be nonnegative");
        if (!(rho * (1.0 - branching_ratio()) > 0.0))
            throw NonStationary("mean-reverting condition violated: M1 >= 1");
    }
};

/// First four standardized moments. `kur` is excess kurtosis (0 for a
/// Gaussian).
struct MomentSet {
    double ave = 0.0;
    double sta = 0.0;
    double ske = 0.0;
    double kur = 0.0;
};

/// Decay rate of the stationary autocorrelation, (1 - M1) * rho.
inline double autocorrelation_decay_rate(const InflowModel& model) {
    const double m1 = model.branching_ratio();
    if (!(1.0 - m1 > 0.0)) throw NonStationary("no stationary autocorrelation: M1 >= 1");
    return (1.0 - m1) * model.rho;
}

/// Stationary raw moments E[Q^k] for k = 1..k_max from the moment balance
/// k (1-M1) E[Q^k] = k q_min E[Q^{k-1}] + sum_{j=2..k} C(k,j) M_j E[Q^{k-j+1}].
inline std::vector<double> stationary_raw_moments(const InflowModel& model, int k_max) {
    const double m1 = model.branching_ratio();
    if (!(1.0 - m1 > 0.0)) throw NonStationary("stationary moments require M1 < 1");
    std::vector<double> m(static_cast<std::size_t>(k_max) + 1, 0.0);
    m[0] = 1.0;
    m[1] = model.q_min / (1.0 - m1);
    for (int k = 2; k <= k_max; ++k) {
        double rhs = k * model.q_min * m[static_cast<std::size_t>(k) - 1];
        double binom = 1.0;  // running C(k, j)
        for (int j = 1; j <= k; ++j) {
            binom = binom * static_cast<double>(k - j + 1) / static_cast<double>(j);
            if (j < 2) continue;
            rhs += binom * tempering_moment(model.ts, j) * m[static_cast<std::size_t>(k - j + 1)];
        }
        m[static_cast<std::size_t>(k)] = rhs / (k * (1.0 - m1));
    }
    m.erase(m.begin());
    return m;
}

/// (Ave, Sta, Ske, excess Kur) of the stationary inflow.
/// Throws DegenerateDistribution when the variance vanishes (a = 0).
inline MomentSet stationary_moment_summary(const InflowModel& model) {
    const auto m = stationary_raw_moments(model, 4);
    MomentSet out;
    out.ave = m[0];
    const double var = m[1] - m[0] * m[0];
    out.sta = std::sqrt(std::max(0.0, var));
    if (!(var > 0.0))
        throw DegenerateDistribution("zero stationary variance: skewness/kurtosis undefined");
    const double mu3 = m[2] - 3.0 * m[0] * m[1] + 2.0 * m[0] * m[0] * m[0];
    const double mu4 = m[3] - 4.0 * m[0] * m[2] + 6.0 * m[0] * m[0] * m[1] -
                       3.0 * m[0] * m[0] * m[0] * m[0];
    out.ske = mu3 / (out.sta * out.sta * out.sta);
    out.kur = mu4 / (var * var) - 3.0;
    return out;
}

/// Exact solution of the mean flow: E[Q_t] relaxes toward q_min/(1-M1)
/// at rate rho (1-M1).
inline double mean_inflow_exact(const InflowModel& model, double t) {
    const double m1 = model.branching_ratio();
    const double q_inf = model.q_min / (1.0 - m1);
    return q_inf + (model.q_initial - q_inf) * std::exp(-model.rho * (1.0 - m1) * t);
}

/// Explicit Euler step of the inflow: Q' = Q + rho h (q_min - Q) + Z with
/// Z ~ TS(alpha, jump_scale * Q * h, b).
inline double step_inflow(const InflowModel& model, double q_now, double h, Rng& rng) {
    const double scale = (model.jump_scale_includes_rho ? model.rho : 1.0) * model.ts.a;
    const double z = sample_tempered_stable(model.ts.alpha, scale * q_now * h, model.ts.b, rng);
    const double next = q_now + model.rho * h * (model.q_min - q_now) + z;
    return next > 0.0 ? next : 0.0;
}

/// Simulate one inflow path into `out[0..n]`, using the stream keyed by
/// (seed, path_index). out[0] = model.q_initial.
inline void simulate_inflow_path(const InflowModel& model, double h, std::size_t n,
                                 std::uint64_t seed, std::uint64_t path_index, double* out) {
    Rng rng(seed, path_index);
    out[0] = model.q_initial;
    for (std::size_t i = 0; i < n; ++i) out[i + 1] = step_inflow(model, out[i], h, rng);
}

/// S independent inflow paths on the grid t_i = i h, i = 0..n. Each path
/// owns its own counter-based stream, so the result is identical for any
/// worker count.
inline PathGrid simulate_inflow_paths(const InflowModel& model, double h, std::size_t n,
                                      std::size_t S, std::uint64_t seed, unsigned workers = 0) {
    model.validate();
    if (!(h > 0.0) || n < 1 || S < 1) throw Error("simulate_inflow_paths: bad grid");
    PathGrid grid(S, n + 1);
    parallel_for(S, workers, [&](std::size_t p) {
        Rng rng(seed, p);
        grid.at(p, 0) = model.q_initial;
        for (std::size_t i = 0; i < n; ++i)
            grid.at(p, i + 1) = step_inflow(model, grid.at(p, i), h, rng);
    });
    return grid;
}

}  // namespace jumpres

#endif
