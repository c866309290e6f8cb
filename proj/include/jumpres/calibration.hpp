#ifndef JUMPRES_CALIBRATION_HPP
#define JUMPRES_CALIBRATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "jumpres/errors.hpp"
#include "jumpres/inflow.hpp"
#include "jumpres/parallel.hpp"
#include "jumpres/rng.hpp"

namespace jumpres {

/// Hourly operation record. Outflow and volume are optional (inflow-only
/// calibration). Volume is stored in the solver's scaled unit (m3 / 3600).
/// Gaps in the hourly timestamps split the series into segments; regressions
/// pool segments and lagged statistics never straddle a gap.
struct HourlySeries {
    std::vector<std::int64_t> t;  ///< hours since epoch, strictly increasing
    std::vector<double> inflow;
    std::vector<double> outflow;
    std::vector<double> volume;
    bool has_outflow = false;
    bool has_volume = false;
    std::vector<std::size_t> segment_starts;  ///< first index of each segment

    std::size_t size() const { return t.size(); }

    void rebuild_segments() {
        segment_starts.clear();
        if (t.empty()) return;
        segment_starts.push_back(0);
        for (std::size_t i = 1; i < t.size(); ++i)
            if (t[i] - t[i - 1] != 1) segment_starts.push_back(i);
    }

    /// [begin, end) of segment s.
    std::pair<std::size_t, std::size_t> segment(std::size_t s) const {
        const std::size_t b = segment_starts[s];
        const std::size_t e =
            s + 1 < segment_starts.size() ? segment_starts[s + 1] : t.size();
        return {b, e};
    }
    std::size_t segments() const { return segment_starts.size(); }
};

/// Population moments of a sample: mean, sqrt of the biased variance,
/// skewness, and excess kurtosis.
inline MomentSet empirical_moments(const std::vector<double>& x) {
    if (x.empty()) throw Error("empirical_moments: empty sample");
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if (!(m2 > 0.0)) throw DegenerateDistribution("constant series has no shape moments");
    MomentSet out;
    out.ave = mean;
    out.sta = std::sqrt(m2);
    out.ske = m3 / (out.sta * out.sta * out.sta);
    out.kur = m4 / (m2 * m2) - 3.0;
    return out;
}

inline MomentSet empirical_moments(const HourlySeries& series) {
    return empirical_moments(series.inflow);
}

namespace detail {

/// Nelder-Mead simplex minimization; good enough for the 3-parameter
/// moment-matching objective, restarted from scattered initial points.
inline std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x0, double scale, int max_eval,
                                       double* best_value) {
    const std::size_t dim = x0.size();
    struct Vertex {
        std::vector<double> x;
        double f;
    };
    std::vector<Vertex> smp(dim + 1);
    int evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        return f(x);
    };
    smp[0] = {x0, eval(x0)};
    for (std::size_t i = 0; i < dim; ++i) {
        auto x = x0;
        x[i] += scale;
        smp[i + 1] = {x, eval(x)};
    }
    auto by_f = [](const Vertex& a, const Vertex& b) { return a.f < b.f; };
    while (evals < max_eval) {
        std::sort(smp.begin(), smp.end(), by_f);
        if (std::fabs(smp.back().f - smp.front().f) <=
            1e-12 * (1.0 + std::fabs(smp.front().f)))
            break;
        std::vector<double> centroid(dim, 0.0);
        for (std::size_t i = 0; i < dim; ++i) {
            for (std::size_t j = 0; j < dim; ++j) centroid[j] += smp[i].x[j];
        }
        for (double& c : centroid) c /= static_cast<double>(dim);
        auto blend = [&](double w) {
            std::vector<double> x(dim);
            for (std::size_t j = 0; j < dim; ++j)
                x[j] = centroid[j] + w * (smp.back().x[j] - centroid[j]);
            return x;
        };
        auto xr = blend(-1.0);
        const double fr = eval(xr);
        if (fr < smp.front().f) {
            auto xe = blend(-2.0);
            const double fe = eval(xe);
            if (fe < fr) smp.back() = {xe, fe};
            else smp.back() = {xr, fr};
        } else if (fr < smp[dim - 1].f) {
            smp.back() = {xr, fr};
        } else {
            auto xc = blend(fr < smp.back().f ? -0.5 : 0.5);
            const double fc = eval(xc);
            if (fc < std::min(fr, smp.back().f)) {
                smp.back() = {xc, fc};
            } else {
                for (std::size_t i = 1; i <= dim; ++i) {
                    for (std::size_t j = 0; j < dim; ++j)
                        smp[i].x[j] = 0.5 * (smp[i].x[j] + smp[0].x[j]);
                    smp[i].f = eval(smp[i].x);
                }
            }
        }
    }
    std::sort(smp.begin(), smp.end(), by_f);
    if (best_value) *best_value = smp.front().f;
    return smp.front().x;
}

}  // namespace detail

struct MomentFitOptions {
    int restarts = 20;
    int max_eval_per_restart = 4000;
    std::uint64_t seed = 42;
};

/// Relative-error objective of the moment match for a candidate kernel.
inline double moment_match_objective(const TemperedStableParams& ts, double q_min,
                                     const MomentSet& target) {
    InflowModel trial;
    trial.q_min = q_min;
    trial.rho = 1.0;  // stationary moments do not involve the recession rate
    trial.ts = ts;
    if (!(tempering_moment(ts, 1) < 1.0)) return std::numeric_limits<double>::infinity();
    MomentSet m;
    try {
        m = stationary_moment_summary(trial);
    } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
    }
    auto rel = [](double model, double emp) { return (model - emp) / emp; };
    const double r1 = rel(m.ave, target.ave);
    const double r2 = rel(m.sta, target.sta);
    const double r3 = rel(m.ske, target.ske);
    const double r4 = rel(m.kur, target.kur);
    const double obj = r1 * r1 + r2 * r2 + r3 * r3 + r4 * r4;
    return std::isfinite(obj) ? obj : std::numeric_limits<double>::infinity();
}

/// Fit (alpha, a, b) to empirical (Ave, Sta, Ske, Kur) by minimizing the
/// summed squared relative errors, subject to alpha in (0,1), a, b > 0 and
/// the mean-reverting condition M1 < 1. Derivative-free simplex search over
/// (logit alpha, ln a, ln b) with scattered restarts.
inline TemperedStableParams fit_tempered_stable(const MomentSet& empirical, double q_min,
                                                const MomentFitOptions& opts = {}) {
    if (!(empirical.ave > q_min) || !(empirical.sta > 0.0) || !(empirical.ske > 0.0) ||
        !(empirical.kur > 0.0))
        throw InfeasibleFit(
            "target moments are inconsistent with a stationary self-excited inflow "
            "(need Ave > q_min and positive Sta, Ske, Kur)");

    auto decode = [](const std::vector<double>& x) {
        TemperedStableParams ts;
        ts.alpha = 1.0 / (1.0 + std::exp(-x[0]));
        ts.a = std::exp(x[1]);
        ts.b = std::exp(x[2]);
        return ts;
    };
    auto objective = [&](const std::vector<double>& x) {
        const auto ts = decode(x);
        const double penalty_guard = std::fabs(x[1]) + std::fabs(x[2]);
        if (penalty_guard > 60.0) return std::numeric_limits<double>::infinity();
        return moment_match_objective(ts, q_min, empirical);
    };

    Rng rng(opts.seed, 0);
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_x;
    for (int r = 0; r < opts.restarts; ++r) {
        std::vector<double> x0(3);
        x0[0] = -2.0 + 4.5 * rng.uniform();                 // alpha in roughly (0.12, 0.92)
        x0[1] = std::log(1e-4) + rng.uniform() * std::log(1e4);  // a in (1e-4, 1)
        x0[2] = std::log(1e-4) + rng.uniform() * std::log(1e4);  // b in (1e-4, 1)
        if (!std::isfinite(objective(x0))) continue;
        double value = std::numeric_limits<double>::infinity();
        auto x = detail::nelder_mead(objective, x0, 0.5, opts.max_eval_per_restart, &value);
        // polish with a tighter simplex
        x = detail::nelder_mead(objective, x, 0.05, opts.max_eval_per_restart, &value);
        if (value < best) {
            best = value;
            best_x = x;
        }
    }
    if (!std::isfinite(best) || best_x.empty())
        throw InfeasibleFit("no stationary parameter set found by moment matching");
    return decode(best_x);
}

struct AcfFitOptions {
    std::size_t max_lag = 72;
    std::size_t min_lags = 5;  ///< required positive autocorrelations
};

/// Log-linear fit of the sample autocorrelation, acf(tau) ~ exp(-rho_c tau).
/// Lagged products never straddle segment gaps. Lags past the first
/// nonpositive autocorrelation are dropped; if fewer than min_lags survive,
/// NonPositiveACF is raised.
inline double fit_acf_rate(const HourlySeries& series, const AcfFitOptions& opts = {}) {
    const auto& x = series.inflow;
    if (x.size() < opts.min_lags + 1) throw Error("fit_acf_rate: series too short");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    if (!(var > 0.0)) throw DegenerateDistribution("constant series has no autocorrelation");

    std::vector<double> lags, logs;
    for (std::size_t tau = 1; tau <= opts.max_lag; ++tau) {
        double acc = 0.0;
        std::size_t pairs = 0;
        for (std::size_t s = 0; s < series.segments(); ++s) {
            const auto [b, e] = series.segment(s);
            if (e - b <= tau) continue;
            for (std::size_t i = b; i + tau < e; ++i) {
                acc += (x[i] - mean) * (x[i + tau] - mean);
                ++pairs;
            }
        }
        if (pairs == 0) break;
        const double acf = acc / var;
        if (!(acf > 0.0)) break;
        lags.push_back(static_cast<double>(tau));
        logs.push_back(std::log(acf));
    }
    if (lags.size() < opts.min_lags)
        throw NonPositiveACF("autocorrelation nonpositive before " +
                             std::to_string(opts.min_lags) + " lags");
    // least squares line log acf = c - rho_c tau
    const double nl = static_cast<double>(lags.size());
    double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    for (std::size_t i = 0; i < lags.size(); ++i) {
        st += lags[i];
        sy += logs[i];
        stt += lags[i] * lags[i];
        sty += lags[i] * logs[i];
    }
    const double slope = (nl * sty - st * sy) / (nl * stt - st * st);
    return -slope;
}

/// Recession rate from the autocorrelation decay: rho = rho_c / (1 - M1).
inline double recession_from_acf(double rho_c, double m1) {
    if (!(1.0 - m1 > 0.0)) throw NonStationary("recession_from_acf needs M1 < 1");
    return rho_c / (1.0 - m1);
}

/// Linear feedback rule for the observed outflow updates:
///   q_{k+1} = max(0, q_k + (c1 + cQ Q_k + cq q_k + cV V_k) h).
struct OperationRule {
    double c1 = 0.0, cQ = 0.0, cq = 0.0, cV = 0.0;
    double r_squared = 0.0;
};

/// Iterate the rule over observed (Q, V) forcing.
inline std::vector<double> simulate_rule(const OperationRule& rule,
                                         const std::vector<double>& Q,
                                         const std::vector<double>& V, double q0, double h) {
    if (Q.size() != V.size() || Q.empty()) throw Error("simulate_rule: shape mismatch");
    std::vector<double> q(Q.size());
    q[0] = q0;
    for (std::size_t k = 0; k + 1 < Q.size(); ++k) {
        const double drive = rule.c1 + rule.cQ * Q[k] + rule.cq * q[k] + rule.cV * V[k];
        q[k + 1] = std::max(0.0, q[k] + drive * h);
    }
    return q;
}

/// Ordinary least squares of (q_{k+1} - q_k)/h on (1, Q_k, q_k, V_k) over
/// steps where the nonnegativity clamp is inactive (observed q_{k+1} > 0)
/// and which do not straddle a gap. R^2 compares the full simulated
/// trajectory (per segment, seeded with the first observed outflow) against
/// the observations.
inline OperationRule fit_operation_rule(const HourlySeries& series, double h = 1.0) {
    if (!series.has_outflow || !series.has_volume)
        throw Error("fit_operation_rule needs outflow and volume columns");
    const auto& Q = series.inflow;
    const auto& q = series.outflow;
    const auto& V = series.volume;

    double G[4][4] = {};
    double rhs[4] = {};
    std::size_t rows = 0;
    for (std::size_t s = 0; s < series.segments(); ++s) {
        const auto [b, e] = series.segment(s);
        for (std::size_t k = b; k + 1 < e; ++k) {
            if (q[k + 1] <= 0.0) continue;  // clamp active; linear model does not hold
            const double f[4] = {1.0, Q[k], q[k], V[k]};
            const double y = (q[k + 1] - q[k]) / h;
            for (int i = 0; i < 4; ++i) {
                rhs[i] += f[i] * y;
                for (int j = 0; j < 4; ++j) G[i][j] += f[i] * f[j];
            }
            ++rows;
        }
    }
    if (rows < 4) throw RankDeficient("too few unclamped steps for the rule regression");

    // Gaussian elimination with partial pivoting on the 4x4 normal equations
    double M[4][5];
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) M[i][j] = G[i][j];
        M[i][4] = rhs[i];
    }
    double max_diag = 0.0;
    for (int i = 0; i < 4; ++i) max_diag = std::max(max_diag, std::fabs(G[i][i]));
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::fabs(M[r][col]) > std::fabs(M[piv][col])) piv = r;
        if (std::fabs(M[piv][col]) <= 1e-12 * max_diag)
            throw RankDeficient("design matrix of the rule regression is singular");
        if (piv != col)
            for (int j = 0; j < 5; ++j) std::swap(M[piv][j], M[col][j]);
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            const double f = M[r][col] / M[col][col];
            for (int j = col; j < 5; ++j) M[r][j] -= f * M[col][j];
        }
    }
    OperationRule rule;
    rule.c1 = M[0][4] / M[0][0];
    rule.cQ = M[1][4] / M[1][1];
    rule.cq = M[2][4] / M[2][2];
    rule.cV = M[3][4] / M[3][3];

    // trajectory R^2, pooled over segments
    double q_mean = 0.0;
    std::size_t n_obs = 0;
    for (std::size_t s = 0; s < series.segments(); ++s) {
        const auto [b, e] = series.segment(s);
        for (std::size_t k = b; k < e; ++k) {
            q_mean += q[k];
            ++n_obs;
        }
    }
    q_mean /= static_cast<double>(n_obs);
    double sse = 0.0, sst = 0.0;
    for (std::size_t s = 0; s < series.segments(); ++s) {
        const auto [b, e] = series.segment(s);
        std::vector<double> Qs(Q.begin() + static_cast<std::ptrdiff_t>(b),
                               Q.begin() + static_cast<std::ptrdiff_t>(e));
        std::vector<double> Vs(V.begin() + static_cast<std::ptrdiff_t>(b),
                               V.begin() + static_cast<std::ptrdiff_t>(e));
        const auto sim = simulate_rule(rule, Qs, Vs, q[b], h);
        for (std::size_t k = 0; k < sim.size(); ++k) {
            const double d = sim[k] - q[b + k];
            sse += d * d;
            const double dd = q[b + k] - q_mean;
            sst += dd * dd;
        }
    }
    rule.r_squared = sst > 0.0 ? 1.0 - sse / sst : 0.0;
    return rule;
}

}  // namespace jumpres

#endif
