#ifndef JUMPRES_LSMC_HPP
#define JUMPRES_LSMC_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "jumpres/basis.hpp"
#include "jumpres/bundling.hpp"
#include "jumpres/dynamics.hpp"
#include "jumpres/errors.hpp"
#include "jumpres/inflow.hpp"
#include "jumpres/parallel.hpp"
#include "jumpres/ridge.hpp"

namespace jumpres {

/// Outer-iteration controls of the forward/backward alternation.
struct PicardConfig {
    double epsilon = 1e-6;      ///< convergence tolerance on p_q at (0, X0)
    double relax_weight = 0.5;  ///< weight on the previous control
    int max_iter = 200;
    double lambda = 1e-8;       ///< ridge parameter (per-path normalized scale)
    std::size_t bundle_count = 1;

    void validate() const {
        if (!(epsilon > 0.0)) throw Error("epsilon must be positive");
        if (!(relax_weight > 0.0 && relax_weight < 1.0))
            throw Error("relax_weight must lie in (0, 1)");
        if (max_iter < 1) throw Error("max_iter must be at least 1");
        if (!(lambda >= 0.0)) throw Error("lambda must be nonnegative");
        if (bundle_count < 1) throw Error("bundle_count must be at least 1");
    }
};

/// Bundled least-squares approximation of the adjoints p_q and p_V on the
/// time grid. Coefficients apply to raw basis features; the max-abs column
/// scaling used while fitting is folded back in.
struct RegressionSurface {
    BasisSet basis;
    double lambda = 0.0;
    double h = 0.0;
    std::size_t bundle_count = 1;

    struct Step {
        BundlePartition partition;
        std::vector<double> beta_q;  ///< bundle-major, bundle_count x K
        std::vector<double> beta_V;
    };
    std::vector<Step> steps;  ///< index i = 0..n-1; the terminal surface is zero

    std::size_t n_steps() const { return steps.size(); }

    double predict(const std::vector<double>& beta, std::size_t bundle,
                   const StateTriple& x) const {
        const std::size_t K = basis.size();
        double feat[8];
        basis.eval(x, feat);
        const double* b = beta.data() + bundle * K;
        double acc = 0.0;
        for (std::size_t k = 0; k < K; ++k) acc += b[k] * feat[k];
        return acc;
    }

    /// p_q at step i evaluated at x (0 at and beyond the terminal node).
    double predict_q(std::size_t i, const StateTriple& x) const {
        if (i >= steps.size()) return 0.0;
        const auto& s = steps[i];
        return predict(s.beta_q, locate_bundle(s.partition, x.Q), x);
    }

    /// p_V at step i evaluated at x.
    double predict_V(std::size_t i, const StateTriple& x) const {
        if (i >= steps.size()) return 0.0;
        const auto& s = steps[i];
        return predict(s.beta_V, locate_bundle(s.partition, x.Q), x);
    }

    /// Per-step series of one regression coefficient (bundle 0), e.g. the
    /// coefficient on Q that estimates the exact-solution curve E_t.
    std::vector<double> coefficient_series(std::size_t feature_index) const {
        std::vector<double> out(steps.size());
        for (std::size_t i = 0; i < steps.size(); ++i)
            out[i] = steps[i].beta_q[feature_index];
        return out;
    }
};

namespace detail {

/// Max-abs column scaling followed by ridge on the per-path-normalized
/// Gram: solving (X~^T X~ + lambda m I) keeps the documented lambda scale
/// independent of the bundle size m.
inline void fit_bundle(const double* rows, std::size_t m, std::size_t K, const double* y,
                       double lambda, double* beta_out, std::vector<double>& scratch) {
    scratch.assign(m * K, 0.0);
    double scale[8];
    for (std::size_t k = 0; k < K; ++k) scale[k] = 0.0;
    for (std::size_t s = 0; s < m; ++s)
        for (std::size_t k = 0; k < K; ++k)
            scale[k] = std::max(scale[k], std::fabs(rows[s * K + k]));
    for (std::size_t k = 0; k < K; ++k)
        if (scale[k] == 0.0) scale[k] = 1.0;
    for (std::size_t s = 0; s < m; ++s)
        for (std::size_t k = 0; k < K; ++k) scratch[s * K + k] = rows[s * K + k] / scale[k];
    const auto beta = ridge_regress(scratch.data(), m, K, y, lambda * static_cast<double>(m));
    for (std::size_t k = 0; k < K; ++k) beta_out[k] = beta[k] / scale[k];
}

struct BackwardScratch {
    std::vector<double> y_q, y_V, rows, fit;
    std::vector<double> feat_all;  ///< S x K features of the current node
};

/// One backward step: regress the targets within each bundle and replace
/// (pq, pV) with the fitted values at the current node.
inline void backward_step(const ControlledEnsemble& ens, const ObjectiveSpec& obj,
                          const BasisSet& basis, double lambda, std::size_t i,
                          const BundlePartition& part, std::vector<double>& pq,
                          std::vector<double>& pV, RegressionSurface::Step& out,
                          BackwardScratch& ws, unsigned workers) {
    const std::size_t S = ens.paths();
    const std::size_t K = basis.size();
    const double h = ens.h;
    const double disc = 1.0 / (1.0 + obj.delta * h);
    const double t_i = static_cast<double>(i) * h;
    const double vhat = target_volume(obj.target, t_i, obj.horizon);

    const double* Qi = ens.Q.node_slice(i);
    const double* qi = ens.q.node_slice(i);
    const double* Vi = ens.V.node_slice(i);

    ws.y_q.resize(S);
    ws.y_V.resize(S);
    ws.feat_all.resize(S * K);
    for (std::size_t p = 0; p < S; ++p) {
        const double dv = pV[p] - obj.w2 * (Vi[p] - vhat) * h;
        const double jp = env_penalty(qi[p], obj.w4, obj.q_env).second;
        ws.y_V[p] = disc * dv;
        ws.y_q[p] = disc * (pq[p] - (obj.w1 * (qi[p] - Qi[p]) + jp) * h - h * disc * dv);
        basis.eval({Qi[p], qi[p], Vi[p]}, ws.feat_all.data() + p * K);
    }

    const std::size_t B = part.bundle_count;
    const std::size_t m = part.bundle_size;
    out.partition = part;
    out.beta_q.assign(B * K, 0.0);
    out.beta_V.assign(B * K, 0.0);
    if (B == 1 && workers <= 1) {
        ws.rows.resize(m * K);
        std::vector<double> yq(m), yv(m);
        const std::int32_t* mem = part.members(0);
        for (std::size_t s = 0; s < m; ++s) {
            const std::size_t p = static_cast<std::size_t>(mem[s]);
            std::copy_n(ws.feat_all.data() + p * K, K, ws.rows.data() + s * K);
            yq[s] = ws.y_q[p];
            yv[s] = ws.y_V[p];
        }
        fit_bundle(ws.rows.data(), m, K, yq.data(), lambda, out.beta_q.data(), ws.fit);
        fit_bundle(ws.rows.data(), m, K, yv.data(), lambda, out.beta_V.data(), ws.fit);
    } else {
        parallel_for(B, workers, [&](std::size_t b) {
            std::vector<double> rows(m * K), yq(m), yv(m), fit;
            const std::int32_t* mem = part.members(b);
            for (std::size_t s = 0; s < m; ++s) {
                const std::size_t p = static_cast<std::size_t>(mem[s]);
                std::copy_n(ws.feat_all.data() + p * K, K, rows.data() + s * K);
                yq[s] = ws.y_q[p];
                yv[s] = ws.y_V[p];
            }
            fit_bundle(rows.data(), m, K, yq.data(), lambda, out.beta_q.data() + b * K, fit);
            fit_bundle(rows.data(), m, K, yv.data(), lambda, out.beta_V.data() + b * K, fit);
        });
    }

    // fitted values at the current node feed the next (earlier) targets
    for (std::size_t p = 0; p < S; ++p) {
        const std::size_t b = locate_bundle(part, Qi[p]);
        const double* fq = out.beta_q.data() + b * K;
        const double* fv = out.beta_V.data() + b * K;
        const double* feat = ws.feat_all.data() + p * K;
        double aq = 0.0, av = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            aq += fq[k] * feat[k];
            av += fv[k] * feat[k];
        }
        pq[p] = aq;
        pV[p] = av;
    }
}

inline std::vector<BundlePartition> build_step_partitions(const PathGrid& Q, std::size_t n,
                                                          std::size_t B) {
    std::vector<BundlePartition> parts(n);
    const std::size_t S = Q.paths();
    std::vector<double> psi(S);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(Q.node_slice(i), S, psi.data());
        parts[i] = build_bundles(psi, i == 0 ? 1 : B);
    }
    return parts;
}

}  // namespace detail

struct BackwardOptions {
    double lambda = 1e-8;
    std::size_t bundle_count = 1;
    unsigned workers = 0;
};

/// Time-backward regression of the adjoint targets
///   y_V = (p_V[i+1] - w2 (V_i - Vhat_i) h) / (1 + delta h)
///   y_q = (p_q[i+1] - (w1 (q_i - Q_i) + j'(q_i)) h
///          - h/(1+delta h) (p_V[i+1] - w2 (V_i - Vhat_i) h)) / (1 + delta h)
/// onto basis features of the time-t_i states, bundled on psi = Q_i, with
/// zero terminal data. A single bundle is used at the deterministic t_0.
inline RegressionSurface backward_pass(const ControlledEnsemble& ens, const ObjectiveSpec& obj,
                                       const BasisSet& basis, const BackwardOptions& opts) {
    const std::size_t n = ens.steps();
    RegressionSurface surf;
    surf.basis = basis;
    surf.lambda = opts.lambda;
    surf.h = ens.h;
    surf.bundle_count = opts.bundle_count;
    surf.steps.resize(n);
    const auto parts = detail::build_step_partitions(ens.Q, n, opts.bundle_count);
    std::vector<double> pq(ens.paths(), 0.0), pV(ens.paths(), 0.0);
    detail::BackwardScratch ws;
    for (std::size_t ii = n; ii > 0; --ii) {
        const std::size_t i = ii - 1;
        detail::backward_step(ens, obj, basis, opts.lambda, i, parts[i], pq, pV, surf.steps[i],
                              ws, opts.workers);
    }
    return surf;
}

/// Markov policy induced by the relaxed control surfaces: locate the bundle
/// by the current inflow, take the stored affine control, and project it
/// onto the admissible range of the current outflow.
class BundledPolicy {
public:
    BundledPolicy() = default;
    BundledPolicy(BasisSet basis, ReservoirSpec spec,
                  std::shared_ptr<const std::vector<BundlePartition>> partitions,
                  std::shared_ptr<const std::vector<std::vector<double>>> coeffs)
        : basis_(basis), spec_(spec), partitions_(std::move(partitions)),
          coeffs_(std::move(coeffs)) {}

    double operator()(std::size_t step, const StateTriple& x) const {
        if (!partitions_ || step >= partitions_->size()) return 0.0;
        const auto& part = (*partitions_)[step];
        const auto& c = (*coeffs_)[step];
        const std::size_t K = basis_.size();
        double feat[8];
        basis_.eval(x, feat);
        const double* b = c.data() + locate_bundle(part, x.Q) * K;
        double u = 0.0;
        for (std::size_t k = 0; k < K; ++k) u += b[k] * feat[k];
        const auto range = admissible_range(x.q, spec_);
        return std::clamp(u, range.lo, range.hi);
    }

private:
    BasisSet basis_;
    ReservoirSpec spec_;
    std::shared_ptr<const std::vector<BundlePartition>> partitions_;
    std::shared_ptr<const std::vector<std::vector<double>>> coeffs_;
};

struct IterationRecord {
    int iteration = 0;
    double residual = 0.0;
    double p_q0 = 0.0;    ///< p_q estimate at (t_0, X_0)
    double wall_ms = 0.0;
};

struct LsmcConfig {
    double h = 1.0;
    std::size_t n = 0;
    std::size_t S = 0;
    BasisSet basis;
    PicardConfig picard;
    InitialState init;
    std::uint64_t seed = 1;
    unsigned workers = 0;
};

struct PicardResult {
    RegressionSurface surface;
    BundledPolicy policy;
    ControlledEnsemble ensemble;  ///< final forward sweep
    std::vector<IterationRecord> log;
    std::size_t iterations = 0;
};

/// Alternate forward simulation and backward regression until the p_q
/// estimate at the deterministic initial point moves by no more than
/// epsilon. The jump paths are drawn once and reused, so the bundling grid
/// is fixed over iterations and the alternation is a deterministic map.
/// The control surface update is the relaxation
///   c_next = r c + (1 - r) beta_q / w3
/// applied in coefficient space; the admissible-range projection is applied
/// when the policy is evaluated. Throws NoConvergence with the residual
/// history when the criterion is not met within max_iter or the iteration
/// leaves the finite range.
inline PicardResult picard_solve(const InflowModel& model, const ReservoirSpec& spec,
                                 const ObjectiveSpec& obj, const LsmcConfig& cfg) {
    using clock = std::chrono::steady_clock;
    model.validate();
    spec.validate();
    obj.validate();
    cfg.picard.validate();
    if (cfg.n < 1 || cfg.S < 1 || !(cfg.h > 0.0)) throw Error("picard_solve: bad grid");
    if (cfg.S % cfg.picard.bundle_count != 0)
        throw IndivisibleEnsemble("bundle count must divide the path count");

    const std::size_t n = cfg.n, S = cfg.S;
    const std::size_t K = cfg.basis.size();

    ControlledEnsemble ens;
    ens.h = cfg.h;
    ens.Q = simulate_inflow_paths(model, cfg.h, n, S, cfg.seed, cfg.workers);
    ens.q = PathGrid(S, n + 1);
    ens.V = PathGrid(S, n + 1);
    ens.a = PathGrid(S, n);
    ens.touch_lower.assign(n, 0);
    ens.touch_upper.assign(n, 0);
    ens.projection_residual.assign(n, 0.0);

    auto partitions = std::make_shared<std::vector<BundlePartition>>(
        detail::build_step_partitions(ens.Q, n, cfg.picard.bundle_count));
    auto coeffs = std::make_shared<std::vector<std::vector<double>>>();
    coeffs->resize(n);
    for (std::size_t i = 0; i < n; ++i)
        (*coeffs)[i].assign((*partitions)[i].bundle_count * K, 0.0);

    RegressionSurface surf;
    surf.basis = cfg.basis;
    surf.lambda = cfg.picard.lambda;
    surf.h = cfg.h;
    surf.bundle_count = cfg.picard.bundle_count;
    surf.steps.resize(n);

    auto forward_sweep = [&]() {
        parallel_for(S, cfg.workers, [&](std::size_t p) {
            double q = cfg.init.q0;
            double V = cfg.init.v0;
            ens.q.at(p, 0) = q;
            ens.V.at(p, 0) = V;
            double feat[8];
            for (std::size_t i = 0; i < n; ++i) {
                const double Q = ens.Q.at(p, i);
                cfg.basis.eval({Q, q, V}, feat);
                const auto& part = (*partitions)[i];
                const double* c = (*coeffs)[i].data() + locate_bundle(part, Q) * K;
                double u = 0.0;
                for (std::size_t k = 0; k < K; ++k) u += c[k] * feat[k];
                const auto range = admissible_range(q, spec);
                const double a = std::clamp(u, range.lo, range.hi);
                const double v_raw = V + (Q - q) * cfg.h;
                q += a * cfg.h;
                if (spec.constrained) {
                    q = std::clamp(q, 0.0, spec.q_max);
                    V = std::clamp(v_raw, 0.0, spec.v_max);
                } else {
                    V = v_raw;
                }
                ens.a.at(p, i) = a;
                ens.q.at(p, i + 1) = q;
                ens.V.at(p, i + 1) = V;
            }
        });
    };

    const StateTriple x0{model.q_initial, cfg.init.q0, cfg.init.v0};
    std::vector<IterationRecord> log;
    std::vector<double> pq(S), pV(S);
    detail::BackwardScratch ws;
    double prev_p0 = 0.0;

    for (int it = 1; it <= cfg.picard.max_iter; ++it) {
        const auto tic = clock::now();
        forward_sweep();
        std::fill(pq.begin(), pq.end(), 0.0);
        std::fill(pV.begin(), pV.end(), 0.0);
        for (std::size_t ii = n; ii > 0; --ii) {
            const std::size_t i = ii - 1;
            detail::backward_step(ens, obj, cfg.basis, cfg.picard.lambda, i, (*partitions)[i],
                                  pq, pV, surf.steps[i], ws, cfg.workers);
        }
        const double p0 = surf.predict_q(0, x0);
        const double residual = std::fabs(p0 - prev_p0);
        const double ms =
            std::chrono::duration<double, std::milli>(clock::now() - tic).count();
        log.push_back({it, residual, p0, ms});
        prev_p0 = p0;

        // relaxed control update
        const double r = cfg.picard.relax_weight;
        for (std::size_t i = 0; i < n; ++i) {
            auto& c = (*coeffs)[i];
            const auto& bq = surf.steps[i].beta_q;
            for (std::size_t k = 0; k < c.size(); ++k)
                c[k] = r * c[k] + (1.0 - r) * bq[k] / obj.w3;
        }

        if (!std::isfinite(residual)) {
            std::vector<double> hist;
            for (const auto& rec : log) hist.push_back(rec.residual);
            throw NoConvergence("Picard iteration diverged (non-finite residual) at iteration " +
                                    std::to_string(it),
                                std::move(hist));
        }
        if (residual <= cfg.picard.epsilon) {
            // boundary diagnostics of the final sweep
            if (spec.constrained) {
                for (std::size_t i = 0; i < n; ++i) {
                    const double* Qi = ens.Q.node_slice(i);
                    const double* qi = ens.q.node_slice(i);
                    const double* Vi = ens.V.node_slice(i);
                    const double* Vn = ens.V.node_slice(i + 1);
                    for (std::size_t p = 0; p < S; ++p) {
                        const double v_raw = Vi[p] + (Qi[p] - qi[p]) * cfg.h;
                        if (v_raw > spec.v_max) ++ens.touch_upper[i];
                        if (v_raw < 0.0) ++ens.touch_lower[i];
                        ens.projection_residual[i] += Vn[p] - v_raw;
                    }
                }
            }
            PicardResult res;
            res.surface = std::move(surf);
            res.policy = BundledPolicy(cfg.basis, spec, partitions, coeffs);
            res.ensemble = std::move(ens);
            res.log = std::move(log);
            res.iterations = static_cast<std::size_t>(it);
            return res;
        }
    }
    std::vector<double> hist;
    for (const auto& rec : log) hist.push_back(rec.residual);
    throw NoConvergence("Picard iteration did not converge within " +
                            std::to_string(cfg.picard.max_iter) + " iterations (last residual " +
                            std::to_string(hist.back()) + ")",
                        std::move(hist));
}

/// l^p distance between a numerical and a reference coefficient series:
/// ((1/n) sum |num - ref|^p)^(1/p).
inline double coefficient_error(const std::vector<double>& numeric,
                                const std::vector<double>& reference, int p) {
    if (numeric.size() != reference.size() || numeric.empty())
        throw Error("coefficient_error: size mismatch");
    if (p != 1 && p != 2) throw Error("coefficient_error: p must be 1 or 2");
    double acc = 0.0;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
        const double d = std::fabs(numeric[i] - reference[i]);
        acc += p == 1 ? d : d * d;
    }
    acc /= static_cast<double>(numeric.size());
    return p == 1 ? acc : std::sqrt(acc);
}

/// Observed order under grid halving, log2(e_coarse / e_fine).
inline double convergence_rate(double e_coarse, double e_fine) {
    return std::log2(e_coarse / e_fine);
}

/// Per-node distributional summaries of a controlled ensemble.
struct EnsembleStatistics {
    std::size_t bins = 0;
    double v_max = 0.0;
    std::vector<double> band_edges;
    std::vector<double> v_mean, v_std;   ///< per node
    std::vector<double> histogram;       ///< node-major, nodes x bins, sums to 1 per node
    std::vector<double> band_prob;       ///< node-major, nodes x (edges-1)
};

inline EnsembleStatistics ensemble_statistics(const ControlledEnsemble& ens, std::size_t bins,
                                              const std::vector<double>& band_edges,
                                              double v_max) {
    if (bins < 1 || band_edges.size() < 2) throw Error("ensemble_statistics: bad layout");
    const std::size_t S = ens.paths();
    const std::size_t nodes = ens.V.nodes();
    const std::size_t nb = band_edges.size() - 1;
    EnsembleStatistics st;
    st.bins = bins;
    st.v_max = v_max;
    st.band_edges = band_edges;
    st.v_mean.assign(nodes, 0.0);
    st.v_std.assign(nodes, 0.0);
    st.histogram.assign(nodes * bins, 0.0);
    st.band_prob.assign(nodes * nb, 0.0);
    const double inv_s = 1.0 / static_cast<double>(S);
    for (std::size_t i = 0; i < nodes; ++i) {
        const double* Vi = ens.V.node_slice(i);
        const double* qi = ens.q.node_slice(i);
        double sum = 0.0, sum2 = 0.0;
        for (std::size_t p = 0; p < S; ++p) {
            const double v = Vi[p];
            sum += v;
            sum2 += v * v;
            auto bin = static_cast<std::ptrdiff_t>(v / v_max * static_cast<double>(bins));
            bin = std::clamp<std::ptrdiff_t>(bin, 0, static_cast<std::ptrdiff_t>(bins) - 1);
            st.histogram[i * bins + static_cast<std::size_t>(bin)] += inv_s;
            for (std::size_t k = 0; k < nb; ++k)
                if (qi[p] >= band_edges[k] && qi[p] < band_edges[k + 1]) {
                    st.band_prob[i * nb + k] += inv_s;
                    break;
                }
        }
        st.v_mean[i] = sum * inv_s;
        const double var = std::max(0.0, sum2 * inv_s - st.v_mean[i] * st.v_mean[i]);
        st.v_std[i] = std::sqrt(var);
    }
    return st;
}

/// Surfaces as CSV: step, bundle, cell bounds, then the p_q and p_V
/// coefficients in basis order.
inline void write_surface_csv(const RegressionSurface& surf, std::ostream& os) {
    const std::size_t K = surf.basis.size();
    os << "step,bundle,boundary_lo,boundary_hi";
    for (std::size_t k = 0; k < K; ++k) os << ",pq_c" << k;
    for (std::size_t k = 0; k < K; ++k) os << ",pV_c" << k;
    os << "\n";
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.9g", v);
        os << buf;
    };
    for (std::size_t i = 0; i < surf.steps.size(); ++i) {
        const auto& s = surf.steps[i];
        for (std::size_t b = 0; b < s.partition.bundle_count; ++b) {
            os << i << ',' << b << ',';
            if (b == 0) os << "-inf";
            else put(s.partition.boundaries[b - 1]);
            os << ',';
            if (b + 1 == s.partition.bundle_count) os << "inf";
            else put(s.partition.boundaries[b]);
            for (std::size_t k = 0; k < K; ++k) {
                os << ',';
                put(s.beta_q[b * K + k]);
            }
            for (std::size_t k = 0; k < K; ++k) {
                os << ',';
                put(s.beta_V[b * K + k]);
            }
            os << "\n";
        }
    }
}

inline void write_surface_csv(const RegressionSurface& surf, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    write_surface_csv(surf, os);
}

}  // namespace jumpres

#endif
