#ifndef JUMPRES_EXPERIMENTS_HPP
#define JUMPRES_EXPERIMENTS_HPP

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "jumpres/calibration.hpp"
#include "jumpres/config.hpp"
#include "jumpres/ensemble_io.hpp"
#include "jumpres/lsmc.hpp"
#include "jumpres/riccati.hpp"
#include "jumpres/series_io.hpp"

namespace jumpres {

namespace detail {

inline std::string fmt9(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline std::ofstream open_out(const std::string& dir, const std::string& name) {
    std::ofstream os(dir + "/" + name);
    if (!os) throw Error("cannot open " + dir + "/" + name + " for writing");
    return os;
}

}  // namespace detail

/// Write the manifest that makes a run reproducible: resolved config plus
/// version and subcommand. Re-running with the manifest as the config file
/// regenerates every numeric output bit-for-bit.
inline void write_manifest(const RunConfig& cfg, const std::string& subcommand) {
    json m;
    m["version"] = version_string();
    m["subcommand"] = subcommand;
    m["config"] = cfg.resolved;
    auto os = detail::open_out(cfg.out_dir, "manifest.json");
    os << m.dump(2) << "\n";
}

inline void write_moment_table(const MomentSet& m, std::ostream& os, const char* row_label) {
    os << "row,ave_m3s,sta_m3s,ske,kur\n";
    os << row_label << ',' << detail::fmt9(m.ave) << ',' << detail::fmt9(m.sta) << ','
       << detail::fmt9(m.ske) << ',' << detail::fmt9(m.kur) << "\n";
}

/// `moments`: analytic stationary moments of the configured inflow model.
inline void run_moments(const RunConfig& cfg) {
    const auto summary = stationary_moment_summary(cfg.model);
    auto os = detail::open_out(cfg.out_dir, "moments.csv");
    write_moment_table(summary, os, "modelled");
    const auto raw = stationary_raw_moments(cfg.model, 4);
    auto os2 = detail::open_out(cfg.out_dir, "raw_moments.csv");
    os2 << "k,E_Qk\n";
    for (std::size_t k = 0; k < raw.size(); ++k)
        os2 << (k + 1) << ',' << detail::fmt9(raw[k]) << "\n";
}

/// `calibrate`: moment matching plus autocorrelation fit on an hourly CSV.
inline void run_calibrate(const RunConfig& cfg) {
    const auto series = load_series(cfg.experiment.series_path);
    const auto emp = empirical_moments(series);
    MomentFitOptions fit_opts;
    fit_opts.seed = cfg.numerics.seed;
    const auto ts = fit_tempered_stable(emp, cfg.model.q_min, fit_opts);
    const double objective = moment_match_objective(ts, cfg.model.q_min, emp);

    InflowModel fitted = cfg.model;
    fitted.ts = ts;
    const double m1 = fitted.branching_ratio();
    const auto mod = stationary_moment_summary(fitted);

    json report;
    report["q_min"] = cfg.model.q_min;
    report["alpha"] = ts.alpha;
    report["a"] = ts.a;
    report["b"] = ts.b;
    report["M1"] = m1;
    report["objective"] = objective;
    report["empirical"] = {{"ave", emp.ave}, {"sta", emp.sta}, {"ske", emp.ske}, {"kur", emp.kur}};
    report["modelled"] = {{"ave", mod.ave}, {"sta", mod.sta}, {"ske", mod.ske}, {"kur", mod.kur}};
    report["relative_error_pct"] = {{"ave", 100.0 * (mod.ave / emp.ave - 1.0)},
                                    {"sta", 100.0 * (mod.sta / emp.sta - 1.0)},
                                    {"ske", 100.0 * (mod.ske / emp.ske - 1.0)},
                                    {"kur", 100.0 * (mod.kur / emp.kur - 1.0)}};
    try {
        const double rho_c = fit_acf_rate(series);
        report["rho_c"] = rho_c;
        report["rho"] = recession_from_acf(rho_c, m1);
    } catch (const Error& e) {
        report["rho_c_error"] = e.what();
    }
    auto os = detail::open_out(cfg.out_dir, "calibration.json");
    os << report.dump(2) << "\n";

    auto osm = detail::open_out(cfg.out_dir, "moments_compare.csv");
    osm << "row,ave_m3s,sta_m3s,ske,kur\n";
    osm << "empirical," << detail::fmt9(emp.ave) << ',' << detail::fmt9(emp.sta) << ','
        << detail::fmt9(emp.ske) << ',' << detail::fmt9(emp.kur) << "\n";
    osm << "modelled," << detail::fmt9(mod.ave) << ',' << detail::fmt9(mod.sta) << ','
        << detail::fmt9(mod.ske) << ',' << detail::fmt9(mod.kur) << "\n";
}

inline Policy make_lq_policy(const RiccatiTable& table, const ReservoirSpec& spec, double w3,
                             double h) {
    return [&table, spec, w3, h](std::size_t step, const StateTriple& x) {
        const double t = static_cast<double>(step) * h;
        const double p_q = lq_adjoints(table, t, x)[1];
        return clip_control(p_q, w3, admissible_range(x.q, spec));
    };
}

/// `solve-lq`: integrate the exact-solution table and simulate sample paths
/// under the induced feedback law.
inline void run_solve_lq(const RunConfig& cfg) {
    const double dt = cfg.numerics.riccati_dt > 0.0 ? cfg.numerics.riccati_dt : cfg.numerics.h;
    RiccatiOptions opts;
    opts.d_variant = cfg.numerics.d_variant;
    const auto table = solve_riccati(cfg.model, cfg.objective, dt, opts);
    write_riccati_csv(table, cfg.out_dir + "/riccati.csv");

    const auto policy = make_lq_policy(table, cfg.reservoir, cfg.objective.w3, cfg.numerics.h);
    const auto ens =
        simulate_ensemble(policy, cfg.model, cfg.reservoir, cfg.objective, cfg.initial_state(),
                          cfg.numerics.h, cfg.numerics.n, cfg.numerics.S, cfg.numerics.seed,
                          cfg.numerics.workers);
    auto os = detail::open_out(cfg.out_dir, "lq_paths.csv");
    write_ensemble_csv(ens, os, cfg.numerics.dump_paths);
    auto oso = detail::open_out(cfg.out_dir, "objective.csv");
    oso << "estimate\n" << detail::fmt9(evaluate_objective(ens, cfg.objective)) << "\n";
}

inline void write_statistics_files(const RunConfig& cfg, const ControlledEnsemble& ens) {
    const auto st = ensemble_statistics(ens, cfg.numerics.bins, cfg.numerics.band_edges,
                                        cfg.reservoir.v_max);
    const std::size_t nodes = ens.V.nodes();

    auto osd = detail::open_out(cfg.out_dir, "density.csv");
    osd << "step,t";
    for (std::size_t b = 0; b < st.bins; ++b) osd << ",bin" << b;
    osd << "\n";
    for (std::size_t i = 0; i < nodes; ++i) {
        osd << i << ',' << detail::fmt9(static_cast<double>(i) * ens.h);
        for (std::size_t b = 0; b < st.bins; ++b)
            osd << ',' << detail::fmt9(st.histogram[i * st.bins + b]);
        osd << "\n";
    }

    auto osm = detail::open_out(cfg.out_dir, "volume_stats.csv");
    osm << "step,t,v_mean,v_std,v_target\n";
    for (std::size_t i = 0; i < nodes; ++i) {
        const double t = static_cast<double>(i) * ens.h;
        osm << i << ',' << detail::fmt9(t) << ',' << detail::fmt9(st.v_mean[i]) << ','
            << detail::fmt9(st.v_std[i]) << ','
            << detail::fmt9(target_volume(cfg.objective.target, t, cfg.objective.horizon))
            << "\n";
    }

    const std::size_t nb = st.band_edges.size() - 1;
    auto osb = detail::open_out(cfg.out_dir, "band_prob.csv");
    osb << "step,t";
    for (std::size_t b = 0; b < nb; ++b)
        osb << ",pr_" << detail::fmt9(st.band_edges[b]) << "_" << detail::fmt9(st.band_edges[b + 1]);
    osb << "\n";
    for (std::size_t i = 0; i < nodes; ++i) {
        osb << i << ',' << detail::fmt9(static_cast<double>(i) * ens.h);
        for (std::size_t b = 0; b < nb; ++b) osb << ',' << detail::fmt9(st.band_prob[i * nb + b]);
        osb << "\n";
    }

    auto ost = detail::open_out(cfg.out_dir, "boundary_touch.csv");
    ost << "step,t,touch_lower,touch_upper,touch_fraction,projection_residual\n";
    for (std::size_t i = 0; i < ens.steps(); ++i) {
        const double frac = static_cast<double>(ens.touch_lower[i] + ens.touch_upper[i]) /
                            static_cast<double>(ens.paths());
        ost << i << ',' << detail::fmt9(static_cast<double>(i) * ens.h) << ','
            << ens.touch_lower[i] << ',' << ens.touch_upper[i] << ',' << detail::fmt9(frac) << ','
            << detail::fmt9(ens.projection_residual[i]) << "\n";
    }
}

inline void write_iteration_log(const std::vector<IterationRecord>& log, const std::string& dir) {
    json j = json::array();
    for (const auto& rec : log)
        j.push_back({{"iteration", rec.iteration},
                     {"residual", rec.residual},
                     {"p_q0", rec.p_q0},
                     {"wall_ms", rec.wall_ms}});
    auto os = detail::open_out(dir, "iterations.json");
    os << j.dump(2) << "\n";
}

/// `solve-fbsde`: the regression solver on the configured problem, with
/// surface, iteration-log, and controlled-statistics outputs.
inline void run_solve_fbsde(const RunConfig& cfg) {
    const auto res = picard_solve(cfg.model, cfg.reservoir, cfg.objective, cfg.lsmc());
    write_surface_csv(res.surface, cfg.out_dir + "/surfaces.csv");
    write_iteration_log(res.log, cfg.out_dir);
    write_statistics_files(cfg, res.ensemble);
    auto os = detail::open_out(cfg.out_dir, "controlled_paths.csv");
    write_ensemble_csv(res.ensemble, os, cfg.numerics.dump_paths);
}

/// Paths-per-step rule of the resolution study.
inline std::size_t study_path_count(const ExperimentConfig& exp, double h) {
    const double expnt = exp.path_scaling == "pairs" ? -2.0 : -0.5;
    return static_cast<std::size_t>(std::llround(exp.S_base * std::pow(h, expnt)));
}

struct StudyPoint {
    double h = 0.0;
    std::size_t S = 0;
    double e1 = 0.0, e2 = 0.0;
    std::size_t iterations = 0;
};

/// One fixed-(h, S, w3, lambda) run of the quadratic benchmark: solve with
/// the regression scheme, then measure the l1/l2 distance of the fitted
/// inflow coefficient from the reference table integrated at dt = h/100.
/// Interior nodes only: the coefficient at the deterministic t_0 is not
/// identified, and the terminal node is pinned at zero by construction.
inline StudyPoint study_point(const RunConfig& cfg, double h, std::size_t S, double w3,
                              double lambda) {
    RunConfig run = cfg;
    run.objective.w3 = w3;
    run.objective.w4 = 0.0;
    run.reservoir.constrained = false;
    run.reservoir.a_max = std::numeric_limits<double>::infinity();
    run.numerics.h = h;
    run.numerics.n = static_cast<std::size_t>(std::llround(run.numerics.T / h));
    run.numerics.S = S;
    run.numerics.B = 1;
    run.numerics.lambda = lambda;
    run.numerics.basis = BasisId::LQ;

    const auto res = picard_solve(run.model, run.reservoir, run.objective, run.lsmc());
    const auto table = solve_riccati(run.model, run.objective, h / 100.0);
    const std::size_t n = run.numerics.n;
    std::vector<double> numeric, reference;
    for (std::size_t i = 1; i < n; ++i) {
        numeric.push_back(res.surface.steps[i].beta_q[1]);
        reference.push_back(table.E[i * 100]);
    }
    StudyPoint pt;
    pt.h = h;
    pt.S = S;
    pt.e1 = coefficient_error(numeric, reference, 1);
    pt.e2 = coefficient_error(numeric, reference, 2);
    pt.iterations = res.iterations;
    return pt;
}

/// `convergence-study`: e1/e2 tables over (h, w3) with per-column averaged
/// convergence rates, plus an optional ridge sweep at the base resolution.
inline void run_convergence_study(const RunConfig& cfg) {
    const auto& exp = cfg.experiment;
    std::vector<std::vector<StudyPoint>> grid(exp.w3_values.size());
    for (std::size_t w = 0; w < exp.w3_values.size(); ++w)
        for (double h : exp.h_values)
            grid[w].push_back(study_point(cfg, h, study_path_count(exp, h), exp.w3_values[w],
                                          cfg.numerics.lambda));

    for (int p = 1; p <= 2; ++p) {
        auto os = detail::open_out(cfg.out_dir, p == 1 ? "errors_l1.csv" : "errors_l2.csv");
        os << "h";
        for (double w3 : exp.w3_values) os << ",w3_" << detail::fmt9(w3);
        os << "\n";
        for (std::size_t k = 0; k < exp.h_values.size(); ++k) {
            os << detail::fmt9(exp.h_values[k]);
            for (std::size_t w = 0; w < exp.w3_values.size(); ++w)
                os << ',' << detail::fmt9(p == 1 ? grid[w][k].e1 : grid[w][k].e2);
            os << "\n";
        }
        os << "CR";
        for (std::size_t w = 0; w < exp.w3_values.size(); ++w) {
            double acc = 0.0;
            for (std::size_t k = 0; k + 1 < exp.h_values.size(); ++k) {
                const double ec = p == 1 ? grid[w][k].e1 : grid[w][k].e2;
                const double ef = p == 1 ? grid[w][k + 1].e1 : grid[w][k + 1].e2;
                acc += convergence_rate(ec, ef);
            }
            acc /= static_cast<double>(exp.h_values.size() - 1);
            os << ',' << detail::fmt9(acc);
        }
        os << "\n";
    }

    if (!exp.lambda_values.empty()) {
        auto os = detail::open_out(cfg.out_dir, "ridge_sweep.csv");
        os << "lambda,e1,e2\n";
        for (double lam : exp.lambda_values) {
            const auto pt = study_point(cfg, cfg.numerics.h, cfg.numerics.S,
                                        exp.w3_values.front(), lam);
            os << detail::fmt9(lam) << ',' << detail::fmt9(pt.e1) << ',' << detail::fmt9(pt.e2)
               << "\n";
        }
    }
}

/// `fit-rule`: linear operation-rule regression on an hourly CSV.
inline void run_fit_rule(const RunConfig& cfg) {
    const auto series = load_series(cfg.experiment.series_path);
    const auto rule = fit_operation_rule(series);
    json j = {{"c1", rule.c1},
              {"cQ", rule.cQ},
              {"cq", rule.cq},
              {"cV", rule.cV},
              {"r_squared", rule.r_squared}};
    auto os = detail::open_out(cfg.out_dir, "rule.json");
    os << j.dump(2) << "\n";

    auto osc = detail::open_out(cfg.out_dir, "rule_sim.csv");
    osc << "index,observed_q,simulated_q\n";
    std::size_t idx = 0;
    for (std::size_t s = 0; s < series.segments(); ++s) {
        const auto [b, e] = series.segment(s);
        std::vector<double> Qs(series.inflow.begin() + static_cast<std::ptrdiff_t>(b),
                               series.inflow.begin() + static_cast<std::ptrdiff_t>(e));
        std::vector<double> Vs(series.volume.begin() + static_cast<std::ptrdiff_t>(b),
                               series.volume.begin() + static_cast<std::ptrdiff_t>(e));
        const auto sim = simulate_rule(rule, Qs, Vs, series.outflow[b], 1.0);
        for (std::size_t k = 0; k < sim.size(); ++k, ++idx)
            osc << idx << ',' << detail::fmt9(series.outflow[b + k]) << ','
                << detail::fmt9(sim[k]) << "\n";
    }
}

/// `simulate`: policy-driven (or uncontrolled) ensemble dump.
inline void run_simulate(const RunConfig& cfg) {
    Policy policy = [](std::size_t, const StateTriple&) { return 0.0; };
    RiccatiTable table;
    if (cfg.experiment.policy == "lq") {
        const double dt = cfg.numerics.riccati_dt > 0.0 ? cfg.numerics.riccati_dt : cfg.numerics.h;
        table = solve_riccati(cfg.model, cfg.objective, dt);
        policy = make_lq_policy(table, cfg.reservoir, cfg.objective.w3, cfg.numerics.h);
    }
    const auto ens =
        simulate_ensemble(policy, cfg.model, cfg.reservoir, cfg.objective, cfg.initial_state(),
                          cfg.numerics.h, cfg.numerics.n, cfg.numerics.S, cfg.numerics.seed,
                          cfg.numerics.workers);
    auto os = detail::open_out(cfg.out_dir, "ensemble.csv");
    write_ensemble_csv(ens, os, cfg.numerics.dump_paths);
    write_ensemble_block(ens, cfg.out_dir + "/ensemble.bin");
    write_statistics_files(cfg, ens);
}

/// Dispatch a validated config to its experiment driver, creating the
/// output directory and manifest first.
inline void run_experiment(const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    write_manifest(cfg, cfg.experiment.kind);
    if (cfg.experiment.kind == "moments") run_moments(cfg);
    else if (cfg.experiment.kind == "calibrate") run_calibrate(cfg);
    else if (cfg.experiment.kind == "solve-lq") run_solve_lq(cfg);
    else if (cfg.experiment.kind == "solve-fbsde") run_solve_fbsde(cfg);
    else if (cfg.experiment.kind == "convergence-study") run_convergence_study(cfg);
    else if (cfg.experiment.kind == "fit-rule") run_fit_rule(cfg);
    else if (cfg.experiment.kind == "simulate") run_simulate(cfg);
    else throw Error("unknown experiment kind '" + cfg.experiment.kind + "'");
}

}  // namespace jumpres

#endif
