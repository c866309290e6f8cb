#ifndef JUMPRES_CONFIG_HPP
#define JUMPRES_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "jumpres/basis.hpp"
#include "jumpres/dynamics.hpp"
#include "jumpres/errors.hpp"
#include "jumpres/inflow.hpp"
#include "jumpres/lsmc.hpp"
#include "jumpres/riccati.hpp"

namespace jumpres {

using nlohmann::json;

inline const char* version_string() { return "0.1.0"; }

struct NumericsConfig {
    double h = 0.5;
    double T = 60.0 * 24.0;
    std::size_t n = 0;  ///< derived from T/h when 0
    std::size_t S = 10000;
    std::size_t B = 8;
    double lambda = 1e-7;
    double epsilon = 1e-6;
    double relax = 0.5;
    int max_iter = 200;
    BasisId basis = BasisId::NLQ2;
    std::uint64_t seed = 1;
    unsigned workers = 0;
    double q0 = 0.5;
    double v0_frac = 0.5;
    std::size_t dump_paths = 10;
    std::size_t bins = 100;
    std::vector<double> band_edges = {0.0, 2.0, 4.0, 6.0, 8.0, 10.0};
    double riccati_dt = 0.0;  ///< 0 means "use h"
    DEquationVariant d_variant = DEquationVariant::printed;
};

struct ExperimentConfig {
    std::string kind = "moments";
    std::string series_path;            ///< calibrate / fit-rule input
    std::vector<double> h_values = {2.0, 1.0, 0.5};
    std::vector<double> w3_values = {1000.0, 2000.0, 3000.0, 4000.0};
    std::vector<double> lambda_values;  ///< optional ridge sweep
    std::string path_scaling = "pairs";  ///< S(h): "pairs" = S_base/h^2, "sqrt" = S_base/h^0.5
    double S_base = 10000.0;
    std::string policy = "zero";  ///< simulate: "zero" or "lq"
};

struct RunConfig {
    InflowModel model;
    ReservoirSpec reservoir;
    ObjectiveSpec objective;
    NumericsConfig numerics;
    ExperimentConfig experiment;
    std::string out_dir = "out";
    json resolved;  ///< fully-resolved document, written to the run manifest

    std::size_t steps() const { return numerics.n; }
    InitialState initial_state() const {
        return {numerics.q0, numerics.v0_frac * reservoir.v_max};
    }

    /// The subset handed to the backward/Picard solver.
    LsmcConfig lsmc() const {
        LsmcConfig v;
        v.h = numerics.h;
        v.n = numerics.n;
        v.S = numerics.S;
        v.basis = BasisSet{numerics.basis, objective.q_env};
        v.picard = PicardConfig{numerics.epsilon, numerics.relax, numerics.max_iter,
                                numerics.lambda, numerics.B};
        v.init = initial_state();
        v.seed = numerics.seed;
        v.workers = numerics.workers;
        return v;
    }
};

struct ConfigIssue {
    std::string field;
    std::string message;
    bool fatal = true;
};

namespace detail {

inline double json_number(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (v.is_string() && v.get<std::string>() == "inf")
        return std::numeric_limits<double>::infinity();
    return v.get<double>();
}

template <typename T>
T json_get(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

inline TargetKind target_kind_from_string(const std::string& s) {
    if (s == "constant") return TargetKind::constant;
    if (s == "sine") return TargetKind::sine;
    if (s == "cosine") return TargetKind::cosine;
    if (s == "sudden-decrease") return TargetKind::sudden_decrease;
    if (s == "sudden-increase") return TargetKind::sudden_increase;
    if (s == "piecewise-table") return TargetKind::piecewise_table;
    throw Error("unknown target kind '" + s + "'");
}

inline std::string to_string(TargetKind k) {
    switch (k) {
        case TargetKind::constant: return "constant";
        case TargetKind::sine: return "sine";
        case TargetKind::cosine: return "cosine";
        case TargetKind::sudden_decrease: return "sudden-decrease";
        case TargetKind::sudden_increase: return "sudden-increase";
        case TargetKind::piecewise_table: return "piecewise-table";
    }
    return "?";
}

}  // namespace detail

/// Parse a config document (or a run manifest, whose "config" sub-object is
/// then used), apply the nominal defaults, and resolve derived quantities:
/// w2 defaults to 4/v_max, the target scale is the reservoir capacity, and
/// the step count comes from T/h when not given.
inline RunConfig parse_config(json doc) {
    if (doc.contains("config")) doc = doc.at("config");  // accept a manifest
    RunConfig cfg;

    const json jm = doc.value("model", json::object());
    cfg.model.q_min = detail::json_number(jm, "q_min", 0.5);
    cfg.model.rho = detail::json_number(jm, "rho", 0.295);
    cfg.model.ts.alpha = detail::json_number(jm, "alpha", 0.923);
    cfg.model.ts.a = detail::json_number(jm, "a", 0.0493);
    cfg.model.ts.b = detail::json_number(jm, "b", 0.007);
    cfg.model.q_initial = detail::json_number(jm, "q_initial", 0.5);
    cfg.model.jump_scale_includes_rho = detail::json_get(jm, "jump_scale_includes_rho", true);

    const json jr = doc.value("reservoir", json::object());
    cfg.reservoir.v_max = detail::json_number(jr, "v_max", 6e7 / 3600.0);
    cfg.reservoir.q_max = detail::json_number(jr, "q_max", 120.0);
    cfg.reservoir.a_max = detail::json_number(jr, "a_max", 100.0);
    cfg.reservoir.constrained = detail::json_get(jr, "constrained", true);

    const json jo = doc.value("objective", json::object());
    cfg.objective.w1 = detail::json_number(jo, "w1", 1.0);
    cfg.objective.w2 = detail::json_number(jo, "w2", 4.0 / cfg.reservoir.v_max);
    cfg.objective.w3 = detail::json_number(jo, "w3", 2000.0);
    cfg.objective.w4 = detail::json_number(jo, "w4", 0.0);
    cfg.objective.delta = detail::json_number(jo, "delta", 0.5);
    cfg.objective.q_env = detail::json_number(jo, "q_env", 5.0);

    const json jt = jo.value("target", json::object());
    cfg.objective.target.kind =
        detail::target_kind_from_string(detail::json_get<std::string>(jt, "kind", "constant"));
    cfg.objective.target.v_ref = cfg.reservoir.v_max;
    cfg.objective.target.base_frac = detail::json_number(jt, "base_frac", 0.5);
    cfg.objective.target.amp_frac = detail::json_number(jt, "amp_frac", 0.25);
    cfg.objective.target.window_lo = detail::json_number(jt, "window_lo", 0.25);
    cfg.objective.target.window_hi = detail::json_number(jt, "window_hi", 0.75);
    if (jt.contains("knots"))
        for (const auto& kn : jt.at("knots"))
            cfg.objective.target.knots.emplace_back(kn.at(0).get<double>(),
                                                    kn.at(1).get<double>());

    const json jn = doc.value("numerics", json::object());
    cfg.numerics.h = detail::json_number(jn, "h", 0.5);
    cfg.numerics.T = detail::json_number(jn, "T", 60.0 * 24.0);
    cfg.numerics.n = detail::json_get<std::size_t>(jn, "n", 0);
    if (cfg.numerics.n > 0 && !jn.contains("T"))
        cfg.numerics.T = static_cast<double>(cfg.numerics.n) * cfg.numerics.h;
    if (cfg.numerics.n == 0)
        cfg.numerics.n = static_cast<std::size_t>(std::llround(cfg.numerics.T / cfg.numerics.h));
    cfg.objective.horizon = cfg.numerics.T;
    cfg.numerics.S = detail::json_get<std::size_t>(jn, "S", 10000);
    cfg.numerics.B = detail::json_get<std::size_t>(jn, "B", 8);
    cfg.numerics.lambda = detail::json_number(jn, "lambda", 1e-7);
    cfg.numerics.epsilon = detail::json_number(jn, "epsilon", 1e-6);
    cfg.numerics.relax = detail::json_number(jn, "relax", 0.5);
    cfg.numerics.max_iter = detail::json_get(jn, "max_iter", 200);
    cfg.numerics.basis = basis_from_string(detail::json_get<std::string>(jn, "basis", "NLQ2"));
    cfg.numerics.seed = detail::json_get<std::uint64_t>(jn, "seed", 1);
    cfg.numerics.workers = detail::json_get<unsigned>(jn, "workers", 0);
    cfg.numerics.q0 = detail::json_number(jn, "q0", 0.5);
    cfg.numerics.v0_frac = detail::json_number(jn, "v0_frac", 0.5);
    cfg.numerics.dump_paths = detail::json_get<std::size_t>(jn, "dump_paths", 10);
    cfg.numerics.bins = detail::json_get<std::size_t>(jn, "bins", 100);
    if (jn.contains("band_edges"))
        cfg.numerics.band_edges = jn.at("band_edges").get<std::vector<double>>();
    cfg.numerics.riccati_dt = detail::json_number(jn, "riccati_dt", 0.0);
    cfg.numerics.d_variant =
        detail::json_get<std::string>(jn, "d_equation_variant", "printed") == "adjoint"
            ? DEquationVariant::adjoint
            : DEquationVariant::printed;

    const json je = doc.value("experiment", json::object());
    cfg.experiment.kind = detail::json_get<std::string>(je, "kind", "moments");
    cfg.experiment.series_path = detail::json_get<std::string>(je, "series", "");
    if (je.contains("h_values"))
        cfg.experiment.h_values = je.at("h_values").get<std::vector<double>>();
    if (je.contains("w3_values"))
        cfg.experiment.w3_values = je.at("w3_values").get<std::vector<double>>();
    if (je.contains("lambda_values"))
        cfg.experiment.lambda_values = je.at("lambda_values").get<std::vector<double>>();
    cfg.experiment.path_scaling = detail::json_get<std::string>(je, "path_scaling", "pairs");
    cfg.experiment.S_base = detail::json_number(je, "S_base", 10000.0);
    cfg.experiment.policy = detail::json_get<std::string>(je, "policy", "zero");

    cfg.out_dir = detail::json_get<std::string>(doc, "out_dir", "out");

    // resolved document for the manifest
    json res;
    res["model"] = {{"q_min", cfg.model.q_min},
                    {"rho", cfg.model.rho},
                    {"alpha", cfg.model.ts.alpha},
                    {"a", cfg.model.ts.a},
                    {"b", cfg.model.ts.b},
                    {"q_initial", cfg.model.q_initial},
                    {"jump_scale_includes_rho", cfg.model.jump_scale_includes_rho}};
    res["reservoir"] = {{"v_max", cfg.reservoir.v_max},
                        {"q_max", cfg.reservoir.q_max},
                        {"a_max", std::isinf(cfg.reservoir.a_max)
                                      ? json("inf")
                                      : json(cfg.reservoir.a_max)},
                        {"constrained", cfg.reservoir.constrained}};
    json jt_res = {{"kind", detail::to_string(cfg.objective.target.kind)},
                   {"base_frac", cfg.objective.target.base_frac},
                   {"amp_frac", cfg.objective.target.amp_frac},
                   {"window_lo", cfg.objective.target.window_lo},
                   {"window_hi", cfg.objective.target.window_hi}};
    if (!cfg.objective.target.knots.empty()) {
        json kn = json::array();
        for (const auto& [kt, kv] : cfg.objective.target.knots) kn.push_back({kt, kv});
        jt_res["knots"] = kn;
    }
    res["objective"] = {{"w1", cfg.objective.w1},   {"w2", cfg.objective.w2},
                        {"w3", cfg.objective.w3},   {"w4", cfg.objective.w4},
                        {"delta", cfg.objective.delta}, {"q_env", cfg.objective.q_env},
                        {"target", jt_res}};
    res["numerics"] = {{"h", cfg.numerics.h},
                       {"T", cfg.numerics.T},
                       {"n", cfg.numerics.n},
                       {"S", cfg.numerics.S},
                       {"B", cfg.numerics.B},
                       {"lambda", cfg.numerics.lambda},
                       {"epsilon", cfg.numerics.epsilon},
                       {"relax", cfg.numerics.relax},
                       {"max_iter", cfg.numerics.max_iter},
                       {"basis", to_string(cfg.numerics.basis)},
                       {"seed", cfg.numerics.seed},
                       {"workers", cfg.numerics.workers},
                       {"q0", cfg.numerics.q0},
                       {"v0_frac", cfg.numerics.v0_frac},
                       {"dump_paths", cfg.numerics.dump_paths},
                       {"bins", cfg.numerics.bins},
                       {"band_edges", cfg.numerics.band_edges},
                       {"riccati_dt", cfg.numerics.riccati_dt},
                       {"d_equation_variant",
                        cfg.numerics.d_variant == DEquationVariant::adjoint ? "adjoint"
                                                                            : "printed"}};
    res["experiment"] = {{"kind", cfg.experiment.kind},
                         {"series", cfg.experiment.series_path},
                         {"h_values", cfg.experiment.h_values},
                         {"w3_values", cfg.experiment.w3_values},
                         {"lambda_values", cfg.experiment.lambda_values},
                         {"path_scaling", cfg.experiment.path_scaling},
                         {"S_base", cfg.experiment.S_base},
                         {"policy", cfg.experiment.policy}};
    res["out_dir"] = cfg.out_dir;
    cfg.resolved = std::move(res);
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open config " + path);
    json doc;
    try {
        is >> doc;
    } catch (const json::exception& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what(), 0);
    }
    return parse_config(std::move(doc));
}

/// Exhaustive validation. Fatal issues stop a run; warnings are printed.
inline std::vector<ConfigIssue> validate_config(const RunConfig& cfg) {
    std::vector<ConfigIssue> issues;
    auto check = [&](const char* field, auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            issues.push_back({field, e.what(), true});
        }
    };
    check("model", [&] { cfg.model.validate(); });
    check("reservoir", [&] { cfg.reservoir.validate(); });
    check("objective", [&] { cfg.objective.validate(); });

    const auto& n = cfg.numerics;
    if (!(n.h > 0.0)) issues.push_back({"numerics.h", "step must be positive", true});
    if (n.n == 0) issues.push_back({"numerics.n", "no steps: T/h rounded to zero", true});
    if (std::fabs(static_cast<double>(n.n) * n.h - n.T) > 1e-9 * std::max(1.0, n.T))
        issues.push_back({"numerics.T", "horizon mismatch: n*h must equal T", true});
    if (n.S == 0) issues.push_back({"numerics.S", "path count must be positive", true});
    if (n.B == 0 || (n.S > 0 && n.S % n.B != 0))
        issues.push_back({"numerics.B", "B must divide S", true});
    if (!(n.lambda >= 0.0)) issues.push_back({"numerics.lambda", "lambda must be >= 0", true});
    if (!(n.epsilon > 0.0)) issues.push_back({"numerics.epsilon", "epsilon must be > 0", true});
    if (!(n.relax > 0.0 && n.relax < 1.0))
        issues.push_back({"numerics.relax", "relaxation weight must lie in (0,1)", true});
    if (n.max_iter < 1) issues.push_back({"numerics.max_iter", "max_iter must be >= 1", true});
    if (n.bins == 0) issues.push_back({"numerics.bins", "bins must be >= 1", true});
    for (std::size_t i = 1; i < n.band_edges.size(); ++i)
        if (!(n.band_edges[i] > n.band_edges[i - 1])) {
            issues.push_back({"numerics.band_edges", "band edges must increase", true});
            break;
        }
    if (cfg.objective.w4 > 0.0 && n.basis == BasisId::LQ)
        issues.push_back(
            {"numerics.basis", "hinge terms unrepresentable: w4 > 0 with basis LQ", false});

    static const char* kinds[] = {"calibrate",        "moments",  "solve-lq", "solve-fbsde",
                                  "convergence-study", "fit-rule", "simulate"};
    bool known = false;
    for (const char* k : kinds) known = known || cfg.experiment.kind == k;
    if (!known)
        issues.push_back({"experiment.kind",
                          "unknown experiment '" + cfg.experiment.kind + "'", true});
    if ((cfg.experiment.kind == "calibrate" || cfg.experiment.kind == "fit-rule") &&
        cfg.experiment.series_path.empty())
        issues.push_back({"experiment.series", "input series CSV required", true});
    if (cfg.experiment.kind == "simulate" && cfg.experiment.policy != "zero" &&
        cfg.experiment.policy != "lq")
        issues.push_back({"experiment.policy", "policy must be 'zero' or 'lq'", true});
    if (cfg.experiment.path_scaling != "pairs" && cfg.experiment.path_scaling != "sqrt")
        issues.push_back({"experiment.path_scaling", "must be 'pairs' or 'sqrt'", true});
    return issues;
}

}  // namespace jumpres

#endif
