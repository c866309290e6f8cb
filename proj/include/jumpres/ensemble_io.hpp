#ifndef JUMPRES_ENSEMBLE_IO_HPP
#define JUMPRES_ENSEMBLE_IO_HPP

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>

#include "jumpres/dynamics.hpp"
#include "jumpres/errors.hpp"

namespace jumpres {

/// Long-format CSV dump: path_id,step,t,Q,q,V,a. The acceleration of the
/// final node is empty (there are n controls for n+1 nodes). `max_paths`
/// caps the dump for large ensembles; 0 dumps everything.
inline void write_ensemble_csv(const ControlledEnsemble& ens, std::ostream& os,
                               std::size_t max_paths = 0) {
    os << "path_id,step,t,Q,q,V,a\n";
    const std::size_t S = max_paths == 0 ? ens.paths() : std::min(max_paths, ens.paths());
    const std::size_t n = ens.steps();
    char buf[160];
    for (std::size_t p = 0; p < S; ++p) {
        for (std::size_t i = 0; i <= n; ++i) {
            const double t = static_cast<double>(i) * ens.h;
            if (i < n) {
                std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g,%.9g,%.9g,%.9g,%.9g\n", p, i, t,
                              ens.Q.at(p, i), ens.q.at(p, i), ens.V.at(p, i), ens.a.at(p, i));
            } else {
                std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g,%.9g,%.9g,%.9g,\n", p, i, t,
                              ens.Q.at(p, i), ens.q.at(p, i), ens.V.at(p, i));
            }
            os << buf;
        }
    }
}

namespace detail {

inline void write_grid_path_major(const PathGrid& g, std::ostream& os) {
    // little-endian IEEE doubles, path-major: all nodes of path 0, then path 1, ...
    std::vector<double> row(g.nodes());
    for (std::size_t p = 0; p < g.paths(); ++p) {
        for (std::size_t i = 0; i < g.nodes(); ++i) row[i] = g.at(p, i);
        os.write(reinterpret_cast<const char*>(row.data()),
                 static_cast<std::streamsize>(row.size() * sizeof(double)));
    }
}

inline PathGrid read_grid_path_major(std::istream& is, std::size_t paths, std::size_t nodes) {
    PathGrid g(paths, nodes);
    std::vector<double> row(nodes);
    for (std::size_t p = 0; p < paths; ++p) {
        is.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(double)));
        if (!is) throw Error("truncated ensemble block");
        for (std::size_t i = 0; i < nodes; ++i) g.at(p, i) = row[i];
    }
    return g;
}

}  // namespace detail

/// Compact binary block for intermediate storage. Layout: four blocks of
/// little-endian 64-bit floats, each row-major path-by-step — Q, q, V over
/// S x (n+1) nodes, then a over S x n. Dimensions are not embedded; callers
/// supply (S, n), which the run manifest records.
inline void write_ensemble_block(const ControlledEnsemble& ens, std::ostream& os) {
    detail::write_grid_path_major(ens.Q, os);
    detail::write_grid_path_major(ens.q, os);
    detail::write_grid_path_major(ens.V, os);
    detail::write_grid_path_major(ens.a, os);
}

inline void write_ensemble_block(const ControlledEnsemble& ens, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path + " for writing");
    write_ensemble_block(ens, os);
}

inline ControlledEnsemble read_ensemble_block(std::istream& is, std::size_t S, std::size_t n,
                                              double h) {
    ControlledEnsemble ens;
    ens.h = h;
    ens.Q = detail::read_grid_path_major(is, S, n + 1);
    ens.q = detail::read_grid_path_major(is, S, n + 1);
    ens.V = detail::read_grid_path_major(is, S, n + 1);
    ens.a = detail::read_grid_path_major(is, S, n);
    ens.touch_lower.assign(n, 0);
    ens.touch_upper.assign(n, 0);
    ens.projection_residual.assign(n, 0.0);
    return ens;
}

inline ControlledEnsemble read_ensemble_block(const std::string& path, std::size_t S,
                                              std::size_t n, double h) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path);
    return read_ensemble_block(is, S, n, h);
}

}  // namespace jumpres

#endif
