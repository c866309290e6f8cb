#ifndef JUMPRES_BASIS_HPP
#define JUMPRES_BASIS_HPP

#include <algorithm>
#include <cstddef>
#include <string>

#include "jumpres/dynamics.hpp"
#include "jumpres/errors.hpp"

namespace jumpres {

enum class BasisId { LQ, NLQ1, NLQ2 };

inline std::string to_string(BasisId id) {
    switch (id) {
        case BasisId::LQ: return "LQ";
        case BasisId::NLQ1: return "NLQ1";
        case BasisId::NLQ2: return "NLQ2";
    }
    return "?";
}

inline BasisId basis_from_string(const std::string& s) {
    if (s == "LQ") return BasisId::LQ;
    if (s == "NLQ1") return BasisId::NLQ1;
    if (s == "NLQ2") return BasisId::NLQ2;
    throw Error("unknown basis '" + s + "' (expected LQ, NLQ1, or NLQ2)");
}

/// Regression basis over the state triple. Feature order is fixed:
///   LQ:   1, Q, q, V
///   NLQ1: LQ  + max(q_env - q, 0)
///   NLQ2: NLQ1 + Q max(q_env - q, 0), V max(q_env - q, 0)
struct BasisSet {
    BasisId id = BasisId::LQ;
    double q_env = 5.0;  ///< threshold of the hinge features

    std::size_t size() const {
        switch (id) {
            case BasisId::LQ: return 4;
            case BasisId::NLQ1: return 5;
            case BasisId::NLQ2: return 7;
        }
        return 0;
    }

    void eval(const StateTriple& x, double* out) const {
        out[0] = 1.0;
        out[1] = x.Q;
        out[2] = x.q;
        out[3] = x.V;
        if (id == BasisId::LQ) return;
        const double hinge = std::max(q_env - x.q, 0.0);
        out[4] = hinge;
        if (id == BasisId::NLQ1) return;
        out[5] = x.Q * hinge;
        out[6] = x.V * hinge;
    }
};

}  // namespace jumpres

#endif
