#ifndef JUMPRES_BUNDLING_HPP
#define JUMPRES_BUNDLING_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "jumpres/errors.hpp"

namespace jumpres {

/// Equal-size grouping of paths by a scalar rank statistic psi. Cells are
/// right-closed intervals whose boundaries are midpoints between adjacent
/// sorted psi values, so the cells tile the whole real line.
struct BundlePartition {
    std::size_t bundle_count = 1;
    std::size_t bundle_size = 0;
    std::vector<double> boundaries;     ///< ascending, length bundle_count - 1
    std::vector<std::int32_t> order;    ///< path indices sorted by (psi, index)

    /// Paths of bundle b, in sorted order.
    const std::int32_t* members(std::size_t b) const { return order.data() + b * bundle_size; }
};

/// Sort paths by psi (ties broken by path index, so the partition is
/// deterministic) and cut into B consecutive equal groups.
inline BundlePartition build_bundles(const std::vector<double>& psi, std::size_t B) {
    const std::size_t S = psi.size();
    if (B < 1 || S < 1) throw Error("build_bundles: empty input");
    if (S % B != 0)
        throw IndivisibleEnsemble("bundle count " + std::to_string(B) +
                                  " does not divide path count " + std::to_string(S));
    BundlePartition part;
    part.bundle_count = B;
    part.bundle_size = S / B;
    part.order.resize(S);
    std::iota(part.order.begin(), part.order.end(), 0);
    std::sort(part.order.begin(), part.order.end(), [&](std::int32_t a, std::int32_t b) {
        if (psi[static_cast<std::size_t>(a)] != psi[static_cast<std::size_t>(b)])
            return psi[static_cast<std::size_t>(a)] < psi[static_cast<std::size_t>(b)];
        return a < b;
    });
    part.boundaries.resize(B - 1);
    for (std::size_t k = 1; k < B; ++k) {
        const double left = psi[static_cast<std::size_t>(part.order[k * part.bundle_size - 1])];
        const double right = psi[static_cast<std::size_t>(part.order[k * part.bundle_size])];
        part.boundaries[k - 1] = 0.5 * (left + right);
    }
    return part;
}

/// Index of the unique right-closed cell containing psi: values equal to a
/// boundary fall into the lower cell.
inline std::size_t locate_bundle(const BundlePartition& part, double psi) {
    return static_cast<std::size_t>(
        std::lower_bound(part.boundaries.begin(), part.boundaries.end(), psi) -
        part.boundaries.begin());
}

}  // namespace jumpres

#endif
