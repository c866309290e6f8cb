#ifndef JUMPRES_PATH_GRID_HPP
#define JUMPRES_PATH_GRID_HPP

#include <cstddef>
#include <vector>

namespace jumpres {

/// Dense S x (nodes) grid of one state variable over a simulated ensemble.
///
/// Stored node-major (all paths of one time node are contiguous) because
/// the regression passes consume whole cross-sections. Serialization uses
/// the documented path-major order instead; see ensemble_io.
class PathGrid {
public:
    PathGrid() = default;
    PathGrid(std::size_t paths, std::size_t nodes, double fill = 0.0)
        : paths_(paths), nodes_(nodes), data_(paths * nodes, fill) {}

    std::size_t paths() const { return paths_; }
    std::size_t nodes() const { return nodes_; }

    double& at(std::size_t path, std::size_t node) { return data_[node * paths_ + path]; }
    double at(std::size_t path, std::size_t node) const { return data_[node * paths_ + path]; }

    /// Contiguous cross-section of all paths at one node.
    double* node_slice(std::size_t node) { return data_.data() + node * paths_; }
    const double* node_slice(std::size_t node) const { return data_.data() + node * paths_; }

    const std::vector<double>& raw() const { return data_; }

    bool operator==(const PathGrid& other) const {
        return paths_ == other.paths_ && nodes_ == other.nodes_ && data_ == other.data_;
    }

private:
    std::size_t paths_ = 0;
    std::size_t nodes_ = 0;
    std::vector<double> data_;
};

}  // namespace jumpres

#endif
