#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ahgcn/matrix.hpp"
#include "ahgcn/sphere.hpp"

namespace ahgcn {

enum class EdgeKind : std::uint8_t { location, content };

// Binary node x hyperedge incidence. Columns are hyperedges.
class IncidenceMatrix {
public:
    IncidenceMatrix() = default;
    explicit IncidenceMatrix(std::size_t nodes) : nodes_(nodes) {}

    std::size_t nodes() const noexcept { return nodes_; }
    std::size_t edges() const noexcept { return kinds_.size(); }
    bool empty() const noexcept { return kinds_.empty(); }

    bool contains(std::size_t node, std::size_t edge) const {
        return members_[edge * nodes_ + node] != 0;
    }
    EdgeKind kind(std::size_t edge) const { return kinds_[edge]; }

    // Appends a hyperedge; empty member lists are dropped.
    void add_edge(std::span<const std::size_t> members, EdgeKind kind);

    std::vector<std::size_t> members(std::size_t edge) const;
    std::size_t node_degree(std::size_t node) const;
    std::size_t edge_degree(std::size_t edge) const;

    // Dense N x M copy with 0/1 entries.
    Matrix dense() const;

private:
    std::size_t nodes_ = 0;
    std::vector<std::uint8_t> members_;  // column-major: edge * nodes + node
    std::vector<EdgeKind> kinds_;
};

// D_v^{-1/2} E D_e^{-1} E^T D_v^{-1/2} together with the degree diagonals.
struct NormalizedOperator {
    Matrix op;
    std::vector<double> node_degree;
    std::vector<double> edge_degree;
};

// Column i holds every node within `delta` radians of centre i (itself included).
IncidenceMatrix build_location_hyperedges(std::span<const SphereCoord> centers, double delta);

constexpr double kCosineEpsilon = 1e-12;

double cosine_similarity(std::span<const double> x, std::span<const double> y);

// Column i holds node i plus its k most cosine-similar other rows of
// `features` (ties to the lower index). k == 0 yields no hyperedges.
IncidenceMatrix build_content_hyperedges(const Matrix& features, std::size_t k);

// Column-wise concatenation; parts without hyperedges contribute nothing.
IncidenceMatrix concat_hypergraphs(std::span<const IncidenceMatrix> parts);

// Throws naming the first node with zero degree.
NormalizedOperator normalize(const IncidenceMatrix& e);

// CSV with one row per node. Columns are named loc_<i> / con_<i>, numbered
// within each kind.
std::string incidence_csv(const IncidenceMatrix& e);
std::string operator_csv(const NormalizedOperator& op);

}  // namespace ahgcn
