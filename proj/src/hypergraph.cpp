#include "ahgcn/hypergraph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace ahgcn {

void IncidenceMatrix::add_edge(std::span<const std::size_t> members, EdgeKind kind) {
    if (members.empty()) return;
    const std::size_t base = members_.size();
    members_.resize(base + nodes_, 0);
    for (std::size_t node : members) {
        if (node >= nodes_) {
            throw std::out_of_range("IncidenceMatrix: node " + std::to_string(node) +
                                    " out of range for " + std::to_string(nodes_) + " nodes");
        }
        members_[base + node] = 1;
    }
    kinds_.push_back(kind);
}

std::vector<std::size_t> IncidenceMatrix::members(std::size_t edge) const {
    std::vector<std::size_t> out;
    for (std::size_t n = 0; n < nodes_; ++n) {
        if (contains(n, edge)) out.push_back(n);
    }
    return out;
}

std::size_t IncidenceMatrix::node_degree(std::size_t node) const {
    std::size_t deg = 0;
    for (std::size_t e = 0; e < edges(); ++e) deg += contains(node, e) ? 1 : 0;
    return deg;
}

std::size_t IncidenceMatrix::edge_degree(std::size_t edge) const {
    std::size_t deg = 0;
    for (std::size_t n = 0; n < nodes_; ++n) deg += contains(n, edge) ? 1 : 0;
    return deg;
}

Matrix IncidenceMatrix::dense() const {
    Matrix m(nodes_, edges());
    for (std::size_t e = 0; e < edges(); ++e) {
        for (std::size_t n = 0; n < nodes_; ++n) m(n, e) = contains(n, e) ? 1.0 : 0.0;
    }
    return m;
}

IncidenceMatrix build_location_hyperedges(std::span<const SphereCoord> centers, double delta) {
    if (centers.empty()) throw std::invalid_argument("build_location_hyperedges: no centres");
    if (!(delta > 0.0)) throw std::invalid_argument("build_location_hyperedges: delta must be positive");
    IncidenceMatrix e(centers.size());
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < centers.size(); ++i) {
        members.clear();
        for (std::size_t p = 0; p < centers.size(); ++p) {
            if (p == i || angular_distance(centers[i], centers[p]) <= delta) members.push_back(p);
        }
        e.add_edge(members, EdgeKind::location);
    }
    return e;
}

double cosine_similarity(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("cosine_similarity: lengths differ (" + std::to_string(x.size()) +
                                    " vs " + std::to_string(y.size()) + ")");
    }
    double dot = 0.0, xx = 0.0, yy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        dot += x[i] * y[i];
        xx += x[i] * x[i];
        yy += y[i] * y[i];
    }
    return dot / std::max(std::sqrt(xx) * std::sqrt(yy), kCosineEpsilon);
}

IncidenceMatrix build_content_hyperedges(const Matrix& features, std::size_t k) {
    const std::size_t n = features.rows();
    if (n == 0) throw std::invalid_argument("build_content_hyperedges: no nodes");
    if (k > n - 1) {
        throw std::invalid_argument("build_content_hyperedges: k=" + std::to_string(k) +
                                    " exceeds N-1=" + std::to_string(n - 1));
    }
    IncidenceMatrix e(n);
    if (k == 0) return e;

    Matrix sim(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = i + 1; p < n; ++p) {
            sim(i, p) = sim(p, i) = cosine_similarity(features.row(i), features.row(p));
        }
    }
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < n; ++i) {
        order.clear();
        for (std::size_t p = 0; p < n; ++p) {
            if (p != i) order.push_back(p);
        }
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return sim(i, a) > sim(i, b); });
        order.resize(k);
        order.push_back(i);
        e.add_edge(order, EdgeKind::content);
    }
    return e;
}

IncidenceMatrix concat_hypergraphs(std::span<const IncidenceMatrix> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_hypergraphs: nothing to concatenate");
    IncidenceMatrix out(parts.front().nodes());
    for (const IncidenceMatrix& part : parts) {
        if (part.nodes() != out.nodes()) {
            throw std::invalid_argument("concat_hypergraphs: node counts differ (" +
                                        std::to_string(out.nodes()) + " vs " +
                                        std::to_string(part.nodes()) + ")");
        }
        for (std::size_t e = 0; e < part.edges(); ++e) out.add_edge(part.members(e), part.kind(e));
    }
    return out;
}

NormalizedOperator normalize(const IncidenceMatrix& e) {
    const std::size_t n = e.nodes();
    const std::size_t m = e.edges();
    NormalizedOperator out;
    out.node_degree.resize(n);
    out.edge_degree.resize(m);
    for (std::size_t v = 0; v < n; ++v) {
        out.node_degree[v] = static_cast<double>(e.node_degree(v));
        if (out.node_degree[v] == 0.0) {
            throw std::invalid_argument("normalize: node " + std::to_string(v) +
                                        " belongs to no hyperedge");
        }
    }
    for (std::size_t j = 0; j < m; ++j) out.edge_degree[j] = static_cast<double>(e.edge_degree(j));

    std::vector<double> inv_sqrt(n);
    for (std::size_t v = 0; v < n; ++v) inv_sqrt[v] = 1.0 / std::sqrt(out.node_degree[v]);

    // op(u, v) = sum_e [u in e][v in e] / deg(e) / sqrt(deg(u) deg(v)); built
    // symmetric by construction.
    out.op = Matrix(n, n);
    std::vector<std::size_t> members;
    for (std::size_t j = 0; j < m; ++j) {
        members = e.members(j);
        const double w = 1.0 / out.edge_degree[j];
        for (std::size_t a : members) {
            for (std::size_t b : members) out.op(a, b) += w;
        }
    }
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t v = 0; v < n; ++v) out.op(u, v) *= inv_sqrt[u] * inv_sqrt[v];
    }
    return out;
}

namespace {

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string incidence_csv(const IncidenceMatrix& e) {
    std::string out = "node";
    std::size_t loc = 0, con = 0;
    for (std::size_t j = 0; j < e.edges(); ++j) {
        out += e.kind(j) == EdgeKind::location ? ",loc_" + std::to_string(loc++)
                                               : ",con_" + std::to_string(con++);
    }
    out += '\n';
    for (std::size_t n = 0; n < e.nodes(); ++n) {
        out += std::to_string(n);
        for (std::size_t j = 0; j < e.edges(); ++j) out += e.contains(n, j) ? ",1" : ",0";
        out += '\n';
    }
    return out;
}

std::string operator_csv(const NormalizedOperator& op) {
    std::string out = "node";
    for (std::size_t v = 0; v < op.op.cols(); ++v) out += ",n_" + std::to_string(v);
    out += '\n';
    for (std::size_t u = 0; u < op.op.rows(); ++u) {
        out += std::to_string(u);
        for (std::size_t v = 0; v < op.op.cols(); ++v) out += "," + format_number(op.op(u, v));
        out += '\n';
    }
    return out;
}

}  // namespace ahgcn
