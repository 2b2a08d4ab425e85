#ifndef MRABGCN_GRAPHS_HPP
#define MRABGCN_GRAPHS_HPP

#include "mrabgcn/matrix.hpp"

#include <cstddef>
#include <string_view>
#include <vector>

namespace mrabgcn {

/// Which edge-wise adjacency is built over the node graph's edges.
enum class EdgeVariant {
    InteractionPatterns, ///< stream connectivity + competitive relationship weights
    LineGraph,           ///< unweighted directed line graph
    Identity,            ///< no edge-edge interaction (A_e = 0, so A_e + I = I)
};

std::string_view to_string(EdgeVariant variant);
/// Accepts "interaction-patterns", "line-graph", "identity".
EdgeVariant parse_edge_variant(std::string_view text);

struct Edge {
    std::size_t source = 0;
    std::size_t target = 0;
    bool operator==(const Edge&) const = default;
};

struct Degrees {
    std::vector<std::size_t> indegree;
    std::vector<std::size_t> outdegree;
};

/// Directed weighted sensor graph. `edges` lists the strictly positive
/// off-diagonal adjacency entries in row-major order.
struct NodeGraph {
    std::size_t n = 0;
    Matrix adjacency;
    std::vector<Edge> edges;
    std::vector<std::size_t> indegree;
    std::vector<std::size_t> outdegree;

    /// Validates (square, non-negative, zero diagonal) and derives edges and degrees.
    static NodeGraph from_adjacency(Matrix adjacency);
};

/// Graph whose vertices are the node graph's edges, plus the n x m incidence.
struct EdgeGraph {
    std::size_t m = 0;
    Matrix adjacency;
    Matrix incidence;
    EdgeVariant variant = EdgeVariant::InteractionPatterns;
};

/// Thresholded Gaussian kernel over road distances: A[i][j] = exp(-d^2 / s^2)
/// when that is >= kappa and i != j, where s^2 is the population variance of
/// the finite off-diagonal distances. Unconnected pairs carry +infinity.
NodeGraph build_node_graph(const Matrix& distances, double kappa = 0.1);

Degrees degrees(const NodeGraph& g);

/// n x m node-edge incidence; column e has ones at the endpoints of edges[e].
Matrix incidence(const NodeGraph& g);

/// Variance of total degrees (in + out) over all nodes, computed exactly from
/// integer sums and rounded once.
double total_degree_variance(const NodeGraph& g);

/// Edge-wise graph for the requested variant.
///
/// Interaction patterns: for edges (i->j),(j->k) with i != k the symmetric
/// weight is exp(-(deg_in(j) + deg_out(j) - 2)^2 / s^2); for edges
/// (i->k),(j->k) with i != j it is exp(-(deg_out(i) + deg_out(j) - 2)^2 / s^2);
/// s^2 is total_degree_variance(). A pair matching both patterns keeps the
/// larger weight. When s^2 == 0 a warning is emitted and s^2 = 1 is used.
///
/// Throws ContractError when g has no edges.
EdgeGraph build_edge_graph(const NodeGraph& g, EdgeVariant variant);

/// D^-1 (A + I) with D the row sums of A + I; every row sums to 1.
/// Throws DimensionError for non-square input, ContractError for negative entries.
Matrix normalize(const Matrix& adjacency);

} // namespace mrabgcn

#endif // MRABGCN_GRAPHS_HPP
