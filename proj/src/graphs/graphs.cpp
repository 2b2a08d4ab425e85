#include "mrabgcn/graphs.hpp"

#include "mrabgcn/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

namespace mrabgcn {

std::string_view to_string(EdgeVariant variant) {
    switch (variant) {
    case EdgeVariant::InteractionPatterns:
        return "interaction-patterns";
    case EdgeVariant::LineGraph:
        return "line-graph";
    case EdgeVariant::Identity:
        return "identity";
    }
    return "unknown";
}

EdgeVariant parse_edge_variant(std::string_view text) {
    if (text == "interaction-patterns") {
        return EdgeVariant::InteractionPatterns;
    }
    if (text == "line-graph") {
        return EdgeVariant::LineGraph;
    }
    if (text == "identity") {
        return EdgeVariant::Identity;
    }
    throw ContractError("unknown edge variant '" + std::string(text) +
                        "' (expected interaction-patterns, line-graph or identity)");
}

NodeGraph NodeGraph::from_adjacency(Matrix adjacency) {
    if (adjacency.rows() != adjacency.cols()) {
        throw DimensionError("node graph adjacency must be square, got " + shape_string(adjacency));
    }
    NodeGraph g;
    g.n = adjacency.rows();
    g.indegree.assign(g.n, 0);
    g.outdegree.assign(g.n, 0);
    for (std::size_t i = 0; i < g.n; ++i) {
        if (adjacency(i, i) != 0.0) {
            throw ContractError("node graph adjacency has a self-loop at node " + std::to_string(i));
        }
        for (std::size_t j = 0; j < g.n; ++j) {
            const double w = adjacency(i, j);
            if (!(w >= 0.0) || !std::isfinite(w)) {
                throw ContractError("node graph adjacency entry (" + std::to_string(i) + "," + std::to_string(j) +
                                    ") is not a finite non-negative weight");
            }
            if (w > 0.0) {
                g.edges.push_back({i, j});
                ++g.outdegree[i];
                ++g.indegree[j];
            }
        }
    }
    g.adjacency = std::move(adjacency);
    return g;
}

NodeGraph build_node_graph(const Matrix& distances, double kappa) {
    if (distances.rows() != distances.cols()) {
        throw DimensionError("distance matrix must be square, got " + shape_string(distances));
    }
    const std::size_t n = distances.rows();
    std::vector<double> finite;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double d = distances(i, j);
            if (i == j || std::isinf(d)) {
                continue;
            }
            if (!(d >= 0.0)) {
                throw ContractError("distance (" + std::to_string(i) + "," + std::to_string(j) +
                                    ") is negative or NaN");
            }
            finite.push_back(d);
        }
    }
    if (finite.empty()) {
        throw ContractError("degenerate graph: every off-diagonal distance is infinite");
    }
    const double variance = population_moments(finite).variance;
    if (variance == 0.0) {
        throw ContractError("degenerate kernel: distance standard deviation is zero");
    }

    Matrix adjacency(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double d = distances(i, j);
            if (i == j || std::isinf(d)) {
                continue;
            }
            const double w = std::exp(-(d * d) / variance);
            if (w >= kappa) {
                adjacency(i, j) = w;
            }
        }
    }
    return NodeGraph::from_adjacency(std::move(adjacency));
}

Degrees degrees(const NodeGraph& g) {
    Degrees d{std::vector<std::size_t>(g.n, 0), std::vector<std::size_t>(g.n, 0)};
    for (std::size_t i = 0; i < g.n; ++i) {
        for (std::size_t j = 0; j < g.n; ++j) {
            if (g.adjacency(i, j) > 0.0) {
                ++d.outdegree[i];
                ++d.indegree[j];
            }
        }
    }
    return d;
}

Matrix incidence(const NodeGraph& g) {
    if (g.edges.empty()) {
        throw ContractError("incidence: graph has no edges");
    }
    Matrix m(g.n, g.edges.size());
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        m(g.edges[e].source, e) = 1.0;
        m(g.edges[e].target, e) = 1.0;
    }
    return m;
}

double total_degree_variance(const NodeGraph& g) {
    std::int64_t sum = 0;
    std::int64_t sum_sq = 0;
    for (std::size_t v = 0; v < g.n; ++v) {
        const auto t = static_cast<std::int64_t>(g.indegree[v] + g.outdegree[v]);
        sum += t;
        sum_sq += t * t;
    }
    const auto n = static_cast<std::int64_t>(g.n);
    return static_cast<double>(n * sum_sq - sum * sum) / static_cast<double>(n * n);
}

namespace {

void set_max_symmetric(Matrix& a, std::size_t x, std::size_t y, double w) {
    a(x, y) = std::max(a(x, y), w);
    a(y, x) = std::max(a(y, x), w);
}

Matrix interaction_patterns(const NodeGraph& g) {
    const std::size_t m = g.edges.size();
    std::vector<std::vector<std::size_t>> in_edges(g.n);
    std::vector<std::vector<std::size_t>> out_edges(g.n);
    for (std::size_t e = 0; e < m; ++e) {
        out_edges[g.edges[e].source].push_back(e);
        in_edges[g.edges[e].target].push_back(e);
    }

    double variance = total_degree_variance(g);
    if (variance == 0.0) {
        warn("edge graph: all total degrees are equal (standard deviation 0); using sigma = 1");
        variance = 1.0;
    }
    auto kernel = [variance](double x) { return std::exp(-(x * x) / variance); };

    Matrix a(m, m);
    // Stream connectivity through joint node j.
    for (std::size_t j = 0; j < g.n; ++j) {
        const double w = kernel(static_cast<double>(g.indegree[j] + g.outdegree[j]) - 2.0);
        for (std::size_t upstream : in_edges[j]) {
            for (std::size_t downstream : out_edges[j]) {
                if (g.edges[upstream].source != g.edges[downstream].target) {
                    set_max_symmetric(a, upstream, downstream, w);
                }
            }
        }
    }
    // Competitive relationship on shared target k.
    for (std::size_t k = 0; k < g.n; ++k) {
        const auto& into = in_edges[k];
        for (std::size_t p = 0; p < into.size(); ++p) {
            for (std::size_t q = p + 1; q < into.size(); ++q) {
                const std::size_t i = g.edges[into[p]].source;
                const std::size_t j = g.edges[into[q]].source;
                const double w = kernel(static_cast<double>(g.outdegree[i] + g.outdegree[j]) - 2.0);
                set_max_symmetric(a, into[p], into[q], w);
            }
        }
    }
    return a;
}

Matrix line_graph(const NodeGraph& g) {
    const std::size_t m = g.edges.size();
    std::vector<std::vector<std::size_t>> out_edges(g.n);
    for (std::size_t e = 0; e < m; ++e) {
        out_edges[g.edges[e].source].push_back(e);
    }
    Matrix a(m, m);
    for (std::size_t e = 0; e < m; ++e) {
        for (std::size_t next : out_edges[g.edges[e].target]) {
            a(e, next) = 1.0;
        }
    }
    return a;
}

} // namespace

EdgeGraph build_edge_graph(const NodeGraph& g, EdgeVariant variant) {
    if (g.edges.empty()) {
        throw ContractError("edge graph: node graph has no edges");
    }
    EdgeGraph eg;
    eg.m = g.edges.size();
    eg.variant = variant;
    eg.incidence = incidence(g);
    switch (variant) {
    case EdgeVariant::InteractionPatterns:
        eg.adjacency = interaction_patterns(g);
        break;
    case EdgeVariant::LineGraph:
        eg.adjacency = line_graph(g);
        break;
    case EdgeVariant::Identity:
        eg.adjacency = Matrix(eg.m, eg.m);
        break;
    }
    return eg;
}

Matrix normalize(const Matrix& adjacency) {
    if (adjacency.rows() != adjacency.cols()) {
        throw DimensionError("normalize: adjacency must be square, got " + shape_string(adjacency));
    }
    const std::size_t n = adjacency.rows();
    Matrix out(n, n);
    std::vector<double> row;
    for (std::size_t i = 0; i < n; ++i) {
        row.assign(adjacency.row(i).begin(), adjacency.row(i).end());
        row[i] += 1.0;
        for (double v : row) {
            if (!(v >= 0.0)) {
                throw ContractError("normalize: negative or NaN entry in row " + std::to_string(i));
            }
        }
        std::vector<double> scratch = row;
        const double total = canonical_sum(scratch);
        for (std::size_t j = 0; j < n; ++j) {
            out(i, j) = row[j] / total;
        }
    }
    return out;
}

} // namespace mrabgcn
