#ifndef MRABGCN_TESTS_GRAPH_ORACLES_HPP
#define MRABGCN_TESTS_GRAPH_ORACLES_HPP

#include "mrabgcn/graphs.hpp"
#include "mrabgcn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace mrabgcn::testing {

/// Random directed graph with 2 to 8 nodes and density drawn from [0.15, 0.7).
inline NodeGraph random_small_graph(Rng& rng) {
    const std::size_t n = 2 + rng.below(7);
    const double density = rng.uniform(0.15, 0.7);
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j && rng.uniform() < density) {
                a(i, j) = rng.uniform(0.1, 1.0);
            }
        }
    }
    return NodeGraph::from_adjacency(std::move(a));
}

/// Literal transcription of the interaction-pattern weights: every ordered
/// pair of edges is tested against both patterns from the raw adjacency, and
/// sigma^2 is the exact population variance of total degrees.
inline Matrix brute_force_interaction(const Matrix& adjacency) {
    const std::size_t n = adjacency.rows();
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (adjacency(i, j) > 0.0) {
                edges.push_back({i, j});
            }
        }
    }
    auto indeg = [&](std::size_t v) {
        std::int64_t d = 0;
        for (std::size_t u = 0; u < n; ++u) {
            d += adjacency(u, v) > 0.0 ? 1 : 0;
        }
        return d;
    };
    auto outdeg = [&](std::size_t v) {
        std::int64_t d = 0;
        for (std::size_t u = 0; u < n; ++u) {
            d += adjacency(v, u) > 0.0 ? 1 : 0;
        }
        return d;
    };
    // sum_v (n t_v - S)^2 / n^3 in integers, one rounding at the division.
    std::int64_t total = 0;
    for (std::size_t v = 0; v < n; ++v) {
        total += indeg(v) + outdeg(v);
    }
    std::int64_t spread = 0;
    for (std::size_t v = 0; v < n; ++v) {
        const std::int64_t d = static_cast<std::int64_t>(n) * (indeg(v) + outdeg(v)) - total;
        spread += d * d;
    }
    const auto n3 = static_cast<std::int64_t>(n * n * n);
    double sigma2 = static_cast<double>(spread) / static_cast<double>(n3);
    if (sigma2 == 0.0) {
        sigma2 = 1.0;
    }

    const std::size_t m = edges.size();
    Matrix out(m, m);
    for (std::size_t p = 0; p < m; ++p) {
        for (std::size_t q = 0; q < m; ++q) {
            if (p == q) {
                continue;
            }
            const Edge a = edges[p];
            const Edge b = edges[q];
            double w = 0.0;
            // a = (i->j), b = (j->k) with i != k, or the reverse orientation.
            for (const auto& [up, down] : {std::pair{a, b}, std::pair{b, a}}) {
                if (up.target == down.source && up.source != down.target) {
                    const std::size_t j = up.target;
                    const double x = static_cast<double>(indeg(j) + outdeg(j) - 2);
                    w = std::max(w, std::exp(-(x * x) / sigma2));
                }
            }
            // a = (i->k), b = (j->k) with i != j.
            if (a.target == b.target && a.source != b.source) {
                const double x = static_cast<double>(outdeg(a.source) + outdeg(b.source) - 2);
                w = std::max(w, std::exp(-(x * x) / sigma2));
            }
            out(p, q) = w;
        }
    }
    return out;
}

/// Definitional line graph: edge p feeds edge q when p ends where q starts.
inline Matrix brute_force_line_graph(const NodeGraph& g) {
    const std::size_t m = g.edges.size();
    Matrix out(m, m);
    for (std::size_t p = 0; p < m; ++p) {
        for (std::size_t q = 0; q < m; ++q) {
            out(p, q) = g.edges[p].target == g.edges[q].source ? 1.0 : 0.0;
        }
    }
    return out;
}

} // namespace mrabgcn::testing

#endif // MRABGCN_TESTS_GRAPH_ORACLES_HPP
