#ifndef MRABGCN_TESTS_FIXTURES_HPP
#define MRABGCN_TESTS_FIXTURES_HPP

#include "mrabgcn/graphs.hpp"
#include "mrabgcn/model.hpp"
#include "mrabgcn/rng.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mrabgcn::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.values()) {
        v = rng.uniform(lo, hi);
    }
    return m;
}

/// Directed graph on n nodes with exactly `edges` distinct off-diagonal
/// edges of random positive weight.
inline NodeGraph random_graph(std::size_t n, std::size_t edges, Rng& rng) {
    Matrix a(n, n);
    std::size_t placed = 0;
    while (placed < edges) {
        const std::size_t i = rng.below(n);
        const std::size_t j = rng.below(n);
        if (i == j || a(i, j) > 0.0) {
            continue;
        }
        a(i, j) = rng.uniform(0.1, 1.0);
        ++placed;
    }
    return NodeGraph::from_adjacency(std::move(a));
}

/// The same graph with node v renamed perm[v].
inline NodeGraph relabel(const NodeGraph& g, const std::vector<std::size_t>& perm) {
    Matrix a(g.n, g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        for (std::size_t j = 0; j < g.n; ++j) {
            a(perm[i], perm[j]) = g.adjacency(i, j);
        }
    }
    return NodeGraph::from_adjacency(std::move(a));
}

/// Rows of x (B stacked blocks of n rows) moved so node v lands at perm[v].
inline Matrix relabel_rows(const Matrix& x, const std::vector<std::size_t>& perm) {
    const std::size_t n = perm.size();
    Matrix out(x.rows(), x.cols());
    for (std::size_t b = 0; b < x.rows() / n; ++b) {
        for (std::size_t v = 0; v < n; ++v) {
            const auto src = x.row(b * n + v);
            std::copy(src.begin(), src.end(), out.row(b * n + perm[v]).begin());
        }
    }
    return out;
}

inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) {
        perm[i] = i;
    }
    for (std::size_t i = n; i > 1; --i) {
        std::swap(perm[i - 1], perm[rng.below(i)]);
    }
    return perm;
}

inline GraphOperators operators_for(const NodeGraph& g, EdgeVariant variant = EdgeVariant::InteractionPatterns) {
    return GraphOperators::build(g, build_edge_graph(g, variant));
}

/// Fresh, empty directory under the system temporary directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("mrabgcn_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace mrabgcn::testing

#endif // MRABGCN_TESTS_FIXTURES_HPP
