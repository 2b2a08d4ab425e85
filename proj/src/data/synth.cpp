#include "mrabgcn/data.hpp"

#include "mrabgcn/diagnostics.hpp"
#include "mrabgcn/rng.hpp"

#include <cmath>
#include <numbers>

namespace mrabgcn {

double SyntheticSignal::at(std::size_t node, std::size_t t) const {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(kPeriod);
    return base.at(node) + amplitude.at(node) * std::sin(angle + phase.at(node));
}

SyntheticSignal synth_signal(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    SyntheticSignal s;
    for (std::size_t i = 0; i < n; ++i) {
        s.base.push_back(SyntheticSignal::kBase);
        s.amplitude.push_back(rng.uniform(1.5, 2.0));
        s.phase.push_back(rng.uniform(0.0, 0.25));
    }
    return s;
}

SeriesTable synth_generate(const NodeGraph& g, std::size_t steps, std::uint64_t seed, double noise_level,
                           std::vector<std::string> ids) {
    const std::size_t n = g.n;
    if (n == 0 || steps == 0) {
        throw ContractError("synth_generate: need at least one node and one step");
    }
    if (!(noise_level >= 0.0) || !std::isfinite(noise_level)) {
        throw ContractError("synth_generate: noise level must be finite and non-negative");
    }
    if (ids.empty()) {
        for (std::size_t i = 0; i < n; ++i) {
            ids.push_back(std::to_string(i));
        }
    } else if (ids.size() != n) {
        throw DimensionError("synth_generate: " + std::to_string(ids.size()) + " ids for " + std::to_string(n) +
                             " nodes");
    }
    const SyntheticSignal signal = synth_signal(n, seed);
    // Noise uses its own stream so the forcing stays identical across noise
    // levels.
    Rng noise(seed ^ 0x9e3779b97f4a7c15ULL);
    const Matrix a_hat = normalize(g.adjacency);

    SeriesTable table;
    table.ids = std::move(ids);
    table.readings = Matrix(steps, n);
    for (std::size_t i = 0; i < n; ++i) {
        table.readings(0, i) = signal.at(i, 0);
    }
    for (std::size_t t = 0; t + 1 < steps; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            double mixed = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                mixed += a_hat(i, j) * table.readings(t, j);
            }
            table.readings(t + 1, i) = 0.7 * mixed + 0.3 * signal.at(i, t) + noise_level * noise.normal();
        }
    }
    for (std::size_t t = 0; t < steps; ++t) {
        table.timestamps.push_back(std::to_string(t * 300));
    }
    return table;
}

SensorLayout synth_layout(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform();
        y[i] = rng.uniform();
    }
    SensorLayout layout;
    layout.distances = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        layout.ids.push_back("s" + std::to_string(i));
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) {
                layout.distances(i, j) = std::hypot(x[i] - x[j], y[i] - y[j]) * (1.0 + 0.2 * rng.uniform());
            }
        }
    }
    return layout;
}

} // namespace mrabgcn
