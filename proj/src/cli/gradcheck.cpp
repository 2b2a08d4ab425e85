#include "mrabgcn/cli.hpp"

#include "mrabgcn/diagnostics.hpp"

#include <algorithm>
#include <cmath>

namespace mrabgcn {

namespace {

/// Random directed graph on n nodes with `edges` distinct weighted edges.
NodeGraph random_graph(std::size_t n, std::size_t edges, Rng& rng) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) {
                pairs.emplace_back(i, j);
            }
        }
    }
    for (std::size_t i = pairs.size(); i > 1; --i) {
        std::swap(pairs[i - 1], pairs[rng.below(i)]);
    }
    Matrix a(n, n);
    for (std::size_t e = 0; e < std::min(edges, pairs.size()); ++e) {
        a(pairs[e].first, pairs[e].second) = rng.uniform(0.2, 1.0);
    }
    return NodeGraph::from_adjacency(std::move(a));
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.values()) {
        v = rng.uniform(lo, hi);
    }
    return m;
}

double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

/// Central differences for every entry of every tracked parameter in
/// `checked`, compared against the tape's reverse-mode gradients.
GradcheckReport::Case compare(const std::string& name, Tape& tape, Var loss, const ModelVars& vars,
                              const ModelParams& params, std::span<const std::size_t> checked, double h) {
    tape.backward(loss);
    GradcheckReport::Case result;
    result.name = name;
    for (std::size_t index : checked) {
        const Var v = vars.all[index];
        const Matrix analytic = tape.grad(v);
        Matrix value = tape.value(v);
        for (std::size_t k = 0; k < value.size(); ++k) {
            const double original = value.values()[k];
            value.values()[k] = original + h;
            tape.set_value(v, value);
            tape.replay();
            const double up = tape.value(loss)(0, 0);
            value.values()[k] = original - h;
            tape.set_value(v, value);
            tape.replay();
            const double down = tape.value(loss)(0, 0);
            value.values()[k] = original;
            tape.set_value(v, value);
            const double numeric = (up - down) / (2.0 * h);
            const double err = relative_error(analytic.values()[k], numeric);
            if (err > result.max_relative_error || result.worst_parameter.empty()) {
                result.max_relative_error = std::max(result.max_relative_error, err);
                result.worst_parameter = params.tensors[index].name + "[" + std::to_string(k) + "]";
            }
            ++result.scalars;
        }
    }
    tape.replay();
    return result;
}

Matrix full_mask(std::size_t rows, std::size_t cols) { return Matrix(rows, cols, 1.0); }

/// One BGCGRU step on a two-sample batch, projected to the input width and
/// scored with masked MAE against a random target with one masked entry.
GradcheckReport::Case cell_case(const std::string& name, EdgeVariant variant, RangeMixing mixing, Rng& rng,
                                double h) {
    const std::size_t n = 6;
    const NodeGraph g = random_graph(n, 4 + rng.below(7), rng);
    const EdgeGraph eg = build_edge_graph(g, variant);
    const GraphOperators graphs = GraphOperators::build(g, eg);

    ModelConfig config;
    config.max_hop = 2;
    config.hidden = 4;
    config.rnn_layers = 1;
    config.history = 1;
    config.horizon = 1;
    config.edge_variant = variant;
    config.mixing = mixing;
    const ModelParams params = ModelParams::initialize(config, rng);

    const std::size_t rows = 2 * n;
    Tape tape;
    const ModelVars vars = ModelVars::bind(tape, params, true);
    const Var x = tape.constant(random_matrix(rows, config.input_dim, rng));
    const Var h_prev = tape.constant(random_matrix(rows, config.hidden, rng, -0.5, 0.5));
    const Var h_next = bgcgru_step(x, h_prev, graphs, vars.encoder[0], config);
    const Var pred = matmul(h_next, vars.output_projection);
    Matrix target = random_matrix(rows, config.input_dim, rng, -2.0, 2.0);
    Matrix mask = full_mask(rows, config.input_dim);
    mask(0, 0) = 0.0;
    target(0, 0) = 0.0;
    const Var loss = masked_mae(pred, target, mask);

    std::vector<std::size_t> checked;
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        if (params.tensors[i].name.rfind("encoder.", 0) == 0 || i == params.output_projection) {
            checked.push_back(i);
        }
    }
    return compare(name, tape, loss, vars, params, checked, h);
}

/// Two-layer encoder-decoder over two history and two horizon steps with
/// full teacher forcing, loss averaged over horizons.
GradcheckReport::Case forecast_case(Rng& rng, double h) {
    const std::size_t n = 5;
    const NodeGraph g = random_graph(n, 8, rng);
    const EdgeGraph eg = build_edge_graph(g, EdgeVariant::InteractionPatterns);
    const GraphOperators graphs = GraphOperators::build(g, eg);

    ModelConfig config;
    config.max_hop = 2;
    config.hidden = 3;
    config.rnn_layers = 2;
    config.history = 2;
    config.horizon = 2;
    const ModelParams params = ModelParams::initialize(config, rng);

    std::vector<Matrix> history;
    std::vector<Matrix> targets;
    for (std::size_t t = 0; t < config.history; ++t) {
        history.push_back(random_matrix(n, 1, rng));
    }
    for (std::size_t t = 0; t < config.horizon; ++t) {
        targets.push_back(random_matrix(n, 1, rng, 0.5, 1.5));
    }
    Tape tape;
    const ModelVars vars = ModelVars::bind(tape, params, true);
    ForecastOptions options;
    options.teacher = targets;
    options.sampling_probability = 1.0;
    const auto outputs = forecast(tape, history, graphs, vars, config, options);
    Var loss;
    for (std::size_t t = 0; t < outputs.size(); ++t) {
        const Var term = scale(masked_mae(outputs[t], targets[t], full_mask(n, 1)), 0.5);
        loss = loss.valid() ? add(loss, term) : term;
    }
    std::vector<std::size_t> checked(params.tensors.size());
    for (std::size_t i = 0; i < checked.size(); ++i) {
        checked[i] = i;
    }
    return compare("seq2seq forecast, 2 layers", tape, loss, vars, params, checked, h);
}

} // namespace

GradcheckReport run_gradcheck(std::uint64_t seed, double step) {
    Rng rng(seed);
    GradcheckReport report;
    report.cases.push_back(
        cell_case("bgcgru step, interaction-patterns, attention", EdgeVariant::InteractionPatterns,
                  RangeMixing::Attention, rng, step));
    report.cases.push_back(
        cell_case("bgcgru step, line-graph, attention", EdgeVariant::LineGraph, RangeMixing::Attention, rng, step));
    report.cases.push_back(
        cell_case("bgcgru step, identity, attention", EdgeVariant::Identity, RangeMixing::Attention, rng, step));
    report.cases.push_back(cell_case("bgcgru step, interaction-patterns, concat", EdgeVariant::InteractionPatterns,
                                     RangeMixing::Concat, rng, step));
    report.cases.push_back(cell_case("bgcgru step, interaction-patterns, last-hop", EdgeVariant::InteractionPatterns,
                                     RangeMixing::LastHop, rng, step));
    report.cases.push_back(forecast_case(rng, step));
    for (const auto& c : report.cases) {
        report.max_relative_error = std::max(report.max_relative_error, c.max_relative_error);
    }
    return report;
}

} // namespace mrabgcn
