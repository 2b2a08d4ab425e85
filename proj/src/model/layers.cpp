#include "mrabgcn/model.hpp"

#include "mrabgcn/diagnostics.hpp"

namespace mrabgcn {

Var graph_conv(Var x, const PropagationOperator& op, Var theta, Activation rho) {
    if (x.cols() != theta.rows()) {
        throw DimensionError("graph_conv: signal " + shape_string(x.value()) + " does not match parameter " +
                             shape_string(theta.value()));
    }
    return activate(propagate(op, matmul(x, theta)), rho);
}

std::vector<Var> bicomponent_forward(Var x0, const GraphOperators& graphs, const GateVars& gate, std::size_t k) {
    if (k < 1) {
        throw ContractError("bicomponent_forward: k must be >= 1");
    }
    if (gate.theta_node.size() < k || gate.theta_edge.size() + 1 < k) {
        throw ContractError("bicomponent_forward: gate has parameters for fewer than " + std::to_string(k) +
                            " hops");
    }
    std::vector<Var> hops;
    hops.reserve(k);
    hops.push_back(graph_conv(x0, graphs.node, gate.theta_node[0]));
    if (k == 1) {
        return hops;
    }
    Var z = propagate(graphs.incidence_transpose, matmul(x0, gate.edge_projection));
    for (std::size_t l = 1; l < k; ++l) {
        z = graph_conv(z, graphs.edge, gate.theta_edge[l - 1]);
        const Var parts[] = {hops.back(), propagate(graphs.incidence, z)};
        hops.push_back(graph_conv(concat_cols(parts), graphs.node, gate.theta_node[l]));
    }
    return hops;
}

AttentionOutput multi_range_attention(std::span<const Var> layers, Var attention_projection, Var context) {
    if (layers.empty()) {
        throw ContractError("multi_range_attention: no layers");
    }
    Tape& tape = *layers.front().tape();
    const std::size_t width = layers.front().cols();
    const Var direction = matmul(attention_projection, context);
    std::vector<Var> scores;
    scores.reserve(layers.size());
    for (const Var& x : layers) {
        if (x.cols() != width || x.rows() != layers.front().rows()) {
            throw DimensionError("multi_range_attention: layer " + shape_string(x.value()) + " differs from " +
                                 shape_string(layers.front().value()));
        }
        scores.push_back(matmul(x, direction));
    }
    const Var weights = softmax_rows(concat_cols(scores));
    const Var spread = tape.constant(Matrix(1, width, 1.0));
    Var output;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const Var term = hadamard(matmul(slice_cols(weights, l, 1), spread), layers[l]);
        output = l == 0 ? term : add(output, term);
    }
    return {output, weights};
}

Var mra_bgcn(Var x, const GraphOperators& graphs, const GateVars& gate, const ModelConfig& config) {
    const auto hops = bicomponent_forward(x, graphs, gate, config.max_hop);
    switch (config.mixing) {
    case RangeMixing::Attention:
        return multi_range_attention(hops, gate.attention_projection, gate.context).output;
    case RangeMixing::Concat:
        return matmul(concat_cols(hops), gate.mixing_projection);
    case RangeMixing::LastHop:
        return hops.back();
    }
    throw ContractError("mra_bgcn: unknown range mixing");
}

Var bgcgru_step(Var x, Var h_prev, const GraphOperators& graphs, const CellVars& cell, const ModelConfig& config) {
    if (x.rows() != h_prev.rows()) {
        throw DimensionError("bgcgru_step: input " + shape_string(x.value()) + " and hidden " +
                             shape_string(h_prev.value()) + " disagree on rows");
    }
    const Var xh[] = {x, h_prev};
    const Var joint = concat_cols(xh);
    const Var z = sigmoid(mra_bgcn(joint, graphs, cell.update, config));
    const Var r = sigmoid(mra_bgcn(joint, graphs, cell.reset, config));
    const Var xrh[] = {x, hadamard(r, h_prev)};
    const Var c = tanh(mra_bgcn(concat_cols(xrh), graphs, cell.candidate, config));
    return add(hadamard(z, h_prev), hadamard(add_scalar(scale(z, -1.0), 1.0), c));
}

std::vector<Var> forecast(Tape& tape, std::span<const Matrix> history, const GraphOperators& graphs,
                          const ModelVars& vars, const ModelConfig& config, const ForecastOptions& options) {
    if (history.size() != config.history) {
        throw ContractError("forecast: expected " + std::to_string(config.history) + " history steps, got " +
                            std::to_string(history.size()));
    }
    const double eps = options.sampling_probability;
    if (eps > 0.0 && options.teacher.empty()) {
        throw ContractError("forecast: sampling probability > 0 requires teacher signals");
    }
    if (!options.teacher.empty() && options.teacher.size() != config.horizon) {
        throw ContractError("forecast: expected " + std::to_string(config.horizon) + " teacher steps, got " +
                            std::to_string(options.teacher.size()));
    }
    if (eps > 0.0 && eps < 1.0 && options.rng == nullptr) {
        throw ContractError("forecast: scheduled sampling needs a random source");
    }
    const std::size_t rows = history.front().rows();
    if (rows == 0 || rows % graphs.nodes() != 0) {
        throw DimensionError("forecast: " + std::to_string(rows) + " signal rows is not a multiple of " +
                             std::to_string(graphs.nodes()) + " nodes");
    }
    for (const Matrix& x : history) {
        if (x.rows() != rows || x.cols() != config.input_dim) {
            throw DimensionError("forecast: history signal " + shape_string(x) + ", expected " +
                                 std::to_string(rows) + "x" + std::to_string(config.input_dim));
        }
    }

    std::vector<Var> hidden(config.rnn_layers, tape.constant(Matrix(rows, config.hidden)));
    for (const Matrix& signal : history) {
        Var input = tape.constant(signal);
        for (std::size_t l = 0; l < config.rnn_layers; ++l) {
            hidden[l] = bgcgru_step(input, hidden[l], graphs, vars.encoder[l], config);
            input = hidden[l];
        }
    }

    std::vector<Var> outputs;
    outputs.reserve(config.horizon);
    Var input = tape.constant(Matrix(rows, config.input_dim));
    for (std::size_t t = 0; t < config.horizon; ++t) {
        Var top = input;
        for (std::size_t l = 0; l < config.rnn_layers; ++l) {
            hidden[l] = bgcgru_step(top, hidden[l], graphs, vars.decoder[l], config);
            top = hidden[l];
        }
        const Var prediction = matmul(top, vars.output_projection);
        outputs.push_back(prediction);
        if (t + 1 == config.horizon) {
            break;
        }
        bool use_teacher = false;
        if (eps >= 1.0) {
            use_teacher = true;
        } else if (eps > 0.0) {
            use_teacher = options.rng->uniform() < eps;
        }
        input = use_teacher ? tape.constant(options.teacher[t]) : prediction;
    }
    return outputs;
}

std::vector<Matrix> predict(std::span<const Matrix> history, const GraphOperators& graphs, const ModelParams& params,
                            ReductionOrder order) {
    Tape tape(order);
    const auto vars = ModelVars::bind(tape, params, false);
    const auto outputs = forecast(tape, history, graphs, vars, params.config);
    std::vector<Matrix> out;
    out.reserve(outputs.size());
    for (const Var& v : outputs) {
        out.push_back(v.value());
    }
    return out;
}

} // namespace mrabgcn
