#include "mrabgcn/model.hpp"

#include "mrabgcn/diagnostics.hpp"

#include <cmath>
#include <functional>

namespace mrabgcn {

std::string_view to_string(RangeMixing mixing) {
    switch (mixing) {
    case RangeMixing::Attention:
        return "attention";
    case RangeMixing::Concat:
        return "concat";
    case RangeMixing::LastHop:
        return "last-hop";
    }
    return "unknown";
}

RangeMixing parse_range_mixing(std::string_view text) {
    if (text == "attention") {
        return RangeMixing::Attention;
    }
    if (text == "concat") {
        return RangeMixing::Concat;
    }
    if (text == "last-hop") {
        return RangeMixing::LastHop;
    }
    throw ContractError("unknown range mixing '" + std::string(text) + "' (expected attention, concat or last-hop)");
}

void ModelConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw ContractError(std::string("model config: ") + what);
        }
    };
    require(max_hop >= 1, "max_hop must be >= 1");
    require(hidden >= 1, "hidden must be >= 1");
    require(rnn_layers >= 1, "rnn_layers must be >= 1");
    require(input_dim >= 1, "input_dim must be >= 1");
    require(horizon >= 1, "horizon must be >= 1");
    require(history >= 1, "history must be >= 1");
}

GraphOperators GraphOperators::build(const NodeGraph& g, const EdgeGraph& eg) {
    if (eg.incidence.rows() != g.n || eg.incidence.cols() != eg.m) {
        throw DimensionError("graph operators: incidence " + shape_string(eg.incidence) + " does not match " +
                             std::to_string(g.n) + " nodes and " + std::to_string(eg.m) + " edges");
    }
    GraphOperators ops;
    ops.node = PropagationOperator(normalize(g.adjacency));
    ops.edge = PropagationOperator(normalize(eg.adjacency));
    ops.incidence = PropagationOperator(eg.incidence);
    ops.incidence_transpose = PropagationOperator(transpose(eg.incidence));
    return ops;
}

namespace {

using Allocate = std::function<std::size_t(std::string name, std::size_t rows, std::size_t cols)>;

GateSlots layout_gate(const ModelConfig& c, const std::string& prefix, std::size_t width, const Allocate& add) {
    const std::size_t f = c.hidden;
    GateSlots g;
    for (std::size_t l = 0; l < c.max_hop; ++l) {
        g.theta_node.push_back(add(prefix + ".theta_node" + std::to_string(l), l == 0 ? width : 2 * f, f));
    }
    if (c.max_hop > 1) {
        g.edge_projection = add(prefix + ".edge_projection", width, f);
        for (std::size_t l = 0; l + 1 < c.max_hop; ++l) {
            g.theta_edge.push_back(add(prefix + ".theta_edge" + std::to_string(l), f, f));
        }
    }
    switch (c.mixing) {
    case RangeMixing::Attention:
        g.attention_projection = add(prefix + ".attention_projection", f, c.attention_width());
        g.context = add(prefix + ".context", c.attention_width(), 1);
        break;
    case RangeMixing::Concat:
        g.mixing_projection = add(prefix + ".mixing_projection", c.max_hop * f, f);
        break;
    case RangeMixing::LastHop:
        break;
    }
    return g;
}

ModelParams layout(const ModelConfig& config, const std::function<Matrix(std::size_t, std::size_t)>& make) {
    config.validate();
    ModelParams p;
    p.config = config;
    const Allocate add = [&p, &make](std::string name, std::size_t rows, std::size_t cols) {
        p.tensors.push_back({std::move(name), make(rows, cols)});
        return p.tensors.size() - 1;
    };
    auto cells = [&](const std::string& side, std::vector<CellSlots>& out) {
        for (std::size_t layer = 0; layer < config.rnn_layers; ++layer) {
            const std::string prefix = side + ".layer" + std::to_string(layer);
            CellSlots cell;
            cell.input_width = (layer == 0 ? config.input_dim : config.hidden) + config.hidden;
            cell.update = layout_gate(config, prefix + ".update", cell.input_width, add);
            cell.reset = layout_gate(config, prefix + ".reset", cell.input_width, add);
            cell.candidate = layout_gate(config, prefix + ".candidate", cell.input_width, add);
            out.push_back(std::move(cell));
        }
    };
    cells("encoder", p.encoder);
    cells("decoder", p.decoder);
    p.output_projection = add("decoder.output_projection", config.hidden, config.input_dim);
    return p;
}

} // namespace

ModelParams ModelParams::initialize(const ModelConfig& config, Rng& rng) {
    return layout(config, [&rng](std::size_t rows, std::size_t cols) {
        const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
        Matrix m(rows, cols);
        for (double& v : m.values()) {
            v = rng.uniform(-bound, bound);
        }
        return m;
    });
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
    return layout(config, [](std::size_t rows, std::size_t cols) { return Matrix(rows, cols); });
}

std::size_t ModelParams::scalar_count() const {
    std::size_t total = 0;
    for (const auto& t : tensors) {
        total += t.value.size();
    }
    return total;
}

std::vector<Matrix> ModelParams::values() const {
    std::vector<Matrix> out;
    out.reserve(tensors.size());
    for (const auto& t : tensors) {
        out.push_back(t.value);
    }
    return out;
}

void ModelParams::assign(std::span<const Matrix> values) {
    if (values.size() != tensors.size()) {
        throw DimensionError("ModelParams::assign: expected " + std::to_string(tensors.size()) + " tensors, got " +
                             std::to_string(values.size()));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!values[i].same_shape(tensors[i].value)) {
            throw DimensionError("ModelParams::assign: " + tensors[i].name + " is " +
                                 shape_string(tensors[i].value) + ", got " + shape_string(values[i]));
        }
        tensors[i].value = values[i];
    }
}

std::size_t ModelParams::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (tensors[i].name == name) {
            return i;
        }
    }
    throw ContractError("unknown parameter '" + std::string(name) + "'");
}

namespace {

GateVars bind_gate(const GateSlots& slots, const std::vector<Var>& all) {
    GateVars g;
    for (std::size_t s : slots.theta_node) {
        g.theta_node.push_back(all[s]);
    }
    for (std::size_t s : slots.theta_edge) {
        g.theta_edge.push_back(all[s]);
    }
    auto optional = [&all](std::size_t s) { return s == kNoSlot ? Var() : all[s]; };
    g.edge_projection = optional(slots.edge_projection);
    g.attention_projection = optional(slots.attention_projection);
    g.context = optional(slots.context);
    g.mixing_projection = optional(slots.mixing_projection);
    return g;
}

std::vector<CellVars> bind_cells(const std::vector<CellSlots>& cells, const std::vector<Var>& all) {
    std::vector<CellVars> out;
    for (const auto& c : cells) {
        out.push_back({bind_gate(c.update, all), bind_gate(c.reset, all), bind_gate(c.candidate, all)});
    }
    return out;
}

} // namespace

ModelVars ModelVars::bind(Tape& tape, const ModelParams& params, bool track) {
    ModelVars v;
    v.all.reserve(params.tensors.size());
    for (const auto& t : params.tensors) {
        v.all.push_back(track ? tape.leaf(t.value) : tape.constant(t.value));
    }
    v.encoder = bind_cells(params.encoder, v.all);
    v.decoder = bind_cells(params.decoder, v.all);
    v.output_projection = v.all[params.output_projection];
    return v;
}

} // namespace mrabgcn
