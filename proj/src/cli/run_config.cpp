#include "mrabgcn/cli.hpp"

#include "mrabgcn/diagnostics.hpp"

#include "json.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace mrabgcn {

namespace {

using nlohmann::json;
using Setter = std::function<void(const json&)>;

template <typename T>
T as(const json& value, const std::string& key) {
    try {
        if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
            if (!value.is_number_unsigned()) {
                throw FormatError("expected a non-negative integer");
            }
        } else if constexpr (std::is_same_v<T, double>) {
            if (!value.is_number()) {
                throw FormatError("expected a number");
            }
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!value.is_boolean()) {
                throw FormatError("expected true or false");
            }
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!value.is_string()) {
                throw FormatError("expected a string");
            }
        }
        return value.get<T>();
    } catch (const std::exception& e) {
        throw FormatError("config: key '" + key + "': " + e.what());
    }
}

template <typename T>
Setter set(T& field, std::string key) {
    return [&field, key](const json& v) { field = as<T>(v, key); };
}

void apply_section(const json& section, const std::string& name, const std::map<std::string, Setter>& setters) {
    if (!section.is_object()) {
        throw FormatError("config: '" + name + "' must be an object");
    }
    for (const auto& [key, value] : section.items()) {
        const auto it = setters.find(key);
        if (it == setters.end()) {
            throw FormatError("config: unknown key '" + (name.empty() ? key : name + "." + key) + "'");
        }
        it->second(value);
    }
}

} // namespace

ReductionOrder parse_reduction_order(const std::string& text) {
    if (text == "canonical") {
        return ReductionOrder::Canonical;
    }
    if (text == "sequential") {
        return ReductionOrder::Sequential;
    }
    throw FormatError("unknown reduction order '" + text + "' (expected canonical or sequential)");
}

RunConfig parse_run_config(const std::string& json_text, RunConfig c) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    std::string variant(to_string(c.model.edge_variant));
    std::string mixing(to_string(c.model.mixing));

    const std::map<std::string, Setter> model = {
        {"max_hop", set(c.model.max_hop, "model.max_hop")},
        {"hidden", set(c.model.hidden, "model.hidden")},
        {"rnn_layers", set(c.model.rnn_layers, "model.rnn_layers")},
        {"horizon", set(c.model.horizon, "model.horizon")},
        {"history", set(c.model.history, "model.history")},
        {"attention_dim", set(c.model.attention_dim, "model.attention_dim")},
        {"edge_variant", set(variant, "model.edge_variant")},
        {"mixing", set(mixing, "model.mixing")},
    };
    const std::map<std::string, Setter> train = {
        {"epochs", set(c.train.epochs, "train.epochs")},
        {"batch_size", set(c.train.batch_size, "train.batch_size")},
        {"base_lr", set(c.train.base_lr, "train.base_lr")},
        {"lr_decay", set(c.train.lr_decay, "train.lr_decay")},
        {"lr_decay_every", set(c.train.lr_decay_every, "train.lr_decay_every")},
        {"weight_decay", set(c.train.weight_decay, "train.weight_decay")},
        {"sampling_decay_steps", set(c.train.sampling_decay_steps, "train.sampling_decay_steps")},
        {"gradient_clip_norm", set(c.train.gradient_clip_norm, "train.gradient_clip_norm")},
    };
    const std::map<std::string, Setter> graph = {{"kappa", set(c.kappa, "graph.kappa")}};
    const std::map<std::string, Setter> data = {
        {"readings", set(c.readings, "data.readings")},
        {"ids", set(c.ids, "data.ids")},
        {"distances", set(c.distances, "data.distances")},
        {"train_fraction", set(c.train_fraction, "data.train_fraction")},
        {"validation_fraction", set(c.validation_fraction, "data.validation_fraction")},
    };
    const std::map<std::string, Setter> synth = {
        {"nodes", set(c.synth_nodes, "synth.nodes")},
        {"steps", set(c.synth_steps, "synth.steps")},
        {"noise", set(c.synth_noise, "synth.noise")},
    };
    const std::map<std::string, Setter> eval = {
        {"batch_size", set(c.eval_batch_size, "eval.batch_size")},
        {"ha_period", set(c.ha_period, "eval.ha_period")},
        {"with_ha", set(c.with_ha, "eval.with_ha")},
        {"reduction", set(c.reduction, "eval.reduction")},
    };
    const std::map<std::string, Setter> top = {
        {"seed", set(c.seed, "seed")},
        {"checkpoint", set(c.checkpoint, "checkpoint")},
        {"out", set(c.out, "out")},
        {"model", [&](const json& v) { apply_section(v, "model", model); }},
        {"train", [&](const json& v) { apply_section(v, "train", train); }},
        {"graph", [&](const json& v) { apply_section(v, "graph", graph); }},
        {"data", [&](const json& v) { apply_section(v, "data", data); }},
        {"synth", [&](const json& v) { apply_section(v, "synth", synth); }},
        {"eval", [&](const json& v) { apply_section(v, "eval", eval); }},
    };
    apply_section(root, "", top);
    c.model.edge_variant = parse_edge_variant(variant);
    c.model.mixing = parse_range_mixing(mixing);
    (void)parse_reduction_order(c.reduction);
    c.train.seed = c.seed;
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open config " + path.string());
    }
    std::stringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str(), std::move(base));
}

std::string run_config_json(const RunConfig& c, int indent) {
    json root = {
        {"seed", c.seed},
        {"checkpoint", c.checkpoint},
        {"out", c.out},
        {"model",
         {
             {"max_hop", c.model.max_hop},
             {"hidden", c.model.hidden},
             {"rnn_layers", c.model.rnn_layers},
             {"horizon", c.model.horizon},
             {"history", c.model.history},
             {"attention_dim", c.model.attention_dim},
             {"edge_variant", std::string(to_string(c.model.edge_variant))},
             {"mixing", std::string(to_string(c.model.mixing))},
         }},
        {"train",
         {
             {"epochs", c.train.epochs},
             {"batch_size", c.train.batch_size},
             {"base_lr", c.train.base_lr},
             {"lr_decay", c.train.lr_decay},
             {"lr_decay_every", c.train.lr_decay_every},
             {"weight_decay", c.train.weight_decay},
             {"sampling_decay_steps", c.train.sampling_decay_steps},
             {"gradient_clip_norm", c.train.gradient_clip_norm},
         }},
        {"graph", {{"kappa", c.kappa}}},
        {"data",
         {
             {"readings", c.readings},
             {"ids", c.ids},
             {"distances", c.distances},
             {"train_fraction", c.train_fraction},
             {"validation_fraction", c.validation_fraction},
         }},
        {"synth", {{"nodes", c.synth_nodes}, {"steps", c.synth_steps}, {"noise", c.synth_noise}}},
        {"eval",
         {
             {"batch_size", c.eval_batch_size},
             {"ha_period", c.ha_period},
             {"with_ha", c.with_ha},
             {"reduction", c.reduction},
         }},
    };
    return indent > 0 ? root.dump(indent) : root.dump();
}

} // namespace mrabgcn
