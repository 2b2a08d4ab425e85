#include "mrabgcn/cli.hpp"

#include "mrabgcn/checkpoint.hpp"
#include "mrabgcn/data.hpp"
#include "mrabgcn/diagnostics.hpp"
#include "mrabgcn/eval.hpp"
#include "mrabgcn/graph_io.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

namespace mrabgcn {

namespace {

namespace fs = std::filesystem;

/// Raw flag values; an option only overrides the configuration when given.
struct Flags {
    std::string config;
    std::uint64_t seed = 0;
    std::string out;
    std::string variant;
    std::string mixing;
    std::string readings;
    std::string ids;
    std::string distances;
    std::string checkpoint;
    double kappa = 0.0;
    std::size_t epochs = 0;
    std::size_t batch_size = 0;
    std::size_t nodes = 0;
    std::size_t steps = 0;
    double noise = 0.0;
    std::size_t ha_period = 0;
    std::string reduction;
    bool with_ha = false;
    bool no_timing = false;
};

struct Option {
    CLI::Option* option = nullptr;
    template <typename F>
    void apply(F&& f) const {
        if (option != nullptr && option->count() > 0) {
            f();
        }
    }
};

struct Options {
    Option config, seed, out, variant, mixing, readings, ids, distances, checkpoint, kappa, epochs, batch_size, nodes,
        steps, noise, ha_period, reduction, with_ha;
};

void add_common(CLI::App& sub, Flags& f, Options& o) {
    o.config.option = sub.add_option("--config", f.config, "JSON run configuration");
    o.seed.option = sub.add_option("--seed", f.seed, "random seed");
    o.out.option = sub.add_option("--out", f.out, "output directory");
    o.variant.option = sub.add_option("--variant", f.variant, "edge graph: interaction-patterns|line-graph|identity")
                           ->check(CLI::IsMember({"interaction-patterns", "line-graph", "identity"}));
    o.mixing.option = sub.add_option("--mixing", f.mixing, "range mixing: attention|concat|last-hop")
                          ->check(CLI::IsMember({"attention", "concat", "last-hop"}));
}

void add_inputs(CLI::App& sub, Flags& f, Options& o) {
    o.readings.option = sub.add_option("--readings", f.readings, "readings table timestamp,<ids>");
    o.ids.option = sub.add_option("--ids", f.ids, "sensor ids, one per line");
    o.distances.option = sub.add_option("--distances", f.distances, "from,to,distance table");
    o.kappa.option = sub.add_option("--kappa", f.kappa, "Gaussian kernel threshold");
}

/// defaults < config file < flags.
RunConfig resolve(RunConfig base, const Flags& f, const Options& o) {
    RunConfig c = std::move(base);
    o.config.apply([&] { c = load_run_config(f.config, c); });
    o.seed.apply([&] { c.seed = f.seed; });
    o.out.apply([&] { c.out = f.out; });
    o.variant.apply([&] { c.model.edge_variant = parse_edge_variant(f.variant); });
    o.mixing.apply([&] { c.model.mixing = parse_range_mixing(f.mixing); });
    o.readings.apply([&] { c.readings = f.readings; });
    o.ids.apply([&] { c.ids = f.ids; });
    o.distances.apply([&] { c.distances = f.distances; });
    o.checkpoint.apply([&] { c.checkpoint = f.checkpoint; });
    o.kappa.apply([&] { c.kappa = f.kappa; });
    o.epochs.apply([&] { c.train.epochs = f.epochs; });
    o.batch_size.apply([&] { c.train.batch_size = f.batch_size; });
    o.nodes.apply([&] { c.synth_nodes = f.nodes; });
    o.steps.apply([&] { c.synth_steps = f.steps; });
    o.noise.apply([&] { c.synth_noise = f.noise; });
    o.ha_period.apply([&] { c.ha_period = f.ha_period; });
    o.reduction.apply([&] { c.reduction = f.reduction; });
    o.with_ha.apply([&] { c.with_ha = f.with_ha; });
    c.train.seed = c.seed;
    return c;
}

fs::path prepare_out(const RunConfig& c) {
    const fs::path dir = c.out.empty() ? fs::path(".") : fs::path(c.out);
    fs::create_directories(dir);
    return dir;
}

void echo_config(const fs::path& dir, const RunConfig& c) {
    std::ofstream out(dir / "config.json");
    out << run_config_json(c) << '\n';
    if (!out) {
        throw FormatError("cannot write " + (dir / "config.json").string());
    }
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw FormatError("cannot write " + path.string());
    }
    return out;
}

void require_path(const std::string& value, const char* flag) {
    if (value.empty()) {
        throw FormatError(std::string("missing input: pass ") + flag + " or set it in the config file");
    }
}

struct Inputs {
    SeriesTable table;
    NodeGraph graph;
    EdgeGraph edge_graph;
    GraphOperators ops;
};

Inputs load_graph_inputs(const RunConfig& c, std::vector<std::string> ids) {
    require_path(c.distances, "--distances");
    Inputs in;
    in.graph = build_node_graph(read_distances(c.distances, ids), c.kappa);
    in.edge_graph = build_edge_graph(in.graph, c.model.edge_variant);
    in.ops = GraphOperators::build(in.graph, in.edge_graph);
    return in;
}

Inputs load_inputs(const RunConfig& c) {
    require_path(c.readings, "--readings");
    require_path(c.ids, "--ids");
    const auto ids = read_ids(c.ids);
    Inputs in = load_graph_inputs(c, ids);
    in.table = load_series(c.readings, c.ids);
    return in;
}

/// The configuration embedded in checkpoints leaves out where files were
/// written, so identical runs into different directories match byte for byte.
std::string embedded_config(RunConfig c) {
    c.out.clear();
    c.checkpoint.clear();
    return run_config_json(c, 0);
}

std::string lookup_meta(const Checkpoint& ck, const std::string& key) {
    for (const auto& [k, v] : ck.metadata) {
        if (k == key) {
            return v;
        }
    }
    return {};
}

// ---------------------------------------------------------------------------

int cmd_build_graph(const RunConfig& c, std::ostream& out) {
    require_path(c.ids, "--ids");
    const auto ids = read_ids(c.ids);
    const Inputs in = load_graph_inputs(c, ids);
    const fs::path dir = prepare_out(c);
    auto dump = open_output(dir / "graph.txt");
    write_graph_dump(dump, in.graph, in.edge_graph, ids);
    echo_config(dir, c);
    out << "nodes " << in.graph.n << ", edges " << in.graph.edges.size() << ", edge-graph nonzeros "
        << in.ops.edge.nonzeros() - in.edge_graph.m << " (" << to_string(c.model.edge_variant) << ")\n";
    out << "wrote " << (dir / "graph.txt").string() << '\n';
    return 0;
}

int cmd_synth(RunConfig c, std::ostream& out) {
    const SensorLayout layout = synth_layout(c.synth_nodes, c.seed);
    const NodeGraph g = build_node_graph(layout.distances, c.kappa);
    if (g.edges.empty()) {
        throw ContractError("synth: kappa " + format_double(c.kappa) + " leaves the sensor graph without edges");
    }
    const SeriesTable table = synth_generate(g, c.synth_steps, c.seed, c.synth_noise, layout.ids);
    const fs::path dir = prepare_out(c);
    c.readings = (dir / "readings.csv").string();
    c.ids = (dir / "ids.txt").string();
    c.distances = (dir / "distances.csv").string();
    save_series(c.readings, table);
    write_ids(c.ids, layout.ids);
    write_distances(c.distances, layout.distances, layout.ids);
    echo_config(dir, c);
    out << "synthetic series: " << table.steps() << " steps x " << table.nodes() << " sensors, " << g.edges.size()
        << " edges\n";
    out << "wrote " << c.readings << ", " << c.ids << ", " << c.distances << '\n';
    return 0;
}

int cmd_train(const RunConfig& c, bool log_timing, std::ostream& out) {
    c.model.validate();
    c.train.validate();
    const Inputs in = load_inputs(c);
    const Scaler scaler = fit_scaler(in.table, c.train_fraction);
    const SplitBounds bounds = chronological_split(in.table.steps(), c.train_fraction, c.validation_fraction);
    const DatasetSplits data = make_windows(in.table, c.model.history, c.model.horizon, scaler, bounds);

    const fs::path dir = prepare_out(c);
    echo_config(dir, c);
    auto log = open_output(dir / "train_log.csv");
    log << kTrainLogHeader << '\n';
    TrainCallbacks callbacks;
    callbacks.on_epoch = [&](const EpochRecord& r) {
        EpochRecord shown = r;
        if (!log_timing) {
            shown.seconds = 0.0;
        }
        log << format_log_line(shown) << '\n' << std::flush;
        out << format_log_line(shown) << '\n';
    };
    out << kTrainLogHeader << '\n';
    TrainResult result = train(c.model, c.train, data, in.ops, scaler, callbacks);
    result.best.metadata.emplace_back("run_config", embedded_config(c));
    const fs::path ck_path = c.checkpoint.empty() ? dir / "checkpoint.bin" : fs::path(c.checkpoint);
    save_checkpoint(ck_path, result.best);
    out << "best epoch " << result.best.epoch << ", checkpoint " << ck_path.string() << '\n';
    return 0;
}

/// Checkpoint path from flags/config, defaulting to <out>/checkpoint.bin.
fs::path checkpoint_path(const RunConfig& c) {
    return c.checkpoint.empty() ? fs::path(c.out.empty() ? "." : c.out) / "checkpoint.bin" : fs::path(c.checkpoint);
}

/// Configuration for commands that consume a checkpoint: the training run's
/// echo, then the config file and flags; the model itself always comes
/// from the checkpoint.
RunConfig resolve_with_checkpoint(const Checkpoint& ck, const Flags& f, const Options& o) {
    RunConfig base;
    const std::string embedded = lookup_meta(ck, "run_config");
    if (!embedded.empty()) {
        base = parse_run_config(embedded);
    }
    RunConfig c = resolve(base, f, o);
    const ModelConfig& stored = ck.params.config;
    if (o.variant.option->count() > 0 && c.model.edge_variant != stored.edge_variant) {
        throw ContractError("--variant " + f.variant + " conflicts with the checkpoint's " +
                            std::string(to_string(stored.edge_variant)));
    }
    if (o.mixing.option->count() > 0 && c.model.mixing != stored.mixing) {
        throw ContractError("--mixing " + f.mixing + " conflicts with the checkpoint's " +
                            std::string(to_string(stored.mixing)));
    }
    c.model = stored;
    return c;
}

int cmd_evaluate(const Checkpoint& ck, const RunConfig& c, std::ostream& out) {
    const Inputs in = load_inputs(c);
    const Scaler scaler{ck.scaler_mean, ck.scaler_std};
    const SplitBounds bounds = chronological_split(in.table.steps(), c.train_fraction, c.validation_fraction);
    const DatasetSplits data = make_windows(in.table, c.model.history, c.model.horizon, scaler, bounds);
    if (data.test.empty()) {
        throw ContractError("evaluate: test split has no complete window");
    }
    const MetricsReport report =
        evaluate(ck.params, scaler, data.test, in.ops, c.eval_batch_size, parse_reduction_order(c.reduction));
    const fs::path dir = prepare_out(c);
    echo_config(dir, c);
    const std::string title = "model " + std::string(to_string(c.model.edge_variant)) + "/" +
                              std::string(to_string(c.model.mixing)) + ", " + std::to_string(data.test.size()) +
                              " test windows";
    const std::string table = format_report(report, title);
    open_output(dir / "report.txt") << table;
    auto csv = open_output(dir / "report.csv");
    write_report_csv(csv, report);
    out << table;
    if (c.with_ha) {
        const MetricsReport ha = evaluate_ha(in.table.readings, bounds.train_end, data.test, c.ha_period);
        const std::string ha_table = format_report(ha, "HA, period " + std::to_string(c.ha_period));
        open_output(dir / "ha_report.txt") << ha_table;
        auto ha_csv = open_output(dir / "ha_report.csv");
        write_report_csv(ha_csv, ha);
        const std::string comparison = format_comparison({{"model", report}, {"HA", ha}});
        open_output(dir / "comparison.txt") << comparison;
        out << ha_table << comparison;
    }
    return 0;
}

int cmd_forecast(const Checkpoint& ck, const RunConfig& c, std::ostream& out) {
    const Inputs in = load_inputs(c);
    const ModelConfig& m = ck.params.config;
    if (in.table.steps() < m.history) {
        throw ContractError("forecast: readings have " + std::to_string(in.table.steps()) + " steps, need " +
                            std::to_string(m.history));
    }
    const Scaler scaler{ck.scaler_mean, ck.scaler_std};
    std::vector<Matrix> history;
    for (std::size_t t = in.table.steps() - m.history; t < in.table.steps(); ++t) {
        history.push_back(scaler.apply(Matrix::column(in.table.readings.row(t))));
    }
    const auto predictions = predict(history, in.ops, ck.params, parse_reduction_order(c.reduction));
    const fs::path dir = prepare_out(c);
    echo_config(dir, c);
    auto file = open_output(dir / "forecast.csv");
    file << "horizon";
    for (const auto& id : in.table.ids) {
        file << ',' << id;
    }
    file << '\n';
    for (std::size_t h = 0; h < predictions.size(); ++h) {
        file << h + 1;
        for (double v : scaler.inverse(predictions[h]).values()) {
            file << ',' << format_double(v);
        }
        file << '\n';
    }
    out << "wrote " << predictions.size() << "-step forecast after " << in.table.timestamps.back() << " to "
        << (dir / "forecast.csv").string() << '\n';
    return 0;
}

int cmd_gradcheck(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const GradcheckReport report = run_gradcheck(c.seed);
    char line[256];
    for (const auto& k : report.cases) {
        std::snprintf(line, sizeof line, "%-48s %5zu scalars  max rel error %.3e  (%s)\n", k.name.c_str(), k.scalars,
                      k.max_relative_error, k.worst_parameter.c_str());
        out << line;
    }
    std::snprintf(line, sizeof line, "max relative error: %.3e\n", report.max_relative_error);
    out << line;
    if (!(report.max_relative_error < 1e-4)) {
        err << "gradcheck: max relative error exceeds 1e-4\n";
        return 1;
    }
    return 0;
}

} // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"MRA-BGCN sensor-network forecaster", "mrabgcn"};
    app.require_subcommand(1);
    Flags f;

    Options build_o;
    auto* build = app.add_subcommand("build-graph", "distances -> node and edge graph dump");
    add_common(*build, f, build_o);
    add_inputs(*build, f, build_o);

    Options synth_o;
    auto* synth = app.add_subcommand("synth", "generate a synthetic sensor layout and readings");
    add_common(*synth, f, synth_o);
    synth_o.kappa.option = synth->add_option("--kappa", f.kappa, "Gaussian kernel threshold");
    synth_o.nodes.option = synth->add_option("--nodes", f.nodes, "number of sensors");
    synth_o.steps.option = synth->add_option("--steps", f.steps, "number of time steps");
    synth_o.noise.option = synth->add_option("--noise", f.noise, "noise level");

    Options train_o;
    auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint + log");
    add_common(*train_cmd, f, train_o);
    add_inputs(*train_cmd, f, train_o);
    train_o.epochs.option = train_cmd->add_option("--epochs", f.epochs, "training epochs");
    train_o.batch_size.option = train_cmd->add_option("--batch-size", f.batch_size, "mini-batch size");
    train_o.checkpoint.option = train_cmd->add_option("--checkpoint", f.checkpoint, "checkpoint path to write");
    train_cmd->add_flag("--no-timing", f.no_timing, "log 0 in the seconds column (byte-reproducible logs)");

    Options eval_o;
    auto* eval_cmd = app.add_subcommand("evaluate", "per-horizon metrics on the test split");
    add_common(*eval_cmd, f, eval_o);
    add_inputs(*eval_cmd, f, eval_o);
    eval_o.checkpoint.option = eval_cmd->add_option("--checkpoint", f.checkpoint, "checkpoint to evaluate");
    eval_o.with_ha.option = eval_cmd->add_flag("--with-ha", f.with_ha, "also report the historical average");
    eval_o.ha_period.option = eval_cmd->add_option("--ha-period", f.ha_period, "HA period in steps");
    eval_o.reduction.option = eval_cmd->add_option("--reduction", f.reduction, "canonical|sequential")
                                  ->check(CLI::IsMember({"canonical", "sequential"}));

    Options fc_o;
    auto* fc_cmd = app.add_subcommand("forecast", "forecast the steps after the last history window");
    add_common(*fc_cmd, f, fc_o);
    add_inputs(*fc_cmd, f, fc_o);
    fc_o.checkpoint.option = fc_cmd->add_option("--checkpoint", f.checkpoint, "checkpoint to use");
    fc_o.reduction.option = fc_cmd->add_option("--reduction", f.reduction, "canonical|sequential")
                                ->check(CLI::IsMember({"canonical", "sequential"}));

    Options grad_o;
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    add_common(*grad_cmd, f, grad_o);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (build->parsed()) {
            return cmd_build_graph(resolve({}, f, build_o), out);
        }
        if (synth->parsed()) {
            return cmd_synth(resolve({}, f, synth_o), out);
        }
        if (train_cmd->parsed()) {
            return cmd_train(resolve({}, f, train_o), !f.no_timing, out);
        }
        if (eval_cmd->parsed() || fc_cmd->parsed()) {
            const Options& o = eval_cmd->parsed() ? eval_o : fc_o;
            // The checkpoint path may itself come from the config file.
            const RunConfig located = resolve({}, f, o);
            const Checkpoint ck = load_checkpoint(checkpoint_path(located));
            const RunConfig c = resolve_with_checkpoint(ck, f, o);
            return eval_cmd->parsed() ? cmd_evaluate(ck, c, out) : cmd_forecast(ck, c, out);
        }
        if (grad_cmd->parsed()) {
            return cmd_gradcheck(resolve({}, f, grad_o), out, err);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    err << app.help();
    return 2;
}

int dispatch(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) {
        args.emplace_back(argv[i]);
    }
    return dispatch(args, std::cout, std::cerr);
}

} // namespace mrabgcn
