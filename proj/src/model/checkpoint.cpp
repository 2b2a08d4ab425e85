#include "mrabgcn/checkpoint.hpp"

#include "mrabgcn/diagnostics.hpp"
#include "mrabgcn/graph_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace mrabgcn {

namespace {

constexpr const char* kMagic = "mrabgcn-checkpoint 1";

std::vector<std::pair<std::string, std::string>> config_entries(const ModelConfig& c) {
    return {
        {"max_hop", std::to_string(c.max_hop)},
        {"hidden", std::to_string(c.hidden)},
        {"rnn_layers", std::to_string(c.rnn_layers)},
        {"input_dim", std::to_string(c.input_dim)},
        {"horizon", std::to_string(c.horizon)},
        {"history", std::to_string(c.history)},
        {"edge_variant", std::string(to_string(c.edge_variant))},
        {"mixing", std::string(to_string(c.mixing))},
        {"attention_dim", std::to_string(c.attention_dim)},
    };
}

std::size_t parse_count(const std::string& text, const std::string& what) {
    std::size_t pos = 0;
    unsigned long long value = 0;
    try {
        value = std::stoull(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != text.size() || text.empty()) {
        throw FormatError("checkpoint: malformed " + what + " '" + text + "'");
    }
    return static_cast<std::size_t>(value);
}

double parse_real(const std::string& text, const std::string& what) {
    std::size_t pos = 0;
    double value = 0.0;
    try {
        value = std::stod(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != text.size() || text.empty()) {
        throw FormatError("checkpoint: malformed " + what + " '" + text + "'");
    }
    return value;
}

void apply_config(ModelConfig& c, const std::string& key, const std::string& value) {
    if (key == "max_hop") {
        c.max_hop = parse_count(value, key);
    } else if (key == "hidden") {
        c.hidden = parse_count(value, key);
    } else if (key == "rnn_layers") {
        c.rnn_layers = parse_count(value, key);
    } else if (key == "input_dim") {
        c.input_dim = parse_count(value, key);
    } else if (key == "horizon") {
        c.horizon = parse_count(value, key);
    } else if (key == "history") {
        c.history = parse_count(value, key);
    } else if (key == "edge_variant") {
        c.edge_variant = parse_edge_variant(value);
    } else if (key == "mixing") {
        c.mixing = parse_range_mixing(value);
    } else if (key == "attention_dim") {
        c.attention_dim = parse_count(value, key);
    } else {
        throw FormatError("checkpoint: unknown config key '" + key + "'");
    }
}

void put_le(std::ostream& out, double value) {
    auto bits = std::bit_cast<std::uint64_t>(value);
    char bytes[8];
    for (char& b : bytes) {
        b = static_cast<char>(bits & 0xffU);
        bits >>= 8;
    }
    out.write(bytes, sizeof bytes);
}

double get_le(std::istream& in) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof bytes)) {
        throw FormatError("checkpoint: truncated parameter data");
    }
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) {
        bits = (bits << 8) | bytes[i];
    }
    return std::bit_cast<double>(bits);
}

} // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
    out << kMagic << '\n';
    out << "seed " << ck.seed << '\n';
    out << "epoch " << ck.epoch << '\n';
    for (const auto& [key, value] : config_entries(ck.params.config)) {
        out << "config " << key << ' ' << value << '\n';
    }
    out << "scaler " << format_double(ck.scaler_mean) << ' ' << format_double(ck.scaler_std) << '\n';
    for (const auto& [key, value] : ck.metadata) {
        if (key.find_first_of(" \n") != std::string::npos || value.find('\n') != std::string::npos) {
            throw ContractError("checkpoint: metadata '" + key + "' must be a single line without spaces in the key");
        }
        out << "meta " << key << ' ' << value << '\n';
    }
    for (const auto& t : ck.params.tensors) {
        out << "param " << t.name << ' ' << t.value.rows() << ' ' << t.value.cols() << '\n';
    }
    out << "end\n";
    for (const auto& t : ck.params.tensors) {
        for (double v : t.value.values()) {
            put_le(out, v);
        }
    }
    if (!out) {
        throw FormatError("checkpoint: write failed");
    }
}

Checkpoint read_checkpoint(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kMagic) {
        throw FormatError("checkpoint: missing header '" + std::string(kMagic) + "'");
    }
    Checkpoint ck;
    ModelConfig config;
    struct Declared {
        std::string name;
        std::size_t rows;
        std::size_t cols;
    };
    std::vector<Declared> declared;
    bool ended = false;
    while (std::getline(in, line)) {
        if (line == "end") {
            ended = true;
            break;
        }
        std::istringstream fields(line);
        std::string tag;
        fields >> tag;
        if (tag == "seed") {
            std::string v;
            fields >> v;
            ck.seed = std::stoull(v);
        } else if (tag == "epoch") {
            std::string v;
            fields >> v;
            ck.epoch = parse_count(v, "epoch");
        } else if (tag == "config") {
            std::string key;
            std::string value;
            fields >> key >> value;
            apply_config(config, key, value);
        } else if (tag == "scaler") {
            std::string mean;
            std::string std;
            fields >> mean >> std;
            ck.scaler_mean = parse_real(mean, "scaler mean");
            ck.scaler_std = parse_real(std, "scaler std");
        } else if (tag == "meta") {
            std::string key;
            fields >> key;
            std::string value;
            std::getline(fields >> std::ws, value);
            ck.metadata.emplace_back(key, value);
        } else if (tag == "param") {
            Declared d;
            std::string rows;
            std::string cols;
            fields >> d.name >> rows >> cols;
            d.rows = parse_count(rows, "rows");
            d.cols = parse_count(cols, "cols");
            declared.push_back(std::move(d));
        } else {
            throw FormatError("checkpoint: unexpected manifest line '" + line + "'");
        }
    }
    if (!ended) {
        throw FormatError("checkpoint: manifest not terminated by 'end'");
    }

    ck.params = ModelParams::zeros(config);
    if (declared.size() != ck.params.tensors.size()) {
        throw FormatError("checkpoint: " + std::to_string(declared.size()) + " tensors declared, configuration needs " +
                          std::to_string(ck.params.tensors.size()));
    }
    for (std::size_t i = 0; i < declared.size(); ++i) {
        auto& t = ck.params.tensors[i];
        if (declared[i].name != t.name || declared[i].rows != t.value.rows() || declared[i].cols != t.value.cols()) {
            throw FormatError("checkpoint: tensor " + std::to_string(i) + " declared as " + declared[i].name + " " +
                              std::to_string(declared[i].rows) + "x" + std::to_string(declared[i].cols) +
                              ", configuration expects " + t.name + " " + shape_string(t.value));
        }
        for (double& v : t.value.values()) {
            v = get_le(in);
        }
    }
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FormatError("cannot write " + path.string());
    }
    write_checkpoint(out, checkpoint);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open " + path.string());
    }
    return read_checkpoint(in);
}

} // namespace mrabgcn
