#include "mrabgcn/graph_io.hpp"

#include "mrabgcn/diagnostics.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace mrabgcn {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return fields;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open " + path.string());
    }
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw FormatError("cannot write " + path.string());
    }
    return out;
}

} // namespace

std::string format_double(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::vector<std::string> read_ids(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::vector<std::string> ids;
    std::unordered_map<std::string, std::size_t> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto id = trim(line);
        if (id.empty()) {
            continue;
        }
        if (!seen.emplace(id, ids.size()).second) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": duplicate id '" + id + "'");
        }
        ids.push_back(std::move(id));
    }
    if (ids.empty()) {
        throw FormatError(path.string() + ": no ids");
    }
    return ids;
}

void write_ids(const std::filesystem::path& path, const std::vector<std::string>& ids) {
    auto out = open_output(path);
    for (const auto& id : ids) {
        out << id << '\n';
    }
}

Matrix parse_distances(std::istream& in, const std::vector<std::string>& ids, const std::string& source) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        index.emplace(ids[i], i);
    }
    const std::size_t n = ids.size();
    Matrix d(n, n, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i) {
        d(i, i) = 0.0;
    }

    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split_csv(line);
        const std::string where = source + ":" + std::to_string(line_no) + ": ";
        if (!header_seen) {
            if (fields.size() != 3 || fields[0] != "from" || fields[1] != "to" || fields[2] != "distance") {
                throw FormatError(where + "expected header 'from,to,distance'");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != 3) {
            throw FormatError(where + "expected 3 fields, got " + std::to_string(fields.size()));
        }
        const auto from = index.find(fields[0]);
        const auto to = index.find(fields[1]);
        if (from == index.end() || to == index.end()) {
            throw FormatError(where + "unknown sensor id '" + (from == index.end() ? fields[0] : fields[1]) + "'");
        }
        double value = 0.0;
        const auto& text = fields[2];
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc() || ptr != text.data() + text.size()) {
            throw FormatError(where + "malformed distance '" + text + "'");
        }
        if (!(value >= 0.0)) {
            throw FormatError(where + "negative distance");
        }
        if (from->second != to->second) {
            d(from->second, to->second) = value;
        }
    }
    if (!header_seen) {
        throw FormatError(source + ": empty distance table");
    }
    return d;
}

Matrix read_distances(const std::filesystem::path& path, const std::vector<std::string>& ids) {
    auto in = open_input(path);
    return parse_distances(in, ids, path.string());
}

void write_distances(const std::filesystem::path& path, const Matrix& distances, const std::vector<std::string>& ids) {
    if (distances.rows() != ids.size() || distances.cols() != ids.size()) {
        throw DimensionError("write_distances: " + shape_string(distances) + " for " + std::to_string(ids.size()) +
                             " ids");
    }
    auto out = open_output(path);
    out << "from,to,distance\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = 0; j < ids.size(); ++j) {
            if (i != j && std::isfinite(distances(i, j))) {
                out << ids[i] << ',' << ids[j] << ',' << format_double(distances(i, j)) << '\n';
            }
        }
    }
}

namespace {

void write_rows(std::ostream& out, const Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            out << (j == 0 ? "" : " ") << format_double(m(i, j));
        }
        out << '\n';
    }
}

} // namespace

void write_graph_dump(std::ostream& out, const NodeGraph& g, const EdgeGraph& eg, const std::vector<std::string>& ids) {
    auto name = [&ids](std::size_t i) { return ids.empty() ? std::to_string(i) : ids[i]; };
    out << "node_graph n " << g.n << " edges " << g.edges.size() << '\n';
    out << "adjacency\n";
    write_rows(out, g.adjacency);
    out << "edges\n";
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const auto& edge = g.edges[e];
        out << e << ' ' << name(edge.source) << ' ' << name(edge.target) << ' '
            << format_double(g.adjacency(edge.source, edge.target)) << '\n';
    }
    out << "degrees\n";
    for (std::size_t v = 0; v < g.n; ++v) {
        out << name(v) << ' ' << g.indegree[v] << ' ' << g.outdegree[v] << '\n';
    }
    out << "incidence\n";
    write_rows(out, eg.incidence);
    out << "edge_graph variant " << to_string(eg.variant) << " m " << eg.m << '\n';
    out << "adjacency\n";
    write_rows(out, eg.adjacency);
}

} // namespace mrabgcn
