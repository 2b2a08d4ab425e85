#include "mrabgcn/data.hpp"

#include "mrabgcn/diagnostics.hpp"
#include "mrabgcn/graph_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>

namespace mrabgcn {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::optional<double> as_number(std::string_view text) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        return std::nullopt;
    }
    return value;
}

bool strictly_before(std::string_view a, std::string_view b) {
    const auto x = as_number(a);
    const auto y = as_number(b);
    if (x && y) {
        return *x < *y;
    }
    return a < b;
}

} // namespace

SeriesTable parse_series(std::istream& in, const std::vector<std::string>& ids, const std::string& source) {
    SeriesTable table;
    table.ids = ids;
    const std::size_t n = ids.size();
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::vector<std::string_view> fields;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        fields.clear();
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            fields.push_back(trim(rest.substr(0, comma)));
            if (comma == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(comma + 1);
        }
        const std::string where = source + ":" + std::to_string(line_no) + ": ";
        if (!header_seen) {
            if (fields.size() != n + 1 || fields[0] != "timestamp") {
                throw FormatError(where + "header must be 'timestamp' followed by the " + std::to_string(n) +
                                  " sensor ids");
            }
            for (std::size_t i = 0; i < n; ++i) {
                if (fields[i + 1] != ids[i]) {
                    throw FormatError(where + "header column " + std::to_string(i + 2) + " is '" +
                                      std::string(fields[i + 1]) + "', ids file has '" + ids[i] + "'");
                }
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != n + 1) {
            throw FormatError(where + "column count mismatch: expected " + std::to_string(n + 1) + ", got " +
                              std::to_string(fields.size()));
        }
        if (!table.timestamps.empty() && !strictly_before(table.timestamps.back(), fields[0])) {
            throw FormatError(where + "timestamp '" + std::string(fields[0]) + "' does not increase (row " +
                              std::to_string(table.timestamps.size() + 1) + ")");
        }
        table.timestamps.emplace_back(fields[0]);
        for (std::size_t i = 0; i < n; ++i) {
            const auto v = as_number(fields[i + 1]);
            if (!v || !std::isfinite(*v)) {
                throw FormatError(where + "malformed reading '" + std::string(fields[i + 1]) + "'");
            }
            values.push_back(*v);
        }
    }
    if (!header_seen) {
        throw FormatError(source + ": empty readings file");
    }
    table.readings = Matrix(table.timestamps.size(), n, std::move(values));
    return table;
}

SeriesTable load_series(const std::filesystem::path& readings, const std::filesystem::path& ids) {
    const auto id_list = read_ids(ids);
    std::ifstream in(readings);
    if (!in) {
        throw FormatError("cannot open " + readings.string());
    }
    return parse_series(in, id_list, readings.string());
}

void write_series(std::ostream& out, const SeriesTable& table) {
    out << "timestamp";
    for (const auto& id : table.ids) {
        out << ',' << id;
    }
    out << '\n';
    for (std::size_t t = 0; t < table.steps(); ++t) {
        out << table.timestamps[t];
        for (double v : table.readings.row(t)) {
            out << ',' << format_double(v);
        }
        out << '\n';
    }
}

void save_series(const std::filesystem::path& path, const SeriesTable& table) {
    std::ofstream out(path);
    if (!out) {
        throw FormatError("cannot write " + path.string());
    }
    write_series(out, table);
}

// ---------------------------------------------------------------------------

Matrix Scaler::apply(const Matrix& x) const {
    Matrix out = x;
    for (double& v : out.values()) {
        v = apply(v);
    }
    return out;
}

Matrix Scaler::inverse(const Matrix& z) const {
    Matrix out = z;
    for (double& v : out.values()) {
        v = inverse(v);
    }
    return out;
}

Scaler fit_scaler(const SeriesTable& table, double train_fraction) {
    const std::size_t rows = chronological_split(table.steps(), train_fraction, 0.0).train_end;
    std::vector<double> observed;
    for (std::size_t t = 0; t < rows; ++t) {
        for (double v : table.readings.row(t)) {
            if (v != 0.0) {
                observed.push_back(v);
            }
        }
    }
    if (observed.empty()) {
        throw ContractError("fit_scaler: training slice has no nonzero reading");
    }
    const auto m = population_moments(observed);
    return {m.mean, std::max(std::sqrt(m.variance), Scaler::kStdFloor)};
}

SplitBounds chronological_split(std::size_t steps, double train_fraction, double validation_fraction) {
    if (train_fraction < 0.0 || validation_fraction < 0.0 || train_fraction + validation_fraction > 1.0) {
        throw ContractError("chronological_split: fractions must be non-negative and sum to at most 1");
    }
    // The small offset keeps exact products such as 0.7 * 10 from flooring to 6.
    auto cut = [steps](double fraction) {
        const auto at = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(steps) + 1e-9));
        return std::min(at, steps);
    };
    return {steps, cut(train_fraction), cut(train_fraction + validation_fraction)};
}

std::string_view to_string(Split split) {
    switch (split) {
    case Split::Train:
        return "train";
    case Split::Validation:
        return "validation";
    case Split::Test:
        return "test";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------

WindowedDataset::WindowedDataset(std::shared_ptr<const WindowSource> source, Split split, std::size_t begin,
                                 std::size_t end, std::size_t history, std::size_t horizon)
    : source_(std::move(source)), split_(split), history_(history), horizon_(horizon) {
    const std::size_t span = history + horizon;
    if (end >= begin + span) {
        for (std::size_t s = begin; s + span <= end; ++s) {
            starts_.push_back(s);
        }
    } else {
        warn(std::string(to_string(split)) + " split has " + std::to_string(end - begin) +
             " steps, fewer than history + horizon = " + std::to_string(span) + "; dataset is empty");
    }
}

namespace {

Matrix row_as_column(const Matrix& m, std::size_t row) { return Matrix::column(m.row(row)); }

} // namespace

Matrix WindowedDataset::input(std::size_t sample, std::size_t t) const {
    return row_as_column(source_->normalized, start(sample) + t);
}

Matrix WindowedDataset::target(std::size_t sample, std::size_t t) const {
    return row_as_column(source_->normalized, start(sample) + history_ + t);
}

Matrix WindowedDataset::target_raw(std::size_t sample, std::size_t t) const {
    return row_as_column(source_->raw, start(sample) + history_ + t);
}

Batch WindowedDataset::batch(std::span<const std::size_t> samples) const {
    const std::size_t n = nodes();
    const std::size_t rows = samples.size() * n;
    Batch b;
    b.samples = samples.size();
    auto gather = [&](const Matrix& series, std::size_t offset) {
        Matrix out(rows, 1);
        for (std::size_t k = 0; k < samples.size(); ++k) {
            auto src = series.row(start(samples[k]) + offset);
            std::copy(src.begin(), src.end(), out.values().begin() + static_cast<std::ptrdiff_t>(k * n));
        }
        return out;
    };
    for (std::size_t t = 0; t < history_; ++t) {
        b.inputs.push_back(gather(source_->normalized, t));
    }
    for (std::size_t t = 0; t < horizon_; ++t) {
        b.targets.push_back(gather(source_->normalized, history_ + t));
        b.targets_raw.push_back(gather(source_->raw, history_ + t));
    }
    return b;
}

DatasetSplits make_windows(const SeriesTable& table, std::size_t history, std::size_t horizon, const Scaler& scaler,
                           const SplitBounds& bounds) {
    if (bounds.steps != table.steps()) {
        throw ContractError("make_windows: split bounds describe " + std::to_string(bounds.steps) +
                            " steps, table has " + std::to_string(table.steps()));
    }
    auto source = std::make_shared<WindowSource>();
    source->raw = table.readings;
    source->normalized = scaler.apply(table.readings);
    DatasetSplits out;
    out.bounds = bounds;
    out.train = WindowedDataset(source, Split::Train, 0, bounds.train_end, history, horizon);
    out.validation =
        WindowedDataset(source, Split::Validation, bounds.train_end, bounds.validation_end, history, horizon);
    out.test = WindowedDataset(source, Split::Test, bounds.validation_end, bounds.steps, history, horizon);
    return out;
}

} // namespace mrabgcn
