#ifndef MRABGCN_DATA_HPP
#define MRABGCN_DATA_HPP

#include "mrabgcn/graphs.hpp"
#include "mrabgcn/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mrabgcn {

/// Sensor readings, one row per time step. A reading of exactly 0 means
/// "missing".
struct SeriesTable {
    std::vector<std::string> timestamps;
    std::vector<std::string> ids;
    Matrix readings; ///< steps x n

    [[nodiscard]] std::size_t steps() const { return readings.rows(); }
    [[nodiscard]] std::size_t nodes() const { return readings.cols(); }
};

/// Parses `timestamp,<id1>,<id2>,...`. The header ids must equal `ids`.
/// Timestamps must be strictly increasing (numerically when both parse as
/// numbers, lexicographically otherwise, which orders ISO-8601 text).
SeriesTable parse_series(std::istream& in, const std::vector<std::string>& ids, const std::string& source = "<stream>");
SeriesTable load_series(const std::filesystem::path& readings, const std::filesystem::path& ids);
void write_series(std::ostream& out, const SeriesTable& table);
void save_series(const std::filesystem::path& path, const SeriesTable& table);

/// Global z-score over nonzero training readings.
struct Scaler {
    static constexpr double kStdFloor = 1e-8;

    double mean = 0.0;
    double std = 1.0;

    [[nodiscard]] double apply(double x) const { return (x - mean) / std; }
    [[nodiscard]] double inverse(double z) const { return z * std + mean; }
    [[nodiscard]] Matrix apply(const Matrix& x) const;
    [[nodiscard]] Matrix inverse(const Matrix& z) const;
};

/// Mean and population std of the nonzero readings in the first
/// floor(train_fraction * steps) rows. The std is floored at 1e-8.
/// Throws ContractError when that slice has no nonzero reading.
Scaler fit_scaler(const SeriesTable& table, double train_fraction = 0.7);

/// Chronological split points: train = [0, train_end), validation =
/// [train_end, validation_end), test = [validation_end, steps).
struct SplitBounds {
    std::size_t steps = 0;
    std::size_t train_end = 0;
    std::size_t validation_end = 0;
};

SplitBounds chronological_split(std::size_t steps, double train_fraction = 0.7, double validation_fraction = 0.1);

enum class Split { Train, Validation, Test };
std::string_view to_string(Split split);

/// Normalised and raw copies of a series shared by the windows built on it.
struct WindowSource {
    Matrix normalized; ///< steps x n
    Matrix raw;        ///< steps x n
};

/// Row-stacked tensors for a set of samples: entry t is (B*n) x 1 with
/// sample b occupying rows [b*n, (b+1)*n).
struct Batch {
    std::vector<Matrix> inputs;      ///< history entries, normalised
    std::vector<Matrix> targets;     ///< horizon entries, normalised
    std::vector<Matrix> targets_raw; ///< horizon entries, original units
    std::size_t samples = 0;
};

/// Stride-1 (input, target) windows inside one split. Sample i reads
/// rows [start_i, start_i + history) and predicts rows
/// [start_i + history, start_i + history + horizon).
class WindowedDataset {
public:
    WindowedDataset() = default;
    WindowedDataset(std::shared_ptr<const WindowSource> source, Split split, std::size_t begin, std::size_t end,
                    std::size_t history, std::size_t horizon);

    [[nodiscard]] std::size_t size() const { return starts_.size(); }
    [[nodiscard]] bool empty() const { return starts_.empty(); }
    [[nodiscard]] Split split() const { return split_; }
    [[nodiscard]] std::size_t start(std::size_t sample) const { return starts_.at(sample); }
    [[nodiscard]] std::size_t nodes() const { return source_ ? source_->raw.cols() : 0; }
    [[nodiscard]] std::size_t history() const { return history_; }
    [[nodiscard]] std::size_t horizon() const { return horizon_; }

    [[nodiscard]] Matrix input(std::size_t sample, std::size_t t) const;
    [[nodiscard]] Matrix target(std::size_t sample, std::size_t t) const;
    [[nodiscard]] Matrix target_raw(std::size_t sample, std::size_t t) const;

    [[nodiscard]] Batch batch(std::span<const std::size_t> samples) const;

private:
    std::shared_ptr<const WindowSource> source_;
    Split split_ = Split::Train;
    std::vector<std::size_t> starts_;
    std::size_t history_ = 0;
    std::size_t horizon_ = 0;
};

struct DatasetSplits {
    WindowedDataset train;
    WindowedDataset validation;
    WindowedDataset test;
    SplitBounds bounds;
};

/// Windows each split separately so no sample crosses a boundary. A split
/// shorter than history + horizon yields an empty dataset and a warning.
DatasetSplits make_windows(const SeriesTable& table, std::size_t history, std::size_t horizon, const Scaler& scaler,
                           const SplitBounds& bounds);

// ---------------------------------------------------------------------------
// Synthetic data

/// Per-node forcing s_i(t) = base_i + amplitude_i * sin(2 pi t / period + phase_i).
/// Every node shares the base level; amplitudes are drawn from U[1.5, 2) and
/// phases from U[0, 0.25), so the daily cycle dominates the noise and the
/// nodes stay roughly in step.
struct SyntheticSignal {
    static constexpr std::size_t kPeriod = 288;
    static constexpr double kBase = 10.0;

    std::vector<double> base;
    std::vector<double> amplitude;
    std::vector<double> phase;

    [[nodiscard]] double at(std::size_t node, std::size_t t) const;
};

/// Forcing parameters as drawn by synth_generate for (n, seed).
SyntheticSignal synth_signal(std::size_t n, std::uint64_t seed);

/// X(t+1) = 0.7 * normalize(A) X(t) + 0.3 * s(t) + noise_level * N(0, 1),
/// X(0) = s(0). Timestamps are seconds at 300 s spacing. Ids are the node
/// indices unless `ids` is given.
SeriesTable synth_generate(const NodeGraph& g, std::size_t steps, std::uint64_t seed, double noise_level,
                           std::vector<std::string> ids = {});

/// Random sensor layout in the unit square with asymmetric "road"
/// distances d(i,j) = |p_i - p_j| * (1 + 0.2 u_ij), u_ij ~ U[0,1), for every
/// ordered pair. Ids are "s0", "s1", ...
struct SensorLayout {
    std::vector<std::string> ids;
    Matrix distances;
};
SensorLayout synth_layout(std::size_t n, std::uint64_t seed);

} // namespace mrabgcn

#endif // MRABGCN_DATA_HPP
