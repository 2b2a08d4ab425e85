#ifndef MRABGCN_EVAL_HPP
#define MRABGCN_EVAL_HPP

#include "mrabgcn/data.hpp"
#include "mrabgcn/model.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mrabgcn {

/// Masked error metrics; MAPE is a percentage.
struct Metrics {
    double mae = 0.0;
    double rmse = 0.0;
    double mape = 0.0;
};

/// Running sums for masked metrics across many (pred, target) pairs.
class MetricAccumulator {
public:
    /// Throws DimensionError on shape mismatch.
    void add(const Matrix& pred, const Matrix& target);
    void add(std::span<const double> pred, std::span<const double> target);
    [[nodiscard]] std::size_t count() const { return count_; }
    /// Zeros with a warning when nothing was observed.
    [[nodiscard]] Metrics result() const;

private:
    double abs_sum_ = 0.0;
    double square_sum_ = 0.0;
    double ratio_sum_ = 0.0;
    std::size_t count_ = 0;
};

/// MAE, RMSE and MAPE over entries whose target is nonzero.
Metrics metrics(const Matrix& pred, const Matrix& target);

struct HaForecast {
    Matrix predictions;           ///< times.size() x n
    std::size_t fallback_count = 0; ///< entries that used the node's overall mean
};

/// Historical average: the prediction at time t is the mean of the nonzero
/// readings at t - period, t - 2 period, ... that lie inside `history`
/// (steps x n, time 0 first). Entries with no such reading fall back to the
/// node's mean nonzero reading over `history`; those are counted and warned
/// about once. Throws ContractError for period 0 or an all-zero node.
HaForecast ha_forecast(const Matrix& history, std::size_t period, std::span<const std::size_t> times);

/// Per-horizon metrics plus their unweighted means over horizons.
struct MetricsReport {
    std::vector<Metrics> horizons; ///< entry h-1 is horizon h
    Metrics mean;

    /// Sets `mean` from `horizons`.
    void finalize();
};

/// Forecasts every window of `test` with no teacher, maps predictions back
/// to original units and accumulates masked metrics per horizon.
MetricsReport evaluate(const ModelParams& params, const Scaler& scaler, const WindowedDataset& test,
                       const GraphOperators& graphs, std::size_t batch_size = 64,
                       ReductionOrder order = ReductionOrder::Sequential);

/// HA baseline on the same windows, using rows [0, history_end) of the raw
/// series as history.
MetricsReport evaluate_ha(const Matrix& raw_series, std::size_t history_end, const WindowedDataset& test,
                          std::size_t period);

/// Horizons that get a highlighted row (15, 30 and 60 minutes at 5-minute steps).
inline constexpr std::size_t kHighlightedHorizons[] = {3, 6, 12};

/// Aligned human-readable table; highlighted horizons are marked with '*'.
std::string format_report(const MetricsReport& report, const std::string& title);
/// `horizon,mae,rmse,mape`, then a `mean` row.
void write_report_csv(std::ostream& out, const MetricsReport& report);

/// Side-by-side comparison (one row per named run, columns for the
/// highlighted horizons and the mean).
std::string format_comparison(const std::vector<std::pair<std::string, MetricsReport>>& runs);

} // namespace mrabgcn

#endif // MRABGCN_EVAL_HPP
