#include "mrabgcn/eval.hpp"

#include "mrabgcn/diagnostics.hpp"
#include "mrabgcn/graph_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

namespace mrabgcn {

void MetricAccumulator::add(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) {
        throw DimensionError("metrics: " + std::to_string(pred.size()) + " predictions for " +
                             std::to_string(target.size()) + " targets");
    }
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (target[i] == 0.0) {
            continue;
        }
        const double delta = pred[i] - target[i];
        abs_sum_ += std::abs(delta);
        square_sum_ += delta * delta;
        ratio_sum_ += std::abs(delta) / std::abs(target[i]);
        ++count_;
    }
}

void MetricAccumulator::add(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target)) {
        throw DimensionError("metrics: prediction " + shape_string(pred) + " vs target " + shape_string(target));
    }
    add(pred.values(), target.values());
}

Metrics MetricAccumulator::result() const {
    if (count_ == 0) {
        warn("metrics: every target is masked; reporting zeros");
        return {};
    }
    const auto n = static_cast<double>(count_);
    return {abs_sum_ / n, std::sqrt(square_sum_ / n), 100.0 * ratio_sum_ / n};
}

Metrics metrics(const Matrix& pred, const Matrix& target) {
    MetricAccumulator acc;
    acc.add(pred, target);
    return acc.result();
}

HaForecast ha_forecast(const Matrix& history, std::size_t period, std::span<const std::size_t> times) {
    if (period == 0) {
        throw ContractError("ha_forecast: period must be positive");
    }
    const std::size_t n = history.cols();
    const std::size_t steps = history.rows();
    std::vector<double> node_mean(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t t = 0; t < steps; ++t) {
            if (history(t, i) != 0.0) {
                sum += history(t, i);
                ++count;
            }
        }
        node_mean[i] = count > 0 ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
    }

    HaForecast out;
    out.predictions = Matrix(times.size(), n);
    for (std::size_t q = 0; q < times.size(); ++q) {
        const std::size_t t = times[q];
        for (std::size_t i = 0; i < n; ++i) {
            // Deviations from the first same-phase reading are averaged, so
            // a run of identical readings reproduces that reading exactly.
            double reference = 0.0;
            double deviation_sum = 0.0;
            std::size_t count = 0;
            for (std::size_t back = period; back <= t; back += period) {
                const std::size_t s = t - back;
                if (s < steps && history(s, i) != 0.0) {
                    if (count == 0) {
                        reference = history(s, i);
                    }
                    deviation_sum += history(s, i) - reference;
                    ++count;
                }
            }
            if (count > 0) {
                out.predictions(q, i) = reference + deviation_sum / static_cast<double>(count);
                continue;
            }
            if (std::isnan(node_mean[i])) {
                throw ContractError("ha_forecast: node " + std::to_string(i) + " has no nonzero reading in history");
            }
            out.predictions(q, i) = node_mean[i];
            ++out.fallback_count;
        }
    }
    if (out.fallback_count > 0) {
        warn("ha_forecast: " + std::to_string(out.fallback_count) +
             " predictions had no same-phase history and used the node mean");
    }
    return out;
}

void MetricsReport::finalize() {
    mean = {};
    if (horizons.empty()) {
        return;
    }
    for (const Metrics& m : horizons) {
        mean.mae += m.mae;
        mean.rmse += m.rmse;
        mean.mape += m.mape;
    }
    const auto h = static_cast<double>(horizons.size());
    mean.mae /= h;
    mean.rmse /= h;
    mean.mape /= h;
}

MetricsReport evaluate(const ModelParams& params, const Scaler& scaler, const WindowedDataset& test,
                       const GraphOperators& graphs, std::size_t batch_size, ReductionOrder order) {
    const ModelConfig& config = params.config;
    if (test.nodes() != graphs.nodes()) {
        throw DimensionError("evaluate: data has " + std::to_string(test.nodes()) + " nodes, graph has " +
                             std::to_string(graphs.nodes()));
    }
    if (test.history() != config.history || test.horizon() != config.horizon) {
        throw DimensionError("evaluate: windows are " + std::to_string(test.history()) + "/" +
                             std::to_string(test.horizon()) + " steps, checkpoint expects " +
                             std::to_string(config.history) + "/" + std::to_string(config.horizon));
    }
    if (batch_size == 0) {
        throw ContractError("evaluate: batch size must be positive");
    }
    std::vector<MetricAccumulator> acc(config.horizon);
    std::vector<std::size_t> all(test.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (std::size_t begin = 0; begin < all.size(); begin += batch_size) {
        const std::size_t end = std::min(all.size(), begin + batch_size);
        const Batch batch = test.batch(std::span(all).subspan(begin, end - begin));
        const auto predictions = predict(batch.inputs, graphs, params, order);
        for (std::size_t t = 0; t < predictions.size(); ++t) {
            acc[t].add(scaler.inverse(predictions[t]), batch.targets_raw[t]);
        }
    }
    MetricsReport report;
    for (const auto& a : acc) {
        report.horizons.push_back(a.result());
    }
    report.finalize();
    return report;
}

MetricsReport evaluate_ha(const Matrix& raw_series, std::size_t history_end, const WindowedDataset& test,
                          std::size_t period) {
    if (history_end > raw_series.rows()) {
        throw ContractError("evaluate_ha: history end beyond the series");
    }
    Matrix history(history_end, raw_series.cols());
    std::copy_n(raw_series.values().begin(), history.size(), history.values().begin());
    std::vector<MetricAccumulator> acc(test.horizon());
    for (std::size_t h = 0; h < test.horizon(); ++h) {
        std::vector<std::size_t> times;
        times.reserve(test.size());
        for (std::size_t s = 0; s < test.size(); ++s) {
            times.push_back(test.start(s) + test.history() + h);
        }
        const HaForecast ha = ha_forecast(history, period, times);
        for (std::size_t s = 0; s < test.size(); ++s) {
            acc[h].add(ha.predictions.row(s), raw_series.row(times[s]));
        }
    }
    MetricsReport report;
    for (const auto& a : acc) {
        report.horizons.push_back(a.result());
    }
    report.finalize();
    return report;
}

namespace {

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string pad_left(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

bool highlighted(std::size_t horizon) {
    return std::find(std::begin(kHighlightedHorizons), std::end(kHighlightedHorizons), horizon) !=
           std::end(kHighlightedHorizons);
}

} // namespace

std::string format_report(const MetricsReport& report, const std::string& title) {
    std::string out = title + "\n";
    out += "  horizon  minutes        MAE       RMSE    MAPE(%)\n";
    for (std::size_t h = 1; h <= report.horizons.size(); ++h) {
        const Metrics& m = report.horizons[h - 1];
        out += (highlighted(h) ? "* " : "  ") + pad_left(std::to_string(h), 7) + pad_left(std::to_string(5 * h), 9) +
               pad_left(fixed(m.mae, 4), 11) + pad_left(fixed(m.rmse, 4), 11) + pad_left(fixed(m.mape, 2), 11) + "\n";
    }
    out += "  " + pad_left("mean", 7) + pad_left("", 9) + pad_left(fixed(report.mean.mae, 4), 11) +
           pad_left(fixed(report.mean.rmse, 4), 11) + pad_left(fixed(report.mean.mape, 2), 11) + "\n";
    return out;
}

void write_report_csv(std::ostream& out, const MetricsReport& report) {
    out << "horizon,mae,rmse,mape\n";
    for (std::size_t h = 1; h <= report.horizons.size(); ++h) {
        const Metrics& m = report.horizons[h - 1];
        out << h << ',' << format_double(m.mae) << ',' << format_double(m.rmse) << ',' << format_double(m.mape)
            << '\n';
    }
    out << "mean," << format_double(report.mean.mae) << ',' << format_double(report.mean.rmse) << ','
        << format_double(report.mean.mape) << '\n';
}

std::string format_comparison(const std::vector<std::pair<std::string, MetricsReport>>& runs) {
    std::size_t name_width = 7;
    for (const auto& [name, report] : runs) {
        name_width = std::max(name_width, name.size());
    }
    std::string header = pad_right("variant", name_width);
    std::string units = pad_right("", name_width);
    auto add_block = [&](const std::string& label) {
        header += " | " + pad_right(label, 26);
        units += " | " + pad_left("MAE", 8) + pad_left("RMSE", 9) + pad_left("MAPE", 9);
    };
    for (std::size_t h : kHighlightedHorizons) {
        add_block(std::to_string(5 * h) + " min (h=" + std::to_string(h) + ")");
    }
    add_block("mean over horizons");
    std::string out = header + "\n" + units + "\n";
    for (const auto& [name, report] : runs) {
        std::string line = pad_right(name, name_width);
        auto add_cells = [&](const Metrics& m) {
            line += " | " + pad_left(fixed(m.mae, 4), 8) + pad_left(fixed(m.rmse, 4), 9) +
                    pad_left(fixed(m.mape, 2) + "%", 9);
        };
        for (std::size_t h : kHighlightedHorizons) {
            add_cells(h <= report.horizons.size() ? report.horizons[h - 1] : Metrics{});
        }
        add_cells(report.mean);
        out += line + "\n";
    }
    return out;
}

} // namespace mrabgcn
