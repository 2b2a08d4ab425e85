#include "mrabgcn/training.hpp"

#include "mrabgcn/adam.hpp"
#include "mrabgcn/diagnostics.hpp"
#include "mrabgcn/graph_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace mrabgcn {

void TrainConfig::validate() const {
    if (epochs == 0 || batch_size == 0 || lr_decay_every == 0) {
        throw ContractError("train config: epochs, batch_size and lr_decay_every must be positive");
    }
    if (!(base_lr >= 0.0) || !(weight_decay >= 0.0) || !(gradient_clip_norm >= 0.0)) {
        throw ContractError("train config: base_lr, weight_decay and gradient_clip_norm must be non-negative");
    }
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) {
        throw ContractError("train config: lr_decay must lie in (0, 1]");
    }
    if (!(sampling_decay_steps > 0.0)) {
        throw ContractError("train config: sampling_decay_steps must be positive");
    }
}

double masked_mae(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target)) {
        throw DimensionError("masked_mae: prediction " + shape_string(pred) + " vs target " + shape_string(target));
    }
    double sum = 0.0;
    std::size_t count = 0;
    const auto p = pred.values();
    const auto t = target.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (t[i] != 0.0) {
            sum += std::abs(p[i] - t[i]);
            ++count;
        }
    }
    if (count == 0) {
        warn("masked_mae: every target is masked; returning 0");
        return 0.0;
    }
    return sum / static_cast<double>(count);
}

double lr_at(const TrainConfig& config, std::size_t epoch) {
    const auto stage = static_cast<double>(epoch / config.lr_decay_every);
    return config.base_lr * std::pow(config.lr_decay, stage);
}

double sampling_prob(std::uint64_t global_step, double decay_steps) {
    const double c = decay_steps;
    // exp overflows to inf for very late steps, which correctly yields 0.
    return c / (c + std::exp(static_cast<double>(global_step) / c));
}

DivergenceError::DivergenceError(std::size_t epoch, std::size_t batch)
    : std::runtime_error("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(batch)),
      epoch_(epoch), batch_(batch) {}

std::string format_log_line(const EpochRecord& r) {
    return std::to_string(r.epoch) + "," + format_double(r.lr) + "," + format_double(r.train_mae) + "," +
           format_double(r.val_mae) + "," + format_double(r.epsilon) + "," + format_double(r.seconds);
}

namespace {

Matrix nonzero_mask(const Matrix& raw) {
    Matrix mask(raw.rows(), raw.cols());
    const auto src = raw.values();
    auto dst = mask.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = src[i] != 0.0 ? 1.0 : 0.0;
    }
    return mask;
}

std::size_t count_ones(const Matrix& mask) {
    return static_cast<std::size_t>(std::count(mask.values().begin(), mask.values().end(), 1.0));
}

std::vector<std::size_t> iota_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

/// Global-norm clipping in place; returns the norm before clipping.
double clip_gradients(std::vector<Matrix>& grads, double ceiling) {
    double squared = 0.0;
    for (const Matrix& g : grads) {
        for (double v : g.values()) {
            squared += v * v;
        }
    }
    const double norm = std::sqrt(squared);
    if (ceiling > 0.0 && norm > ceiling) {
        const double factor = ceiling / norm;
        for (Matrix& g : grads) {
            for (double& v : g.values()) {
                v *= factor;
            }
        }
    }
    return norm;
}

} // namespace

double dataset_mae(const ModelParams& params, const WindowedDataset& dataset, const GraphOperators& graphs,
                   std::size_t batch_size, ReductionOrder order) {
    if (dataset.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    if (batch_size == 0) {
        throw ContractError("dataset_mae: batch size must be positive");
    }
    const auto all = iota_indices(dataset.size());
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t begin = 0; begin < all.size(); begin += batch_size) {
        const std::size_t end = std::min(all.size(), begin + batch_size);
        const Batch batch = dataset.batch(std::span(all).subspan(begin, end - begin));
        const auto predictions = predict(batch.inputs, graphs, params, order);
        for (std::size_t t = 0; t < predictions.size(); ++t) {
            const auto p = predictions[t].values();
            const auto y = batch.targets[t].values();
            const auto raw = batch.targets_raw[t].values();
            for (std::size_t i = 0; i < p.size(); ++i) {
                if (raw[i] != 0.0) {
                    sum += std::abs(p[i] - y[i]);
                    ++count;
                }
            }
        }
    }
    if (count == 0) {
        warn("dataset_mae: every target is masked; returning 0");
        return 0.0;
    }
    return sum / static_cast<double>(count);
}

TrainResult train(const ModelConfig& model, const TrainConfig& config, const DatasetSplits& data,
                  const GraphOperators& graphs, const Scaler& scaler, const TrainCallbacks& callbacks) {
    model.validate();
    Rng init(config.seed);
    return train_from(ModelParams::initialize(model, init), config, data, graphs, scaler, callbacks);
}

TrainResult train_from(ModelParams initial, const TrainConfig& config, const DatasetSplits& data,
                       const GraphOperators& graphs, const Scaler& scaler, const TrainCallbacks& callbacks) {
    config.validate();
    const ModelConfig& model = initial.config;
    model.validate();
    const WindowedDataset& train_set = data.train;
    if (train_set.empty()) {
        throw ContractError("train: training set is empty");
    }
    if (train_set.nodes() != graphs.nodes()) {
        throw DimensionError("train: data has " + std::to_string(train_set.nodes()) + " nodes, graph has " +
                             std::to_string(graphs.nodes()));
    }
    if (train_set.history() != model.history || train_set.horizon() != model.horizon) {
        throw DimensionError("train: windows are " + std::to_string(train_set.history()) + "/" +
                             std::to_string(train_set.horizon()) + " steps, model expects " +
                             std::to_string(model.history) + "/" + std::to_string(model.horizon));
    }
    if (data.validation.empty()) {
        warn("train: validation set is empty; keeping the last epoch's parameters");
    }

    // Shuffling and scheduled-sampling coins use a stream distinct from the
    // initialisation draws.
    Rng rng(config.seed ^ 0xd1b54a32d192ed03ULL);
    ModelParams params = std::move(initial);
    std::vector<Matrix> values = params.values();
    AdamState adam = AdamState::for_parameters(values);
    adam.weight_decay = config.weight_decay;

    TrainResult result;
    double best_val = std::numeric_limits<double>::infinity();
    std::uint64_t global_step = 0;
    auto order = iota_indices(train_set.size());

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.below(i)]);
        }
        adam.learning_rate = lr_at(config, epoch);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        double epsilon = sampling_prob(global_step, config.sampling_decay_steps);

        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            const Batch batch = train_set.batch(std::span(order).subspan(begin, end - begin));
            epsilon = sampling_prob(global_step, config.sampling_decay_steps);

            Tape tape(ReductionOrder::Sequential);
            const ModelVars vars = ModelVars::bind(tape, params, true);
            ForecastOptions options;
            options.teacher = batch.targets;
            options.sampling_probability = epsilon;
            options.rng = &rng;
            const auto outputs = forecast(tape, batch.inputs, graphs, vars, model, options);

            // Weighting each horizon by its share of observed entries makes
            // the loss the masked mean over the whole batch.
            std::vector<Matrix> masks;
            std::size_t observed = 0;
            for (const Matrix& raw : batch.targets_raw) {
                masks.push_back(nonzero_mask(raw));
                observed += count_ones(masks.back());
            }
            ++global_step;
            if (observed == 0) {
                warn("train: batch " + std::to_string(batches) + " has no observed target; skipped");
                ++batches;
                continue;
            }
            Var loss;
            for (std::size_t t = 0; t < outputs.size(); ++t) {
                const std::size_t here = count_ones(masks[t]);
                if (here == 0) {
                    continue;
                }
                const Var term = scale(mrabgcn::masked_mae(outputs[t], batch.targets[t], masks[t]),
                                       static_cast<double>(here) / static_cast<double>(observed));
                loss = loss.valid() ? add(loss, term) : term;
            }
            const double loss_value = loss.value()(0, 0);
            if (!std::isfinite(loss_value)) {
                throw DivergenceError(epoch + 1, batches);
            }
            tape.backward(loss);
            std::vector<Matrix> grads;
            grads.reserve(vars.all.size());
            for (const Var& v : vars.all) {
                grads.push_back(tape.grad(v));
            }
            clip_gradients(grads, config.gradient_clip_norm);
            adam_step(values, grads, adam);
            params.assign(values);
            loss_sum += loss_value;
            ++batches;
        }

        EpochRecord record;
        record.epoch = epoch + 1;
        record.lr = adam.learning_rate;
        record.train_mae = loss_sum / static_cast<double>(batches);
        record.val_mae = dataset_mae(params, data.validation, graphs, config.batch_size);
        record.epsilon = epsilon;
        record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        result.log.push_back(record);
        if (callbacks.on_epoch) {
            callbacks.on_epoch(record);
        }

        const bool no_validation = std::isnan(record.val_mae);
        if (no_validation || record.val_mae < best_val || result.best.params.tensors.empty()) {
            if (!no_validation) {
                best_val = record.val_mae;
            }
            result.best.params = params;
            result.best.seed = config.seed;
            result.best.epoch = epoch + 1;
            result.best.scaler_mean = scaler.mean;
            result.best.scaler_std = scaler.std;
        }
    }
    result.final_params = std::move(params);
    return result;
}

} // namespace mrabgcn
