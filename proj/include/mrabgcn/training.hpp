#ifndef MRABGCN_TRAINING_HPP
#define MRABGCN_TRAINING_HPP

#include "mrabgcn/checkpoint.hpp"
#include "mrabgcn/data.hpp"
#include "mrabgcn/model.hpp"

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrabgcn {

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double base_lr = 1e-2;
    double lr_decay = 0.6;
    std::size_t lr_decay_every = 10;
    double weight_decay = 2e-4;
    /// Scheduled-sampling constant c.
    double sampling_decay_steps = 2000.0;
    std::uint64_t seed = 0;
    /// Global gradient-norm ceiling; 0 disables clipping.
    double gradient_clip_norm = 5.0;

    /// Throws ContractError unless counts are positive, rates non-negative
    /// and lr_decay lies in (0, 1].
    void validate() const;

    bool operator==(const TrainConfig&) const = default;
};

/// Mean of |pred - target| over entries whose target is nonzero. Returns 0
/// and warns when every entry is masked.
double masked_mae(const Matrix& pred, const Matrix& target);

/// base_lr * lr_decay ^ floor(epoch / lr_decay_every), epoch counted from 0.
double lr_at(const TrainConfig& config, std::size_t epoch);

/// Inverse-sigmoid teacher-forcing probability c / (c + exp(step / c)).
double sampling_prob(std::uint64_t global_step, double decay_steps);

/// Thrown when a batch produces a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::size_t epoch, std::size_t batch);

    [[nodiscard]] std::size_t epoch() const { return epoch_; }
    [[nodiscard]] std::size_t batch() const { return batch_; }

private:
    std::size_t epoch_;
    std::size_t batch_;
};

/// One line of the training log.
struct EpochRecord {
    std::size_t epoch = 0; ///< 1-based
    double lr = 0.0;
    double train_mae = 0.0; ///< mean of the epoch's batch losses
    double val_mae = 0.0;   ///< NaN when there is no validation data
    double epsilon = 0.0;   ///< teacher-forcing probability at the epoch's last batch
    double seconds = 0.0;
};

inline constexpr const char* kTrainLogHeader = "epoch,lr,train_mae,val_mae,epsilon,seconds";
/// `epoch,lr,train_mae,val_mae,epsilon,seconds` with round-trip precision.
std::string format_log_line(const EpochRecord& record);

struct TrainResult {
    Checkpoint best;       ///< lowest validation MAE (last epoch without validation data)
    ModelParams final_params;
    std::vector<EpochRecord> log;
};

struct TrainCallbacks {
    std::function<void(const EpochRecord&)> on_epoch;
};

/// Normalised-space masked MAE of `params` over every window and horizon of
/// `dataset`, forecasting with no teacher. NaN for an empty dataset.
double dataset_mae(const ModelParams& params, const WindowedDataset& dataset, const GraphOperators& graphs,
                   std::size_t batch_size, ReductionOrder order = ReductionOrder::Sequential);

/// Seeded mini-batch training. The parameters are initialised from the
/// seed, then batches are shuffled by the same generator each epoch.
/// Gradients use scheduled sampling, global-norm clipping and Adam with L2
/// weight decay at lr_at(epoch). Throws DivergenceError on a non-finite loss
/// and ContractError on an empty training set.
TrainResult train(const ModelConfig& model, const TrainConfig& config, const DatasetSplits& data,
                  const GraphOperators& graphs, const Scaler& scaler, const TrainCallbacks& callbacks = {});

/// Variant of train() starting from given parameters instead of a fresh
/// initialisation.
TrainResult train_from(ModelParams initial, const TrainConfig& config, const DatasetSplits& data,
                       const GraphOperators& graphs, const Scaler& scaler, const TrainCallbacks& callbacks = {});

} // namespace mrabgcn

#endif // MRABGCN_TRAINING_HPP
