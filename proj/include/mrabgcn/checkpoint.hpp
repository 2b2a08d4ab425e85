#ifndef MRABGCN_CHECKPOINT_HPP
#define MRABGCN_CHECKPOINT_HPP

#include "mrabgcn/model.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace mrabgcn {

/// Trained model plus everything needed to use it: the z-score statistics
/// of its training data and a free-form echo of the run configuration.
///
/// On disk: a text manifest
///
///     mrabgcn-checkpoint 1
///     seed <u64>
///     epoch <n>
///     config <key> <value>        (one line per ModelConfig field)
///     scaler <mean> <std>
///     meta <key> <value>          (single-line values)
///     param <name> <rows> <cols>  (one line per tensor, in order)
///     end
///
/// followed immediately by each tensor's row-major little-endian float64
/// values, concatenated in manifest order.
struct Checkpoint {
    ModelParams params;
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
    double scaler_mean = 0.0;
    double scaler_std = 1.0;
    std::vector<std::pair<std::string, std::string>> metadata;
};

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace mrabgcn

#endif // MRABGCN_CHECKPOINT_HPP
