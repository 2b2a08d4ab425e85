#ifndef MRABGCN_CLI_HPP
#define MRABGCN_CLI_HPP

#include "mrabgcn/model.hpp"
#include "mrabgcn/training.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace mrabgcn {

/// Everything a command needs, resolved from defaults, an optional JSON
/// file and command-line flags (in increasing priority).
struct RunConfig {
    std::uint64_t seed = 0;
    ModelConfig model;
    TrainConfig train;

    // graph
    double kappa = 0.1;

    // data
    std::string readings;
    std::string ids;
    std::string distances;
    double train_fraction = 0.7;
    double validation_fraction = 0.1;

    // synth
    std::size_t synth_nodes = 10;
    std::size_t synth_steps = 523;
    double synth_noise = 0.05;

    // evaluation
    std::size_t eval_batch_size = 64;
    std::size_t ha_period = 2016;
    bool with_ha = false;
    /// "canonical" (label-independent sums) or "sequential".
    std::string reduction = "canonical";

    std::string checkpoint;
    std::string out = ".";
};

/// Parses JSON text. Unknown keys and wrongly typed values throw FormatError
/// naming the offending key.
RunConfig parse_run_config(const std::string& json_text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});
/// Pretty-printed (indent > 0) or single-line JSON holding every field.
std::string run_config_json(const RunConfig& config, int indent = 2);

ReductionOrder parse_reduction_order(const std::string& text);

/// Result of the finite-difference gradient suite.
struct GradcheckReport {
    struct Case {
        std::string name;
        double max_relative_error = 0.0;
        std::string worst_parameter;
        std::size_t scalars = 0;
    };
    std::vector<Case> cases;
    double max_relative_error = 0.0;
};

/// Compares reverse-mode gradients with central differences (step h) on
/// small random instances: one BGCGRU step followed by masked MAE for each
/// range mixing and edge variant, and a two-layer encoder-decoder forecast.
/// Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradcheckReport run_gradcheck(std::uint64_t seed, double step = 1e-5);

/// Runs one command. Returns 0 on success, 1 on a runtime failure (one-line
/// diagnostic on `err`) and 2 on bad usage (usage text on `err`).
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
/// argv-style entry; argv[0] is the program name.
int dispatch(int argc, const char* const* argv);

} // namespace mrabgcn

#endif // MRABGCN_CLI_HPP
