#ifndef MRABGCN_ADAM_HPP
#define MRABGCN_ADAM_HPP

#include "mrabgcn/matrix.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mrabgcn {

/// Kingma-Ba Adam with classic L2 regularisation: the gradient used for the
/// moments is g + weight_decay * p.
struct AdamState {
    std::uint64_t step = 0;
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double learning_rate = 1e-2;
    double weight_decay = 0.0;

    /// Zero moments shaped like `params`.
    static AdamState for_parameters(std::span<const Matrix> params);
};

/// One bias-corrected update of every parameter. Throws DimensionError if
/// params, grads and moments disagree in count or shape.
void adam_step(std::span<Matrix> params, std::span<const Matrix> grads, AdamState& state);

} // namespace mrabgcn

#endif // MRABGCN_ADAM_HPP
