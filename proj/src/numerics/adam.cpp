#include "mrabgcn/adam.hpp"

#include "mrabgcn/diagnostics.hpp"

#include <cmath>

namespace mrabgcn {

AdamState AdamState::for_parameters(std::span<const Matrix> params) {
    AdamState state;
    for (const Matrix& p : params) {
        state.first_moment.emplace_back(p.rows(), p.cols());
        state.second_moment.emplace_back(p.rows(), p.cols());
    }
    return state;
}

void adam_step(std::span<Matrix> params, std::span<const Matrix> grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
        params.size() != state.second_moment.size()) {
        throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                             std::to_string(grads.size()) + " gradients, " +
                             std::to_string(state.first_moment.size()) + " moment slots");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].same_shape(grads[i]) || !params[i].same_shape(state.first_moment[i]) ||
            !params[i].same_shape(state.second_moment[i])) {
            throw DimensionError("adam_step: parameter " + std::to_string(i) + " is " + shape_string(params[i]) +
                                 " but gradient is " + shape_string(grads[i]));
        }
    }

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].values();
        auto g = grads[i].values();
        auto m = state.first_moment[i].values();
        auto v = state.second_moment[i].values();
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double gj = g[j] + state.weight_decay * p[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
            const double m_hat = m[j] / correction1;
            const double v_hat = v[j] / correction2;
            p[j] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

} // namespace mrabgcn
