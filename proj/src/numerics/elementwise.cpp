#include "mrabgcn/matrix.hpp"

#include <Eigen/Core>

#include <algorithm>

namespace mrabgcn {

namespace {

// A whole multiple of every SIMD width, so Eigen never takes a scalar tail
// path and every entry goes through the same instructions.
constexpr std::size_t kChunk = 256;
using Chunk = Eigen::Array<double, kChunk, 1>;

template <typename F>
void map_chunks(std::span<double> values, F f) {
    Chunk in;
    Chunk out;
    for (std::size_t begin = 0; begin < values.size(); begin += kChunk) {
        const std::size_t count = std::min(kChunk, values.size() - begin);
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(begin), count, in.data());
        std::fill(in.data() + count, in.data() + kChunk, 0.0);
        f(in, out);
        std::copy_n(out.data(), count, values.begin() + static_cast<std::ptrdiff_t>(begin));
    }
}

} // namespace

void tanh_inplace(std::span<double> values) {
    map_chunks(values, [](const Chunk& x, Chunk& y) {
        // tanh|x| = (1 - e) / (1 + e) with e = exp(-2|x|) in (0, 1].
        const Chunk e = (-2.0 * x.abs()).exp();
        y = (1.0 - e) / (1.0 + e);
        y = (x < 0.0).select(-y, y);
    });
}

void sigmoid_inplace(std::span<double> values) {
    map_chunks(values, [](const Chunk& x, Chunk& y) { y = 1.0 / (1.0 + (-x).exp()); });
}

} // namespace mrabgcn
