#include "mrabgcn/matrix.hpp"

#include "mrabgcn/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mrabgcn {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(data.begin(), data.end()) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("matrix data length " + std::to_string(data_.size()) + " does not match shape " +
                             std::to_string(rows) + "x" + std::to_string(cols));
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw DimensionError("ragged matrix literal");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::uninitialized(std::size_t rows, std::size_t cols) {
    Matrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.data_.resize(rows * cols);
    return m;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

Matrix Matrix::column(std::span<const double> values) {
    return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

std::string shape_string(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
    }
}

} // namespace

namespace {

// Output columns [j0, j0 + W) of row `arow` times b, accumulated in
// registers. Every entry is summed over k in increasing order, so the
// result for a row never depends on which other rows are present.
template <std::size_t W>
void row_times_block(const double* __restrict arow, const double* __restrict b, std::size_t inner, std::size_t width,
                     std::size_t j0, double* __restrict out) {
    double acc[W] = {};
    for (std::size_t k = 0; k < inner; ++k) {
        const double s = arow[k];
        const double* __restrict brow = b + k * width + j0;
        for (std::size_t j = 0; j < W; ++j) {
            acc[j] += s * brow[j];
        }
    }
    for (std::size_t j = 0; j < W; ++j) {
        out[j0 + j] = acc[j];
    }
}

// Rows [k0, k0 + K) of a^T b, accumulated over all rows of a in order.
template <std::size_t K, std::size_t W>
void transpose_times_block(const Matrix& a, const Matrix& b, std::size_t k0, std::size_t j0, Matrix& c) {
    double acc[K][W] = {};
    const std::size_t acols = a.cols();
    const std::size_t bcols = b.cols();
    const double* __restrict adata = a.values().data();
    const double* __restrict bdata = b.values().data();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* __restrict brow = bdata + i * bcols + j0;
        for (std::size_t kk = 0; kk < K; ++kk) {
            const double s = adata[i * acols + k0 + kk];
            for (std::size_t j = 0; j < W; ++j) {
                acc[kk][j] += s * brow[j];
            }
        }
    }
    for (std::size_t kk = 0; kk < K; ++kk) {
        for (std::size_t j = 0; j < W; ++j) {
            c(k0 + kk, j0 + j) = acc[kk][j];
        }
    }
}

} // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: cannot multiply " + shape_string(a) + " by " + shape_string(b));
    }
    Matrix c = Matrix::uninitialized(a.rows(), b.cols());
    const std::size_t inner = a.cols();
    const std::size_t width = b.cols();
    const double* bdata = b.values().data();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* out = c.row(i).data();
        const double* arow = a.row(i).data();
        std::size_t j0 = 0;
        for (; j0 + 16 <= width; j0 += 16) {
            row_times_block<16>(arow, bdata, inner, width, j0, out);
        }
        for (; j0 + 4 <= width; j0 += 4) {
            row_times_block<4>(arow, bdata, inner, width, j0, out);
        }
        for (; j0 < width; ++j0) {
            row_times_block<1>(arow, bdata, inner, width, j0, out);
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("matmul_tn: cannot multiply transpose of " + shape_string(a) + " by " +
                             shape_string(b));
    }
    Matrix c = Matrix::uninitialized(a.cols(), b.cols());
    const std::size_t width = b.cols();
    for (std::size_t k0 = 0; k0 < a.cols();) {
        const std::size_t kb = a.cols() - k0 >= 4 ? 4 : 1;
        std::size_t j0 = 0;
        for (; j0 + 8 <= width; j0 += 8) {
            kb == 4 ? transpose_times_block<4, 8>(a, b, k0, j0, c) : transpose_times_block<1, 8>(a, b, k0, j0, c);
        }
        for (; j0 < width; ++j0) {
            kb == 4 ? transpose_times_block<4, 1>(a, b, k0, j0, c) : transpose_times_block<1, 1>(a, b, k0, j0, c);
        }
        k0 += kb;
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("matmul_nt: cannot multiply " + shape_string(a) + " by transpose of " +
                             shape_string(b));
    }
    return matmul(a, transpose(b));
}

Matrix transpose(const Matrix& a) {
    Matrix t = Matrix::uninitialized(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            t(j, i) = a(i, j);
        }
    }
    return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix c = a;
    auto out = c.values();
    auto in = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += in[i];
    }
    return c;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "subtract");
    Matrix c = a;
    auto out = c.values();
    auto in = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] -= in[i];
    }
    return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix c = a;
    auto out = c.values();
    auto in = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] *= in[i];
    }
    return c;
}

Matrix scaled(const Matrix& a, double factor) {
    Matrix c = a;
    for (double& v : c.values()) {
        v *= factor;
    }
    return c;
}

void axpy(Matrix& a, double factor, const Matrix& b) {
    require_same_shape(a, b, "axpy");
    auto out = a.values();
    auto in = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += factor * in[i];
    }
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.values()) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

bool all_finite(const Matrix& a) {
    return std::all_of(a.values().begin(), a.values().end(), [](double v) { return std::isfinite(v); });
}

std::vector<double> softmax_over(std::span<const double> values) {
    if (values.empty()) {
        throw ContractError("softmax_over: empty input");
    }
    const double peak = *std::max_element(values.begin(), values.end());
    std::vector<double> out(values.size());
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = std::exp(values[i] - peak);
        total += out[i];
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

double canonical_sum(std::span<double> values) {
    std::sort(values.begin(), values.end());
    double total = 0.0;
    for (double v : values) {
        total += v;
    }
    return total;
}

Moments population_moments(std::span<const double> values) {
    if (values.empty()) {
        throw ContractError("population_moments: empty input");
    }
    std::vector<double> scratch(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    Moments m;
    m.mean = canonical_sum(scratch) / n;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = values[i] - m.mean;
        scratch[i] = d * d;
    }
    m.variance = canonical_sum(scratch) / n;
    return m;
}

} // namespace mrabgcn
