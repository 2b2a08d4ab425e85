#ifndef MRABGCN_MATRIX_HPP
#define MRABGCN_MATRIX_HPP

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mrabgcn {

namespace detail {

/// Allocator whose value-less construct() leaves doubles uninitialized, so
/// kernels that overwrite every entry skip the zero fill.
template <typename T>
struct DefaultInitAllocator : std::allocator<T> {
    template <typename U>
    struct rebind {
        using other = DefaultInitAllocator<U>;
    };
    using std::allocator<T>::allocator;

    template <typename U>
    void construct(U* p) noexcept {
        ::new (static_cast<void*>(p)) U;
    }
    template <typename U, typename... Args>
    void construct(U* p, Args&&... args) {
        ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
    }
};

} // namespace detail

/// Dense row-major float64 matrix. Value type; all kernels treat rows
/// independently so a row's result never depends on its position.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    /// Matrix with indeterminate entries; the caller writes every one.
    static Matrix uninitialized(std::size_t rows, std::size_t cols);
    static Matrix identity(std::size_t n);
    static Matrix column(std::span<const double> values);

    [[nodiscard]] std::size_t rows() const { return rows_; }
    [[nodiscard]] std::size_t cols() const { return cols_; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] bool empty() const { return data_.empty(); }
    [[nodiscard]] bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() { return data_; }
    [[nodiscard]] std::span<const double> values() const { return data_; }

    void fill(double value);

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double, detail::DefaultInitAllocator<double>> data_;
};

std::string shape_string(const Matrix& m);

/// a * b. Throws DimensionError naming both shapes when a.cols != b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);
/// transpose(a) * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a * transpose(b)
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& a, double factor);
/// a += factor * b
void axpy(Matrix& a, double factor, const Matrix& b);

double max_abs(const Matrix& a);
bool all_finite(const Matrix& a);

/// In-place tanh and logistic sigmoid over every entry. Evaluated in
/// vector registers via exp; each result depends only on its own input, so
/// reordering the entries reorders the results bit for bit.
void tanh_inplace(std::span<double> values);
void sigmoid_inplace(std::span<double> values);

/// Numerically stable softmax (max subtraction). Throws ContractError on
/// empty input.
std::vector<double> softmax_over(std::span<const double> values);

/// Sum whose result depends only on the multiset of inputs: values are
/// sorted ascending, then accumulated left to right. Reorders `values`.
double canonical_sum(std::span<double> values);

/// Population mean and variance computed with canonical_sum.
struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};
Moments population_moments(std::span<const double> values);

} // namespace mrabgcn

#endif // MRABGCN_MATRIX_HPP
