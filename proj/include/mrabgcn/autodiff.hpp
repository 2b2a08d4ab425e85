#ifndef MRABGCN_AUTODIFF_HPP
#define MRABGCN_AUTODIFF_HPP

#include "mrabgcn/matrix.hpp"

#include <functional>
#include <span>
#include <vector>

namespace mrabgcn {

/// How reductions over graph neighbours are accumulated.
///   Sequential: in storage order (fast).
///   Canonical:  terms sorted before summing, so the result is independent
///               of node/edge labelling and relabelled inputs give
///               bit-identical, permuted outputs.
enum class ReductionOrder { Sequential, Canonical };

/// A constant linear operator (adjacency, incidence) applied block-wise to
/// row-stacked batches: input rows = B * cols(), output rows = B * rows().
/// Storage stays dense; the nonzero pattern is indexed once for the kernels.
class PropagationOperator {
public:
    PropagationOperator() = default;
    explicit PropagationOperator(Matrix dense);

    [[nodiscard]] std::size_t rows() const { return dense_.rows(); }
    [[nodiscard]] std::size_t cols() const { return dense_.cols(); }
    [[nodiscard]] const Matrix& dense() const { return dense_; }
    [[nodiscard]] std::size_t nonzeros() const { return forward_.weight.size(); }

    [[nodiscard]] Matrix apply(const Matrix& x, ReductionOrder order = ReductionOrder::Sequential) const;
    /// transpose(op) applied block-wise; used for gradients.
    [[nodiscard]] Matrix apply_transpose(const Matrix& upstream) const;

private:
    /// Nonzero pattern of one orientation in compressed-row form.
    struct Pattern {
        std::vector<std::size_t> row_start;
        std::vector<std::size_t> column;
        std::vector<double> weight;
    };

    static Pattern index(const Matrix& dense);
    /// Block-wise product of `pattern` (inner dimension `inner`) with x,
    /// each output entry summed over the pattern's row in storage order.
    static Matrix gather(const Pattern& pattern, std::size_t inner, const Matrix& x);

    Matrix dense_;
    Pattern forward_;
    Pattern transposed_;
};

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
public:
    Var() = default;

    [[nodiscard]] const Matrix& value() const;
    [[nodiscard]] std::size_t rows() const { return value().rows(); }
    [[nodiscard]] std::size_t cols() const { return value().cols(); }
    [[nodiscard]] std::size_t id() const { return id_; }
    [[nodiscard]] Tape* tape() const { return tape_; }
    [[nodiscard]] bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Define-by-run operation record. Each node keeps its forward rule so the
/// whole computation can be replayed from (possibly modified) leaf values,
/// and its backward rule for reverse accumulation.
class Tape {
public:
    using Forward = std::function<Matrix(const Tape&)>;
    using Backward = std::function<void(Tape&, const Matrix& upstream, const Matrix& output)>;

    explicit Tape(ReductionOrder order = ReductionOrder::Sequential) : order_(order) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Gradient-tracked input.
    Var leaf(Matrix value);
    /// Untracked input.
    Var constant(Matrix value);

    [[nodiscard]] const Matrix& value(Var v) const;
    /// Gradient of the last backward() output with respect to v; zeros of
    /// v's shape when nothing flowed into v.
    [[nodiscard]] Matrix grad(Var v) const;
    [[nodiscard]] bool tracked(Var v) const;

    /// Overwrites a leaf or constant. Downstream values are stale until replay().
    void set_value(Var v, Matrix value);

    /// Recomputes every non-input node in recording order.
    void replay();

    /// Reverse accumulation from a 1x1 output. Clears previous gradients.
    void backward(Var output);

    [[nodiscard]] std::size_t size() const { return nodes_.size(); }
    [[nodiscard]] ReductionOrder reduction_order() const { return order_; }

    /// Records a derived node; `backward` runs only if some input is tracked.
    Var record(std::span<const Var> inputs, Forward forward, Backward backward);
    /// Adds delta into v's gradient if v is tracked. The first contribution
    /// is moved in rather than added to zeros.
    void accumulate(Var v, Matrix delta);
    /// Mutable gradient slot (allocated as zeros) for in-place accumulation,
    /// or nullptr when v is untracked.
    Matrix* grad_slot(Var v);

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool tracked = false;
        bool input = false;
        Forward forward;
        Backward backward;
    };

    Node& node(Var v);
    [[nodiscard]] const Node& node(Var v) const;

    std::vector<Node> nodes_;
    ReductionOrder order_;
};

enum class Activation { Identity, Tanh, Sigmoid, Relu };

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var subtract(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double shift);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var activate(Var a, Activation rho);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
/// rows x 1: each row summed across its columns.
Var row_sums(Var a);
/// 1 x cols: each column summed down its rows.
Var column_sums(Var a);
/// Row-wise softmax with max subtraction.
Var softmax_rows(Var a);
/// Mean of |pred - target| over entries with mask != 0, as a 1x1 value.
/// Returns 0 (and warns) when every entry is masked.
Var masked_mae(Var pred, const Matrix& target, const Matrix& mask);
/// Block-wise op * x, honouring the tape's reduction order. `op` is held by
/// reference and must outlive the tape.
Var propagate(const PropagationOperator& op, Var x);

} // namespace mrabgcn

#endif // MRABGCN_AUTODIFF_HPP
