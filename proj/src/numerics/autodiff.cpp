#include "mrabgcn/autodiff.hpp"

#include "mrabgcn/diagnostics.hpp"

#include <algorithm>
#include <cmath>

namespace mrabgcn {

// ---------------------------------------------------------------------------
// PropagationOperator

PropagationOperator::PropagationOperator(Matrix dense)
    : dense_(std::move(dense)), forward_(index(dense_)), transposed_(index(transpose(dense_))) {}

PropagationOperator::Pattern PropagationOperator::index(const Matrix& dense) {
    Pattern p;
    p.row_start.reserve(dense.rows() + 1);
    p.row_start.push_back(0);
    for (std::size_t i = 0; i < dense.rows(); ++i) {
        for (std::size_t j = 0; j < dense.cols(); ++j) {
            if (dense(i, j) != 0.0) {
                p.column.push_back(j);
                p.weight.push_back(dense(i, j));
            }
        }
        p.row_start.push_back(p.column.size());
    }
    return p;
}

Matrix PropagationOperator::gather(const Pattern& pattern, std::size_t inner, const Matrix& x) {
    const std::size_t outer = pattern.row_start.size() - 1;
    const std::size_t blocks = x.rows() / inner;
    const std::size_t width = x.cols();
    Matrix out = Matrix::uninitialized(blocks * outer, width);
    for (std::size_t b = 0; b < blocks; ++b) {
        const double* xblock = x.values().data() + b * inner * width;
        for (std::size_t i = 0; i < outer; ++i) {
            double* __restrict orow = out.row(b * outer + i).data();
            const std::size_t lo = pattern.row_start[i];
            const std::size_t hi = pattern.row_start[i + 1];
            std::fill(orow, orow + width, 0.0);
            for (std::size_t p = lo; p < hi; ++p) {
                const double w = pattern.weight[p];
                const double* __restrict xrow = xblock + pattern.column[p] * width;
                for (std::size_t f = 0; f < width; ++f) {
                    orow[f] += w * xrow[f];
                }
            }
        }
    }
    return out;
}

Matrix PropagationOperator::apply(const Matrix& x, ReductionOrder order) const {
    if (cols() == 0 || x.rows() % cols() != 0) {
        throw DimensionError("propagate: operator " + shape_string(dense_) + " cannot act block-wise on " +
                             shape_string(x));
    }
    Matrix out = gather(forward_, cols(), x);
    if (order == ReductionOrder::Sequential) {
        return out;
    }
    // Rows with more than one term are recomputed with sorted sums. Even a
    // two-term sum can depend on order once the gather loop is contracted
    // into fused multiply-adds.
    const std::size_t blocks = x.rows() / cols();
    const std::size_t width = x.cols();
    std::vector<double> terms;
    for (std::size_t i = 0; i < rows(); ++i) {
        const std::size_t lo = forward_.row_start[i];
        const std::size_t hi = forward_.row_start[i + 1];
        if (hi - lo <= 1) {
            continue;
        }
        terms.resize(hi - lo);
        for (std::size_t b = 0; b < blocks; ++b) {
            double* orow = out.row(b * rows() + i).data();
            for (std::size_t f = 0; f < width; ++f) {
                for (std::size_t p = lo; p < hi; ++p) {
                    terms[p - lo] = forward_.weight[p] * x(b * cols() + forward_.column[p], f);
                }
                orow[f] = canonical_sum(terms);
            }
        }
    }
    return out;
}

Matrix PropagationOperator::apply_transpose(const Matrix& upstream) const {
    if (rows() == 0 || upstream.rows() % rows() != 0) {
        throw DimensionError("propagate: transpose of " + shape_string(dense_) + " cannot act block-wise on " +
                             shape_string(upstream));
    }
    return gather(transposed_, rows(), upstream);
}

// ---------------------------------------------------------------------------
// Tape

const Matrix& Var::value() const {
    if (tape_ == nullptr) {
        throw ContractError("Var: use of an unrecorded value");
    }
    return tape_->value(*this);
}

Tape::Node& Tape::node(Var v) {
    if (v.tape() != this || v.id() >= nodes_.size()) {
        throw ContractError("Tape: value belongs to a different tape");
    }
    return nodes_[v.id()];
}

const Tape::Node& Tape::node(Var v) const {
    if (v.tape() != this || v.id() >= nodes_.size()) {
        throw ContractError("Tape: value belongs to a different tape");
    }
    return nodes_[v.id()];
}

Var Tape::leaf(Matrix value) {
    Node n;
    n.value = std::move(value);
    n.tracked = true;
    n.input = true;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Tape::constant(Matrix value) {
    Node n;
    n.value = std::move(value);
    n.input = true;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

Matrix Tape::grad(Var v) const {
    const Node& n = node(v);
    if (n.grad.empty()) {
        return Matrix(n.value.rows(), n.value.cols());
    }
    return n.grad;
}

bool Tape::tracked(Var v) const { return node(v).tracked; }

void Tape::set_value(Var v, Matrix value) {
    Node& n = node(v);
    if (!n.input) {
        throw ContractError("Tape::set_value: only inputs can be overwritten");
    }
    if (!n.value.same_shape(value)) {
        throw DimensionError("Tape::set_value: shape " + shape_string(value) + " does not match " +
                             shape_string(n.value));
    }
    n.value = std::move(value);
}

void Tape::replay() {
    for (auto& n : nodes_) {
        if (!n.input) {
            n.value = n.forward(*this);
        }
    }
}

Var Tape::record(std::span<const Var> inputs, Forward forward, Backward backward) {
    bool tracked = false;
    for (const Var& in : inputs) {
        tracked = tracked || node(in).tracked;
    }
    Node n;
    n.value = forward(*this);
    n.tracked = tracked;
    n.forward = std::move(forward);
    if (tracked) {
        n.backward = std::move(backward);
    }
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Matrix* Tape::grad_slot(Var v) {
    Node& n = node(v);
    if (!n.tracked) {
        return nullptr;
    }
    if (n.grad.empty()) {
        n.grad = Matrix(n.value.rows(), n.value.cols());
    }
    return &n.grad;
}

void Tape::accumulate(Var v, Matrix delta) {
    Node& n = node(v);
    if (!n.tracked) {
        return;
    }
    if (!delta.same_shape(n.value)) {
        throw DimensionError("gradient " + shape_string(delta) + " for value " + shape_string(n.value));
    }
    if (n.grad.empty()) {
        n.grad = std::move(delta);
    } else {
        axpy(n.grad, 1.0, delta);
    }
}

void Tape::backward(Var output) {
    Node& out = node(output);
    if (out.value.rows() != 1 || out.value.cols() != 1) {
        throw ContractError("backward: output must be 1x1, got " + shape_string(out.value));
    }
    for (auto& n : nodes_) {
        n.grad = Matrix();
    }
    if (!out.tracked) {
        return;
    }
    out.grad = Matrix(1, 1, 1.0);
    for (std::size_t i = output.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.input || !n.tracked || n.grad.empty()) {
            continue;
        }
        n.backward(*this, n.grad, n.value);
        // Intermediate gradients are not retained.
        n.grad = Matrix();
    }
}

// ---------------------------------------------------------------------------
// Operations

namespace {

Tape& tape_of(Var a) {
    if (!a.valid()) {
        throw ContractError("operation on an unrecorded value");
    }
    return *a.tape();
}

Tape& tape_of(Var a, Var b) {
    if (a.tape() != b.tape()) {
        throw ContractError("operands recorded on different tapes");
    }
    return tape_of(a);
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
    }
}

template <typename F>
Matrix map_values(const Matrix& in, F f) {
    Matrix out = in;
    for (double& v : out.values()) {
        v = f(v);
    }
    return out;
}

} // namespace

Var matmul(Var a, Var b) {
    Tape& tape = tape_of(a, b);
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: cannot multiply " + shape_string(a.value()) + " by " +
                             shape_string(b.value()));
    }
    const Var in[] = {a, b};
    return tape.record(
        in, [a, b](const Tape& t) { return matmul(t.value(a), t.value(b)); },
        [a, b](Tape& t, const Matrix& g, const Matrix&) {
            if (t.tracked(a)) {
                t.accumulate(a, matmul_nt(g, t.value(b)));
            }
            if (t.tracked(b)) {
                t.accumulate(b, matmul_tn(t.value(a), g));
            }
        });
}

Var add(Var a, Var b) {
    Tape& tape = tape_of(a, b);
    require_same_shape(a.value(), b.value(), "add");
    const Var in[] = {a, b};
    return tape.record(
        in, [a, b](const Tape& t) { return add(t.value(a), t.value(b)); },
        [a, b](Tape& t, const Matrix& g, const Matrix&) {
            t.accumulate(a, g);
            t.accumulate(b, g);
        });
}

Var subtract(Var a, Var b) {
    Tape& tape = tape_of(a, b);
    require_same_shape(a.value(), b.value(), "subtract");
    const Var in[] = {a, b};
    return tape.record(
        in, [a, b](const Tape& t) { return subtract(t.value(a), t.value(b)); },
        [a, b](Tape& t, const Matrix& g, const Matrix&) {
            t.accumulate(a, g);
            if (Matrix* slot = t.grad_slot(b)) {
                axpy(*slot, -1.0, g);
            }
        });
}

Var hadamard(Var a, Var b) {
    Tape& tape = tape_of(a, b);
    require_same_shape(a.value(), b.value(), "hadamard");
    const Var in[] = {a, b};
    return tape.record(
        in, [a, b](const Tape& t) { return hadamard(t.value(a), t.value(b)); },
        [a, b](Tape& t, const Matrix& g, const Matrix&) {
            if (t.tracked(a)) {
                t.accumulate(a, hadamard(g, t.value(b)));
            }
            if (t.tracked(b)) {
                t.accumulate(b, hadamard(g, t.value(a)));
            }
        });
}

Var scale(Var a, double factor) {
    Tape& tape = tape_of(a);
    const Var in[] = {a};
    return tape.record(
        in, [a, factor](const Tape& t) { return scaled(t.value(a), factor); },
        [a, factor](Tape& t, const Matrix& g, const Matrix&) {
            if (Matrix* slot = t.grad_slot(a)) {
                axpy(*slot, factor, g);
            }
        });
}

Var add_scalar(Var a, double shift) {
    Tape& tape = tape_of(a);
    const Var in[] = {a};
    return tape.record(
        in, [a, shift](const Tape& t) { return map_values(t.value(a), [shift](double v) { return v + shift; }); },
        [a](Tape& t, const Matrix& g, const Matrix&) { t.accumulate(a, g); });
}

Var sigmoid(Var a) {
    Tape& tape = tape_of(a);
    const Var in[] = {a};
    return tape.record(
        in,
        [a](const Tape& t) {
            Matrix y = t.value(a);
            sigmoid_inplace(y.values());
            return y;
        },
        [a](Tape& t, const Matrix& g, const Matrix& y) {
            Matrix* slot = t.grad_slot(a);
            auto out = slot->values();
            auto gy = g.values();
            auto yv = y.values();
            for (std::size_t i = 0; i < out.size(); ++i) {
                out[i] += gy[i] * yv[i] * (1.0 - yv[i]);
            }
        });
}

Var tanh(Var a) {
    Tape& tape = tape_of(a);
    const Var in[] = {a};
    return tape.record(
        in,
        [a](const Tape& t) {
            Matrix y = t.value(a);
            tanh_inplace(y.values());
            return y;
        },
        [a](Tape& t, const Matrix& g, const Matrix& y) {
            Matrix* slot = t.grad_slot(a);
            auto out = slot->values();
            auto gy = g.values();
            auto yv = y.values();
            for (std::size_t i = 0; i < out.size(); ++i) {
                out[i] += gy[i] * (1.0 - yv[i] * yv[i]);
            }
        });
}

Var relu(Var a) {
    Tape& tape = tape_of(a);
    const Var in[] = {a};
    return tape.record(
        in, [a](const Tape& t) { return map_values(t.value(a), [](double v) { return v > 0.0 ? v : 0.0; }); },
        [a](Tape& t, const Matrix& g, const Matrix&) {
            Matrix* slot = t.grad_slot(a);
            auto out = slot->values();
            auto gy = g.values();
            auto xv = t.value(a).values();
            for (std::size_t i = 0; i < out.size(); ++i) {
                if (xv[i] > 0.0) {
                    out[i] += gy[i];
                }
            }
        });
}

Var activate(Var a, Activation rho) {
    switch (rho) {
    case Activation::Identity:
        return a;
    case Activation::Tanh:
        return tanh(a);
    case Activation::Sigmoid:
        return sigmoid(a);
    case Activation::Relu:
        return relu(a);
    }
    throw ContractError("activate: unknown activation");
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) {
        throw ContractError("concat_cols: no operands");
    }
    Tape& tape = tape_of(parts.front());
    const std::size_t rows = parts.front().rows();
    for (const Var& p : parts) {
        tape_of(parts.front(), p);
        if (p.rows() != rows) {
            throw DimensionError("concat_cols: row mismatch " + shape_string(parts.front().value()) + " vs " +
                                 shape_string(p.value()));
        }
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return tape.record(
        parts,
        [inputs](const Tape& t) {
            std::size_t width = 0;
            for (const Var& p : inputs) {
                width += t.value(p).cols();
            }
            const std::size_t rows = t.value(inputs.front()).rows();
            Matrix out(rows, width);
            for (std::size_t r = 0; r < rows; ++r) {
                double* dst = out.row(r).data();
                for (const Var& p : inputs) {
                    auto src = t.value(p).row(r);
                    dst = std::copy(src.begin(), src.end(), dst);
                }
            }
            return out;
        },
        [inputs](Tape& t, const Matrix& g, const Matrix&) {
            std::size_t offset = 0;
            for (const Var& p : inputs) {
                const std::size_t w = t.value(p).cols();
                if (Matrix* slot = t.grad_slot(p)) {
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                        auto src = g.row(r).subspan(offset, w);
                        auto dst = slot->row(r);
                        for (std::size_t c = 0; c < w; ++c) {
                            dst[c] += src[c];
                        }
                    }
                }
                offset += w;
            }
        });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
    Tape& tape = tape_of(a);
    if (begin + count > a.cols()) {
        throw DimensionError("slice_cols: columns [" + std::to_string(begin) + ", " +
                             std::to_string(begin + count) + ") out of range for " + shape_string(a.value()));
    }
    const Var in[] = {a};
    return tape.record(
        in,
        [a, begin, count](const Tape& t) {
            const Matrix& x = t.value(a);
            Matrix out(x.rows(), count);
            for (std::size_t r = 0; r < x.rows(); ++r) {
                auto src = x.row(r).subspan(begin, count);
                std::copy(src.begin(), src.end(), out.row(r).begin());
            }
            return out;
        },
        [a, begin, count](Tape& t, const Matrix& g, const Matrix&) {
            Matrix* slot = t.grad_slot(a);
            for (std::size_t r = 0; r < g.rows(); ++r) {
                auto dst = slot->row(r).subspan(begin, count);
                auto src = g.row(r);
                for (std::size_t c = 0; c < count; ++c) {
                    dst[c] += src[c];
                }
            }
        });
}

Var row_sums(Var a) {
    Tape& tape = tape_of(a);
    const Var in[] = {a};
    return tape.record(
        in,
        [a](const Tape& t) {
            const Matrix& x = t.value(a);
            Matrix out(x.rows(), 1);
            for (std::size_t r = 0; r < x.rows(); ++r) {
                double acc = 0.0;
                for (double v : x.row(r)) {
                    acc += v;
                }
                out(r, 0) = acc;
            }
            return out;
        },
        [a](Tape& t, const Matrix& g, const Matrix&) {
            Matrix* slot = t.grad_slot(a);
            for (std::size_t r = 0; r < slot->rows(); ++r) {
                for (double& v : slot->row(r)) {
                    v += g(r, 0);
                }
            }
        });
}

Var column_sums(Var a) {
    Tape& tape = tape_of(a);
    const Var in[] = {a};
    return tape.record(
        in,
        [a](const Tape& t) {
            const Matrix& x = t.value(a);
            Matrix out(1, x.cols());
            for (std::size_t r = 0; r < x.rows(); ++r) {
                auto src = x.row(r);
                for (std::size_t c = 0; c < x.cols(); ++c) {
                    out(0, c) += src[c];
                }
            }
            return out;
        },
        [a](Tape& t, const Matrix& g, const Matrix&) {
            Matrix* slot = t.grad_slot(a);
            for (std::size_t r = 0; r < slot->rows(); ++r) {
                auto dst = slot->row(r);
                for (std::size_t c = 0; c < dst.size(); ++c) {
                    dst[c] += g(0, c);
                }
            }
        });
}

Var softmax_rows(Var a) {
    Tape& tape = tape_of(a);
    if (a.cols() == 0) {
        throw ContractError("softmax_rows: empty rows");
    }
    const Var in[] = {a};
    return tape.record(
        in,
        [a](const Tape& t) {
            const Matrix& x = t.value(a);
            Matrix out(x.rows(), x.cols());
            for (std::size_t r = 0; r < x.rows(); ++r) {
                const auto probs = softmax_over(x.row(r));
                std::copy(probs.begin(), probs.end(), out.row(r).begin());
            }
            return out;
        },
        [a](Tape& t, const Matrix& g, const Matrix& y) {
            Matrix* slot = t.grad_slot(a);
            for (std::size_t r = 0; r < y.rows(); ++r) {
                auto yr = y.row(r);
                auto gr = g.row(r);
                double dot = 0.0;
                for (std::size_t c = 0; c < yr.size(); ++c) {
                    dot += gr[c] * yr[c];
                }
                auto dst = slot->row(r);
                for (std::size_t c = 0; c < yr.size(); ++c) {
                    dst[c] += yr[c] * (gr[c] - dot);
                }
            }
        });
}

Var masked_mae(Var pred, const Matrix& target, const Matrix& mask) {
    Tape& tape = tape_of(pred);
    require_same_shape(pred.value(), target, "masked_mae");
    require_same_shape(pred.value(), mask, "masked_mae");
    std::size_t count = 0;
    for (double m : mask.values()) {
        count += m != 0.0 ? 1 : 0;
    }
    if (count == 0) {
        warn("masked_mae: every entry is masked; loss is 0");
    }
    const Var in[] = {pred};
    return tape.record(
        in,
        [pred, target, mask, count](const Tape& t) {
            if (count == 0) {
                return Matrix(1, 1);
            }
            auto p = t.value(pred).values();
            auto y = target.values();
            auto m = mask.values();
            double acc = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                if (m[i] != 0.0) {
                    acc += std::abs(p[i] - y[i]);
                }
            }
            return Matrix(1, 1, acc / static_cast<double>(count));
        },
        [pred, target, mask, count](Tape& t, const Matrix& g, const Matrix&) {
            if (count == 0) {
                return;
            }
            Matrix* slot = t.grad_slot(pred);
            auto dst = slot->values();
            auto p = t.value(pred).values();
            auto y = target.values();
            auto m = mask.values();
            const double step = g(0, 0) / static_cast<double>(count);
            for (std::size_t i = 0; i < dst.size(); ++i) {
                if (m[i] == 0.0) {
                    continue;
                }
                const double d = p[i] - y[i];
                dst[i] += d > 0.0 ? step : (d < 0.0 ? -step : 0.0);
            }
        });
}

Var propagate(const PropagationOperator& op, Var x) {
    Tape& tape = tape_of(x);
    const Var in[] = {x};
    const ReductionOrder order = tape.reduction_order();
    if (op.cols() == 0 || x.rows() % op.cols() != 0) {
        throw DimensionError("propagate: operator " + shape_string(op.dense()) + " cannot act block-wise on " +
                             shape_string(x.value()));
    }
    return tape.record(
        in, [&op, x, order](const Tape& t) { return op.apply(t.value(x), order); },
        [&op, x](Tape& t, const Matrix& g, const Matrix&) { t.accumulate(x, op.apply_transpose(g)); });
}

} // namespace mrabgcn
