#include "doctest.h"

#include "mrabgcn/adam.hpp"
#include "mrabgcn/autodiff.hpp"
#include "mrabgcn/diagnostics.hpp"
#include "mrabgcn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace mrabgcn;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.values()) {
        v = rng.uniform(lo, hi);
    }
    return m;
}

/// Triple loop in long double, the reference for every product kernel.
Matrix naive_product(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            long double s = 0.0L;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                s += static_cast<long double>(a(i, k)) * b(k, j);
            }
            c(i, j) = static_cast<double>(s);
        }
    }
    return c;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
    }
    return worst;
}

} // namespace

TEST_CASE("matmul hand values and contract") {
    const Matrix a{{1, 2}, {3, 4}};
    const Matrix b{{1}, {1}};
    CHECK(matmul(a, b) == Matrix{{3}, {7}});

    Rng rng(3);
    const Matrix x = random_matrix(3, 5, rng);
    CHECK(matmul(Matrix::identity(3), x) == x);

    CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(4, 2)), DimensionError);
    try {
        (void)matmul(Matrix(2, 3), Matrix(4, 2));
    } catch (const DimensionError& e) {
        const std::string what = e.what();
        CHECK(what.find("2x3") != std::string::npos);
        CHECK(what.find("4x2") != std::string::npos);
    }
}

TEST_CASE("product kernels agree with a naive triple loop across block edges") {
    Rng rng(11);
    for (std::size_t rows : {1u, 3u, 17u}) {
        for (std::size_t inner : {1u, 4u, 9u}) {
            for (std::size_t cols : {1u, 3u, 4u, 8u, 16u, 21u, 37u}) {
                const Matrix a = random_matrix(rows, inner, rng);
                const Matrix b = random_matrix(inner, cols, rng);
                CHECK(max_abs_diff(matmul(a, b), naive_product(a, b)) < 1e-14);
                const Matrix at = transpose(a);
                CHECK(max_abs_diff(matmul_tn(at, b), naive_product(a, b)) < 1e-14);
                const Matrix bt = transpose(b);
                CHECK(max_abs_diff(matmul_nt(a, bt), naive_product(a, b)) < 1e-14);
            }
        }
    }
}

TEST_CASE("matmul rows are independent of the other rows present") {
    Rng rng(5);
    const Matrix a = random_matrix(9, 13, rng);
    const Matrix b = random_matrix(13, 19, rng);
    const Matrix full = matmul(a, b);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        Matrix single(1, a.cols());
        std::copy(a.row(i).begin(), a.row(i).end(), single.values().begin());
        const Matrix one = matmul(single, b);
        CHECK(std::equal(one.values().begin(), one.values().end(), full.row(i).begin()));
    }
}

TEST_CASE("matmul associativity on random triples") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix a = random_matrix(4, 5, rng);
        const Matrix b = random_matrix(5, 6, rng);
        const Matrix c = random_matrix(6, 3, rng);
        const Matrix left = matmul(matmul(a, b), c);
        const Matrix right = matmul(a, matmul(b, c));
        const double scale = std::max(max_abs(left), 1.0);
        CHECK(max_abs_diff(left, right) / scale < 1e-9);
    }
}

TEST_CASE("softmax_over examples and properties") {
    const auto uniform = softmax_over(std::vector<double>{0.0, 0.0, 0.0});
    for (double v : uniform) {
        CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }
    CHECK(softmax_over(std::vector<double>{42.0}) == std::vector<double>{1.0});
    const auto quarter = softmax_over(std::vector<double>{0.0, std::log(3.0)});
    CHECK(quarter[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(quarter[1] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK_THROWS_AS(softmax_over(std::vector<double>{}), ContractError);

    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v(1 + rng.below(8));
        for (double& x : v) {
            x = rng.uniform(-30.0, 30.0);
        }
        const auto p = softmax_over(v);
        CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-12);
        CHECK(std::all_of(p.begin(), p.end(), [](double x) { return x > 0.0; }));
        std::vector<double> shifted = v;
        for (double& x : shifted) {
            x += 1000.0;
        }
        const auto q = softmax_over(shifted);
        for (std::size_t i = 0; i < p.size(); ++i) {
            CHECK(std::abs(p[i] - q[i]) < 1e-12);
        }
    }
}

TEST_CASE("vectorized tanh and sigmoid match libm and are position independent") {
    Rng rng(13);
    std::vector<double> xs(1000);
    for (double& x : xs) {
        x = rng.uniform(-25.0, 25.0);
    }
    xs[0] = 0.0;
    xs[1] = -0.0;
    xs[2] = 800.0;
    xs[3] = -800.0;
    std::vector<double> t = xs;
    std::vector<double> s = xs;
    tanh_inplace(t);
    sigmoid_inplace(s);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        CHECK(std::abs(t[i] - std::tanh(xs[i])) <= 1e-15);
        CHECK(std::abs(s[i] - 1.0 / (1.0 + std::exp(-xs[i]))) <= 1e-15);
    }
    CHECK(t[2] == 1.0);
    CHECK(t[3] == -1.0);

    // The same value gives the same bits at every offset and in every length.
    for (std::size_t len : {1u, 7u, 255u, 256u, 257u, 600u}) {
        std::vector<double> v(len, 0.37);
        tanh_inplace(v);
        CHECK(std::all_of(v.begin(), v.end(), [&](double y) { return y == v.front(); }));
        std::vector<double> single{0.37};
        tanh_inplace(single);
        CHECK(v.front() == single.front());
    }
}

TEST_CASE("canonical_sum depends only on the multiset") {
    Rng rng(17);
    std::vector<double> v(50);
    for (double& x : v) {
        x = rng.uniform(-1e6, 1e6) * std::pow(10.0, rng.uniform(-8.0, 0.0));
    }
    std::vector<double> copy = v;
    const double reference = canonical_sum(copy);
    for (int trial = 0; trial < 20; ++trial) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[rng.below(i)]);
        }
        std::vector<double> w = v;
        CHECK(canonical_sum(w) == reference);
    }
}

TEST_CASE("population_moments of {1,2,3}") {
    const auto m = population_moments(std::vector<double>{1.0, 2.0, 3.0});
    CHECK(m.mean == 2.0);
    CHECK(m.variance == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("backward examples") {
    {
        Tape tape;
        const Var x = tape.leaf(Matrix{{3.0}});
        const Var y = row_sums(hadamard(x, x));
        tape.backward(y);
        CHECK(tape.grad(x) == Matrix{{6.0}});
    }
    {
        Rng rng(2);
        Tape tape;
        const Matrix c = random_matrix(3, 4, rng);
        const Var x = tape.leaf(random_matrix(3, 4, rng));
        const Var y = column_sums(row_sums(hadamard(tape.constant(c), x)));
        tape.backward(y);
        CHECK(tape.grad(x) == c);
    }
    {
        Tape tape;
        const Var x = tape.leaf(Matrix(2, 2, 1.0));
        CHECK_THROWS_AS(tape.backward(x), ContractError);
    }
}

TEST_CASE("backward of an untouched leaf is zeros of its shape") {
    Tape tape;
    const Var x = tape.leaf(Matrix(2, 3, 1.0));
    const Var unused = tape.leaf(Matrix(4, 1, 1.0));
    tape.backward(column_sums(row_sums(x)));
    CHECK(tape.grad(unused) == Matrix(4, 1));
    CHECK(tape.grad(x) == Matrix(2, 3, 1.0));
}

namespace {

/// Central differences of a scalar tape output with respect to every entry of
/// every leaf; returns the worst relative error against the tape's gradient.
double worst_relative_error(Tape& tape, Var loss, const std::vector<Var>& leaves, double h = 1e-5) {
    tape.backward(loss);
    double worst = 0.0;
    for (const Var& leaf : leaves) {
        const Matrix analytic = tape.grad(leaf);
        Matrix value = tape.value(leaf);
        for (std::size_t k = 0; k < value.size(); ++k) {
            const double original = value.values()[k];
            value.values()[k] = original + h;
            tape.set_value(leaf, value);
            tape.replay();
            const double up = tape.value(loss)(0, 0);
            value.values()[k] = original - h;
            tape.set_value(leaf, value);
            tape.replay();
            const double down = tape.value(loss)(0, 0);
            value.values()[k] = original;
            tape.set_value(leaf, value);
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic.values()[k];
            worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}));
        }
    }
    tape.replay();
    return worst;
}

} // namespace

TEST_CASE("two-layer tanh composition matches finite differences") {
    Rng rng(4);
    Tape tape;
    const Var x = tape.leaf(random_matrix(4, 3, rng));
    const Var w1 = tape.leaf(random_matrix(3, 3, rng));
    const Var w2 = tape.leaf(random_matrix(3, 3, rng));
    const Var target = tape.constant(random_matrix(4, 3, rng));
    const Var h = tanh(matmul(x, w1));
    const Var out = tanh(matmul(h, w2));
    const Var diff = subtract(out, target);
    const Var loss = column_sums(row_sums(hadamard(diff, diff)));
    CHECK(worst_relative_error(tape, loss, {x, w1, w2}) < 1e-4);
}

TEST_CASE("every differentiable primitive matches finite differences") {
    Rng rng(9);
    Tape tape;
    const Var a = tape.leaf(random_matrix(4, 3, rng));
    const Var b = tape.leaf(random_matrix(4, 3, rng));
    const Var c = tape.leaf(random_matrix(3, 2, rng));
    Matrix target = random_matrix(4, 2, rng, 0.5, 2.0);
    Matrix mask(4, 2, 1.0);
    mask(1, 1) = 0.0;

    const Var ab[] = {sigmoid(a), relu(b)};
    const Var joined = concat_cols(ab);
    const Var mixed = add(slice_cols(joined, 1, 3), hadamard(tanh(a), b));
    const Var shifted = add_scalar(scale(subtract(mixed, b), 0.7), 0.2);
    const Var soft = softmax_rows(shifted);
    const Var pred = matmul(soft, c);
    const Var loss = add(masked_mae(pred, target, mask), scale(column_sums(row_sums(soft)), 0.01));
    CHECK(worst_relative_error(tape, loss, {a, b, c}) < 1e-4);
}

TEST_CASE("propagate gradient matches finite differences for both reduction orders") {
    Rng rng(12);
    Matrix op_dense(3, 4);
    for (double& v : op_dense.values()) {
        v = rng.uniform() < 0.6 ? rng.uniform(0.1, 1.0) : 0.0;
    }
    const PropagationOperator op(op_dense);
    for (ReductionOrder order : {ReductionOrder::Sequential, ReductionOrder::Canonical}) {
        Tape tape(order);
        const Var x = tape.leaf(random_matrix(8, 2, rng));
        const Var y = tanh(propagate(op, x));
        const Var loss = column_sums(row_sums(hadamard(y, y)));
        CHECK(worst_relative_error(tape, loss, {x}) < 1e-4);
    }
}

TEST_CASE("propagation applies block-wise and matches the dense product") {
    Rng rng(14);
    Matrix dense(5, 4);
    for (double& v : dense.values()) {
        v = rng.uniform() < 0.5 ? rng.uniform(0.1, 1.0) : 0.0;
    }
    const PropagationOperator op(dense);
    const Matrix x = random_matrix(12, 7, rng);
    for (ReductionOrder order : {ReductionOrder::Sequential, ReductionOrder::Canonical}) {
        const Matrix y = op.apply(x, order);
        REQUIRE(y.rows() == 15);
        for (std::size_t b = 0; b < 3; ++b) {
            Matrix block(4, 7);
            std::copy_n(x.row(4 * b).begin(), 28, block.values().begin());
            const Matrix expected = naive_product(dense, block);
            for (std::size_t i = 0; i < 5; ++i) {
                for (std::size_t f = 0; f < 7; ++f) {
                    CHECK(std::abs(y(5 * b + i, f) - expected(i, f)) < 1e-14);
                }
            }
        }
    }
    const Matrix g = random_matrix(15, 7, rng);
    const Matrix back = op.apply_transpose(g);
    REQUIRE(back.rows() == 12);
    for (std::size_t b = 0; b < 3; ++b) {
        Matrix block(5, 7);
        std::copy_n(g.row(5 * b).begin(), 35, block.values().begin());
        const Matrix expected = naive_product(transpose(dense), block);
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t f = 0; f < 7; ++f) {
                CHECK(std::abs(back(4 * b + i, f) - expected(i, f)) < 1e-14);
            }
        }
    }
    CHECK_THROWS_AS(op.apply(Matrix(5, 2)), DimensionError);
}

TEST_CASE("replaying a recorded computation is bit-identical") {
    Rng rng(6);
    Tape tape;
    const Var x = tape.leaf(random_matrix(5, 4, rng));
    const Var w = tape.leaf(random_matrix(4, 4, rng));
    const Var y = softmax_rows(tanh(matmul(x, w)));
    const Matrix before = tape.value(y);
    tape.replay();
    CHECK(tape.value(y) == before);
}

TEST_CASE("adam_step examples") {
    SUBCASE("zero gradient without decay leaves parameters unchanged") {
        std::vector<Matrix> params{Matrix{{1.5, -2.0}}};
        const std::vector<Matrix> grads{Matrix(1, 2)};
        AdamState state = AdamState::for_parameters(params);
        adam_step(params, grads, state);
        CHECK(params[0] == Matrix{{1.5, -2.0}});
        CHECK(state.step == 1);
    }
    SUBCASE("first step with unit gradient moves by the learning rate") {
        std::vector<Matrix> params{Matrix{{0.0}}};
        const std::vector<Matrix> grads{Matrix{{1.0}}};
        AdamState state = AdamState::for_parameters(params);
        state.learning_rate = 0.01;
        adam_step(params, grads, state);
        // m_hat = 1, v_hat = 1: delta = -0.01 / (1 + 1e-8).
        CHECK(params[0](0, 0) == doctest::Approx(-0.01 / (1.0 + 1e-8)).epsilon(1e-14));
    }
    SUBCASE("weight decay alone acts as a gradient of wd * p") {
        std::vector<Matrix> params{Matrix{{1.0}}};
        const std::vector<Matrix> grads{Matrix{{0.0}}};
        AdamState state = AdamState::for_parameters(params);
        state.learning_rate = 0.01;
        state.weight_decay = 2e-4;
        adam_step(params, grads, state);
        const double expected = 1.0 - 0.01 * 2e-4 / (2e-4 + 1e-8);
        CHECK(params[0](0, 0) == doctest::Approx(expected).epsilon(1e-14));
        CHECK(std::abs(params[0](0, 0) - (1.0 - 0.01)) < 1e-4);
    }
    SUBCASE("step counts updates and moments keep parameter shapes") {
        std::vector<Matrix> params{Matrix(2, 3, 1.0), Matrix(4, 1, -1.0)};
        const std::vector<Matrix> grads{Matrix(2, 3, 0.5), Matrix(4, 1, 0.25)};
        AdamState state = AdamState::for_parameters(params);
        for (int i = 0; i < 3; ++i) {
            adam_step(params, grads, state);
        }
        CHECK(state.step == 3);
        CHECK(state.first_moment[0].same_shape(params[0]));
        CHECK(state.second_moment[1].same_shape(params[1]));
    }
    SUBCASE("shape mismatch") {
        std::vector<Matrix> params{Matrix(2, 2)};
        const std::vector<Matrix> grads{Matrix(2, 3)};
        AdamState state = AdamState::for_parameters(params);
        CHECK_THROWS_AS(adam_step(params, grads, state), DimensionError);
        const std::vector<Matrix> none;
        CHECK_THROWS_AS(adam_step(params, none, state), DimensionError);
    }
}

TEST_CASE("a nonzero gradient step changes some parameter") {
    Rng rng(30);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Matrix> params{random_matrix(3, 3, rng)};
        const std::vector<Matrix> before = params;
        std::vector<Matrix> grads{random_matrix(3, 3, rng)};
        AdamState state = AdamState::for_parameters(params);
        state.learning_rate = 1e-3;
        adam_step(params, grads, state);
        CHECK(params != before);
    }
}

TEST_CASE("SplitMix64 reference outputs") {
    // First outputs for seed 0 as published with the generator's reference code.
    Rng rng(0);
    CHECK(rng.next() == 0xe220a8397b1dcdafULL);
    CHECK(rng.next() == 0x6e789e6aa1b965f4ULL);
    CHECK(rng.next() == 0x06c45d188009454fULL);

    Rng bounded(99);
    for (int i = 0; i < 1000; ++i) {
        CHECK(bounded.below(7) < 7);
        const double u = bounded.uniform();
        CHECK((u >= 0.0 && u < 1.0));
    }
}
