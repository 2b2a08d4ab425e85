#include "doctest.h"

#include "fixtures.hpp"

#include "mrabgcn/checkpoint.hpp"
#include "mrabgcn/diagnostics.hpp"
#include "mrabgcn/model.hpp"

#include <cmath>
#include <sstream>

using namespace mrabgcn;
using testing::random_matrix;

namespace {

ModelConfig small_config(RangeMixing mixing = RangeMixing::Attention, std::size_t k = 2) {
    ModelConfig c;
    c.max_hop = k;
    c.hidden = 4;
    c.rnn_layers = 1;
    c.history = 3;
    c.horizon = 2;
    c.mixing = mixing;
    return c;
}

Matrix apply_activation(Matrix m, Activation rho) {
    for (double& v : m.values()) {
        switch (rho) {
        case Activation::Identity:
            break;
        case Activation::Tanh:
            v = std::tanh(v);
            break;
        case Activation::Sigmoid:
            v = 1.0 / (1.0 + std::exp(-v));
            break;
        case Activation::Relu:
            v = std::max(v, 0.0);
            break;
        }
    }
    return m;
}

} // namespace

TEST_CASE("graph_conv examples") {
    Tape tape;
    Rng rng(1);
    const Matrix x = random_matrix(3, 2, rng);
    const PropagationOperator identity(Matrix::identity(3));
    const Var out = graph_conv(tape.constant(x), identity, tape.constant(Matrix::identity(2)), Activation::Identity);
    CHECK(out.value() == x);

    const PropagationOperator half(Matrix{{0.5, 0.5}, {0.0, 1.0}});
    const Var hand = graph_conv(tape.constant(Matrix{{2.0}, {4.0}}), half, tape.constant(Matrix{{1.0}}),
                                Activation::Identity);
    CHECK(hand.value() == Matrix{{3.0}, {4.0}});

    // Row-stochastic averaging keeps a node-constant signal constant.
    const PropagationOperator avg(normalize(Matrix{{0, 1, 1}, {1, 0, 0}, {0, 1, 0}}));
    const Var constant =
        graph_conv(tape.constant(Matrix(3, 2, 0.7)), avg, tape.constant(random_matrix(2, 3, rng)), Activation::Tanh);
    for (std::size_t i = 1; i < 3; ++i) {
        for (std::size_t f = 0; f < 3; ++f) {
            CHECK(constant.value()(i, f) == doctest::Approx(constant.value()(0, f)).epsilon(1e-15));
        }
    }

    CHECK_THROWS_AS(graph_conv(tape.constant(Matrix(3, 2)), identity, tape.constant(Matrix(3, 1))), DimensionError);
}

TEST_CASE("bicomponent_forward shapes and loop boundary") {
    Rng rng(3);
    const NodeGraph g = testing::random_graph(4, 5, rng);
    const GraphOperators ops = testing::operators_for(g);
    ModelConfig c = small_config(RangeMixing::LastHop, 3);
    c.hidden = 8;
    c.input_dim = 2;
    ModelParams params = ModelParams::initialize(c, rng);
    Tape tape;
    const ModelVars vars = ModelVars::bind(tape, params);
    // The first encoder gate sees [x | h] of width p + F = 10.
    const Var x0 = tape.constant(random_matrix(4, 10, rng));
    const auto hops = bicomponent_forward(x0, ops, vars.encoder[0].update, 3);
    REQUIRE(hops.size() == 3);
    for (const Var& h : hops) {
        CHECK(h.rows() == 4);
        CHECK(h.cols() == 8);
    }
    CHECK(tape.value(vars.all[params.encoder[0].update.theta_edge[0]]).rows() == 8);

    const std::size_t before = tape.size();
    const auto single = bicomponent_forward(x0, ops, vars.encoder[0].update, 1);
    CHECK(single.size() == 1);
    // One hop records only matmul, propagate and tanh.
    CHECK(tape.size() - before == 3);
    CHECK(single[0].value() == hops[0].value());
    CHECK_THROWS_AS(bicomponent_forward(x0, ops, vars.encoder[0].update, 0), ContractError);
}

TEST_CASE("identity edge variant with a zero edge projection reduces to a node GCN stack") {
    Rng rng(8);
    const NodeGraph g = testing::random_graph(5, 8, rng);
    const GraphOperators ops = testing::operators_for(g, EdgeVariant::Identity);
    ModelConfig c = small_config(RangeMixing::LastHop, 3);
    c.edge_variant = EdgeVariant::Identity;
    ModelParams params = ModelParams::initialize(c, rng);
    params.tensors[params.encoder[0].update.edge_projection].value.fill(0.0);
    Tape tape;
    const ModelVars vars = ModelVars::bind(tape, params);
    const Matrix x0 = random_matrix(5, 1 + c.hidden, rng);
    const auto hops = bicomponent_forward(tape.constant(x0), ops, vars.encoder[0].update, 3);

    // Plain node GCN on [X | 0] computed with dense matrices.
    const Matrix a_hat = normalize(g.adjacency);
    const GateSlots& slots = params.encoder[0].update;
    Matrix x = apply_activation(matmul(a_hat, matmul(x0, params.tensors[slots.theta_node[0]].value)), Activation::Tanh);
    CHECK(max_abs(subtract(x, hops[0].value())) < 1e-14);
    for (std::size_t l = 1; l < 3; ++l) {
        Matrix widened(5, 2 * c.hidden);
        for (std::size_t i = 0; i < 5; ++i) {
            std::copy(x.row(i).begin(), x.row(i).end(), widened.row(i).begin());
        }
        x = apply_activation(matmul(a_hat, matmul(widened, params.tensors[slots.theta_node[l]].value)),
                             Activation::Tanh);
        CHECK(max_abs(subtract(x, hops[l].value())) < 1e-14);
    }
}

TEST_CASE("multi_range_attention examples") {
    Tape tape;
    Rng rng(4);
    SUBCASE("single layer is returned unchanged") {
        const Var x = tape.constant(random_matrix(3, 2, rng));
        const Var layers[] = {x};
        const auto out = multi_range_attention(layers, tape.constant(random_matrix(2, 2, rng)),
                                               tape.constant(random_matrix(2, 1, rng)));
        CHECK(out.output.value() == x.value());
        CHECK(out.weights.value() == Matrix(3, 1, 1.0));
    }
    SUBCASE("zero projection gives the per-node mean") {
        const Var layers[] = {tape.constant(random_matrix(3, 2, rng)), tape.constant(random_matrix(3, 2, rng)),
                              tape.constant(random_matrix(3, 2, rng))};
        const auto out =
            multi_range_attention(layers, tape.constant(Matrix(2, 2)), tape.constant(random_matrix(2, 1, rng)));
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t f = 0; f < 2; ++f) {
                const double mean =
                    (layers[0].value()(i, f) + layers[1].value()(i, f) + layers[2].value()(i, f)) / 3.0;
                CHECK(out.output.value()(i, f) == doctest::Approx(mean).epsilon(1e-14));
            }
        }
    }
    SUBCASE("hand mix of 2 and 4") {
        // Scores are X_l * (W_a u) = (ln 3, 2 ln 3); softmax gives (1/4, 3/4).
        const Var layers[] = {tape.constant(Matrix{{2.0}}), tape.constant(Matrix{{4.0}})};
        const auto out = multi_range_attention(layers, tape.constant(Matrix{{1.0}}),
                                               tape.constant(Matrix{{std::log(3.0) / 2.0}}));
        CHECK(out.weights.value()(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
        CHECK(out.output.value()(0, 0) == doctest::Approx(3.5).epsilon(1e-15));
    }
    SUBCASE("empty and mismatched layers") {
        CHECK_THROWS_AS(multi_range_attention({}, Var{}, Var{}), ContractError);
        const Var layers[] = {tape.constant(Matrix(3, 2)), tape.constant(Matrix(3, 3))};
        CHECK_THROWS_AS(
            multi_range_attention(layers, tape.constant(Matrix(2, 2)), tape.constant(Matrix(2, 1))),
            DimensionError);
    }
}

TEST_CASE("attention output is a convex combination with normalised weights") {
    Rng rng(19);
    for (int trial = 0; trial < 50; ++trial) {
        Tape tape;
        const std::size_t k = 1 + rng.below(4);
        const std::size_t n = 1 + rng.below(6);
        const std::size_t f = 1 + rng.below(5);
        std::vector<Var> layers;
        for (std::size_t l = 0; l < k; ++l) {
            layers.push_back(tape.constant(random_matrix(n, f, rng, -3.0, 3.0)));
        }
        const auto out = multi_range_attention(layers, tape.constant(random_matrix(f, 3, rng, -4.0, 4.0)),
                                               tape.constant(random_matrix(3, 1, rng, -4.0, 4.0)));
        for (std::size_t i = 0; i < n; ++i) {
            double sum = 0.0;
            for (std::size_t l = 0; l < k; ++l) {
                sum += out.weights.value()(i, l);
            }
            CHECK(std::abs(sum - 1.0) <= 1e-12);
            for (std::size_t c = 0; c < f; ++c) {
                double lo = layers[0].value()(i, c);
                double hi = lo;
                for (const Var& x : layers) {
                    lo = std::min(lo, x.value()(i, c));
                    hi = std::max(hi, x.value()(i, c));
                }
                const double v = out.output.value()(i, c);
                CHECK(v >= lo - 1e-12);
                CHECK(v <= hi + 1e-12);
            }
        }
    }
}

TEST_CASE("mra_bgcn variants") {
    Rng rng(23);
    const NodeGraph g = testing::random_graph(5, 7, rng);
    const GraphOperators ops = testing::operators_for(g);
    const Matrix x = random_matrix(5, 1 + 4, rng);

    ModelConfig last = small_config(RangeMixing::LastHop, 1);
    ModelParams lp = ModelParams::initialize(last, rng);
    Tape tape;
    const ModelVars lv = ModelVars::bind(tape, lp);
    const Var mixed = mra_bgcn(tape.constant(x), ops, lv.encoder[0].update, last);
    const Var direct = graph_conv(tape.constant(x), ops.node, lv.encoder[0].update.theta_node[0]);
    CHECK(mixed.value() == direct.value());

    for (RangeMixing mixing : {RangeMixing::Attention, RangeMixing::Concat, RangeMixing::LastHop}) {
        const ModelConfig c = small_config(mixing, 3);
        const ModelParams p = ModelParams::initialize(c, rng);
        const ModelVars v = ModelVars::bind(tape, p);
        const Var out = mra_bgcn(tape.constant(x), ops, v.encoder[0].reset, c);
        CHECK(out.rows() == 5);
        CHECK(out.cols() == 4);
        CHECK(parse_range_mixing(to_string(mixing)) == mixing);
    }
    CHECK_THROWS_AS(parse_range_mixing("sum"), ContractError);
}

TEST_CASE("bgcgru_step with zero parameters halves the hidden state") {
    Rng rng(2);
    const NodeGraph g = testing::random_graph(4, 5, rng);
    const GraphOperators ops = testing::operators_for(g);
    for (RangeMixing mixing : {RangeMixing::Attention, RangeMixing::Concat, RangeMixing::LastHop}) {
        const ModelConfig c = small_config(mixing, 2);
        const ModelParams params = ModelParams::zeros(c);
        Tape tape;
        const ModelVars vars = ModelVars::bind(tape, params);
        const Matrix h = random_matrix(4, 4, rng);
        const Var out = bgcgru_step(tape.constant(random_matrix(4, 1, rng)), tape.constant(h), ops, vars.encoder[0], c);
        CHECK(out.value() == scaled(h, 0.5));
    }
}

TEST_CASE("bgcgru_step gate ranges and bounded rollouts") {
    Rng rng(31);
    const NodeGraph g = testing::random_graph(6, 10, rng);
    const GraphOperators ops = testing::operators_for(g);
    for (int trial = 0; trial < 10; ++trial) {
        ModelConfig c = small_config(RangeMixing::Attention, 2);
        c.input_dim = 1 + rng.below(3);
        ModelParams params = ModelParams::initialize(c, rng);
        for (auto& t : params.tensors) {
            t.value = scaled(t.value, 3.0);
        }
        Tape tape;
        const ModelVars vars = ModelVars::bind(tape, params);
        Matrix h = random_matrix(6, 4, rng, -2.0, 2.0);
        const double bound = std::max(max_abs(h), 1.0);
        for (int step = 0; step < 20; ++step) {
            const Var x = tape.constant(random_matrix(6, c.input_dim, rng, -5.0, 5.0));
            const Var next = bgcgru_step(x, tape.constant(h), ops, vars.encoder[0], c);
            CHECK(next.rows() == 6);
            CHECK(next.cols() == 4);
            h = next.value();
            CHECK(max_abs(h) <= bound);
        }
        // Gate activations: sigmoid in (0, 1), tanh in (-1, 1).
        const Var joint_parts[] = {tape.constant(random_matrix(6, c.input_dim, rng)), tape.constant(h)};
        const Var joint = concat_cols(joint_parts);
        const Var z = sigmoid(mra_bgcn(joint, ops, vars.encoder[0].update, c));
        const Var cand = tanh(mra_bgcn(joint, ops, vars.encoder[0].candidate, c));
        for (double v : z.value().values()) {
            CHECK((v > 0.0 && v < 1.0));
        }
        for (double v : cand.value().values()) {
            CHECK((v > -1.0 && v < 1.0));
        }
    }
    Tape tape;
    const ModelConfig c = small_config();
    const ModelVars vars = ModelVars::bind(tape, ModelParams::zeros(c));
    CHECK_THROWS_AS(bgcgru_step(tape.constant(Matrix(6, 1)), tape.constant(Matrix(5, 4)), ops, vars.encoder[0], c),
                    DimensionError);
}

TEST_CASE("forecast decoder inputs under teacher forcing") {
    Rng rng(12);
    const NodeGraph g = testing::random_graph(4, 6, rng);
    const GraphOperators ops = testing::operators_for(g);
    ModelConfig c = small_config(RangeMixing::Attention, 2);
    c.rnn_layers = 2;
    c.horizon = 3;
    const ModelParams params = ModelParams::initialize(c, rng);
    std::vector<Matrix> history;
    for (std::size_t t = 0; t < c.history; ++t) {
        history.push_back(random_matrix(8, 1, rng));
    }
    std::vector<Matrix> teacher;
    for (std::size_t t = 0; t < c.horizon; ++t) {
        teacher.push_back(random_matrix(8, 1, rng));
    }

    Tape tape;
    const ModelVars vars = ModelVars::bind(tape, params);
    ForecastOptions forced;
    forced.teacher = teacher;
    forced.sampling_probability = 1.0;
    const auto outputs = forecast(tape, history, ops, vars, c, forced);
    REQUIRE(outputs.size() == 3);

    // Manual unroll: encoder over history, then decoder fed 0, teacher[0], teacher[1].
    std::vector<Var> hidden(2, tape.constant(Matrix(8, 4)));
    for (const Matrix& x : history) {
        Var in = tape.constant(x);
        for (std::size_t l = 0; l < 2; ++l) {
            hidden[l] = bgcgru_step(in, hidden[l], ops, vars.encoder[l], c);
            in = hidden[l];
        }
    }
    const Matrix inputs[] = {Matrix(8, 1), teacher[0], teacher[1]};
    for (std::size_t t = 0; t < 3; ++t) {
        Var in = tape.constant(inputs[t]);
        for (std::size_t l = 0; l < 2; ++l) {
            hidden[l] = bgcgru_step(in, hidden[l], ops, vars.decoder[l], c);
            in = hidden[l];
        }
        // Record before reading values: recording can move earlier values.
        const Var manual = matmul(in, vars.output_projection);
        CHECK(manual.value() == outputs[t].value());
    }

    // Without a teacher the result depends on history and parameters only.
    const auto free1 = predict(history, ops, params);
    const auto free2 = predict(history, ops, params);
    CHECK(free1 == free2);
    Tape other;
    const auto free3 = forecast(other, history, ops, ModelVars::bind(other, params, false), c);
    for (std::size_t t = 0; t < 3; ++t) {
        CHECK(max_abs(subtract(free3[t].value(), free1[t])) < 1e-12);
    }
    CHECK(free1[1] != outputs[1].value());
}

TEST_CASE("forecast contract errors") {
    Rng rng(13);
    const NodeGraph g = testing::random_graph(4, 6, rng);
    const GraphOperators ops = testing::operators_for(g);
    const ModelConfig c = small_config();
    const ModelParams params = ModelParams::initialize(c, rng);
    Tape tape;
    const ModelVars vars = ModelVars::bind(tape, params);
    const std::vector<Matrix> history(c.history, Matrix(4, 1));
    const std::vector<Matrix> short_history(c.history - 1, Matrix(4, 1));
    CHECK_THROWS_AS(forecast(tape, short_history, ops, vars, c), ContractError);
    ForecastOptions no_teacher;
    no_teacher.sampling_probability = 0.5;
    CHECK_THROWS_AS(forecast(tape, history, ops, vars, c, no_teacher), ContractError);
    const std::vector<Matrix> teacher(c.horizon, Matrix(4, 1));
    ForecastOptions no_rng;
    no_rng.teacher = teacher;
    no_rng.sampling_probability = 0.5;
    CHECK_THROWS_AS(forecast(tape, history, ops, vars, c, no_rng), ContractError);
    const std::vector<Matrix> ragged(c.history, Matrix(5, 1));
    CHECK_THROWS_AS(forecast(tape, ragged, ops, vars, c), DimensionError);
}

TEST_CASE("relabelling nodes permutes forecasts exactly") {
    Rng rng(99);
    const NodeGraph g = testing::random_graph(7, 14, rng);
    const auto perm = testing::random_permutation(7, rng);
    const NodeGraph h = testing::relabel(g, perm);
    ModelConfig c = small_config(RangeMixing::Attention, 3);
    const ModelParams params = ModelParams::initialize(c, rng);
    std::vector<Matrix> history;
    std::vector<Matrix> relabelled;
    for (std::size_t t = 0; t < c.history; ++t) {
        history.push_back(random_matrix(14, 1, rng));
        relabelled.push_back(testing::relabel_rows(history.back(), perm));
    }
    for (EdgeVariant variant : {EdgeVariant::InteractionPatterns, EdgeVariant::LineGraph, EdgeVariant::Identity}) {
        const auto out = predict(history, testing::operators_for(g, variant), params);
        const auto out_relabelled = predict(relabelled, testing::operators_for(h, variant), params);
        for (std::size_t t = 0; t < out.size(); ++t) {
            CHECK(testing::relabel_rows(out[t], perm) == out_relabelled[t]);
        }
    }
}

TEST_CASE("ModelParams layout") {
    ModelConfig c = small_config(RangeMixing::Attention, 3);
    c.attention_dim = 5;
    Rng rng(6);
    const ModelParams p = ModelParams::initialize(c, rng);
    // Per gate: 3 theta_node, W_b, 2 theta_edge, W_a, u; 3 gates, encoder and decoder; output projection.
    CHECK(p.tensors.size() == 2 * 3 * 8 + 1);
    const Matrix& wa = p.tensors[p.index_of("encoder.layer0.update.attention_projection")].value;
    CHECK(wa.rows() == 4);
    CHECK(wa.cols() == 5);
    CHECK(p.tensors[p.index_of("decoder.layer0.candidate.theta_node0")].value.rows() == 5);
    CHECK(p.tensors[p.index_of("decoder.layer0.candidate.theta_node1")].value.rows() == 8);
    CHECK(p.tensors.back().name == "decoder.output_projection");
    CHECK_THROWS_AS((void)p.index_of("nope"), ContractError);

    std::size_t scalars = 0;
    for (const auto& t : p.tensors) {
        scalars += t.value.size();
        const double limit = std::sqrt(6.0 / static_cast<double>(t.value.rows() + t.value.cols()));
        CHECK(max_abs(t.value) <= limit);
    }
    CHECK(p.scalar_count() == scalars);

    Rng again(6);
    CHECK(ModelParams::initialize(c, again).values() == p.values());

    ModelParams q = ModelParams::zeros(c);
    q.assign(p.values());
    CHECK(q.values() == p.values());
    std::vector<Matrix> wrong = p.values();
    wrong.pop_back();
    CHECK_THROWS_AS(q.assign(wrong), DimensionError);

    ModelConfig bad = c;
    bad.hidden = 0;
    CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    Rng rng(71);
    ModelConfig c = small_config(RangeMixing::Concat, 3);
    c.edge_variant = EdgeVariant::LineGraph;
    Checkpoint ck;
    ck.params = ModelParams::initialize(c, rng);
    ck.params.tensors[0].value(0, 0) = -0.0;
    ck.params.tensors[1].value(0, 0) = 1e-310;
    ck.seed = 0xfeedfacecafebeefULL;
    ck.epoch = 17;
    ck.scaler_mean = 0.1 + 0.2;
    ck.scaler_std = 1.0 / 3.0;
    ck.metadata = {{"run_config", "{\"seed\":1}"}, {"note", "hello world"}};

    std::stringstream buffer;
    write_checkpoint(buffer, ck);
    const std::string bytes = buffer.str();
    const Checkpoint back = read_checkpoint(buffer);
    CHECK(back.params.config == c);
    CHECK(back.params.values() == ck.params.values());
    CHECK(std::signbit(back.params.tensors[0].value(0, 0)));
    CHECK(back.seed == ck.seed);
    CHECK(back.epoch == 17);
    CHECK(back.scaler_mean == ck.scaler_mean);
    CHECK(back.scaler_std == ck.scaler_std);
    CHECK(back.metadata == ck.metadata);

    std::stringstream again;
    write_checkpoint(again, back);
    CHECK(again.str() == bytes);

    const auto dir = testing::scratch_dir("unit_checkpoint");
    save_checkpoint(dir / "ck.bin", ck);
    CHECK(load_checkpoint(dir / "ck.bin").params.values() == ck.params.values());

    std::istringstream not_a_checkpoint("hello\n");
    CHECK_THROWS_AS(read_checkpoint(not_a_checkpoint), FormatError);
    std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(read_checkpoint(truncated), FormatError);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.bin"), FormatError);

    Checkpoint bad_meta = ck;
    bad_meta.metadata = {{"two\nlines", "x"}};
    std::stringstream sink;
    CHECK_THROWS_AS(write_checkpoint(sink, bad_meta), ContractError);
}
