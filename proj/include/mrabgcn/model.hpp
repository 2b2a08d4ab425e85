#ifndef MRABGCN_MODEL_HPP
#define MRABGCN_MODEL_HPP

#include "mrabgcn/autodiff.hpp"
#include "mrabgcn/graphs.hpp"
#include "mrabgcn/rng.hpp"

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mrabgcn {

/// How the k per-hop node representations are combined.
enum class RangeMixing {
    Attention, ///< multi-range attention (MRA-BGCN)
    Concat,    ///< concatenate all hops, project kF -> F (MR-BGCN)
    LastHop,   ///< use hop k only (BGCN)
};

std::string_view to_string(RangeMixing mixing);
/// Accepts "attention", "concat", "last-hop".
RangeMixing parse_range_mixing(std::string_view text);

struct ModelConfig {
    std::size_t max_hop = 3;
    std::size_t hidden = 64;
    std::size_t rnn_layers = 2;
    std::size_t input_dim = 1;
    std::size_t horizon = 12;
    std::size_t history = 12;
    EdgeVariant edge_variant = EdgeVariant::InteractionPatterns;
    RangeMixing mixing = RangeMixing::Attention;
    /// Width of the attention projection; 0 means "same as hidden".
    std::size_t attention_dim = 0;

    [[nodiscard]] std::size_t attention_width() const { return attention_dim == 0 ? hidden : attention_dim; }
    /// Throws ContractError on any zero count.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

/// Row-normalised node and edge adjacencies and the incidence pair, ready
/// for block-wise propagation.
struct GraphOperators {
    PropagationOperator node;
    PropagationOperator edge;
    PropagationOperator incidence;           ///< M, n x m
    PropagationOperator incidence_transpose; ///< M^T, m x n

    static GraphOperators build(const NodeGraph& g, const EdgeGraph& eg);

    [[nodiscard]] std::size_t nodes() const { return node.rows(); }
    [[nodiscard]] std::size_t edges() const { return edge.rows(); }
};

inline constexpr std::size_t kNoSlot = std::numeric_limits<std::size_t>::max();

/// Indices into ModelParams::tensors for one MRA-BGCN block.
struct GateSlots {
    std::vector<std::size_t> theta_node; ///< k entries: (width -> F), then (2F -> F)
    std::vector<std::size_t> theta_edge; ///< k-1 entries: F -> F
    std::size_t edge_projection = kNoSlot;      ///< W_b: width -> F
    std::size_t attention_projection = kNoSlot; ///< W_a: F x F'
    std::size_t context = kNoSlot;              ///< u: F' x 1
    std::size_t mixing_projection = kNoSlot;    ///< concat mixing only: kF -> F
};

struct CellSlots {
    std::size_t input_width = 0;
    GateSlots update;
    GateSlots reset;
    GateSlots candidate;
};

struct NamedMatrix {
    std::string name;
    Matrix value;
};

/// Every learnable array of the seq2seq forecaster, in a fixed order that
/// is also the checkpoint order.
struct ModelParams {
    ModelConfig config;
    std::vector<NamedMatrix> tensors;
    std::vector<CellSlots> encoder;
    std::vector<CellSlots> decoder;
    std::size_t output_projection = kNoSlot; ///< F -> input_dim

    /// Uniform in +-sqrt(6 / (rows + cols)) per matrix, drawn in tensor order.
    static ModelParams initialize(const ModelConfig& config, Rng& rng);
    static ModelParams zeros(const ModelConfig& config);

    [[nodiscard]] std::size_t scalar_count() const;
    [[nodiscard]] std::vector<Matrix> values() const;
    void assign(std::span<const Matrix> values);
    /// Throws ContractError for unknown names.
    [[nodiscard]] std::size_t index_of(std::string_view name) const;
};

struct GateVars {
    std::vector<Var> theta_node;
    std::vector<Var> theta_edge;
    Var edge_projection;
    Var attention_projection;
    Var context;
    Var mixing_projection;
};

struct CellVars {
    GateVars update;
    GateVars reset;
    GateVars candidate;
};

/// ModelParams recorded on a tape.
struct ModelVars {
    std::vector<Var> all; ///< same order as ModelParams::tensors
    std::vector<CellVars> encoder;
    std::vector<CellVars> decoder;
    Var output_projection;

    /// Leaves when `track`, constants otherwise.
    static ModelVars bind(Tape& tape, const ModelParams& params, bool track = true);
};

/// rho(op * x * theta).
Var graph_conv(Var x, const PropagationOperator& op, Var theta, Activation rho = Activation::Tanh);

/// k-hop bicomponent graph convolution. Returns [X1 .. Xk], each rows x F:
///   X1 = conv(x0; theta_n0)
///   Z0 = M^T x0 W_b
///   Z(l) = conv_edge(Z(l-1); theta_e(l-1))            l = 1 .. k-1
///   X(l+1) = conv([X(l) | M Z(l)]; theta_n(l))          l = 1 .. k-1
/// All convolutions use tanh.
std::vector<Var> bicomponent_forward(Var x0, const GraphOperators& graphs, const GateVars& gate, std::size_t k);

struct AttentionOutput {
    Var output;  ///< rows x F
    Var weights; ///< rows x k, each row sums to 1
};

/// Scores e_l = X_l (W_a u), softmax over l per row, output sum_l a_l X_l.
AttentionOutput multi_range_attention(std::span<const Var> layers, Var attention_projection, Var context);

/// Bicomponent convolution followed by the configured range mixing.
Var mra_bgcn(Var x, const GraphOperators& graphs, const GateVars& gate, const ModelConfig& config);

/// One BGCGRU update; returns the new hidden state.
Var bgcgru_step(Var x, Var h_prev, const GraphOperators& graphs, const CellVars& cell, const ModelConfig& config);

struct ForecastOptions {
    /// Teacher signals for the decoder (horizon entries), or empty.
    std::span<const Matrix> teacher;
    /// Probability of feeding the teacher signal at each decoder step.
    double sampling_probability = 0.0;
    /// Coin flips for 0 < sampling_probability < 1.
    Rng* rng = nullptr;
};

/// Encoder over `history` (history-length entries of (B*n) x P, batches
/// stacked by rows), decoder for `horizon` steps from a zero start token.
/// Returns horizon predictions of shape (B*n) x P.
std::vector<Var> forecast(Tape& tape, std::span<const Matrix> history, const GraphOperators& graphs,
                          const ModelVars& vars, const ModelConfig& config, const ForecastOptions& options = {});

/// Inference-only forecast on a private tape.
std::vector<Matrix> predict(std::span<const Matrix> history, const GraphOperators& graphs, const ModelParams& params,
                            ReductionOrder order = ReductionOrder::Canonical);

} // namespace mrabgcn

#endif // MRABGCN_MODEL_HPP
