#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "agfv/tensor.hpp"

namespace agfv {

enum class LayerKind : std::uint8_t {
    Conv = 0,
    MaxPool = 1,
    Relu = 2,
    Lrn = 3,
    FullyConnected = 4,
    Dropout = 5,
    L2Norm = 6,
    ConcatInject = 7,
};

std::string layer_kind_name(LayerKind kind);

struct LayerSpec {
    LayerKind kind = LayerKind::Relu;

    // conv
    std::size_t out_channels = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;
    // maxpool
    std::size_t window = 0;
    // lrn (cross-channel, AlexNet constants by default)
    double lrn_k = 2.0;
    std::size_t lrn_n = 5;
    double lrn_alpha = 1e-4;
    double lrn_beta = 0.75;
    // dropout
    double rate = 0.0;
    // fully connected
    std::size_t fan_out = 0;
    // concat_inject
    std::size_t inject_width = 0;

    static LayerSpec conv(std::size_t out_channels, std::size_t kernel, std::size_t stride = 1);
    static LayerSpec maxpool(std::size_t window, std::size_t stride);
    static LayerSpec relu();
    static LayerSpec lrn(double k = 2.0, std::size_t n = 5, double alpha = 1e-4,
                         double beta = 0.75);
    static LayerSpec fully_connected(std::size_t fan_out);
    static LayerSpec dropout(double rate);
    static LayerSpec l2norm();
    static LayerSpec concat_inject(std::size_t inject_width);

    void validate(std::size_t index) const;
};

enum class Precision : std::uint8_t { F64 = 0, F32 = 1 };

struct NetworkConfig {
    std::size_t input_side = 32;
    std::size_t input_channels = 1;
    std::vector<LayerSpec> layers;
    std::size_t fc6_width = 64;
    std::size_t fc7_width = 64;
    std::size_t fc8_classes = 0;
    Precision precision = Precision::F64;

    /// Shape-checks the layer sequence end to end; returns the output shape
    /// of every layer. Throws ShapeError naming the offending layer.
    std::vector<std::vector<std::size_t>> shape_check() const;

    std::vector<std::size_t> input_shape() const {
        return {input_channels, input_side, input_side};
    }
    std::vector<std::size_t> output_shape() const { return shape_check().back(); }

    /// AlexNet geometry adapted to 200x200x1, classifier head included.
    static NetworkConfig paper200(std::size_t num_classes = 10575);
    /// Small preset used by all tests and the desk-scale benchmark.
    static NetworkConfig desk32(std::size_t num_classes);

    /// Embedding head: everything up to the L2-normalized fc7 representation,
    /// with an optional injection slot before fc7.
    static NetworkConfig desk32_embedding(std::size_t inject_width = 0);
    static NetworkConfig paper200_embedding(std::size_t inject_width = 0);
};

struct ParamEntry {
    Tensor weight;  // empty for parameterless layers
    Tensor bias;
};

struct ModelParams {
    std::vector<ParamEntry> layers;
    Precision precision = Precision::F64;

    bool all_finite() const;
};

/// Gradients and momentum buffers share the ModelParams layout.
using Gradients = ModelParams;

enum class RunMode { Train, Eval };

struct LayerTrace {
    Tensor input;
    Tensor output;
    Tensor aux;  // dropout mask, maxpool argmax, lrn denominators
};

struct ForwardTrace {
    std::vector<LayerTrace> layers;
    Tensor output;
    RunMode mode = RunMode::Eval;
};

/// Per-pair external scores, z-normalized before entering the network.
/// Empty when the network has no ConcatInject layer.
struct InjectedFeatures {
    Tensor normalized;  // (d - mean) / std, constant input during backprop
};

ForwardTrace forward(const NetworkConfig& net, const ModelParams& params, const Tensor& x,
                     RunMode mode, Rng* rng = nullptr,
                     const InjectedFeatures* injected = nullptr);

/// Returns parameter gradients plus the gradient w.r.t. the network input.
struct BackwardResult {
    Gradients grads;
    Tensor input_grad;
};

BackwardResult backward(const NetworkConfig& net, const ModelParams& params,
                        const ForwardTrace& trace, const Tensor& upstream_grad);

ModelParams init_params(const NetworkConfig& net, Rng& rng);
Gradients zero_like(const ModelParams& params);
void accumulate(Gradients& into, const Gradients& grads, double scale = 1.0);

struct SgdState {
    Gradients momentum;  // same layout as params
};

void sgd_step(ModelParams& params, const Gradients& grads, SgdState& state, double lr,
              double momentum, double weight_decay);

struct SoftmaxXentResult {
    double loss = 0.0;
    Tensor grad;  // d loss / d logits
};

SoftmaxXentResult softmax_xent_loss(const Tensor& logits, std::size_t label);

}  // namespace agfv
