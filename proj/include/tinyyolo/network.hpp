// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tinyyolo/model_config.hpp"
#include "tinyyolo/ops.hpp"
#include "tinyyolo/quant.hpp"

namespace tinyyolo {

/// Weight and bias of one conv3x3 or fc layer, in config order.
struct LayerParams {
    Tensor weight;
    Tensor bias;

    friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

/// Fake-quantization state for quantization-aware training.
///
/// Quantization points are the network input (fixed scale 1/128) and the output
/// of every conv/fc layer, taken after its fused relu. Pooling and flatten keep
/// the scale of their input, so the int8 path sees exactly these points.
struct QatState {
    bool enabled = false;
    bool activations_frozen = false;
    float input_scale = 1.0f / 128.0f;
    std::vector<float> weight_scales;   // per param layer
    std::vector<float> activation_max;  // running max |output| per param layer

    QuantParams input_params() const { return QuantParams{input_scale}; }
    QuantParams weight_params(std::size_t layer) const { return QuantParams{weight_scales.at(layer)}; }
    QuantParams activation_params(std::size_t layer) const { return scale_for_max(activation_max.at(layer)); }

    friend bool operator==(const QatState&, const QatState&) = default;
};

/// Intermediate values recorded by Network::forward for the backward pass.
struct ForwardTrace {
    std::vector<Tensor> inputs;    // input of each config layer
    std::vector<Tensor> pre_quant;  // value before activation fake-quant (quant points only)
    std::vector<PoolCache> pools;
    Tensor network_input;          // before input fake-quant
};

/// Float model built from a ModelConfig, with optional fake quantization.
class Network {
public:
    explicit Network(ModelConfig cfg);

    const ModelConfig& config() const { return cfg_; }

    const std::vector<LayerParams>& params() const { return params_; }
    /// Mutable access; effective (fake-quantized) weights are refreshed lazily.
    std::vector<LayerParams>& mutable_params() {
        dirty_ = true;
        return params_;
    }

    const QatState& qat() const { return qat_; }
    void set_qat(QatState state);

    /// Kaiming-uniform fan-in init, bound sqrt(6 / fan_in), zero biases.
    void init_kaiming(std::uint64_t seed);

    /// Freezes weight scales from the current weights and enables fake quantization.
    /// Activation ranges start empty and are tracked until freeze_activation_scales().
    void begin_qat();
    void freeze_activation_scales();

    /// Runs the model. With `trace`, records what backward() needs. When QAT
    /// is enabled and activations are not frozen, forward updates the running maxima.
    Tensor forward(const Tensor& input, ForwardTrace* trace = nullptr);
    /// Inference only; never updates running maxima.
    Tensor predict(const Tensor& input) const;

    /// Gradients for every param layer given d loss / d output.
    std::vector<LayerParams> backward(const Tensor& grad_out, const ForwardTrace& trace) const;

    /// Params initialized to zero with the right shapes.
    std::vector<LayerParams> zero_like() const;

    /// Config-layer index -> param-layer index (or -1).
    const std::vector<int>& param_slot() const { return slot_; }

private:
    Tensor run(const Tensor& input, ForwardTrace* trace, std::vector<float>* track_max) const;
    const std::vector<LayerParams>& effective() const;

    ModelConfig cfg_;
    std::vector<LayerParams> params_;
    std::vector<int> slot_;
    std::vector<int> quant_point_;  // config-layer -> param layer whose output is quantized after it
    QatState qat_;
    mutable std::vector<LayerParams> effective_;
    mutable bool dirty_ = true;
};

/// Integer-only model exported from a QAT-calibrated network.
class QuantizedModel {
public:
    QuantizedModel() = default;
    QuantizedModel(ModelConfig cfg, QuantParams input, std::vector<QuantizedLayer> layers);

    /// Requires net.qat() to hold weight scales and activation ranges.
    static QuantizedModel from_network(const Network& net);

    const ModelConfig& config() const { return cfg_; }
    QuantParams input_params() const { return input_; }
    const std::vector<QuantizedLayer>& layers() const { return layers_; }

    /// Integer inference on already-quantized input codes.
    QActivation run(const Int8Tensor& input_codes) const;
    /// Quantizes a float CHW input, runs, and dequantizes the head output.
    Tensor predict(const Tensor& input) const;

    friend bool operator==(const QuantizedModel&, const QuantizedModel&) = default;

private:
    ModelConfig cfg_;
    QuantParams input_;
    std::vector<QuantizedLayer> layers_;
};

}  // namespace tinyyolo
