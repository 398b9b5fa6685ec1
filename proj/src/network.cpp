// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "tinyyolo/network.hpp"

#include <algorithm>
#include <cmath>

#include "tinyyolo/rng.hpp"

namespace tinyyolo {

namespace {

float max_abs(std::span<const float> v) {
    float m = 0.0f;
    for (float x : v) m = std::max(m, std::fabs(x));
    return m;
}

}  // namespace

Network::Network(ModelConfig cfg) : cfg_(std::move(cfg)) {
    validate(cfg_);
    slot_.assign(cfg_.layers.size(), -1);
    quant_point_.assign(cfg_.layers.size(), -1);
    for (std::size_t i = 0; i < cfg_.layers.size(); ++i) {
        const LayerSpec& l = cfg_.layers[i];
        if (!l.has_params()) continue;
        slot_[i] = static_cast<int>(params_.size());
        if (l.kind == LayerKind::conv3x3)
            params_.push_back({Tensor({l.out, l.in, 3, 3}), Tensor({l.out})});
        else
            params_.push_back({Tensor({l.out, l.in}), Tensor({l.out})});
        const bool fused_relu = i + 1 < cfg_.layers.size() && cfg_.layers[i + 1].kind == LayerKind::relu;
        quant_point_[fused_relu ? i + 1 : i] = slot_[i];
    }
}

void Network::set_qat(QatState state) {
    if (state.enabled && (state.weight_scales.size() != params_.size() || state.activation_max.size() != params_.size()))
        throw ShapeError("QAT state does not match the number of param layers");
    qat_ = std::move(state);
    dirty_ = true;
}

void Network::init_kaiming(std::uint64_t seed) {
    Rng rng(seed);
    for (LayerParams& p : params_) {
        const std::size_t fan_in = p.weight.size() / p.weight.dim(0);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (float& w : p.weight.data()) w = static_cast<float>(rng.uniform(-bound, bound));
        std::fill(p.bias.data().begin(), p.bias.data().end(), 0.0f);
    }
    dirty_ = true;
}

void Network::begin_qat() {
    QatState s;
    s.enabled = true;
    s.activations_frozen = false;
    for (const LayerParams& p : params_) s.weight_scales.push_back(choose_scale(p.weight.data()).scale);
    s.activation_max.assign(params_.size(), 0.0f);
    set_qat(std::move(s));
}

void Network::freeze_activation_scales() { qat_.activations_frozen = true; }

const std::vector<LayerParams>& Network::effective() const {
    if (!qat_.enabled) return params_;
    if (dirty_) {
        effective_.resize(params_.size());
        for (std::size_t k = 0; k < params_.size(); ++k) {
            effective_[k].weight = fake_quant_forward(params_[k].weight, qat_.weight_params(k));
            effective_[k].bias = params_[k].bias;
        }
        dirty_ = false;
    }
    return effective_;
}

Tensor Network::forward(const Tensor& input, ForwardTrace* trace) {
    const bool track = qat_.enabled && !qat_.activations_frozen;
    return run(input, trace, track ? &qat_.activation_max : nullptr);
}

Tensor Network::predict(const Tensor& input) const { return run(input, nullptr, nullptr); }

Tensor Network::run(const Tensor& input, ForwardTrace* trace, std::vector<float>* track_max) const {
    if (input.shape() != cfg_.input_shape())
        throw ShapeError("network input " + to_string(input.shape()) + " does not match config " +
                         to_string(cfg_.input_shape()));
    const auto& eff = effective();
    if (trace) {
        trace->inputs.assign(cfg_.layers.size(), Tensor());
        trace->pre_quant.assign(cfg_.layers.size(), Tensor());
        trace->pools.assign(cfg_.layers.size(), PoolCache());
        trace->network_input = input;
    }
    Tensor x = qat_.enabled ? fake_quant_forward(input, qat_.input_params()) : input;
    for (std::size_t i = 0; i < cfg_.layers.size(); ++i) {
        const LayerSpec& l = cfg_.layers[i];
        Tensor y;
        switch (l.kind) {
            case LayerKind::conv3x3: {
                const LayerParams& p = eff[static_cast<std::size_t>(slot_[i])];
                y = conv2d_forward(x, p.weight, p.bias);
                break;
            }
            case LayerKind::fc: {
                const LayerParams& p = eff[static_cast<std::size_t>(slot_[i])];
                y = fc_forward(x, p.weight, p.bias);
                break;
            }
            case LayerKind::relu: y = relu_forward(x); break;
            case LayerKind::maxpool2x2: y = maxpool2x2_forward(x, trace ? &trace->pools[i] : nullptr); break;
            case LayerKind::flatten: y = x.reshaped({x.size()}); break;
        }
        if (trace) trace->inputs[i] = std::move(x);
        if (qat_.enabled && quant_point_[i] >= 0) {
            const auto k = static_cast<std::size_t>(quant_point_[i]);
            QuantParams q;
            if (track_max) {
                (*track_max)[k] = std::max((*track_max)[k], max_abs(y.data()));
                q = scale_for_max((*track_max)[k]);
            } else {
                q = qat_.activation_params(k);
            }
            Tensor quantized = fake_quant_forward(y, q);
            if (trace) trace->pre_quant[i] = std::move(y);
            y = std::move(quantized);
        }
        x = std::move(y);
    }
    return x;
}

std::vector<LayerParams> Network::zero_like() const {
    std::vector<LayerParams> z;
    for (const LayerParams& p : params_) z.push_back({Tensor(p.weight.shape()), Tensor(p.bias.shape())});
    return z;
}

std::vector<LayerParams> Network::backward(const Tensor& grad_out, const ForwardTrace& trace) const {
    if (trace.inputs.size() != cfg_.layers.size()) throw ShapeError("backward: trace does not match network");
    const auto& eff = effective();
    std::vector<LayerParams> grads = zero_like();
    Tensor g = grad_out;
    for (std::size_t i = cfg_.layers.size(); i-- > 0;) {
        const LayerSpec& l = cfg_.layers[i];
        if (qat_.enabled && quant_point_[i] >= 0)
            g = fake_quant_backward(g, trace.pre_quant[i], qat_.activation_params(static_cast<std::size_t>(quant_point_[i])));
        const Tensor& in = trace.inputs[i];
        switch (l.kind) {
            case LayerKind::conv3x3:
            case LayerKind::fc: {
                const auto k = static_cast<std::size_t>(slot_[i]);
                LayerParams& dst = grads[k];
                if (l.kind == LayerKind::conv3x3) {
                    ConvGrads cg = conv2d_backward(g, in, eff[k].weight);
                    dst.weight = std::move(cg.weight);
                    dst.bias = std::move(cg.bias);
                    g = std::move(cg.input);
                } else {
                    FcGrads fg = fc_backward(g, in, eff[k].weight);
                    dst.weight = std::move(fg.weight);
                    dst.bias = std::move(fg.bias);
                    g = std::move(fg.input);
                }
                if (qat_.enabled) dst.weight = fake_quant_backward(dst.weight, params_[k].weight, qat_.weight_params(k));
                break;
            }
            case LayerKind::relu: g = relu_backward(g, in); break;
            case LayerKind::maxpool2x2: g = maxpool2x2_backward(g, trace.pools[i]); break;
            case LayerKind::flatten: g = std::move(g).reshaped(in.shape()); break;
        }
    }
    return grads;
}

QuantizedModel::QuantizedModel(ModelConfig cfg, QuantParams input, std::vector<QuantizedLayer> layers)
    : cfg_(std::move(cfg)), input_(input), layers_(std::move(layers)) {
    validate(cfg_);
    const auto idx = param_layer_indices(cfg_);
    if (idx.size() != layers_.size()) throw ShapeError("quantized model layer count does not match config");
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const LayerSpec& l = cfg_.layers[idx[k]];
        const QuantizedLayer& q = layers_[k];
        const bool conv = l.kind == LayerKind::conv3x3;
        if ((conv != (q.op == QuantizedOp::conv3x3)) || q.in_channels != l.in || q.out_channels != l.out ||
            q.weights.size() != (conv ? 9 * l.in * l.out : l.in * l.out) || q.bias.size() != l.out)
            throw ShapeError("quantized layer " + std::to_string(k) + " does not match config");
        const bool relu = idx[k] + 1 < cfg_.layers.size() && cfg_.layers[idx[k] + 1].kind == LayerKind::relu;
        if (q.relu != relu) throw ShapeError("quantized layer " + std::to_string(k) + " relu flag does not match config");
        q.check_accumulator_bounds();
    }
}

QuantizedModel QuantizedModel::from_network(const Network& net) {
    const QatState& s = net.qat();
    const auto& params = net.params();
    if (s.weight_scales.size() != params.size() || s.activation_max.size() != params.size())
        throw Error("network has no quantization calibration; run QAT or calibration first");
    const ModelConfig& cfg = net.config();
    const auto idx = param_layer_indices(cfg);
    std::vector<QuantizedLayer> layers;
    QuantParams in = s.input_params();
    for (std::size_t k = 0; k < params.size(); ++k) {
        const LayerSpec& l = cfg.layers[idx[k]];
        const bool relu = idx[k] + 1 < cfg.layers.size() && cfg.layers[idx[k] + 1].kind == LayerKind::relu;
        const QuantParams out = s.activation_params(k);
        layers.push_back(QuantizedLayer::from_float(l.kind == LayerKind::conv3x3 ? QuantizedOp::conv3x3 : QuantizedOp::fc,
                                                    params[k].weight, params[k].bias, in, s.weight_params(k), out, relu));
        in = out;
    }
    return QuantizedModel(cfg, s.input_params(), std::move(layers));
}

QActivation QuantizedModel::run(const Int8Tensor& input_codes) const {
    if (input_codes.shape() != cfg_.input_shape())
        throw ShapeError("quantized model input " + to_string(input_codes.shape()) + " does not match config");
    QActivation x{input_codes, input_};
    std::size_t k = 0;
    for (const LayerSpec& l : cfg_.layers) {
        switch (l.kind) {
            case LayerKind::conv3x3: x = qconv2d_int8(x, layers_[k++]); break;
            case LayerKind::fc: x = qfc_int8(x, layers_[k++]); break;
            case LayerKind::maxpool2x2: x = qmaxpool2x2_int8(x); break;
            case LayerKind::flatten: x.codes = std::move(x.codes).reshaped({x.codes.size()}); break;
            case LayerKind::relu: break;  // fused into the preceding layer
        }
    }
    return x;
}

Tensor QuantizedModel::predict(const Tensor& input) const {
    const QActivation out = run(quantize(input, input_));
    return dequantize(out.codes, out.params);
}

}  // namespace tinyyolo
