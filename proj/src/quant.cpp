// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "tinyyolo/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tinyyolo {

QuantParams scale_for_max(float max_abs) {
    if (!(max_abs > 0.0f)) return QuantParams{1.0f};
    return QuantParams{max_abs / static_cast<float>(kQuantMax)};
}

QuantParams choose_scale(std::span<const float> values) {
    float m = 0.0f;
    for (float v : values) m = std::max(m, std::fabs(v));
    return scale_for_max(m);
}

std::int8_t quantize_value(float x, QuantParams q) {
    const float r = std::round(x / q.scale);  // std::round ties away from zero
    const float c = std::clamp(r, -static_cast<float>(kQuantMax), static_cast<float>(kQuantMax));
    return static_cast<std::int8_t>(c);
}

Int8Tensor quantize(const Tensor& x, QuantParams q) {
    Int8Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = quantize_value(x[i], q);
    return out;
}

Tensor dequantize(const Int8Tensor& codes, QuantParams q) {
    Tensor out(codes.shape());
    for (std::size_t i = 0; i < codes.size(); ++i) out[i] = dequantize_value(codes[i], q);
    return out;
}

Tensor fake_quant_forward(const Tensor& x, QuantParams q) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = dequantize_value(quantize_value(x[i], q), q);
    return out;
}

Tensor fake_quant_backward(const Tensor& grad_out, const Tensor& x, QuantParams q) {
    if (grad_out.size() != x.size()) throw ShapeError("fake_quant_backward: size mismatch");
    const float limit = q.range();
    Tensor g(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = std::fabs(x[i]) <= limit ? grad_out[i] : 0.0f;
    return g;
}

std::int64_t rounding_shift_right(std::int64_t value, int shift) {
    if (shift <= 0) return value;
    const std::int64_t half = std::int64_t{1} << (shift - 1);
    if (value >= 0) return (value + half) >> shift;
    return -((-value + half) >> shift);
}

Requantizer Requantizer::from_real(double real_multiplier) {
    if (!(real_multiplier > 0.0) || !std::isfinite(real_multiplier))
        throw Error("requantization multiplier must be positive and finite");
    int exponent = 0;
    const double mantissa = std::frexp(real_multiplier, &exponent);  // [0.5, 1)
    auto m = static_cast<std::int64_t>(std::llround(std::ldexp(mantissa, kFractionalBits)));
    if (m == (std::int64_t{1} << kFractionalBits)) {
        m >>= 1;
        ++exponent;
    }
    const int shift = kFractionalBits - exponent;
    if (shift < 1 || shift > 62)
        throw Error("requantization multiplier " + std::to_string(real_multiplier) + " out of representable range");
    return Requantizer{static_cast<std::int32_t>(m), static_cast<std::uint8_t>(shift)};
}

double Requantizer::value() const { return std::ldexp(static_cast<double>(multiplier), -static_cast<int>(shift)); }

std::int32_t Requantizer::apply(std::int32_t acc) const {
    const std::int64_t r = rounding_shift_right(static_cast<std::int64_t>(acc) * multiplier, shift);
    return static_cast<std::int32_t>(std::clamp<std::int64_t>(r, INT32_MIN, INT32_MAX));
}

QuantizedLayer QuantizedLayer::from_float(QuantizedOp op, const Tensor& weight, const Tensor& bias, QuantParams input,
                                          QuantParams weight_params, QuantParams output, bool relu) {
    QuantizedLayer layer;
    layer.op = op;
    if (op == QuantizedOp::conv3x3) {
        if (weight.rank() != 4 || weight.dim(2) != 3 || weight.dim(3) != 3)
            throw ShapeError("quantized conv weight must be (out, in, 3, 3)");
    } else if (weight.rank() != 2) {
        throw ShapeError("quantized fc weight must be (out, in)");
    }
    layer.out_channels = static_cast<std::uint32_t>(weight.dim(0));
    layer.in_channels = static_cast<std::uint32_t>(weight.dim(1));
    if (bias.size() != layer.out_channels) throw ShapeError("quantized layer bias length mismatch");
    layer.relu = relu;
    layer.input = input;
    layer.weight = weight_params;
    layer.output = output;
    layer.weights.resize(weight.size());
    for (std::size_t i = 0; i < weight.size(); ++i) layer.weights[i] = quantize_value(weight[i], weight_params);
    const double bias_scale = static_cast<double>(input.scale) * weight_params.scale;
    layer.bias.resize(bias.size());
    for (std::size_t i = 0; i < bias.size(); ++i) {
        const double b = std::round(static_cast<double>(bias[i]) / bias_scale);
        if (std::fabs(b) > static_cast<double>(INT32_MAX) / 2)
            throw Error("quantized bias does not fit the int32 accumulator");
        layer.bias[i] = static_cast<std::int32_t>(b);
    }
    layer.requant = Requantizer::from_real(bias_scale / output.scale);
    layer.check_accumulator_bounds();
    return layer;
}

void QuantizedLayer::check_accumulator_bounds() const {
    const std::int64_t products = static_cast<std::int64_t>(fan_in()) * 128 * 127;
    std::int64_t max_bias = 0;
    for (std::int32_t b : bias) max_bias = std::max<std::int64_t>(max_bias, std::llabs(b));
    if (products + max_bias > INT32_MAX) throw Error("layer can overflow a 32-bit accumulator");
}

namespace {

std::int8_t finish(std::int32_t acc, const QuantizedLayer& layer) {
    std::int32_t v = layer.requant.apply(acc);
    if (layer.relu) v = std::max(v, 0);
    return static_cast<std::int8_t>(std::clamp(v, -128, 127));
}

void require_input_params(const QActivation& input, const QuantizedLayer& layer, const char* what) {
    if (!(input.params == layer.input))
        throw Error(std::string(what) + ": input scale " + std::to_string(input.params.scale) +
                    " does not match layer input scale " + std::to_string(layer.input.scale));
}

}  // namespace

QActivation qconv2d_int8(const QActivation& input, const QuantizedLayer& layer) {
    require_input_params(input, layer, "qconv2d_int8");
    const Int8Tensor& x = input.codes;
    if (layer.op != QuantizedOp::conv3x3) throw Error("qconv2d_int8: layer is not a convolution");
    if (x.rank() != 3 || x.empty()) throw ShapeError("qconv2d_int8: expected non-empty CHW input");
    const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2), hw = h * w;
    if (cin != layer.in_channels) throw ShapeError("qconv2d_int8: channel mismatch");
    const std::size_t cout = layer.out_channels, k = cin * 9;

    // im2col in int32, zero padded
    std::vector<std::int32_t> cols(k * hw, 0);
    for (std::size_t c = 0; c < cin; ++c) {
        for (std::size_t ky = 0; ky < 3; ++ky) {
            for (std::size_t kx = 0; kx < 3; ++kx) {
                std::int32_t* row = cols.data() + ((c * 3 + ky) * 3 + kx) * hw;
                for (std::size_t y = 0; y < h; ++y) {
                    const long iy = static_cast<long>(y + ky) - 1;
                    if (iy < 0 || iy >= static_cast<long>(h)) continue;
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        const long ix = static_cast<long>(xx + kx) - 1;
                        if (ix < 0 || ix >= static_cast<long>(w)) continue;
                        row[y * w + xx] = x.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                    }
                }
            }
        }
    }

    QActivation out{Int8Tensor({cout, h, w}), layer.output};
    std::vector<std::int32_t> acc(hw);
    for (std::size_t co = 0; co < cout; ++co) {
        std::fill(acc.begin(), acc.end(), layer.bias[co]);
        const std::int8_t* wrow = layer.weights.data() + co * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const std::int32_t wv = wrow[kk];
            if (wv == 0) continue;
            const std::int32_t* src = cols.data() + kk * hw;
            for (std::size_t p = 0; p < hw; ++p) acc[p] += wv * src[p];
        }
        std::int8_t* dst = out.codes.data().data() + co * hw;
        for (std::size_t p = 0; p < hw; ++p) dst[p] = finish(acc[p], layer);
    }
    return out;
}

QActivation qfc_int8(const QActivation& input, const QuantizedLayer& layer) {
    require_input_params(input, layer, "qfc_int8");
    if (layer.op != QuantizedOp::fc) throw Error("qfc_int8: layer is not fully connected");
    const std::size_t n = layer.in_channels, m = layer.out_channels;
    if (input.codes.size() != n) throw ShapeError("qfc_int8: input length mismatch");
    QActivation out{Int8Tensor({m}), layer.output};
    for (std::size_t i = 0; i < m; ++i) {
        std::int32_t acc = layer.bias[i];
        const std::int8_t* wrow = layer.weights.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) acc += static_cast<std::int32_t>(wrow[j]) * input.codes[j];
        out.codes[i] = finish(acc, layer);
    }
    return out;
}

QActivation qmaxpool2x2_int8(const QActivation& input) {
    const Int8Tensor& x = input.codes;
    if (x.rank() != 3 || x.dim(1) < 2 || x.dim(2) < 2) throw ShapeError("qmaxpool2x2_int8: spatial dims must be >= 2");
    const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2), oh = h / 2, ow = w / 2;
    QActivation out{Int8Tensor({c, oh, ow}), input.params};
    std::size_t o = 0;
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t xx = 0; xx < ow; ++xx, ++o)
                out.codes[o] = std::max({x.at(ch, 2 * y, 2 * xx), x.at(ch, 2 * y, 2 * xx + 1),
                                         x.at(ch, 2 * y + 1, 2 * xx), x.at(ch, 2 * y + 1, 2 * xx + 1)});
    return out;
}

}  // namespace tinyyolo
