// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tinyyolo/ops.hpp"
#include "tinyyolo/tensor.hpp"

namespace tinyyolo {

inline constexpr int kQuantMax = 127;

/// Symmetric per-tensor 8-bit quantization: real = code * scale, zero point 0.
struct QuantParams {
    float scale = 1.0f;

    static constexpr int zero_point = 0;
    static constexpr int bit_width = 8;

    /// Largest representable magnitude (127 * scale).
    float range() const { return static_cast<float>(kQuantMax) * scale; }

    friend bool operator==(const QuantParams&, const QuantParams&) = default;
};

/// scale = max|x| / 127, or 1.0 when every value is zero.
QuantParams choose_scale(std::span<const float> values);
/// Same rule applied to an already-known maximum magnitude.
QuantParams scale_for_max(float max_abs);

/// clamp(round_half_away_from_zero(x / scale), -127, 127).
std::int8_t quantize_value(float x, QuantParams q);
inline float dequantize_value(std::int8_t code, QuantParams q) { return static_cast<float>(code) * q.scale; }

Int8Tensor quantize(const Tensor& x, QuantParams q);
Tensor dequantize(const Int8Tensor& codes, QuantParams q);

/// dequantize(quantize(x)).
Tensor fake_quant_forward(const Tensor& x, QuantParams q);
/// Straight-through estimator: gradient passes where |x| <= 127 * scale.
Tensor fake_quant_backward(const Tensor& grad_out, const Tensor& x, QuantParams q);

/// Fixed-point real multiplier: value = multiplier * 2^-shift, multiplier in [2^14, 2^15).
struct Requantizer {
    std::int32_t multiplier = 1 << 14;
    std::uint8_t shift = 14;

    static constexpr int kFractionalBits = 15;

    /// Throws Error when the real multiplier is nonpositive or outside the shift range.
    static Requantizer from_real(double real_multiplier);

    double value() const;
    /// round_half_away_from_zero(acc * multiplier / 2^shift) in 64-bit arithmetic.
    std::int32_t apply(std::int32_t acc) const;

    friend bool operator==(const Requantizer&, const Requantizer&) = default;
};

/// Rounding right shift of a signed 64-bit value, ties away from zero.
std::int64_t rounding_shift_right(std::int64_t value, int shift);

enum class QuantizedOp : std::uint8_t { conv3x3 = 0, fc = 1 };

/// Integer-only layer: int8 weights, int32 bias at scale in*w, and a requantizer to the output scale.
struct QuantizedLayer {
    QuantizedOp op = QuantizedOp::conv3x3;
    std::uint32_t in_channels = 0;  // in_features for fc
    std::uint32_t out_channels = 0;  // out_features for fc
    bool relu = false;
    std::vector<std::int8_t> weights;
    std::vector<std::int32_t> bias;
    QuantParams input;
    QuantParams weight;
    QuantParams output;
    Requantizer requant;

    /// Quantizes float parameters. The bias is rounded to the in*w grid.
    static QuantizedLayer from_float(QuantizedOp op, const Tensor& weight, const Tensor& bias, QuantParams input,
                                     QuantParams weight_params, QuantParams output, bool relu);

    std::size_t fan_in() const { return op == QuantizedOp::conv3x3 ? 9u * in_channels : in_channels; }
    /// Throws Error if an int32 accumulator could overflow for any input.
    void check_accumulator_bounds() const;

    friend bool operator==(const QuantizedLayer&, const QuantizedLayer&) = default;
};

/// Int8 codes plus the scale they are expressed in.
struct QActivation {
    Int8Tensor codes;
    QuantParams params;
};

QActivation qconv2d_int8(const QActivation& input, const QuantizedLayer& layer);
QActivation qfc_int8(const QActivation& input, const QuantizedLayer& layer);
QActivation qmaxpool2x2_int8(const QActivation& input);

}  // namespace tinyyolo
