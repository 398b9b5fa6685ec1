// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <vector>

#include "tinyyolo/tensor.hpp"

namespace tinyyolo {

/// 3x3 convolution parameters. `weight` is (out, in, 3, 3), `bias` is (out).
struct ConvWeights {
    Tensor weight;
    Tensor bias;

    ConvWeights() = default;
    ConvWeights(std::size_t in_channels, std::size_t out_channels)
        : weight({out_channels, in_channels, 3, 3}), bias({out_channels}) {}
    ConvWeights(Tensor w, Tensor b);

    std::size_t out_channels() const { return weight.dim(0); }
    std::size_t in_channels() const { return weight.dim(1); }
};

struct ConvGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};

/// Fully connected parameters. `weight` is (out, in), `bias` is (out).
struct FcWeights {
    Tensor weight;
    Tensor bias;

    FcWeights() = default;
    FcWeights(std::size_t in_features, std::size_t out_features)
        : weight({out_features, in_features}), bias({out_features}) {}
    FcWeights(Tensor w, Tensor b);

    std::size_t out_features() const { return weight.dim(0); }
    std::size_t in_features() const { return weight.dim(1); }
};

struct FcGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};

/// Argmax positions (flat input indices) recorded by the forward pool.
struct PoolCache {
    Shape input_shape;
    std::vector<std::uint32_t> argmax;
};

/// Same-padded (pad 1) stride-1 3x3 convolution over a CHW tensor.
Tensor conv2d_forward(const Tensor& input, const ConvWeights& w);
ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const ConvWeights& w);
/// Same, on a raw (out, in, 3, 3) weight and (out) bias.
Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias);
ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight);

/// 2x2 stride-2 max pooling; odd trailing rows/columns are dropped. Ties go
/// to the first element of the window in row-major order.
Tensor maxpool2x2_forward(const Tensor& input, PoolCache* cache = nullptr);
Tensor maxpool2x2_backward(const Tensor& grad_out, const PoolCache& cache);

Tensor fc_forward(const Tensor& input, const FcWeights& w);
FcGrads fc_backward(const Tensor& grad_out, const Tensor& input, const FcWeights& w);
Tensor fc_forward(const Tensor& input, const Tensor& weight, const Tensor& bias);
FcGrads fc_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight);

Tensor relu_forward(const Tensor& input);
/// Gradient passes where input > 0; the derivative at exactly 0 is 0.
Tensor relu_backward(const Tensor& grad_out, const Tensor& input);

/// Rearranges a padded CHW input into a (C*9, H*W) row-major patch matrix.
void im2col3x3(std::span<const float> input, std::size_t channels, std::size_t height, std::size_t width,
               std::span<float> cols);

}  // namespace tinyyolo
