// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "tinyyolo/ops.hpp"

#include <Eigen/Core>

#include <algorithm>

namespace tinyyolo {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

void require_chw(const Tensor& t, const char* what) {
    if (t.rank() != 3) throw ShapeError(std::string(what) + ": expected CHW tensor, got " + to_string(t.shape()));
    if (t.empty()) throw ShapeError(std::string(what) + ": empty input");
}

// Scatter-add of a (C*9, H*W) patch-gradient matrix back onto the CHW input.
void col2im3x3(std::span<const float> cols, std::size_t channels, std::size_t height, std::size_t width,
               std::span<float> out) {
    const std::size_t hw = height * width;
    std::fill(out.begin(), out.end(), 0.0f);
    for (std::size_t c = 0; c < channels; ++c) {
        float* plane = out.data() + c * hw;
        for (std::size_t ky = 0; ky < 3; ++ky) {
            for (std::size_t kx = 0; kx < 3; ++kx) {
                const float* row = cols.data() + ((c * 3 + ky) * 3 + kx) * hw;
                for (std::size_t y = 0; y < height; ++y) {
                    const long iy = static_cast<long>(y + ky) - 1;
                    if (iy < 0 || iy >= static_cast<long>(height)) continue;
                    const std::size_t x_begin = kx == 0 ? 1 : 0;
                    const std::size_t x_end = kx == 2 ? width - 1 : width;
                    float* dst = plane + static_cast<std::size_t>(iy) * width;
                    const float* src = row + y * width;
                    for (std::size_t x = x_begin; x < x_end; ++x) dst[x + kx - 1] += src[x];
                }
            }
        }
    }
}

}  // namespace

ConvWeights::ConvWeights(Tensor w, Tensor b) : weight(std::move(w)), bias(std::move(b)) {
    if (weight.rank() != 4 || weight.dim(2) != 3 || weight.dim(3) != 3)
        throw ShapeError("conv weight must be (out, in, 3, 3), got " + to_string(weight.shape()));
    if (bias.rank() != 1 || bias.dim(0) != weight.dim(0))
        throw ShapeError("conv bias length must equal out channels");
}

FcWeights::FcWeights(Tensor w, Tensor b) : weight(std::move(w)), bias(std::move(b)) {
    if (weight.rank() != 2) throw ShapeError("fc weight must be (out, in), got " + to_string(weight.shape()));
    if (bias.rank() != 1 || bias.dim(0) != weight.dim(0))
        throw ShapeError("fc bias length must equal out features");
}

void im2col3x3(std::span<const float> input, std::size_t channels, std::size_t height, std::size_t width,
               std::span<float> cols) {
    const std::size_t hw = height * width;
    for (std::size_t c = 0; c < channels; ++c) {
        const float* plane = input.data() + c * hw;
        for (std::size_t ky = 0; ky < 3; ++ky) {
            for (std::size_t kx = 0; kx < 3; ++kx) {
                float* row = cols.data() + ((c * 3 + ky) * 3 + kx) * hw;
                for (std::size_t y = 0; y < height; ++y) {
                    float* dst = row + y * width;
                    const long iy = static_cast<long>(y + ky) - 1;
                    if (iy < 0 || iy >= static_cast<long>(height)) {
                        std::fill(dst, dst + width, 0.0f);
                        continue;
                    }
                    const float* src = plane + static_cast<std::size_t>(iy) * width;
                    if (kx == 0) {
                        dst[0] = 0.0f;
                        std::copy(src, src + width - 1, dst + 1);
                    } else if (kx == 1) {
                        std::copy(src, src + width, dst);
                    } else {
                        std::copy(src + 1, src + width, dst);
                        dst[width - 1] = 0.0f;
                    }
                }
            }
        }
    }
}

Tensor conv2d_forward(const Tensor& input, const ConvWeights& w) { return conv2d_forward(input, w.weight, w.bias); }

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const ConvWeights& w) {
    return conv2d_backward(grad_out, input, w.weight);
}

Tensor fc_forward(const Tensor& input, const FcWeights& w) { return fc_forward(input, w.weight, w.bias); }

FcGrads fc_backward(const Tensor& grad_out, const Tensor& input, const FcWeights& w) {
    return fc_backward(grad_out, input, w.weight);
}

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    require_chw(input, "conv2d_forward");
    const std::size_t cin = input.dim(0), h = input.dim(1), wd = input.dim(2);
    if (weight.rank() != 4 || weight.dim(2) != 3 || weight.dim(3) != 3 || bias.size() != weight.dim(0))
        throw ShapeError("conv2d_forward: weight must be (out, in, 3, 3) with matching bias");
    if (cin != weight.dim(1))
        throw ShapeError("conv2d_forward: input has " + std::to_string(cin) + " channels, weights expect " +
                         std::to_string(weight.dim(1)));
    const std::size_t cout = weight.dim(0), k = cin * 9, hw = h * wd;

    std::vector<float> cols(k * hw);
    im2col3x3(input.data(), cin, h, wd, cols);

    Tensor out({cout, h, wd});
    MatMap o(out.data().data(), cout, hw);
    o.noalias() = ConstMatMap(weight.data().data(), cout, k) * ConstMatMap(cols.data(), k, hw);
    for (std::size_t c = 0; c < cout; ++c) o.row(c).array() += bias[c];
    require_finite(out.data(), "conv2d_forward");
    return out;
}

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight) {
    require_chw(input, "conv2d_backward");
    if (weight.rank() != 4) throw ShapeError("conv2d_backward: weight must be (out, in, 3, 3)");
    const std::size_t cin = input.dim(0), h = input.dim(1), wd = input.dim(2);
    const std::size_t cout = weight.dim(0), k = cin * 9, hw = h * wd;
    if (cin != weight.dim(1) || grad_out.shape() != Shape{cout, h, wd})
        throw ShapeError("conv2d_backward: grad_out " + to_string(grad_out.shape()) + " inconsistent with input " +
                         to_string(input.shape()) + " and weights " + to_string(weight.shape()));

    std::vector<float> cols(k * hw);
    im2col3x3(input.data(), cin, h, wd, cols);

    ConstMatMap g(grad_out.data().data(), cout, hw);
    ConvGrads grads{Tensor(input.shape()), Tensor(weight.shape()), Tensor({cout})};
    MatMap(grads.weight.data().data(), cout, k).noalias() = g * ConstMatMap(cols.data(), k, hw).transpose();
    for (std::size_t c = 0; c < cout; ++c) {
        const float* row = grad_out.data().data() + c * hw;
        float s = 0.0f;
        for (std::size_t i = 0; i < hw; ++i) s += row[i];
        grads.bias[c] = s;
    }
    MatMap(cols.data(), k, hw).noalias() = ConstMatMap(weight.data().data(), cout, k).transpose() * g;
    col2im3x3(cols, cin, h, wd, grads.input.data());

    require_finite(grads.weight.data(), "conv2d_backward");
    require_finite(grads.input.data(), "conv2d_backward");
    return grads;
}

Tensor maxpool2x2_forward(const Tensor& input, PoolCache* cache) {
    require_chw(input, "maxpool2x2_forward");
    const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (h < 2 || w < 2) throw ShapeError("maxpool2x2_forward: spatial dims must be >= 2, got " + to_string(input.shape()));
    const std::size_t oh = h / 2, ow = w / 2;
    Tensor out({c, oh, ow});
    if (cache) {
        cache->input_shape = input.shape();
        cache->argmax.assign(out.size(), 0);
    }
    std::size_t o = 0;
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x, ++o) {
                std::size_t best = (ch * h + 2 * y) * w + 2 * x;
                const std::size_t candidates[3] = {best + 1, best + w, best + w + 1};
                for (std::size_t idx : candidates) {
                    if (input[idx] > input[best]) best = idx;
                }
                out[o] = input[best];
                if (cache) cache->argmax[o] = static_cast<std::uint32_t>(best);
            }
        }
    }
    return out;
}

Tensor maxpool2x2_backward(const Tensor& grad_out, const PoolCache& cache) {
    if (cache.input_shape.empty() || cache.argmax.size() != grad_out.size())
        throw ShapeError("maxpool2x2_backward: missing or mismatched forward cache");
    Tensor grad_in(cache.input_shape);
    for (std::size_t i = 0; i < grad_out.size(); ++i) grad_in[cache.argmax[i]] += grad_out[i];
    return grad_in;
}

Tensor fc_forward(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    if (weight.rank() != 2 || bias.size() != weight.dim(0))
        throw ShapeError("fc_forward: weight must be (out, in) with matching bias");
    const std::size_t m = weight.dim(0), n = weight.dim(1);
    if (input.size() != n)
        throw ShapeError("fc_forward: input length " + std::to_string(input.size()) + " != " + std::to_string(n));
    Tensor out({m});
    ConstMatMap weights(weight.data().data(), m, n);
    Eigen::Map<const Eigen::VectorXf> x(input.data().data(), n);
    Eigen::Map<Eigen::VectorXf> y(out.data().data(), m);
    y.noalias() = weights * x;
    y += Eigen::Map<const Eigen::VectorXf>(bias.data().data(), m);
    require_finite(out.data(), "fc_forward");
    return out;
}

FcGrads fc_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight) {
    if (weight.rank() != 2) throw ShapeError("fc_backward: weight must be (out, in)");
    const std::size_t m = weight.dim(0), n = weight.dim(1);
    if (input.size() != n || grad_out.size() != m)
        throw ShapeError("fc_backward: shapes inconsistent with weights " + to_string(weight.shape()));
    FcGrads grads{Tensor(input.shape()), Tensor(weight.shape()), Tensor({m})};
    Eigen::Map<const Eigen::VectorXf> g(grad_out.data().data(), m);
    Eigen::Map<const Eigen::VectorXf> x(input.data().data(), n);
    MatMap(grads.weight.data().data(), m, n).noalias() = g * x.transpose();
    Eigen::Map<Eigen::VectorXf>(grads.input.data().data(), n).noalias() =
        ConstMatMap(weight.data().data(), m, n).transpose() * g;
    std::copy(grad_out.data().begin(), grad_out.data().end(), grads.bias.data().begin());
    require_finite(grads.weight.data(), "fc_backward");
    require_finite(grads.input.data(), "fc_backward");
    return grads;
}

Tensor relu_forward(const Tensor& input) {
    Tensor out = input;
    for (float& v : out.data()) v = v > 0.0f ? v : 0.0f;
    return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& input) {
    if (grad_out.size() != input.size()) throw ShapeError("relu_backward: size mismatch");
    Tensor g(input.shape());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = input[i] > 0.0f ? grad_out[i] : 0.0f;
    return g;
}

}  // namespace tinyyolo
