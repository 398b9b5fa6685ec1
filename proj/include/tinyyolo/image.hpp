// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tinyyolo/tensor.hpp"

namespace tinyyolo {

/// 8-bit interleaved image (HWC).
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 3;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(std::size_t w, std::size_t h, std::size_t c = 3) : width(w), height(h), channels(c), pixels(w * h * c, 0) {}

    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }

    friend bool operator==(const Image&, const Image&) = default;
};

/// Binary PNM: P6 (RGB) and P5 (gray), maxval 255.
Image read_pnm(const std::string& path);
Image decode_pnm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_ppm(const Image& img);
void write_ppm(const Image& img, const std::string& path);

inline constexpr std::size_t kNetworkInput = 88;

/// Bilinear resize with half-pixel centers (src = (dst + 0.5) * in/out - 0.5, clamped to the edge).
std::vector<float> resize_bilinear(const Image& img, std::size_t out_w, std::size_t out_h);

/// Squash-resize to size x size and map p to (p - 128) / 128, returned as CHW. Requires RGB.
Tensor preprocess(const Image& img, std::size_t size = kNetworkInput);

}  // namespace tinyyolo
