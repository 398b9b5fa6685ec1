// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tinyyolo/tensor.hpp"

namespace tinyyolo {

enum class LayerKind : std::uint8_t { conv3x3, maxpool2x2, flatten, fc, relu };

std::string_view to_string(LayerKind kind);

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::size_t in = 0;   // in_channels (conv) or in_features (fc)
    std::size_t out = 0;  // out_channels (conv) or out_features (fc)

    bool has_params() const { return kind == LayerKind::conv3x3 || kind == LayerKind::fc; }
    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// YOLO head geometry: S x S grid, B boxes per cell, C classes.
struct HeadSpec {
    std::size_t grid = 4;
    std::size_t boxes = 2;
    std::size_t classes = 1;

    std::size_t cell_size() const { return boxes * 5 + classes; }
    std::size_t output_size() const { return grid * grid * cell_size(); }
    friend bool operator==(const HeadSpec&, const HeadSpec&) = default;
};

struct ModelConfig {
    std::string name;
    std::size_t in_channels = 3;
    std::size_t in_height = 88;
    std::size_t in_width = 88;
    std::vector<LayerSpec> layers;
    HeadSpec head;

    Shape input_shape() const { return {in_channels, in_height, in_width}; }
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Parses the line format:
///
///     # comment
///     name tinyissimo-ref-88
///     input 3 88 88
///     head 4 2 1          # S B C
///     conv3x3 3 16
///     relu
///     maxpool2x2
///     flatten
///     fc 64 256
///
/// and validates it (see validate()). Errors carry line and column.
ModelConfig parse_model_config(std::string_view text);
ModelConfig load_model_config(const std::string& path);

/// Canonical text; parse_model_config(to_text(c)) == c.
std::string to_text(const ModelConfig& cfg);

/// Throws Error unless the layer sequence type-checks, every conv is 3x3, the
/// first conv has 16 output channels, the widest has 128, relu only follows a
/// conv/fc, the model ends in a linear fc of size S*S*(B*5+C), and no layer
/// can overflow an int32 accumulator.
void validate(const ModelConfig& cfg);

/// Output shape of every layer in order.
std::vector<Shape> propagate_shapes(const ModelConfig& cfg);

struct LayerCounts {
    std::vector<std::uint64_t> per_layer;
    std::uint64_t total = 0;
};

/// conv: 9*Cin*Cout + Cout; fc: In*Out + Out; others 0.
LayerCounts count_params(const ModelConfig& cfg);
/// conv: H*W*9*Cin*Cout (same padding); fc: In*Out; others 0.
LayerCounts count_macs(const ModelConfig& cfg);

std::uint64_t count_biases(const ModelConfig& cfg);

/// Deployed weight memory: 1 byte per weight plus 4 bytes per bias.
std::uint64_t int8_weight_bytes(const ModelConfig& cfg);

/// Indices into cfg.layers of conv/fc layers, in order.
std::vector<std::size_t> param_layer_indices(const ModelConfig& cfg);

struct DeviceProfile {
    std::string name;
    std::uint64_t weight_budget_bytes = 0;
    std::size_t max_input_height = 0;  // exclusive
    std::size_t max_input_width = 0;   // exclusive
};

/// 442 KiB weight memory, input strictly below 90x91.
DeviceProfile max78000_profile();
/// Looks up a profile by name; throws Error for unknown names.
DeviceProfile device_profile(std::string_view name);

struct DeployReport {
    bool pass = true;
    std::vector<std::string> reasons;
    std::uint64_t weight_bytes = 0;
    std::uint64_t weight_budget_bytes = 0;
};

DeployReport check_deployability(const ModelConfig& cfg, const DeviceProfile& profile);

/// Built-in reference architectures: classes == 1 (B=2) or classes == 3 (B=1).
std::string reference_config_text(std::size_t classes);

}  // namespace tinyyolo
