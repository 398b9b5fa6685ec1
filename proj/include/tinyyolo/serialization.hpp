// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tinyyolo/network.hpp"

namespace tinyyolo {

enum class TrainingPhase : std::uint8_t { float_precision = 0, quantization_aware = 1 };

struct TrainingMeta {
    std::uint32_t epoch = 0;
    TrainingPhase phase = TrainingPhase::float_precision;
    std::uint64_t seed = 0;

    friend bool operator==(const TrainingMeta&, const TrainingMeta&) = default;
};

/// Float weights, optional quantization state and training metadata.
///
/// On disk (little-endian):
///
///     "TYLO" u32 version
///     u32 config_len, config text
///     u32 epoch, u8 phase, u64 seed
///     u32 layer_count, per layer: u32 n, f32[n] weight, u32 m, f32[m] bias
///     u8 has_quant; if 1: f32 input_scale, u8 enabled, u8 frozen,
///                         per layer: f32 weight_scale, f32 activation_max
struct Checkpoint {
    ModelConfig config;
    std::vector<LayerParams> params;
    std::optional<QatState> quant;
    TrainingMeta meta;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kQuantizedBlobVersion = 1;

Checkpoint make_checkpoint(const Network& net, TrainingMeta meta);
/// Network with weights (and QAT state, if any) restored.
Network restore_network(const Checkpoint& ckpt);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// SHA-256 of the canonical config text.
std::array<std::uint8_t, 32> config_digest(const ModelConfig& cfg);

/// Self-describing int8 model:
///
///     "TYLQ" u32 version, u8[32] sha256(config text), u32 config_len, config text,
///     f32 input_scale, u32 layer_count, per layer:
///       u8 op, u8 relu, u32 in, u32 out,
///       u32 n, i8[n] weights, u32 m, i32[m] biases,
///       f32 input_scale, f32 weight_scale, f32 output_scale,
///       i32 requant_multiplier, u8 requant_shift
std::vector<std::uint8_t> export_quantized(const QuantizedModel& model);
QuantizedModel import_quantized(const std::vector<std::uint8_t>& bytes);
void save_quantized(const QuantizedModel& model, const std::string& path);
QuantizedModel load_quantized(const std::string& path);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace tinyyolo
