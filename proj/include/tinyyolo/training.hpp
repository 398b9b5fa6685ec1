// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tinyyolo/datasets.hpp"
#include "tinyyolo/network.hpp"
#include "tinyyolo/serialization.hpp"

namespace tinyyolo {

struct TrainConfig {
    std::size_t epochs_float = 350;
    std::size_t epochs_qat = 300;
    double lr0 = 5e-4;
    double weight_decay = 5e-4;
    std::size_t batch_size = 32;
    /// Fractions of each phase's epoch count at which the rate is multiplied by lr_factor.
    std::vector<double> milestones{0.5, 0.8};
    double lr_factor = 0.1;
    std::uint64_t seed = 0;
    std::size_t max_objects = kNoObjectLimit;
    bool hflip = false;
    LossWeights loss;
    /// Rescale each batch gradient to at most this global L2 norm (0: no clipping).
    double clip_grad_norm = 0.0;
    /// Linear ramp of the float-phase rate over this many epochs, counted in steps (0: none).
    std::size_t warmup_epochs = 0;
    /// Multiplies the Kaiming-initialized weights of the output layer (1: plain Kaiming).
    double head_init_scale = 1.0;
    /// Initial bias of every box's w and h outputs (0: zero bias like all other outputs).
    double size_bias_init = 0.0;
    /// Write epoch_NNNN.tylo every N epochs (0: only phase ends and final).
    std::size_t checkpoint_every = 0;
    /// Where checkpoints and train_log.csv go; empty keeps everything in memory.
    std::string out_dir;
};

/// Throws Error on lr0 <= 0, non-increasing milestones, or milestones outside (0, 1).
void validate(const TrainConfig& cfg);

/// Kaiming-uniform init from cfg.seed, then the optional output-layer adjustments.
void init_network(Network& net, const TrainConfig& cfg);

/// p <- p - lr * (g + weight_decay * p). Throws NumericError on a non-finite gradient.
void sgd_step(std::vector<LayerParams>& params, const std::vector<LayerParams>& grads, double lr, double weight_decay);

/// Scales all gradients by max_norm / norm when their global L2 norm exceeds max_norm.
/// Returns the norm before scaling. max_norm <= 0 leaves the gradients unchanged.
double clip_by_global_norm(std::vector<LayerParams>& grads, double max_norm);

/// lr0 * factor^(milestones passed), where milestone m is passed once epoch >= m * phase_epochs.
double multistep_lr(std::size_t epoch_in_phase, std::size_t phase_epochs, const TrainConfig& cfg);

struct EpochLog {
    std::size_t epoch = 0;  // 1-based over both phases
    TrainingPhase phase = TrainingPhase::float_precision;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double wall_time_s = 0.0;
};

std::string phase_name(TrainingPhase phase);
std::string epoch_log_csv_header();
std::string to_csv_row(const EpochLog& e);

class TrainingDiverged : public Error {
public:
    using Error::Error;
};

struct TrainResult {
    Network network;
    std::vector<EpochLog> log;
    Checkpoint final_checkpoint;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Mean YOLO loss of `net` over a dataset (no running-range updates).
double mean_loss(const Network& net, const LoadedDataset& data, const LossWeights& weights = {});

/// Float phase then quantization-aware phase. Weight scales are frozen at the
/// boundary; activation ranges are tracked through the first QAT epoch and then frozen.
TrainResult train(const TrainConfig& cfg, const ModelConfig& model, const LoadedDataset& train_set,
                  const LoadedDataset& val_set, const EpochCallback& on_epoch = {});

/// Sets weight scales from the current weights and activation ranges from a pass over `data`.
void calibrate(Network& net, const LoadedDataset& data);

/// Mirrors a CHW image and its boxes left to right.
void hflip(Tensor& image, std::vector<Box>& boxes);

}  // namespace tinyyolo
