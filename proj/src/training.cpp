// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "tinyyolo/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "tinyyolo/rng.hpp"

namespace tinyyolo {

void validate(const TrainConfig& cfg) {
    if (!(cfg.lr0 >= 0.0)) throw Error("lr0 must be non-negative");
    if (cfg.weight_decay < 0.0) throw Error("weight decay must be non-negative");
    if (cfg.batch_size == 0) throw Error("batch size must be positive");
    if (!(cfg.lr_factor > 0.0)) throw Error("lr factor must be positive");
    if (!(cfg.clip_grad_norm >= 0.0)) throw Error("gradient clip norm must be non-negative");
    if (!(cfg.head_init_scale > 0.0)) throw Error("head init scale must be positive");
    if (!std::isfinite(cfg.size_bias_init)) throw Error("size bias init must be finite");
    for (std::size_t i = 0; i < cfg.milestones.size(); ++i) {
        const double m = cfg.milestones[i];
        if (!(m > 0.0 && m < 1.0)) throw Error("milestones must lie in (0, 1)");
        if (i > 0 && !(m > cfg.milestones[i - 1])) throw Error("milestones must be strictly increasing");
    }
    if (cfg.epochs_float + cfg.epochs_qat == 0) throw Error("nothing to train: zero epochs");
}

void sgd_step(std::vector<LayerParams>& params, const std::vector<LayerParams>& grads, double lr, double weight_decay) {
    if (params.size() != grads.size()) throw ShapeError("sgd_step: parameter/gradient count mismatch");
    const auto f_lr = static_cast<float>(lr), f_wd = static_cast<float>(weight_decay);
    auto update = [&](Tensor& p, const Tensor& g) {
        if (p.shape() != g.shape()) throw ShapeError("sgd_step: gradient shape mismatch");
        require_finite(g.data(), "sgd_step gradient");
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= f_lr * (g[i] + f_wd * p[i]);
    };
    for (std::size_t k = 0; k < params.size(); ++k) {
        update(params[k].weight, grads[k].weight);
        update(params[k].bias, grads[k].bias);
    }
}

double multistep_lr(std::size_t epoch_in_phase, std::size_t phase_epochs, const TrainConfig& cfg) {
    double lr = cfg.lr0;
    for (double m : cfg.milestones)
        if (static_cast<double>(epoch_in_phase) >= m * static_cast<double>(phase_epochs)) lr *= cfg.lr_factor;
    return lr;
}

std::string phase_name(TrainingPhase phase) { return phase == TrainingPhase::float_precision ? "float" : "qat"; }

std::string epoch_log_csv_header() { return "epoch,phase,lr,train_loss,val_loss,wall_time_s"; }

std::string to_csv_row(const EpochLog& e) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu,%s,%.9g,%.9g,%.9g,%.3f", e.epoch, phase_name(e.phase).c_str(), e.lr, e.train_loss,
                  e.val_loss, e.wall_time_s);
    return buf;
}

void hflip(Tensor& image, std::vector<Box>& boxes) {
    const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w / 2; ++x) std::swap(image.at(ch, y, x), image.at(ch, y, w - 1 - x));
    for (Box& b : boxes) b.cx = 1.0f - b.cx;
}

double mean_loss(const Network& net, const LoadedDataset& data, const LossWeights& weights) {
    if (data.size() == 0) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Tensor out = net.predict(data.images[i]);
        total += yolo_loss(out.data(), encode_targets(data.boxes[i], net.config().head), weights).value;
    }
    return total / static_cast<double>(data.size());
}

void calibrate(Network& net, const LoadedDataset& data) {
    if (data.size() == 0) throw Error("calibration needs at least one sample");
    net.begin_qat();
    for (const Tensor& img : data.images) net.forward(img);
    net.freeze_activation_scales();
}

namespace {

void accumulate(std::vector<LayerParams>& acc, const std::vector<LayerParams>& g) {
    for (std::size_t k = 0; k < acc.size(); ++k) {
        auto add = [](Tensor& a, const Tensor& b) {
            float* pa = a.data().data();
            const float* pb = b.data().data();
            for (std::size_t i = 0; i < a.size(); ++i) pa[i] += pb[i];
        };
        add(acc[k].weight, g[k].weight);
        add(acc[k].bias, g[k].bias);
    }
}

void scale(std::vector<LayerParams>& grads, float s) {
    for (LayerParams& p : grads) {
        for (float& v : p.weight.data()) v *= s;
        for (float& v : p.bias.data()) v *= s;
    }
}

std::string epoch_path(const std::string& dir, std::size_t epoch) {
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%04zu.tylo", epoch);
    return (std::filesystem::path(dir) / name).string();
}

}  // namespace

void init_network(Network& net, const TrainConfig& cfg) {
    net.init_kaiming(cfg.seed);
    if (cfg.head_init_scale == 1.0 && cfg.size_bias_init == 0.0) return;
    LayerParams& out = net.mutable_params().back();
    for (float& w : out.weight.data()) w = static_cast<float>(w * cfg.head_init_scale);
    const HeadSpec& head = net.config().head;
    for (std::size_t cell = 0; cell < head.grid * head.grid; ++cell)
        for (std::size_t b = 0; b < head.boxes; ++b) {
            out.bias[cell * head.cell_size() + b * 5 + 2] = static_cast<float>(cfg.size_bias_init);
            out.bias[cell * head.cell_size() + b * 5 + 3] = static_cast<float>(cfg.size_bias_init);
        }
}

double clip_by_global_norm(std::vector<LayerParams>& grads, double max_norm) {
    double sq = 0.0;
    for (const LayerParams& g : grads) {
        for (float v : g.weight.values()) sq += static_cast<double>(v) * v;
        for (float v : g.bias.values()) sq += static_cast<double>(v) * v;
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) scale(grads, static_cast<float>(max_norm / norm));
    return norm;
}

TrainResult train(const TrainConfig& cfg, const ModelConfig& model, const LoadedDataset& train_set,
                  const LoadedDataset& val_set, const EpochCallback& on_epoch) {
    validate(cfg);
    if (train_set.size() == 0) throw Error("training set is empty after filtering");

    Network net(model);
    init_network(net, cfg);
    Rng order_rng(cfg.seed ^ 0x5DEECE66Dull);
    const HeadSpec& head = model.head;

    const bool write = !cfg.out_dir.empty();
    std::ofstream log_file;
    if (write) {
        std::filesystem::create_directories(cfg.out_dir);
        log_file.open(std::filesystem::path(cfg.out_dir) / "train_log.csv", std::ios::trunc);
        if (!log_file) throw Error("cannot write training log under '" + cfg.out_dir + "'");
        log_file << epoch_log_csv_header() << '\n';
    }

    TrainResult result{net, {}, {}};
    Checkpoint last_good = make_checkpoint(net, {0, TrainingPhase::float_precision, cfg.seed});
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    const std::size_t total_epochs = cfg.epochs_float + cfg.epochs_qat;
    const std::size_t batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t warmup_steps = cfg.warmup_epochs * batches;
    std::size_t step = 0;
    for (std::size_t epoch = 1; epoch <= total_epochs; ++epoch) {
        const bool qat = epoch > cfg.epochs_float;
        const std::size_t in_phase = qat ? epoch - cfg.epochs_float - 1 : epoch - 1;
        const std::size_t phase_len = qat ? cfg.epochs_qat : cfg.epochs_float;
        if (qat && in_phase == 0) net.begin_qat();
        const double lr = multistep_lr(in_phase, phase_len, cfg);

        order_rng.shuffle(std::span<std::size_t>(order));
        double loss_sum = 0.0;
        try {
            for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
                const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
                std::vector<LayerParams> grads = net.zero_like();
                for (std::size_t bi = b0; bi < b1; ++bi) {
                    const std::size_t idx = order[bi];
                    Tensor image = train_set.images[idx];
                    std::vector<Box> boxes = train_set.boxes[idx];
                    if (cfg.hflip && order_rng.uniform() < 0.5) hflip(image, boxes);
                    ForwardTrace trace;
                    const Tensor out = net.forward(image, &trace);
                    const YoloLoss loss = yolo_loss(out.data(), encode_targets(boxes, head), cfg.loss);
                    if (!std::isfinite(loss.value)) throw NumericError("loss is not finite");
                    loss_sum += loss.value;
                    accumulate(grads, net.backward(Tensor(out.shape(), loss.grad), trace));
                }
                scale(grads, 1.0f / static_cast<float>(b1 - b0));
                clip_by_global_norm(grads, cfg.clip_grad_norm);
                double step_lr = lr;
                if (!qat && step < warmup_steps)
                    step_lr *= static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
                ++step;
                sgd_step(net.mutable_params(), grads, step_lr, cfg.weight_decay);
            }
        } catch (const NumericError& e) {
            if (write) save_checkpoint(last_good, (std::filesystem::path(cfg.out_dir) / "last_good.tylo").string());
            throw TrainingDiverged("training diverged in epoch " + std::to_string(epoch) + ": " + e.what() +
                                   (write ? " (last good checkpoint saved as last_good.tylo)" : ""));
        }
        if (qat && in_phase == 0) net.freeze_activation_scales();

        EpochLog e;
        e.epoch = epoch;
        e.phase = qat ? TrainingPhase::quantization_aware : TrainingPhase::float_precision;
        e.lr = lr;
        e.train_loss = loss_sum / static_cast<double>(order.size());
        e.val_loss = mean_loss(net, val_set, cfg.loss);
        e.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.log.push_back(e);
        if (write) log_file << to_csv_row(e) << '\n' << std::flush;
        if (on_epoch) on_epoch(e);

        last_good = make_checkpoint(net, {static_cast<std::uint32_t>(epoch), e.phase, cfg.seed});
        if (write) {
            const bool phase_end = epoch == cfg.epochs_float || epoch == total_epochs;
            if (phase_end || (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0))
                save_checkpoint(last_good, epoch_path(cfg.out_dir, epoch));
        }
    }
    result.final_checkpoint = last_good;
    if (write) save_checkpoint(last_good, (std::filesystem::path(cfg.out_dir) / "final.tylo").string());
    result.network = std::move(net);
    return result;
}

}  // namespace tinyyolo
