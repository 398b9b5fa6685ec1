// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tinyyolo/datasets.hpp"
#include "tinyyolo/yolo_head.hpp"

namespace tinyyolo {

/// Greedy VOC matching inside one image. `dets` must already be in descending
/// score order; each detection takes the unmatched same-class ground truth with
/// the highest IoU >= threshold (true), otherwise it is a false positive.
std::vector<bool> match_detections(std::span<const Detection> dets, std::span<const Box> gts, double iou_threshold = 0.5);

enum class ApMode { all_point, eleven_point };

/// Area under the precision envelope of detections ranked by descending score
/// (stable for ties). Returns nullopt when num_gt == 0.
std::optional<double> average_precision(const std::vector<bool>& tp, std::span<const float> scores, std::size_t num_gt,
                                        ApMode mode = ApMode::all_point);

struct EvalSettings {
    float conf_threshold = 0.1f;
    double nms_iou = 0.5;
    double match_iou = 0.5;
    ApMode ap_mode = ApMode::all_point;
};

struct EvalResult {
    std::vector<std::optional<double>> class_ap;  // nullopt: no ground truth for the class
    double map = 0.0;
    std::vector<std::size_t> num_gt;
    std::vector<std::size_t> num_detections;
    double iou_threshold = 0.5;
    std::size_t max_objects = kNoObjectLimit;
};

/// Scores already-decoded detections (post-NMS) against per-image ground truth.
EvalResult evaluate_detections(const std::vector<std::vector<Detection>>& dets,
                               const std::vector<std::vector<Box>>& gts, std::size_t num_classes,
                               const EvalSettings& settings = {});

/// Maps a preprocessed CHW image to the flat head output.
using Predictor = std::function<Tensor(const Tensor&)>;

/// inference -> decode -> NMS -> matching -> per-class AP -> mAP.
EvalResult evaluate(const Predictor& predict, const HeadSpec& head, const LoadedDataset& data,
                    const EvalSettings& settings = {});

/// Restricts the dataset to images with at most `max_objects` boxes before evaluating.
EvalResult evaluate_restricted(const Predictor& predict, const HeadSpec& head, const LoadedDataset& data,
                               std::size_t max_objects, const EvalSettings& settings = {});

struct NamedPredictor {
    std::string label;  // row label, e.g. the training restriction
    Predictor predict;
};

/// mAP of every (model, evaluation restriction) pair.
struct EvalMatrix {
    std::vector<std::string> row_labels;
    std::vector<std::size_t> restrictions;
    std::vector<std::vector<double>> map;  // [row][restriction]
};

EvalMatrix eval_matrix(const std::vector<NamedPredictor>& models, const HeadSpec& head, const LoadedDataset& data,
                       const std::vector<std::size_t>& restrictions, const EvalSettings& settings = {});

std::string to_csv(const EvalMatrix& m);
std::string to_text_table(const EvalMatrix& m);
/// Per-class AP and overall mAP, one row per class.
std::string to_csv(const EvalResult& r, const std::vector<std::string>& class_names);
std::string to_text_table(const EvalResult& r, const std::vector<std::string>& class_names);

}  // namespace tinyyolo
