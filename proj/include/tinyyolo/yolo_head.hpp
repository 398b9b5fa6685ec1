// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <span>
#include <vector>

#include "tinyyolo/model_config.hpp"

namespace tinyyolo {

/// Center-size box in normalized image coordinates.
struct Box {
    float cx = 0.0f;
    float cy = 0.0f;
    float w = 0.0f;
    float h = 0.0f;
    int class_id = 0;

    friend bool operator==(const Box&, const Box&) = default;
};

/// True when 0 <= cx,cy <= 1 and 0 < w,h <= 1.
bool is_valid(const Box& b);

struct Detection {
    Box box;
    float score = 0.0f;
};

/// Intersection over union; 0 for disjoint or degenerate boxes.
double iou(const Box& a, const Box& b);

struct GridCell {
    bool has_object = false;
    float x = 0.0f;  // center relative to the cell, [0, 1)
    float y = 0.0f;
    float w = 0.0f;  // size relative to the image
    float h = 0.0f;
    int class_id = 0;
};

/// S*S cells, row-major (row = y index).
struct GridTarget {
    HeadSpec head;
    std::vector<GridCell> cells;
};

/// Assigns each box to the cell [i/S, (i+1)/S) holding its center (1.0 maps to
/// the last cell). A second box landing in an occupied cell is dropped.
GridTarget encode_targets(std::span<const Box> boxes, const HeadSpec& head);

struct LossTerms {
    double coord = 0.0;
    double object = 0.0;
    double no_object = 0.0;
    double cls = 0.0;

    double total() const { return coord + object + no_object + cls; }
};

struct YoloLoss {
    double value = 0.0;
    LossTerms terms;
    std::vector<float> grad;  // d value / d pred
};

struct LossWeights {
    double coord = 5.0;
    double no_object = 0.5;
};

/// Per object cell: which predictor is responsible and the IoU it is trained towards.
struct Assignment {
    std::vector<int> responsible;    // -1 for empty cells
    std::vector<double> iou_target;  // confidence target of the responsible box
};

/// Responsible predictor = highest IoU with the target (ties -> lower index).
Assignment assign_responsibility(std::span<const float> pred, const GridTarget& target);

/// Sum-squared YOLO loss over coordinates (sqrt on w, h), confidences and class
/// scores. The IoU confidence target is treated as a constant.
YoloLoss yolo_loss(std::span<const float> pred, const GridTarget& target, LossWeights weights = {});

/// Same loss evaluated under a fixed assignment.
YoloLoss yolo_loss(std::span<const float> pred, const GridTarget& target, const Assignment& assignment,
                   LossWeights weights = {});

/// Decoded box for predictor `b` of cell `cell`, not clamped.
Box predicted_box(std::span<const float> pred, const HeadSpec& head, std::size_t cell, std::size_t b);

/// Emits boxes with confidence * max class score >= threshold, clamped to [0, 1].
std::vector<Detection> decode_predictions(std::span<const float> pred, const HeadSpec& head, float conf_threshold);

/// Greedy per-class suppression by (score desc, input index asc).
std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold);

}  // namespace tinyyolo
