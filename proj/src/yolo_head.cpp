// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "tinyyolo/yolo_head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tinyyolo {

bool is_valid(const Box& b) {
    return b.cx >= 0.0f && b.cx <= 1.0f && b.cy >= 0.0f && b.cy <= 1.0f && b.w > 0.0f && b.w <= 1.0f && b.h > 0.0f &&
           b.h <= 1.0f && b.class_id >= 0;
}

double iou(const Box& a, const Box& b) {
    const double aw = std::max(0.0f, a.w), ah = std::max(0.0f, a.h);
    const double bw = std::max(0.0f, b.w), bh = std::max(0.0f, b.h);
    const double ix = std::min(a.cx + aw / 2, b.cx + bw / 2) - std::max(a.cx - aw / 2, b.cx - bw / 2);
    const double iy = std::min(a.cy + ah / 2, b.cy + bh / 2) - std::max(a.cy - ah / 2, b.cy - bh / 2);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    const double inter = ix * iy;
    const double uni = aw * ah + bw * bh - inter;
    return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

namespace {

std::size_t cell_index(float v, std::size_t s) {
    const auto i = static_cast<std::size_t>(std::floor(static_cast<double>(v) * static_cast<double>(s)));
    return std::min(i, s - 1);
}

void check_pred(std::span<const float> pred, const HeadSpec& head) {
    if (pred.size() != head.output_size())
        throw ShapeError("head output has " + std::to_string(pred.size()) + " values, expected " +
                         std::to_string(head.output_size()));
}

Box target_box(const GridCell& c, std::size_t cell, std::size_t s) {
    const auto row = static_cast<float>(cell / s), col = static_cast<float>(cell % s);
    const auto sf = static_cast<float>(s);
    return {(col + c.x) / sf, (row + c.y) / sf, c.w, c.h, c.class_id};
}

double safe_sqrt(double v) { return v > 0.0 ? std::sqrt(v) : 0.0; }

}  // namespace

GridTarget encode_targets(std::span<const Box> boxes, const HeadSpec& head) {
    if (head.grid == 0) throw Error("grid size must be positive");
    const std::size_t s = head.grid;
    GridTarget t{head, std::vector<GridCell>(s * s)};
    for (const Box& b : boxes) {
        const std::size_t col = cell_index(b.cx, s), row = cell_index(b.cy, s);
        GridCell& c = t.cells[row * s + col];
        if (c.has_object) continue;
        c.has_object = true;
        c.x = b.cx * static_cast<float>(s) - static_cast<float>(col);
        c.y = b.cy * static_cast<float>(s) - static_cast<float>(row);
        c.w = b.w;
        c.h = b.h;
        c.class_id = b.class_id;
    }
    return t;
}

Box predicted_box(std::span<const float> pred, const HeadSpec& head, std::size_t cell, std::size_t b) {
    const std::size_t s = head.grid;
    const float* p = pred.data() + cell * head.cell_size() + b * 5;
    const auto row = static_cast<float>(cell / s), col = static_cast<float>(cell % s);
    const auto sf = static_cast<float>(s);
    return {(col + p[0]) / sf, (row + p[1]) / sf, p[2], p[3], 0};
}

Assignment assign_responsibility(std::span<const float> pred, const GridTarget& target) {
    const HeadSpec& head = target.head;
    check_pred(pred, head);
    Assignment a{std::vector<int>(target.cells.size(), -1), std::vector<double>(target.cells.size(), 0.0)};
    for (std::size_t c = 0; c < target.cells.size(); ++c) {
        if (!target.cells[c].has_object) continue;
        const Box truth = target_box(target.cells[c], c, head.grid);
        int best = 0;
        double best_iou = -1.0;
        for (std::size_t b = 0; b < head.boxes; ++b) {
            const double v = iou(predicted_box(pred, head, c, b), truth);
            if (v > best_iou) {
                best_iou = v;
                best = static_cast<int>(b);
            }
        }
        a.responsible[c] = best;
        a.iou_target[c] = best_iou;
    }
    return a;
}

YoloLoss yolo_loss(std::span<const float> pred, const GridTarget& target, LossWeights weights) {
    return yolo_loss(pred, target, assign_responsibility(pred, target), weights);
}

YoloLoss yolo_loss(std::span<const float> pred, const GridTarget& target, const Assignment& assignment,
                   LossWeights weights) {
    const HeadSpec& head = target.head;
    check_pred(pred, head);
    if (target.cells.size() != head.grid * head.grid || assignment.responsible.size() != target.cells.size())
        throw ShapeError("yolo_loss: target or assignment does not match head");

    YoloLoss out;
    out.grad.assign(pred.size(), 0.0f);
    const std::size_t cs = head.cell_size();
    for (std::size_t c = 0; c < target.cells.size(); ++c) {
        const float* p = pred.data() + c * cs;
        float* g = out.grad.data() + c * cs;
        const GridCell& t = target.cells[c];
        const int resp = t.has_object ? assignment.responsible[c] : -1;

        for (std::size_t b = 0; b < head.boxes; ++b) {
            const std::size_t o = b * 5;
            if (static_cast<int>(b) == resp) {
                const double dx = p[o] - t.x, dy = p[o + 1] - t.y;
                const double sw = safe_sqrt(p[o + 2]), sh = safe_sqrt(p[o + 3]);
                const double dw = sw - safe_sqrt(t.w), dh = sh - safe_sqrt(t.h);
                out.terms.coord += weights.coord * (dx * dx + dy * dy + dw * dw + dh * dh);
                g[o] = static_cast<float>(2 * weights.coord * dx);
                g[o + 1] = static_cast<float>(2 * weights.coord * dy);
                // d/dw (sqrt(w) - sqrt(t))^2 = (sqrt(w) - sqrt(t)) / sqrt(w); zero for w <= 0
                g[o + 2] = sw > 0.0 ? static_cast<float>(weights.coord * dw / sw) : 0.0f;
                g[o + 3] = sh > 0.0 ? static_cast<float>(weights.coord * dh / sh) : 0.0f;

                const double dc = p[o + 4] - assignment.iou_target[c];
                out.terms.object += dc * dc;
                g[o + 4] = static_cast<float>(2 * dc);
            } else {
                const double conf = p[o + 4];
                out.terms.no_object += weights.no_object * conf * conf;
                g[o + 4] = static_cast<float>(2 * weights.no_object * conf);
            }
        }
        if (t.has_object) {
            for (std::size_t k = 0; k < head.classes; ++k) {
                const std::size_t o = head.boxes * 5 + k;
                const double d = p[o] - (static_cast<int>(k) == t.class_id ? 1.0 : 0.0);
                out.terms.cls += d * d;
                g[o] = static_cast<float>(2 * d);
            }
        }
    }
    out.value = out.terms.total();
    return out;
}

std::vector<Detection> decode_predictions(std::span<const float> pred, const HeadSpec& head, float conf_threshold) {
    check_pred(pred, head);
    std::vector<Detection> dets;
    const std::size_t cs = head.cell_size();
    for (std::size_t c = 0; c < head.grid * head.grid; ++c) {
        const float* p = pred.data() + c * cs;
        const float* cls = p + head.boxes * 5;
        const auto best = static_cast<std::size_t>(std::max_element(cls, cls + head.classes) - cls);
        for (std::size_t b = 0; b < head.boxes; ++b) {
            const float score = p[b * 5 + 4] * cls[best];
            if (!(score >= conf_threshold)) continue;
            Box box = predicted_box(pred, head, c, b);
            box.cx = std::clamp(box.cx, 0.0f, 1.0f);
            box.cy = std::clamp(box.cy, 0.0f, 1.0f);
            box.w = std::clamp(box.w, 0.0f, 1.0f);
            box.h = std::clamp(box.h, 0.0f, 1.0f);
            box.class_id = static_cast<int>(best);
            dets.push_back({box, score});
        }
    }
    return dets;
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
    std::vector<Detection> kept;
    for (std::size_t i : order) {
        const Detection& d = dets[i];
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
            return k.box.class_id == d.box.class_id && iou(k.box, d.box) > iou_threshold;
        });
        if (!suppressed) kept.push_back(d);
    }
    return kept;
}

}  // namespace tinyyolo
