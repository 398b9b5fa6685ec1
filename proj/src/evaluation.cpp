// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "tinyyolo/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <tuple>

namespace tinyyolo {

std::vector<bool> match_detections(std::span<const Detection> dets, std::span<const Box> gts, double iou_threshold) {
    std::vector<bool> tp(dets.size(), false);
    std::vector<bool> used(gts.size(), false);
    for (std::size_t d = 0; d < dets.size(); ++d) {
        double best = -1.0;
        std::size_t best_gt = gts.size();
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (used[g] || gts[g].class_id != dets[d].box.class_id) continue;
            const double v = iou(dets[d].box, gts[g]);
            if (v >= iou_threshold && v > best) {
                best = v;
                best_gt = g;
            }
        }
        if (best_gt < gts.size()) {
            used[best_gt] = true;
            tp[d] = true;
        }
    }
    return tp;
}

std::optional<double> average_precision(const std::vector<bool>& tp, std::span<const float> scores, std::size_t num_gt,
                                        ApMode mode) {
    if (tp.size() != scores.size()) throw ShapeError("average_precision: label/score length mismatch");
    if (num_gt == 0) return std::nullopt;
    std::vector<std::size_t> order(tp.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<double> recall, precision;
    std::size_t tps = 0, fps = 0;
    for (std::size_t i : order) {
        tp[i] ? ++tps : ++fps;
        recall.push_back(static_cast<double>(tps) / static_cast<double>(num_gt));
        precision.push_back(static_cast<double>(tps) / static_cast<double>(tps + fps));
    }

    if (mode == ApMode::eleven_point) {
        double ap = 0.0;
        for (int t = 0; t <= 10; ++t) {
            double p = 0.0;
            for (std::size_t k = 0; k < recall.size(); ++k)
                if (recall[k] >= t / 10.0) p = std::max(p, precision[k]);
            ap += p / 11.0;
        }
        return ap;
    }

    // precision envelope: running max from the right
    for (std::size_t k = precision.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
    double ap = 0.0, prev_recall = 0.0;
    for (std::size_t k = 0; k < recall.size(); ++k) {
        ap += (recall[k] - prev_recall) * precision[k];
        prev_recall = recall[k];
    }
    return ap;
}

EvalResult evaluate_detections(const std::vector<std::vector<Detection>>& dets,
                               const std::vector<std::vector<Box>>& gts, std::size_t num_classes,
                               const EvalSettings& settings) {
    if (dets.size() != gts.size()) throw ShapeError("evaluate_detections: detections and ground truth differ in image count");
    EvalResult r;
    r.iou_threshold = settings.match_iou;
    r.num_gt.assign(num_classes, 0);
    r.num_detections.assign(num_classes, 0);
    // (score, image, det index, tp) per class; sorted by score desc then image and index asc
    std::vector<std::vector<std::tuple<float, std::size_t, std::size_t, bool>>> ranked(num_classes);
    for (std::size_t img = 0; img < dets.size(); ++img) {
        for (const Box& g : gts[img]) {
            if (g.class_id < 0 || static_cast<std::size_t>(g.class_id) >= num_classes)
                throw Error("ground-truth class " + std::to_string(g.class_id) + " outside model class count");
            ++r.num_gt[static_cast<std::size_t>(g.class_id)];
        }
        std::vector<std::size_t> order(dets[img].size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return dets[img][a].score > dets[img][b].score; });
        std::vector<Detection> sorted;
        for (std::size_t i : order) sorted.push_back(dets[img][i]);
        const std::vector<bool> tp = match_detections(sorted, gts[img], settings.match_iou);
        for (std::size_t k = 0; k < sorted.size(); ++k) {
            const int c = sorted[k].box.class_id;
            if (c < 0 || static_cast<std::size_t>(c) >= num_classes) throw Error("detection class outside model class count");
            ranked[static_cast<std::size_t>(c)].emplace_back(sorted[k].score, img, order[k], tp[k]);
            ++r.num_detections[static_cast<std::size_t>(c)];
        }
    }

    double sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        auto& list = ranked[c];
        std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
            if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
            return std::make_pair(std::get<1>(a), std::get<2>(a)) < std::make_pair(std::get<1>(b), std::get<2>(b));
        });
        std::vector<bool> tp;
        std::vector<float> scores;
        for (const auto& [s, img, idx, t] : list) {
            scores.push_back(s);
            tp.push_back(t);
        }
        const auto ap = average_precision(tp, scores, r.num_gt[c], settings.ap_mode);
        r.class_ap.push_back(ap);
        if (ap) {
            sum += *ap;
            ++counted;
        }
    }
    r.map = counted ? sum / static_cast<double>(counted) : 0.0;
    return r;
}

EvalResult evaluate(const Predictor& predict, const HeadSpec& head, const LoadedDataset& data,
                    const EvalSettings& settings) {
    std::vector<std::vector<Detection>> dets;
    dets.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Tensor out = predict(data.images[i]);
        if (out.size() != head.output_size()) throw ShapeError("predictor output does not match the head size");
        dets.push_back(nms(decode_predictions(out.data(), head, settings.conf_threshold), settings.nms_iou));
    }
    return evaluate_detections(dets, data.boxes, head.classes, settings);
}

EvalResult evaluate_restricted(const Predictor& predict, const HeadSpec& head, const LoadedDataset& data,
                               std::size_t max_objects, const EvalSettings& settings) {
    if (max_objects == 0) throw Error("max objects must be at least 1");
    LoadedDataset subset;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.boxes[i].size() > max_objects) continue;
        subset.images.push_back(data.images[i]);
        subset.boxes.push_back(data.boxes[i]);
    }
    EvalResult r = evaluate(predict, head, subset, settings);
    r.max_objects = max_objects;
    return r;
}

EvalMatrix eval_matrix(const std::vector<NamedPredictor>& models, const HeadSpec& head, const LoadedDataset& data,
                       const std::vector<std::size_t>& restrictions, const EvalSettings& settings) {
    EvalMatrix m;
    m.restrictions = restrictions;
    for (const NamedPredictor& model : models) {
        m.row_labels.push_back(model.label);
        std::vector<double> row;
        for (std::size_t n : restrictions) row.push_back(evaluate_restricted(model.predict, head, data, n, settings).map);
        m.map.push_back(std::move(row));
    }
    return m;
}

namespace {

std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * v);
    return buf;
}

std::string fixed(double v, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

std::string render(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> widths;
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (widths.size() <= i) widths.push_back(0);
            widths[i] = std::max(widths[i], r[i].size());
        }
    std::ostringstream os;
    for (std::size_t ri = 0; ri < rows.size(); ++ri) {
        for (std::size_t i = 0; i < rows[ri].size(); ++i) os << (i ? "  " : "") << pad(rows[ri][i], widths[i]);
        os << '\n';
        if (ri == 0) {
            std::size_t total = 0;
            for (std::size_t w : widths) total += w;
            os << std::string(total + 2 * (widths.size() - 1), '-') << '\n';
        }
    }
    return os.str();
}

}  // namespace

std::string to_csv(const EvalMatrix& m) {
    std::ostringstream os;
    os << "train_restriction";
    for (std::size_t n : m.restrictions) os << ",eval_" << (n == kNoObjectLimit ? std::string("inf") : std::to_string(n));
    os << '\n';
    for (std::size_t r = 0; r < m.row_labels.size(); ++r) {
        os << m.row_labels[r];
        for (double v : m.map[r]) os << ',' << fixed(v, 6);
        os << '\n';
    }
    return os.str();
}

std::string to_text_table(const EvalMatrix& m) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"mAP (train \\ eval)"};
    for (std::size_t n : m.restrictions) header.push_back(object_limit_label(n));
    rows.push_back(header);
    for (std::size_t r = 0; r < m.row_labels.size(); ++r) {
        std::vector<std::string> row{m.row_labels[r]};
        for (double v : m.map[r]) row.push_back(percent(v));
        rows.push_back(row);
    }
    return render(rows);
}

std::string to_csv(const EvalResult& r, const std::vector<std::string>& class_names) {
    std::ostringstream os;
    os << "class,ap,num_gt,num_detections\n";
    for (std::size_t c = 0; c < r.class_ap.size(); ++c) {
        os << (c < class_names.size() ? class_names[c] : std::to_string(c)) << ','
           << (r.class_ap[c] ? fixed(*r.class_ap[c], 6) : std::string("")) << ',' << r.num_gt[c] << ','
           << r.num_detections[c] << '\n';
    }
    os << "overall," << fixed(r.map, 6) << ",,\n";
    return os.str();
}

std::string to_text_table(const EvalResult& r, const std::vector<std::string>& class_names) {
    std::vector<std::string> header{"mAP@" + fixed(r.iou_threshold, 2)}, row{object_limit_label(r.max_objects)};
    for (std::size_t c = 0; c < r.class_ap.size(); ++c) {
        header.push_back(c < class_names.size() ? class_names[c] : "class " + std::to_string(c));
        row.push_back(r.class_ap[c] ? percent(*r.class_ap[c]) : "n/a");
    }
    header.push_back("overall");
    row.push_back(percent(r.map));
    return render({header, row});
}

}  // namespace tinyyolo
