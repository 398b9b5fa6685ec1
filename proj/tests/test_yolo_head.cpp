// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "tinyyolo/yolo_head.hpp"

using namespace tinyyolo;

namespace {

Box random_box(Rng& rng, int classes = 1) {
    Box b;
    b.w = static_cast<float>(rng.uniform(0.05, 0.5));
    b.h = static_cast<float>(rng.uniform(0.05, 0.5));
    b.cx = static_cast<float>(rng.uniform(0.0, 1.0));
    b.cy = static_cast<float>(rng.uniform(0.0, 1.0));
    b.class_id = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    return b;
}

}  // namespace

TEST_CASE("encode_targets examples") {
    const HeadSpec head{4, 2, 1};
    const Box centre{0.5f, 0.5f, 0.2f, 0.2f, 0};
    GridTarget t = encode_targets(std::vector<Box>{centre}, head);
    CHECK(t.cells[2 * 4 + 2].has_object);
    CHECK(t.cells[2 * 4 + 2].x == 0.0f);
    CHECK(t.cells[2 * 4 + 2].y == 0.0f);

    t = encode_targets(std::vector<Box>{{0.1f, 0.1f, 0.2f, 0.2f, 0}}, head);
    CHECK(t.cells[0].has_object);
    CHECK(t.cells[0].x == doctest::Approx(0.4));
    CHECK(t.cells[0].y == doctest::Approx(0.4));
    CHECK(t.cells[0].w == 0.2f);

    t = encode_targets(std::vector<Box>{{0.1f, 0.1f, 0.2f, 0.2f, 0}, {0.12f, 0.15f, 0.3f, 0.3f, 0}}, head);
    CHECK(t.cells[0].w == 0.2f);
    CHECK(std::count_if(t.cells.begin(), t.cells.end(), [](const GridCell& c) { return c.has_object; }) == 1);

    t = encode_targets(std::vector<Box>{{1.0f, 1.0f, 0.2f, 0.2f, 0}}, head);
    CHECK(t.cells[15].has_object);
    CHECK(encode_targets(std::vector<Box>{}, head).cells.size() == 16);
}

TEST_CASE("iou examples and properties") {
    const Box a{0.1f, 0.1f, 0.2f, 0.2f, 0}, b{0.2f, 0.2f, 0.2f, 0.2f, 0};
    CHECK(iou(a, a) == doctest::Approx(1.0));
    CHECK(iou(a, Box{0.8f, 0.8f, 0.1f, 0.1f, 0}) == 0.0);
    CHECK(iou(a, b) == doctest::Approx(1.0 / 7.0).epsilon(1e-6));
    Rng rng(51);
    for (int i = 0; i < 1000; ++i) {
        const Box x = random_box(rng), y = random_box(rng);
        const double v = iou(x, y);
        CHECK(v == iou(y, x));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(v == doctest::Approx(oracle::iou(x, y)).epsilon(1e-5));
        CHECK(iou(x, x) == doctest::Approx(1.0));
    }
}

TEST_CASE("loss is zero on a perfect prediction") {
    Rng rng(52);
    for (const HeadSpec head : {HeadSpec{4, 2, 1}, HeadSpec{4, 1, 3}}) {
        for (int t = 0; t < 20; ++t) {
            std::vector<Box> boxes;
            for (int i = 0; i < 5; ++i) boxes.push_back(random_box(rng, static_cast<int>(head.classes)));
            const GridTarget target = encode_targets(boxes, head);
            const YoloLoss l = yolo_loss(oracle::perfect_output(target), target);
            CHECK(l.value == 0.0);
        }
    }
}

TEST_CASE("loss of an all-zero prediction on one object cell, by hand") {
    const HeadSpec head{4, 2, 1};
    const Box box{0.3f, 0.6f, 0.36f, 0.16f, 0};
    const GridTarget t = encode_targets(std::vector<Box>{box}, head);
    const std::vector<float> pred(head.output_size(), 0.0f);
    const double x = 0.3 * 4 - 1, y = 0.6 * 4 - 2;
    // coordinates: 5 * (x^2 + y^2 + (0 - sqrt w)^2 + (0 - sqrt h)^2); confidence target IoU = 0; class (0 - 1)^2
    const double expected = 5.0 * (x * x + y * y + 0.36 + 0.16) + 1.0;
    CHECK(yolo_loss(pred, t).value == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("loss gradient matches central differences") {
    Rng rng(53);
    for (const HeadSpec head : {HeadSpec{4, 2, 1}, HeadSpec{4, 1, 3}}) {
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<Box> boxes;
            const auto n = rng.between(1, 4);
            for (int i = 0; i < n; ++i) boxes.push_back(random_box(rng, static_cast<int>(head.classes)));
            const GridTarget target = encode_targets(boxes, head);
            std::vector<float> pred(head.output_size());
            for (std::size_t i = 0; i < pred.size(); ++i) {
                const bool size_slot = i % head.cell_size() < head.boxes * 5 && (i % head.cell_size()) % 5 >= 2 &&
                                       (i % head.cell_size()) % 5 <= 3;
                pred[i] = static_cast<float>(size_slot ? rng.uniform(0.05, 0.9) : rng.uniform(-1.0, 1.0));
            }
            const Assignment fixed = assign_responsibility(pred, target);
            const YoloLoss l = yolo_loss(pred, target, fixed);
            CHECK(l.value >= 0.0);
            const auto numeric = oracle::numeric_gradient(pred, [&] { return yolo_loss(pred, target, fixed).value; });
            CHECK(oracle::relative_error(oracle::to_double(l.grad), numeric) < 1e-3);
        }
    }
}

TEST_CASE("negative predicted sizes have zero size gradient") {
    const HeadSpec head{4, 1, 1};
    const GridTarget t = encode_targets(std::vector<Box>{{0.1f, 0.1f, 0.2f, 0.2f, 0}}, head);
    std::vector<float> pred(head.output_size(), 0.0f);
    pred[2] = -0.3f;
    pred[3] = -0.1f;
    const YoloLoss l = yolo_loss(pred, t);
    CHECK(l.grad[2] == 0.0f);
    CHECK(l.grad[3] == 0.0f);
    CHECK(std::isfinite(l.value));
}

TEST_CASE("decode examples") {
    const HeadSpec head{4, 2, 1};
    CHECK(decode_predictions(std::vector<float>(head.output_size(), 0.0f), head, 0.1f).empty());

    std::vector<float> out(head.output_size(), 0.0f);
    float* p = out.data() + 5 * head.cell_size();
    p[0] = 0.5f;
    p[1] = 0.5f;
    p[2] = 0.2f;
    p[3] = 0.3f;
    p[4] = 0.9f;
    p[10] = 1.0f;
    const auto dets = decode_predictions(out, head, 0.5f);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].score == doctest::Approx(0.9));
    CHECK(dets[0].box.cx == doctest::Approx(1.5 / 4));
    CHECK(dets[0].box.cy == doctest::Approx(1.5 / 4));
}

TEST_CASE("encode then perfect output then decode recovers the boxes") {
    Rng rng(54);
    const HeadSpec head{4, 1, 3};
    for (int t = 0; t < 200; ++t) {
        // one box per cell so nothing is dropped
        std::vector<Box> boxes;
        for (std::size_t cell = 0; cell < 16; ++cell) {
            if (rng.uniform() < 0.7) continue;
            Box b = random_box(rng, 3);
            b.cx = static_cast<float>((static_cast<double>(cell % 4) + rng.uniform(0.0, 0.999)) / 4);
            b.cy = static_cast<float>((static_cast<double>(cell / 4) + rng.uniform(0.0, 0.999)) / 4);
            boxes.push_back(b);
        }
        const auto dets = decode_predictions(oracle::perfect_output(encode_targets(boxes, head)), head, 0.5f);
        REQUIRE(dets.size() == boxes.size());
        for (const Box& b : boxes) {
            const auto hit = std::find_if(dets.begin(), dets.end(), [&](const Detection& d) {
                return std::fabs(d.box.cx - b.cx) <= 1e-6 && std::fabs(d.box.cy - b.cy) <= 1e-6;
            });
            REQUIRE(hit != dets.end());
            CHECK(hit->box.w == b.w);
            CHECK(hit->box.h == b.h);
            CHECK(hit->box.class_id == b.class_id);
        }
    }
}

TEST_CASE("nms examples") {
    const Box a{0.5f, 0.5f, 0.2f, 0.2f, 0};
    std::vector<Detection> two{{a, 0.8f}, {a, 0.9f}};
    auto kept = nms(two, 0.5);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].score == 0.9f);
    std::vector<Detection> disjoint{{a, 0.8f}, {Box{0.1f, 0.1f, 0.1f, 0.1f, 0}, 0.9f}};
    CHECK(nms(disjoint, 0.5).size() == 2);
    std::vector<Detection> other_class{{a, 0.8f}, {Box{0.5f, 0.5f, 0.2f, 0.2f, 1}, 0.9f}};
    CHECK(nms(other_class, 0.5).size() == 2);
}

TEST_CASE("nms agrees with the brute-force greedy oracle") {
    Rng rng(55);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<Detection> dets;
        for (int i = 0; i < 10; ++i) {
            Box b = random_box(rng, 2);
            b.cx = static_cast<float>(rng.uniform(0.3, 0.7));
            b.cy = static_cast<float>(rng.uniform(0.3, 0.7));
            dets.push_back({b, static_cast<float>(rng.uniform())});
        }
        const double thr = rng.uniform(0.1, 0.7);
        const auto got = nms(dets, thr);
        const auto want = oracle::nms_indices(dets, thr);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].score == dets[want[i]].score);
            CHECK(got[i].box == dets[want[i]].box);
        }
        for (std::size_t i = 0; i < got.size(); ++i)
            for (std::size_t j = i + 1; j < got.size(); ++j)
                if (got[i].box.class_id == got[j].box.class_id) CHECK(oracle::iou(got[i].box, got[j].box) <= thr + 1e-6);
    }
}

TEST_CASE("nms survivor set is independent of input order") {
    Rng rng(56);
    auto key = [](const std::vector<Detection>& v) {
        std::vector<std::tuple<float, float, float, float, float>> k;
        for (const Detection& d : v) k.emplace_back(d.score, d.box.cx, d.box.cy, d.box.w, d.box.h);
        std::sort(k.begin(), k.end());
        return k;
    };
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Detection> dets;
        // equal scores come in pairs of non-overlapping boxes
        for (int i = 0; i < 6; ++i) {
            const auto s = static_cast<float>(rng.uniform());
            dets.push_back({Box{static_cast<float>(rng.uniform(0.05, 0.45)), 0.5f, 0.1f, 0.3f, 0}, s});
            dets.push_back({Box{static_cast<float>(rng.uniform(0.55, 0.95)), 0.5f, 0.1f, 0.3f, 0}, s});
        }
        const auto base = key(nms(dets, 0.3));
        for (int p = 0; p < 5; ++p) {
            rng.shuffle(std::span<Detection>(dets));
            CHECK(key(nms(dets, 0.3)) == base);
        }
    }
}
