// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tinyyolo/network.hpp"
#include "tinyyolo/quant.hpp"

using namespace tinyyolo;

TEST_CASE("quantize examples") {
    CHECK(quantize_value(1.0f, QuantParams{0.5f}) == 2);
    CHECK(quantize_value(1000.0f, QuantParams{0.5f}) == 127);
    CHECK(quantize_value(-1000.0f, QuantParams{0.5f}) == -127);
    CHECK(quantize_value(-0.25f, QuantParams{0.5f}) == -1);
    CHECK(quantize_value(0.25f, QuantParams{0.5f}) == 1);
}

TEST_CASE("choose_scale examples") {
    Tensor t({3}, std::vector<float>{-127.0f, 3.0f, 10.0f});
    CHECK(choose_scale(t.data()).scale == 1.0f);
    CHECK(choose_scale(Tensor({4}).data()).scale == 1.0f);
    CHECK(QuantParams{}.zero_point == 0);
    CHECK(QuantParams{}.bit_width == 8);
}

TEST_CASE("round trip stays within half a step of the clamped value") {
    Rng rng(31);
    for (int t = 0; t < 50; ++t) {
        const Tensor x = oracle::random_tensor(rng, {257}, -3.0, 3.0);
        const QuantParams q{static_cast<float>(rng.uniform(0.005, 0.05))};
        const Tensor back = dequantize(quantize(x, q), q);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double clamped = std::clamp<double>(x[i], -q.range(), q.range());
            CHECK(std::fabs(back[i] - clamped) <= q.scale / 2 * (1 + 1e-6));
        }
        for (std::int8_t c : quantize(x, q).values()) CHECK(c != -128);
    }
}

TEST_CASE("fake quant is idempotent and its gradient is straight-through inside the range") {
    Rng rng(32);
    const QuantParams q{0.01f};
    const Tensor x = oracle::random_tensor(rng, {500}, -2.0, 2.0);
    const Tensor once = fake_quant_forward(x, q);
    CHECK(fake_quant_forward(once, q) == once);

    const Tensor g = fake_quant_backward(Tensor({500}, 1.0f), x, q);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(g[i] == (std::fabs(x[i]) <= q.range() ? 1.0f : 0.0f));
    const Tensor far({1}, 10.0f * q.range());
    CHECK(fake_quant_backward(Tensor({1}, 1.0f), far, q)[0] == 0.0f);
}

TEST_CASE("rounding shift rounds half away from zero") {
    CHECK(rounding_shift_right(5, 1) == 3);
    CHECK(rounding_shift_right(-5, 1) == -3);
    CHECK(rounding_shift_right(4, 2) == 1);
    CHECK(rounding_shift_right(-6, 2) == -2);
    CHECK(rounding_shift_right(7, 0) == 7);
}

TEST_CASE("requantizer reproduces the real multiplier within 2^-15") {
    Rng rng(33);
    for (int t = 0; t < 2000; ++t) {
        const double real = std::exp(rng.uniform(std::log(1e-6), std::log(100.0)));
        const Requantizer r = Requantizer::from_real(real);
        CHECK(r.multiplier >= (1 << 14));
        CHECK(r.multiplier < (1 << 15));
        CHECK(std::fabs(r.value() - real) / real <= std::ldexp(1.0, -15));
    }
    CHECK_THROWS_AS(Requantizer::from_real(0.0), Error);
    CHECK_THROWS_AS(Requantizer::from_real(-1.0), Error);
}

TEST_CASE("requantizer apply equals exact rational rounding") {
    Rng rng(34);
    for (int t = 0; t < 5000; ++t) {
        const Requantizer r = Requantizer::from_real(rng.uniform(1e-4, 2.0));
        const auto acc = static_cast<std::int32_t>(rng.between(-2000000, 2000000));
        const std::int64_t num = static_cast<std::int64_t>(acc) * r.multiplier;
        const std::int64_t den = std::int64_t{1} << r.shift;
        // exact: floor(|num|/den + 1/2) with the sign restored
        const std::int64_t mag = (std::llabs(num) * 2 + den) / (2 * den);
        CHECK(r.apply(acc) == (num < 0 ? -mag : mag));
    }
}

TEST_CASE("qconv2d: zero input and zero bias give zero codes") {
    QuantizedLayer layer = QuantizedLayer::from_float(QuantizedOp::conv3x3, Tensor({2, 3, 3, 3}, 0.3f), Tensor({2}),
                                                      QuantParams{0.1f}, QuantParams{0.01f}, QuantParams{0.2f}, true);
    const QActivation out = qconv2d_int8({Int8Tensor({3, 4, 4}), QuantParams{0.1f}}, layer);
    for (std::int8_t c : out.codes.values()) CHECK(c == 0);
}

TEST_CASE("qconv2d: single pixel single channel against hand integer arithmetic") {
    // weight codes: centre tap 100, bias 0.3 on a 0.1*0.01 grid = 300, output scale 0.05
    Tensor w({1, 1, 3, 3});
    w[4] = 1.0f;
    const QuantizedLayer layer = QuantizedLayer::from_float(QuantizedOp::conv3x3, w, Tensor({1}, 0.3f), QuantParams{0.1f},
                                                            QuantParams{0.01f}, QuantParams{0.05f}, false);
    CHECK(layer.weights[4] == 100);
    CHECK(layer.bias[0] == 300);
    Int8Tensor x({1, 1, 1});
    x[0] = 37;
    const QActivation out = qconv2d_int8({x, QuantParams{0.1f}}, layer);
    // acc = 37*100 + 300 = 4000; 4000 * (0.001/0.05) = 80
    CHECK(out.codes[0] == 80);
}

TEST_CASE("qconv2d and qfc stay within one code of the float reference on 100 random layers") {
    Rng rng(35);
    for (int t = 0; t < 100; ++t) {
        const bool conv = t % 2 == 0;
        const std::size_t in = rng.between(1, 8), out = rng.between(1, 8);
        const QuantParams in_q{static_cast<float>(rng.uniform(0.005, 0.05))};
        const QuantizedLayer layer =
            oracle::random_int8_layer(rng, conv ? QuantizedOp::conv3x3 : QuantizedOp::fc, in, out, in_q, rng.uniform() < 0.5);
        const Tensor xf = conv ? oracle::random_tensor(rng, {in, 5, 6}, -1.0, 1.0) : oracle::random_tensor(rng, {in});
        const QActivation x{quantize(xf, scale_for_max(1.0f)), scale_for_max(1.0f)};
        QuantizedLayer l = layer;
        l.input = x.params;
        l.requant = Requantizer::from_real(static_cast<double>(x.params.scale) * l.weight.scale / l.output.scale);
        const QActivation y = conv ? qconv2d_int8(x, l) : qfc_int8(x, l);
        const std::vector<int> ref = oracle::int8_layer_reference(x, l);
        REQUIRE(ref.size() == y.codes.size());
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(ref[i] - y.codes[i]) <= 1);
    }
}

TEST_CASE("qfc identity passthrough and saturation") {
    Tensor eye({4, 4});
    for (std::size_t i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0f;
    const QuantParams q{0.02f};
    const QuantizedLayer id =
        QuantizedLayer::from_float(QuantizedOp::fc, eye, Tensor({4}), q, QuantParams{1.0f / 127.0f}, q, false);
    Int8Tensor x({4}, std::vector<std::int8_t>{-127, -3, 0, 99});
    CHECK(qfc_int8({x, q}, id).codes == x);

    const QuantizedLayer big =
        QuantizedLayer::from_float(QuantizedOp::fc, Tensor({1, 4}, 1.0f), Tensor({1}), q, QuantParams{1.0f / 127.0f},
                                   QuantParams{0.001f}, false);
    CHECK(qfc_int8({Int8Tensor({4}, std::int8_t{100}), q}, big).codes[0] == 127);
    CHECK(qfc_int8({Int8Tensor({4}, std::int8_t{-100}), q}, big).codes[0] == -128);
}

TEST_CASE("mismatched input scale is rejected") {
    const QuantizedLayer l = QuantizedLayer::from_float(QuantizedOp::fc, Tensor({1, 2}, 0.5f), Tensor({1}),
                                                        QuantParams{0.1f}, QuantParams{0.01f}, QuantParams{0.1f}, false);
    CHECK_THROWS_AS(qfc_int8({Int8Tensor({2}), QuantParams{0.2f}}, l), Error);
}

TEST_CASE("accumulator bound check catches overflow-capable layers") {
    QuantizedLayer l;
    l.op = QuantizedOp::fc;
    l.in_channels = 200000;
    l.out_channels = 1;
    l.bias = {0};
    CHECK_THROWS_AS(l.check_accumulator_bounds(), Error);
    l.in_channels = 9 * 512;
    CHECK_NOTHROW(l.check_accumulator_bounds());
}

TEST_CASE("int8 inference of a calibrated model is bitwise reproducible") {
    ModelConfig cfg = parse_model_config(reference_config_text(1));
    Network net(cfg);
    net.init_kaiming(5);
    Rng rng(36);
    net.begin_qat();
    for (int i = 0; i < 3; ++i) net.forward(oracle::random_tensor(rng, {3, 88, 88}));
    net.freeze_activation_scales();
    const QuantizedModel a = QuantizedModel::from_network(net);
    const QuantizedModel b = QuantizedModel::from_network(net);
    CHECK(a == b);
    const Tensor x = oracle::random_tensor(rng, {3, 88, 88});
    const QActivation ya = a.run(quantize(x, a.input_params()));
    const QActivation yb = b.run(quantize(x, b.input_params()));
    CHECK(ya.codes == yb.codes);
    CHECK(a.predict(x) == b.predict(x));
}
