// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

// Acceptance runner: one PASS/FAIL line per criterion.
//
//   tinyyolo_acceptance                 all criteria
//   tinyyolo_acceptance --only e2e      a comma-separated subset
//   tinyyolo_acceptance --skip e2e      everything except a subset
//
// Exit status is 0 only when every selected criterion passes.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "tinyyolo/datasets.hpp"
#include "tinyyolo/evaluation.hpp"
#include "tinyyolo/image.hpp"
#include "tinyyolo/network.hpp"
#include "tinyyolo/ops.hpp"
#include "tinyyolo/profiler.hpp"
#include "tinyyolo/serialization.hpp"
#include "tinyyolo/synth.hpp"
#include "tinyyolo/training.hpp"

using namespace tinyyolo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double dot(const Tensor& a, const Tensor& r) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * r[i];
    return s;
}

// Gradient with respect to every argument of the op, as one vector.
std::vector<double> concat(std::initializer_list<Tensor> parts) {
    std::vector<double> out;
    for (const Tensor& t : parts) out.insert(out.end(), t.values().begin(), t.values().end());
    return out;
}

std::vector<double> concat(std::initializer_list<std::vector<double>> parts) {
    std::vector<double> out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

double round_sig3(double v) {
    if (v == 0.0) return 0.0;
    const double mag = std::pow(10.0, 2 - static_cast<int>(std::floor(std::log10(std::fabs(v)))));
    return std::round(v * mag) / mag;
}

// ---- gradient suite ----------------------------------------------------------

Outcome gradient_suite() {
    constexpr double kTol = 1e-3;
    constexpr int kInstances = 20;
    const auto t0 = Clock::now();
    Outcome o;
    double worst = 0.0;
    auto check = [&](const std::string& what, const std::vector<double>& analytic, const std::vector<double>& numeric) {
        const double e = oracle::relative_error(analytic, numeric);
        worst = std::max(worst, e);
        o.require(e < kTol, what + " rel. error " + fmt("%.3g", e));
    };

    Rng rng(1001);
    for (int t = 0; t < kInstances; ++t) {
        const std::size_t C = rng.between(1, 3), K = rng.between(1, 3), H = rng.between(2, 5), W = rng.between(2, 5);
        Tensor in = oracle::random_tensor(rng, {C, H, W});
        Tensor w = oracle::random_tensor(rng, {K, C, 3, 3});
        Tensor b = oracle::random_tensor(rng, {K});
        const Tensor r = oracle::random_tensor(rng, {K, H, W});
        const ConvGrads g = conv2d_backward(r, in, w);
        auto f = [&] { return dot(conv2d_forward(in, w, b), r); };
        check("conv", concat({g.input, g.weight, g.bias}),
              concat({oracle::numeric_gradient(in.values(), f), oracle::numeric_gradient(w.values(), f),
                      oracle::numeric_gradient(b.values(), f)}));
    }
    for (int t = 0; t < kInstances; ++t) {
        const std::size_t I = rng.between(1, 12), O = rng.between(1, 8);
        Tensor in = oracle::random_tensor(rng, {I});
        Tensor w = oracle::random_tensor(rng, {O, I});
        Tensor b = oracle::random_tensor(rng, {O});
        const Tensor r = oracle::random_tensor(rng, {O});
        const FcGrads g = fc_backward(r, in, w);
        auto f = [&] { return dot(fc_forward(in, w, b), r); };
        check("fc", concat({g.input, g.weight, g.bias}),
              concat({oracle::numeric_gradient(in.values(), f), oracle::numeric_gradient(w.values(), f),
                      oracle::numeric_gradient(b.values(), f)}));
    }
    for (int t = 0; t < kInstances; ++t) {
        const std::size_t C = rng.between(1, 3), H = rng.between(2, 7), W = rng.between(2, 7);
        Tensor in({C, H, W});
        std::vector<std::size_t> rank(in.size());
        std::iota(rank.begin(), rank.end(), 0);
        rng.shuffle(std::span<std::size_t>(rank));
        for (std::size_t i = 0; i < in.size(); ++i) in[i] = 0.01f * static_cast<float>(rank[i]) - 0.3f;
        PoolCache cache;
        const Tensor out = maxpool2x2_forward(in, &cache);
        const Tensor r = oracle::random_tensor(rng, out.shape());
        check("maxpool", oracle::to_double(maxpool2x2_backward(r, cache).values()),
              oracle::numeric_gradient(in.values(), [&] { return dot(maxpool2x2_forward(in), r); }));

        Tensor x = oracle::random_away_from_zero(rng, {C, H, W}, 0.01);
        const Tensor rr = oracle::random_tensor(rng, x.shape());
        check("relu", oracle::to_double(relu_backward(rr, x).values()),
              oracle::numeric_gradient(x.values(), [&] { return dot(relu_forward(x), rr); }));
    }
    for (const HeadSpec head : {HeadSpec{4, 2, 1}, HeadSpec{4, 1, 3}}) {
        for (int t = 0; t < kInstances; ++t) {
            std::vector<Box> boxes;
            for (auto n = rng.between(1, 4); n > 0; --n) {
                Box bx;
                bx.w = static_cast<float>(rng.uniform(0.05, 0.5));
                bx.h = static_cast<float>(rng.uniform(0.05, 0.5));
                bx.cx = static_cast<float>(rng.uniform());
                bx.cy = static_cast<float>(rng.uniform());
                bx.class_id = static_cast<int>(rng.below(head.classes));
                boxes.push_back(bx);
            }
            const GridTarget target = encode_targets(boxes, head);
            std::vector<float> pred(head.output_size());
            for (std::size_t i = 0; i < pred.size(); ++i) {
                const std::size_t slot = i % head.cell_size();
                const bool size_slot = slot < head.boxes * 5 && slot % 5 >= 2 && slot % 5 <= 3;
                pred[i] = static_cast<float>(size_slot ? rng.uniform(0.05, 0.9) : rng.uniform(-1.0, 1.0));
            }
            const Assignment fixed = assign_responsibility(pred, target);
            const YoloLoss l = yolo_loss(pred, target, fixed);
            check("yolo loss", oracle::to_double(l.grad),
                  oracle::numeric_gradient(pred, [&] { return yolo_loss(pred, target, fixed).value; }));
        }
    }
    const double elapsed = seconds_since(t0);
    o.require(elapsed < 120.0, "runtime " + fmt("%.1f", elapsed) + " s exceeds 120 s");
    if (o.pass)
        o.detail = "conv/fc/pool/relu/loss x" + std::to_string(kInstances) + ", worst rel. error " + fmt("%.2e", worst) +
                   " < 1e-3, " + fmt("%.1f", elapsed) + " s";
    return o;
}

// ---- quantization suite ------------------------------------------------------

Outcome quantization_suite() {
    Outcome o;
    Rng rng(2001);
    double worst_round_trip = 0.0;
    for (int t = 0; t < 100; ++t) {
        const Tensor x = oracle::random_tensor(rng, {257}, -3.0, 3.0);
        const QuantParams q{static_cast<float>(rng.uniform(0.005, 0.05))};
        const Tensor back = dequantize(quantize(x, q), q);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double clamped = std::clamp<double>(x[i], -q.range(), q.range());
            const double err = std::fabs(back[i] - clamped) / q.scale;
            worst_round_trip = std::max(worst_round_trip, err);
        }
        const Tensor once = fake_quant_forward(x, q);
        o.require(fake_quant_forward(once, q) == once, "fake quant not idempotent");
    }
    o.require(worst_round_trip <= 0.5 * (1 + 1e-6), "round trip error " + fmt("%.4f", worst_round_trip) + " scale");

    int worst_code = 0;
    for (int t = 0; t < 100; ++t) {
        const bool conv = t % 2 == 0;
        const std::size_t in = rng.between(1, 8), out = rng.between(1, 8);
        const QuantParams in_q = scale_for_max(1.0f);
        QuantizedLayer l = oracle::random_int8_layer(rng, conv ? QuantizedOp::conv3x3 : QuantizedOp::fc, in, out, in_q,
                                                     rng.uniform() < 0.5);
        const Tensor xf = conv ? oracle::random_tensor(rng, {in, 5, 6}) : oracle::random_tensor(rng, {in});
        const QActivation x{quantize(xf, in_q), in_q};
        const QActivation y = conv ? qconv2d_int8(x, l) : qfc_int8(x, l);
        const std::vector<int> ref = oracle::int8_layer_reference(x, l);
        for (std::size_t i = 0; i < ref.size(); ++i) worst_code = std::max(worst_code, std::abs(ref[i] - y.codes[i]));
    }
    o.require(worst_code <= 1, "int8 layer off by " + std::to_string(worst_code) + " codes");

    Network net(parse_model_config(reference_config_text(1)));
    net.init_kaiming(2002);
    net.begin_qat();
    for (int i = 0; i < 3; ++i) net.forward(oracle::random_tensor(rng, {3, 88, 88}));
    net.freeze_activation_scales();
    const QuantizedModel a = QuantizedModel::from_network(net);
    const QuantizedModel b = import_quantized(export_quantized(QuantizedModel::from_network(net)));
    const Tensor x = oracle::random_tensor(rng, {3, 88, 88});
    const QActivation ya = a.run(quantize(x, a.input_params()));
    const QActivation yb = b.run(quantize(x, b.input_params()));
    o.require(ya.codes == yb.codes, "int8 inference not bitwise reproducible");
    if (o.pass)
        o.detail = "round trip <= " + fmt("%.3f", worst_round_trip) + " scale, idempotent, 100 layers within " +
                   std::to_string(worst_code) + " code, int8 runs bitwise equal";
    return o;
}

// ---- mAP oracle --------------------------------------------------------------

LoadedDataset render(std::size_t n, std::size_t classes, std::uint64_t seed) {
    SynthOptions opts;
    opts.count = n;
    opts.classes = classes;
    opts.seed = seed;
    LoadedDataset d;
    for (std::size_t i = 0; i < n; ++i) {
        SynthImage s = synth_render(opts, i);
        d.images.push_back(preprocess(s.image));
        d.boxes.push_back(std::move(s.boxes));
    }
    return d;
}

Outcome map_oracle() {
    Outcome o;
    Rng rng(3001);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = rng.between(0, 30);
        std::vector<bool> tp(n);
        std::vector<float> scores(n);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < n; ++i) {
            tp[i] = rng.uniform() < 0.5;
            hits += tp[i] ? 1 : 0;
            scores[i] = static_cast<float>(rng.below(8)) / 8.0f;
        }
        const std::size_t num_gt = hits + rng.below(5) + (hits == 0 ? 1 : 0);
        worst = std::max(worst, std::fabs(average_precision(tp, scores, num_gt).value() -
                                          oracle::ap_envelope(tp, scores, num_gt)));
    }
    o.require(worst <= 1e-9, "AP differs from envelope oracle by " + fmt("%.3g", worst));

    for (std::size_t classes : {1, 3}) {
        const LoadedDataset data = render(50, classes, 3002);
        const HeadSpec head{4, classes == 1 ? 2u : 1u, classes};
        const Predictor perfect = [&](const Tensor& x) {
            for (std::size_t i = 0; i < data.size(); ++i)
                if (data.images[i] == x) {
                    const auto out = oracle::perfect_output(encode_targets(data.boxes[i], head));
                    return Tensor({out.size()}, out);
                }
            throw Error("unknown image");
        };
        const double m = evaluate(perfect, head, data).map;
        o.require(m == 1.0, std::to_string(classes) + "-class oracle mAP " + fmt("%.17g", m));
    }
    if (o.pass) o.detail = "100 instances, max |AP - oracle| = " + fmt("%.1e", worst) + "; oracle predictions mAP == 1.0";
    return o;
}

// ---- deployability and dimension chain ---------------------------------------

Outcome deployability(const std::string& source_dir) {
    Outcome o;
    const DeviceProfile p = max78000_profile();
    std::ostringstream detail;
    for (std::size_t classes : {1, 3}) {
        const ModelConfig cfg = parse_model_config(reference_config_text(classes));
        const DeployReport r = check_deployability(cfg, p);
        o.require(r.pass, std::to_string(classes) + "-class reference rejected");
        o.require(r.weight_bytes <= 452608, "weight bytes over budget");
        o.require(cfg.in_height == 88 && cfg.in_height < 90, "input size");
        const std::size_t expected = classes == 1 ? 176 : 128;
        o.require(cfg.head.output_size() == expected, "head outputs " + std::to_string(cfg.head.output_size()));
        detail << classes << "-class " << r.weight_bytes << " B/" << cfg.head.output_size() << " outputs; ";
    }
    const auto oversized = [&](const std::string& file, const std::string& reason) {
        const DeployReport r = check_deployability(load_model_config(source_dir + "/configs/" + file), p);
        o.require(!r.pass && !r.reasons.empty() && r.reasons.front().rfind(reason, 0) == 0,
                  file + " not rejected for " + reason);
    };
    oversized("oversized-wide-fc.cfg", "weight memory");
    oversized("oversized-input-96.cfg", "input size");
    if (o.pass) o.detail = detail.str() + "oversized configs rejected with the right reason";
    return o;
}

Outcome dimension_chain() {
    Outcome o;
    const ModelConfig cfg = parse_model_config(reference_config_text(1));
    Network net(cfg);
    net.init_kaiming(4001);
    ForwardTrace trace;
    Rng rng(4002);
    net.forward(oracle::random_tensor(rng, {3, 88, 88}), &trace);
    std::vector<std::size_t> chain{88};
    for (std::size_t i = 0; i < cfg.layers.size(); ++i)
        if (cfg.layers[i].kind == LayerKind::maxpool2x2) {
            const std::size_t next = i + 1 < cfg.layers.size() ? trace.inputs[i + 1].shape()[1] : 0;
            chain.push_back(next);
        }
    const std::vector<std::size_t> prefix(chain.begin(), chain.begin() + std::min<std::size_t>(5, chain.size()));
    o.require(prefix == std::vector<std::size_t>{88, 44, 22, 11, 5}, "pool chain mismatch");
    std::string s;
    for (std::size_t v : chain) s += (s.empty() ? "" : "->") + std::to_string(v);
    o.detail = "forward pool chain " + s;
    return o;
}

// ---- end-to-end desk-scale run -----------------------------------------------

TrainConfig e2e_config() {
    TrainConfig c;
    c.epochs_float = 30;
    c.epochs_qat = 10;
    c.batch_size = 32;
    c.lr0 = 0.1;
    c.clip_grad_norm = 2.0;
    c.warmup_epochs = 1;
    c.head_init_scale = 0.1;
    c.size_bias_init = 0.3;
    c.seed = 7;
    return c;
}

Outcome end_to_end(const fs::path& workdir) {
    Outcome o;
    const auto t0 = Clock::now();
    fs::remove_all(workdir);
    SynthOptions gen;
    gen.classes = 1;
    gen.max_objects = 3;
    gen.count = 2000;
    gen.seed = 11;
    synth_generate(gen, (workdir / "train").string());
    gen.count = 400;
    gen.seed = 12;
    synth_generate(gen, (workdir / "test").string());

    const TrainConfig cfg = e2e_config();
    const ModelConfig model = parse_model_config(reference_config_text(1));
    const DatasetSplit split = split_90_10(load_jsonl((workdir / "train" / "annotations.jsonl").string()), cfg.seed);
    const LoadedDataset train_set = load_images(split.train), val_set = load_images(split.validation);
    const LoadedDataset test_set = load_images(load_jsonl((workdir / "test" / "annotations.jsonl").string()));

    TrainConfig first = cfg;
    first.out_dir = (workdir / "run1").string();
    const TrainResult a = train(first, model, train_set, val_set, [](const EpochLog& e) {
        std::fprintf(stderr, "  e2e epoch %zu %s lr %.3g train %.4f val %.4f (%.0f s)\n", e.epoch,
                     phase_name(e.phase).c_str(), e.lr, e.train_loss, e.val_loss, e.wall_time_s);
    });
    const double run_seconds = seconds_since(t0);

    // float mAP: the weights as they stood at the end of the float phase
    const Network float_net = restore_network(load_checkpoint(first.out_dir + "/epoch_0030.tylo"));
    const double float_map = evaluate([&](const Tensor& x) { return float_net.predict(x); }, model.head, test_set).map;
    const QuantizedModel int8 = import_quantized(export_quantized(QuantizedModel::from_network(a.network)));
    const double int8_map = evaluate([&](const Tensor& x) { return int8.predict(x); }, model.head, test_set).map;

    o.require(float_map >= 0.80, "float mAP " + fmt("%.3f", float_map) + " < 0.80");
    o.require(std::fabs(int8_map - float_map) <= 0.05, "int8 mAP " + fmt("%.3f", int8_map) + " not within 0.05");
    o.require(run_seconds < 3600.0, "run took " + fmt("%.0f", run_seconds) + " s");

    TrainConfig second = cfg;
    const TrainResult b = train(second, model, train_set, val_set);
    const bool same = serialize_checkpoint(a.final_checkpoint) == serialize_checkpoint(b.final_checkpoint);
    o.require(same, "same-seed rerun differs");

    const std::string summary = "float mAP " + fmt("%.3f", float_map) + ", int8 mAP " + fmt("%.3f", int8_map) +
                                ", run " + fmt("%.0f", run_seconds) + " s, rerun " + (same ? "bitwise equal" : "differs");
    o.detail = o.pass ? summary : o.detail + " (" + summary + ")";
    return o;
}

// ---- profiler fixture --------------------------------------------------------

Outcome profiler_fixture(const std::string& source_dir) {
    Outcome o;
    const MetricsReport r = compare_report(load_measurements_csv(source_dir + "/data/devices.csv"),
                                           parse_model_config(reference_config_text(1)), 29425000);
    auto find = [&](const std::string& name) {
        for (std::size_t i = 0; i < r.devices.size(); ++i)
            if (r.devices[i].measurement.device == name) return i;
        throw Error("device row missing: " + name);
    };
    const std::size_t max = find("MAX78000"), apollo = find("Apollo4b"), h7 = find("STM32H7A3");
    const double mac_cycle = *r.devices[max].reference_inference_efficiency;
    const double uw_mhz = r.devices[apollo].power_efficiency_uw_per_mhz;
    const double uj = r.devices[max].energy_uj;
    const double latency = r.latency_ratio[max][h7];
    const double energy = r.energy_ratio[max][apollo];
    o.require(round_sig3(mac_cycle) == 107.0, "inference efficiency " + fmt("%.4g", mac_cycle));
    o.require(round_sig3(uw_mhz) == 59.0, "power efficiency " + fmt("%.4g", uw_mhz));
    o.require(round_sig3(uj) == 196.0, "energy " + fmt("%.4g", uj));
    o.require(latency >= 65.0 && round_sig3(latency) == 65.3, "latency ratio " + fmt("%.4g", latency));
    o.require(round_sig3(energy) == 31.1, "energy ratio " + fmt("%.4g", energy));
    o.detail = sig3(mac_cycle) + " MAC/cycle, " + sig3(uw_mhz) + " uW/MHz, " + sig3(uj) + " uJ, latency x" +
               sig3(latency) + ", energy x" + sig3(energy);
    return o;
}

// ---- restriction filters -----------------------------------------------------

Outcome restriction_filters() {
    Outcome o;
    Rng rng(6001);
    for (int t = 0; t < 1000 && o.pass; ++t) {
        std::vector<Sample> data(rng.between(2, 60));
        for (std::size_t i = 0; i < data.size(); ++i) {
            data[i].source_id = std::to_string(i);
            data[i].boxes.resize(rng.below(15), Box{0.5f, 0.5f, 0.1f, 0.1f, 0});
        }
        o.require(filter_max_objects(data, kNoObjectLimit) == data, "unrestricted filter is not the identity");
        const std::size_t n1 = rng.between(1, 14), n2 = rng.between(static_cast<std::int64_t>(n1), 15);
        std::set<std::string> kept2;
        for (const Sample& s : filter_max_objects(data, n2)) kept2.insert(s.source_id);
        for (const Sample& s : filter_max_objects(data, n1))
            o.require(kept2.count(s.source_id) == 1, "filter not monotone");

        const std::uint64_t seed = rng.next_u64();
        const DatasetSplit a = split_90_10(data, seed), b = split_90_10(data, seed);
        o.require(a.train == b.train && a.validation == b.validation, "split not deterministic");
        std::set<std::string> ids;
        for (const Sample& s : a.train) ids.insert(s.source_id);
        for (const Sample& s : a.validation) ids.insert(s.source_id);
        o.require(ids.size() == data.size() && a.train.size() + a.validation.size() == data.size(),
                  "split is not a partition");
    }
    if (o.pass) o.detail = "1000 random datasets: monotone filter, identity at inf, deterministic disjoint split";
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria runner"};
    std::string only, skip;
    std::string workdir = (fs::temp_directory_path() / "tinyyolo_acceptance").string();
    std::string source_dir = TINYYOLO_SOURCE_DIR;
    app.add_option("--only", only, "comma-separated criteria to run");
    app.add_option("--skip", skip, "comma-separated criteria to skip");
    app.add_option("--workdir", workdir, "scratch directory for the end-to-end run");
    app.add_option("--source-dir", source_dir, "repository root (configs/, data/)");
    CLI11_PARSE(app, argc, argv);

    auto split_list = [](const std::string& s) {
        std::set<std::string> out;
        std::stringstream ss(s);
        for (std::string item; std::getline(ss, item, ',');)
            if (!item.empty()) out.insert(item);
        return out;
    };
    const auto only_set = split_list(only), skip_set = split_list(skip);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradients", gradient_suite},
        {"quantization", quantization_suite},
        {"map-oracle", map_oracle},
        {"deployability", [&] { return deployability(source_dir); }},
        {"dimension-chain", dimension_chain},
        {"e2e", [&] { return end_to_end(workdir); }},
        {"profiler-fixture", [&] { return profiler_fixture(source_dir); }},
        {"restriction-filters", restriction_filters},
    };
    for (const std::string& name : only_set) {
        const bool known = std::any_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.first == name; });
        if (!known) {
            std::cerr << "unknown criterion: " << name << '\n';
            return 2;
        }
    }

    int failed = 0;
    for (const auto& [name, run] : criteria) {
        if ((!only_set.empty() && !only_set.count(name)) || skip_set.count(name)) continue;
        Outcome out;
        try {
            out = run();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail = std::string("exception: ") + e.what();
        }
        std::cout << (out.pass ? "PASS " : "FAIL ") << name << ": " << out.detail << std::endl;
        failed += out.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
