// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "tinyyolo/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <openssl/crypto.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "tinyyolo/datasets.hpp"
#include "tinyyolo/evaluation.hpp"
#include "tinyyolo/image.hpp"
#include "tinyyolo/model_config.hpp"
#include "tinyyolo/network.hpp"
#include "tinyyolo/profiler.hpp"
#include "tinyyolo/serialization.hpp"
#include "tinyyolo/synth.hpp"
#include "tinyyolo/training.hpp"

namespace tinyyolo::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Bad input detected before any work was done; maps to exit code 1.
class UsageError : public Error {
public:
    using Error::Error;
};

/// The command ran but its verdict is negative (e.g. a config that does not deploy); exit code 1.
struct ValidationFailed {};

struct GlobalOptions {
    std::uint64_t seed = 0;
    std::string config;
    std::string out;
};

struct Context {
    CLI::App& app;
    CLI::App& sub;
    const GlobalOptions& global;
    std::ostream& out;
    std::ostream& err;
    std::vector<std::string> outputs;
    std::optional<ModelConfig> model;
};

std::string library_versions_eigen() {
    return std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
           std::to_string(EIGEN_MINOR_VERSION);
}

std::string option_value(const CLI::Option* opt) {
    if (opt->count() == 0) return opt->get_default_str();
    std::string v;
    for (const std::string& r : opt->results()) v += (v.empty() ? "" : ",") + r;
    return v;
}

bool is_flag(const CLI::Option* opt) { return opt->get_expected_min() == 0; }

void collect_options(const CLI::App& app, json& options, std::vector<std::string>& line) {
    for (const CLI::Option* opt : app.get_options()) {
        if (opt->get_lnames().empty()) continue;
        const std::string name = "--" + opt->get_lnames().front();
        if (name == "--help" || name == "--version") continue;
        const std::string value = option_value(opt);
        if (is_flag(opt)) {
            const bool on = opt->count() > 0;
            options[name.substr(2)] = on;
            if (on) line.push_back(name);
        } else {
            options[name.substr(2)] = value;
            if (!value.empty()) {
                line.push_back(name);
                line.push_back(value);
            }
        }
    }
}

/// Writes manifest.json next to the outputs. The command line it records
/// names every resolved option, so the run can be repeated from it alone.
void write_manifest(Context& ctx, const std::string& dir) {
    if (dir.empty()) return;
    fs::create_directories(dir);
    json options = json::object();
    std::vector<std::string> line{"tinyyolo", ctx.sub.get_name()};
    json sub_options = json::object();
    std::vector<std::string> sub_line;
    collect_options(ctx.app, options, sub_line);
    collect_options(ctx.sub, sub_options, sub_line);
    for (auto& [k, v] : sub_options.items()) options[k] = v;
    if (ctx.model) {
        const std::string cfg_path = (fs::path(dir) / "model.cfg").string();
        std::ofstream(cfg_path, std::ios::binary | std::ios::trunc) << to_text(*ctx.model);
        ctx.outputs.push_back(cfg_path);
        options["config"] = cfg_path;
        for (std::size_t i = 0; i + 1 < sub_line.size(); ++i)
            if (sub_line[i] == "--config") sub_line[i + 1] = cfg_path;
        if (std::find(sub_line.begin(), sub_line.end(), "--config") == sub_line.end()) {
            sub_line.push_back("--config");
            sub_line.push_back(cfg_path);
        }
    }
    line.insert(line.end(), sub_line.begin(), sub_line.end());

    json m;
    m["tool"] = "tinyyolo";
    m["version"] = kVersion;
    m["subcommand"] = ctx.sub.get_name();
    m["seed"] = ctx.global.seed;
    m["options"] = options;
    m["command_line"] = line;
    if (ctx.model) {
        m["model_config"] = to_text(*ctx.model);
        m["model_macs"] = count_macs(*ctx.model).total;
        m["model_params"] = count_params(*ctx.model).total;
    }
    m["outputs"] = ctx.outputs;
    m["libraries"] = {{"eigen", library_versions_eigen()},
                      {"openssl", OpenSSL_version(OPENSSL_VERSION)},
                      {"boost", BOOST_LIB_VERSION},
                      {"compiler", __VERSION__}};
    std::ofstream(fs::path(dir) / "manifest.json", std::ios::binary | std::ios::trunc) << m.dump(2) << '\n';
}

ModelConfig load_config_or(const GlobalOptions& g, std::size_t default_classes) {
    try {
        if (!g.config.empty()) return load_model_config(g.config);
        return parse_model_config(reference_config_text(default_classes));
    } catch (const Error& e) {
        throw UsageError(g.config.empty() ? std::string(e.what()) : g.config + ": " + e.what());
    }
}

ModelConfig require_config(const GlobalOptions& g) {
    if (g.config.empty()) throw UsageError("--config/--model is required");
    return load_config_or(g, 1);
}

std::string require_out(const GlobalOptions& g) {
    if (g.out.empty()) throw UsageError("--out is required");
    return g.out;
}

std::vector<std::string> class_names_for(const std::string& data_path, std::size_t classes) {
    std::vector<std::string> names(classes);
    for (std::size_t c = 0; c < classes; ++c) names[c] = "class" + std::to_string(c);
    const fs::path table = fs::path(data_path).parent_path() / "classes.txt";
    if (fs::exists(table)) {
        const ClassTable t = ClassTable::load(table.string());
        for (const auto& [name, id] : t.ids())
            if (id >= 0 && static_cast<std::size_t>(id) < classes) names[static_cast<std::size_t>(id)] = name;
    }
    return names;
}

void check_class_ids(const std::vector<Sample>& samples, const HeadSpec& head) {
    for (const Sample& s : samples)
        for (const Box& b : s.boxes)
            if (b.class_id < 0 || static_cast<std::size_t>(b.class_id) >= head.classes)
                throw UsageError("sample '" + s.source_id + "' has class id " + std::to_string(b.class_id) +
                                 " but the model head has " + std::to_string(head.classes) + " classes");
}

std::size_t object_limit(const std::string& text) {
    try {
        return parse_object_limit(text);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

std::vector<std::size_t> object_limits(const std::string& text) {
    std::vector<std::size_t> limits;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) limits.push_back(object_limit(item));
    if (limits.empty()) throw UsageError("--max-objects needs at least one value");
    return limits;
}

std::vector<double> parse_fractions(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError("invalid milestone '" + item + "'");
        }
    }
    return v;
}

/// A model loaded from either a float checkpoint or an int8 blob.
struct LoadedModel {
    std::optional<Network> network;
    std::optional<QuantizedModel> quantized;

    const ModelConfig& config() const { return network ? network->config() : quantized->config(); }
    Predictor predictor() const {
        if (network) return [this](const Tensor& x) { return network->predict(x); };
        return [this](const Tensor& x) { return quantized->predict(x); };
    }
};

LoadedModel load_model(const std::string& checkpoint, const std::string& quantized) {
    if (checkpoint.empty() == quantized.empty()) throw UsageError("give exactly one of --checkpoint and --quantized");
    LoadedModel m;
    if (!checkpoint.empty()) m.network.emplace(restore_network(load_checkpoint(checkpoint)));
    else m.quantized.emplace(load_quantized(quantized));
    return m;
}

ApMode ap_mode(const std::string& s) {
    if (s == "all-point") return ApMode::all_point;
    if (s == "11-point") return ApMode::eleven_point;
    throw UsageError("--ap-mode must be 'all-point' or '11-point'");
}

std::string footer() {
    return "Global options (accepted before or after the subcommand):\n"
           "  --seed INT            RNG seed (unsigned integer)\n"
           "  --config,--model PATH model config file (text format)\n"
           "  --out DIR             output directory (manifest.json is written here)";
}

// ---- subcommands -------------------------------------------------------------

struct DatasetGenOptions {
    std::size_t n = 200;
    std::size_t classes = 1;
    std::size_t max_objects = 3;
    std::size_t min_objects = 1;
    std::size_t image_size = kNetworkInput;
};

void add_dataset_gen(CLI::App& app, DatasetGenOptions& o) {
    auto* sub = app.add_subcommand("dataset-gen", "Render a synthetic shapes dataset (PPM images + annotations.jsonl)");
    sub->add_option("--n", o.n, "number of images [images]")->check(CLI::PositiveNumber);
    sub->add_option("--classes", o.classes, "number of shape classes, 1 to 3 [classes]")->check(CLI::Range(1, 3));
    sub->add_option("--max-objects", o.max_objects, "most objects per image [objects]")->check(CLI::PositiveNumber);
    sub->add_option("--min-objects", o.min_objects, "fewest objects per image [objects]");
    sub->add_option("--image-size", o.image_size, "square image side [px]")->check(CLI::PositiveNumber);
}

int run_dataset_gen(Context& ctx, const DatasetGenOptions& o) {
    const std::string out = require_out(ctx.global);
    SynthOptions s;
    s.count = o.n;
    s.classes = o.classes;
    s.seed = ctx.global.seed;
    s.max_objects = o.max_objects;
    s.min_objects = o.min_objects;
    s.image_size = o.image_size;
    try {
        validate(s);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    const auto samples = synth_generate(s, out);
    ctx.outputs = {(fs::path(out) / "annotations.jsonl").string(), (fs::path(out) / "classes.txt").string(),
                   (fs::path(out) / "images").string()};
    write_manifest(ctx, out);
    std::size_t objects = 0;
    for (const Sample& smp : samples) objects += smp.boxes.size();
    ctx.out << "wrote " << samples.size() << " images with " << objects << " objects to " << out << '\n';
    return 0;
}

struct TrainOptions {
    std::string data;
    std::size_t epochs_float = TrainConfig{}.epochs_float;
    std::size_t epochs_qat = TrainConfig{}.epochs_qat;
    double lr = TrainConfig{}.lr0;
    double weight_decay = TrainConfig{}.weight_decay;
    std::size_t batch_size = TrainConfig{}.batch_size;
    std::string milestones = "0.5,0.8";
    double lr_factor = TrainConfig{}.lr_factor;
    std::string max_objects = "inf";
    bool hflip = false;
    std::size_t checkpoint_every = 0;
    double clip_grad_norm = 0.0;
    std::size_t warmup_epochs = 0;
    double head_init_scale = 1.0;
    double size_bias_init = 0.0;
    std::size_t classes = 1;
};

void add_train(CLI::App& app, TrainOptions& o) {
    auto* sub = app.add_subcommand("train", "Float training followed by quantization-aware training");
    sub->add_option("--data", o.data, "annotations.jsonl of the training pool (split 90/10 into train/validation)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--epochs-float", o.epochs_float, "float-precision epochs [epochs]");
    sub->add_option("--epochs-qat", o.epochs_qat, "quantization-aware epochs [epochs]");
    sub->add_option("--lr", o.lr, "initial SGD learning rate, restarted at each phase [dimensionless]");
    sub->add_option("--weight-decay", o.weight_decay, "L2 weight decay coefficient [dimensionless]");
    sub->add_option("--batch-size", o.batch_size, "samples per SGD step [images]")->check(CLI::PositiveNumber);
    sub->add_option("--lr-milestones", o.milestones,
                    "comma-separated fractions of each phase where the rate is multiplied by --lr-factor [fraction]");
    sub->add_option("--lr-factor", o.lr_factor, "learning-rate multiplier at each milestone [dimensionless]");
    sub->add_option("--max-objects", o.max_objects, "drop training images with more objects; 'inf' keeps all [objects]");
    sub->add_flag("--hflip", o.hflip, "random horizontal flips (probability 0.5) [flag]");
    sub->add_option("--checkpoint-every", o.checkpoint_every, "also checkpoint every N epochs, 0 disables [epochs]");
    sub->add_option("--clip-grad-norm", o.clip_grad_norm, "cap on the global gradient L2 norm per step, 0 disables [norm]")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--warmup-epochs", o.warmup_epochs, "linear float-phase learning-rate ramp, 0 disables [epochs]");
    sub->add_option("--head-init-scale", o.head_init_scale, "multiplier on the output layer's initial weights [dimensionless]")
        ->check(CLI::PositiveNumber);
    sub->add_option("--size-bias-init", o.size_bias_init, "initial bias of the predicted box w and h [image fraction]");
    sub->add_option("--classes", o.classes, "classes of the built-in reference model when --config is absent (1 or 3) [classes]")
        ->check(CLI::IsMember({1, 3}));
}

int run_train(Context& ctx, const TrainOptions& o) {
    const std::string out = require_out(ctx.global);
    ctx.model = load_config_or(ctx.global, o.classes);
    TrainConfig tc;
    tc.epochs_float = o.epochs_float;
    tc.epochs_qat = o.epochs_qat;
    tc.lr0 = o.lr;
    tc.weight_decay = o.weight_decay;
    tc.batch_size = o.batch_size;
    tc.milestones = parse_fractions(o.milestones);
    tc.lr_factor = o.lr_factor;
    tc.seed = ctx.global.seed;
    tc.max_objects = object_limit(o.max_objects);
    tc.hflip = o.hflip;
    tc.checkpoint_every = o.checkpoint_every;
    tc.clip_grad_norm = o.clip_grad_norm;
    tc.warmup_epochs = o.warmup_epochs;
    tc.head_init_scale = o.head_init_scale;
    tc.size_bias_init = o.size_bias_init;
    tc.out_dir = out;
    try {
        validate(tc);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }

    const auto samples = load_jsonl(o.data);
    check_class_ids(samples, ctx.model->head);
    const auto filtered = filter_max_objects(samples, tc.max_objects);
    const DatasetSplit split = split_90_10(filtered, tc.seed);
    ctx.err << "training on " << split.train.size() << " images, validating on " << split.validation.size() << " ("
            << samples.size() - filtered.size() << " dropped by --max-objects " << object_limit_label(tc.max_objects)
            << ")\n";
    const LoadedDataset train_set = load_images(split.train, ctx.model->in_height);
    const LoadedDataset val_set = load_images(split.validation, ctx.model->in_height);

    // manifest first, so an aborted run still records how it was started
    const std::string int8_path = (fs::path(out) / "model.tylq").string();
    ctx.outputs = {(fs::path(out) / "train_log.csv").string(), (fs::path(out) / "final.tylo").string()};
    if (tc.epochs_qat > 0) ctx.outputs.push_back(int8_path);
    write_manifest(ctx, out);

    const TrainResult result = train(tc, *ctx.model, train_set, val_set, [&](const EpochLog& e) {
        ctx.err << "epoch " << e.epoch << " [" << phase_name(e.phase) << "] lr " << e.lr << " train_loss " << e.train_loss
                << " val_loss " << e.val_loss << " (" << e.wall_time_s << " s)\n";
    });
    if (tc.epochs_qat > 0) save_quantized(QuantizedModel::from_network(result.network), int8_path);
    ctx.out << "final checkpoint: " << (fs::path(out) / "final.tylo").string() << '\n';
    if (tc.epochs_qat > 0) ctx.out << "int8 model: " << int8_path << '\n';
    return 0;
}

struct EvalOptions {
    std::string checkpoint;
    std::string quantized;
    std::string data;
    std::string max_objects = "inf";
    float conf = EvalSettings{}.conf_threshold;
    double nms_iou = EvalSettings{}.nms_iou;
    double match_iou = EvalSettings{}.match_iou;
    std::string ap_mode = "all-point";
};

void add_model_inputs(CLI::App* sub, std::string& checkpoint, std::string& quantized) {
    auto* c = sub->add_option("--checkpoint", checkpoint, "float/QAT training checkpoint (.tylo)")->check(CLI::ExistingFile);
    auto* q = sub->add_option("--quantized", quantized, "exported int8 model (.tylq)")->check(CLI::ExistingFile);
    c->excludes(q);
}

void add_eval(CLI::App& app, EvalOptions& o) {
    auto* sub = app.add_subcommand("eval", "mAP of a model on an annotated dataset");
    add_model_inputs(sub, o.checkpoint, o.quantized);
    sub->add_option("--data", o.data, "annotations.jsonl of the test set")->required()->check(CLI::ExistingFile);
    sub->add_option("--max-objects", o.max_objects,
                    "comma-separated test-set restrictions, e.g. 1,2,3,inf; one mAP column each [objects]");
    sub->add_option("--conf-threshold", o.conf, "minimum detection score kept before NMS [probability]");
    sub->add_option("--nms-iou", o.nms_iou, "NMS suppression threshold [IoU]");
    sub->add_option("--match-iou", o.match_iou, "true-positive matching threshold [IoU]");
    sub->add_option("--ap-mode", o.ap_mode, "AP integration: all-point or 11-point")
        ->check(CLI::IsMember({"all-point", "11-point"}));
}

int run_eval(Context& ctx, const EvalOptions& o) {
    const LoadedModel model = load_model(o.checkpoint, o.quantized);
    ctx.model = model.config();
    EvalSettings settings;
    settings.conf_threshold = o.conf;
    settings.nms_iou = o.nms_iou;
    settings.match_iou = o.match_iou;
    settings.ap_mode = ap_mode(o.ap_mode);
    const auto limits = object_limits(o.max_objects);
    const auto samples = load_jsonl(o.data);
    check_class_ids(samples, ctx.model->head);
    const LoadedDataset data = load_images(samples, ctx.model->in_height);
    const std::string label = o.checkpoint.empty() ? o.quantized : o.checkpoint;
    const EvalMatrix matrix = eval_matrix({{label, model.predictor()}}, ctx.model->head, data, limits, settings);
    const EvalResult full = evaluate(model.predictor(), ctx.model->head, data, settings);
    const auto names = class_names_for(o.data, ctx.model->head.classes);

    ctx.out << to_text_table(full, names) << '\n' << to_text_table(matrix);
    if (!ctx.global.out.empty()) {
        fs::create_directories(ctx.global.out);
        const std::string matrix_path = (fs::path(ctx.global.out) / "eval_matrix.csv").string();
        const std::string classes_path = (fs::path(ctx.global.out) / "eval_classes.csv").string();
        std::ofstream(matrix_path, std::ios::binary | std::ios::trunc) << to_csv(matrix);
        std::ofstream(classes_path, std::ios::binary | std::ios::trunc) << to_csv(full, names);
        ctx.outputs = {matrix_path, classes_path};
        write_manifest(ctx, ctx.global.out);
    }
    return 0;
}

struct InferOptions {
    std::string checkpoint;
    std::string quantized;
    std::string image;
    float conf = 0.25f;
    double nms_iou = 0.5;
};

void add_infer(CLI::App& app, InferOptions& o) {
    auto* sub = app.add_subcommand("infer", "Detect objects in one PPM/PGM image; prints JSON to standard output");
    add_model_inputs(sub, o.checkpoint, o.quantized);
    sub->add_option("--image", o.image, "input image (binary PPM, maxval 255)")->required()->check(CLI::ExistingFile);
    sub->add_option("--conf-threshold", o.conf, "minimum detection score [probability]");
    sub->add_option("--nms-iou", o.nms_iou, "NMS suppression threshold [IoU]");
}

int run_infer(Context& ctx, const InferOptions& o) {
    const LoadedModel model = load_model(o.checkpoint, o.quantized);
    ctx.model = model.config();
    const Image img = read_pnm(o.image);
    if (img.channels != ctx.model->in_channels)
        throw UsageError("image has " + std::to_string(img.channels) + " channels, model expects " +
                         std::to_string(ctx.model->in_channels));
    const Tensor pred = model.predictor()(preprocess(img, ctx.model->in_height));
    const auto dets = nms(decode_predictions(pred.data(), ctx.model->head, o.conf), o.nms_iou);
    json j;
    j["image"] = o.image;
    j["width"] = img.width;
    j["height"] = img.height;
    j["detections"] = json::array();
    for (const Detection& d : dets)
        j["detections"].push_back({{"class_id", d.box.class_id},
                                   {"score", d.score},
                                   {"cx", d.box.cx},
                                   {"cy", d.box.cy},
                                   {"w", d.box.w},
                                   {"h", d.box.h}});
    ctx.out << j.dump(2) << '\n';
    if (!ctx.global.out.empty()) {
        fs::create_directories(ctx.global.out);
        const std::string path = (fs::path(ctx.global.out) / "detections.json").string();
        std::ofstream(path, std::ios::binary | std::ios::trunc) << j.dump(2) << '\n';
        ctx.outputs = {path};
        write_manifest(ctx, ctx.global.out);
    }
    return 0;
}

struct QuantizeOptions {
    std::string checkpoint;
    std::string data;
    std::size_t samples = 256;
};

void add_quantize(CLI::App& app, QuantizeOptions& o) {
    auto* sub = app.add_subcommand(
        "quantize", "Post-training int8 quantization of a float checkpoint, calibrated on a dataset; writes model.tylq");
    sub->add_option("--checkpoint", o.checkpoint, "float training checkpoint (.tylo)")->required()->check(CLI::ExistingFile);
    sub->add_option("--data", o.data, "annotations.jsonl used for activation-range calibration")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--calibration-samples", o.samples, "images used for calibration, first N of --data [images]")
        ->check(CLI::PositiveNumber);
}

int run_quantize(Context& ctx, const QuantizeOptions& o) {
    const std::string out = require_out(ctx.global);
    Network net = restore_network(load_checkpoint(o.checkpoint));
    ctx.model = net.config();
    auto samples = load_jsonl(o.data);
    if (samples.size() > o.samples) samples.resize(o.samples);
    calibrate(net, load_images(samples, ctx.model->in_height));
    const std::string path = (fs::path(out) / "model.tylq").string();
    fs::create_directories(out);
    save_quantized(QuantizedModel::from_network(net), path);
    ctx.outputs = {path};
    write_manifest(ctx, out);
    ctx.out << "int8 model: " << path << '\n';
    return 0;
}

struct ExportOptions {
    std::string checkpoint;
};

void add_export(CLI::App& app, ExportOptions& o) {
    auto* sub = app.add_subcommand("export", "Export a QAT checkpoint (frozen scales) as an int8 model.tylq");
    sub->add_option("--checkpoint", o.checkpoint, "checkpoint written after quantization-aware training (.tylo)")
        ->required()
        ->check(CLI::ExistingFile);
}

int run_export(Context& ctx, const ExportOptions& o) {
    const std::string out = require_out(ctx.global);
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    if (!ckpt.quant || !ckpt.quant->enabled || !ckpt.quant->activations_frozen)
        throw UsageError("checkpoint '" + o.checkpoint +
                         "' has no frozen quantization state; train with --epochs-qat > 0 or use 'quantize'");
    const Network net = restore_network(ckpt);
    ctx.model = net.config();
    const std::string path = (fs::path(out) / "model.tylq").string();
    fs::create_directories(out);
    save_quantized(QuantizedModel::from_network(net), path);
    ctx.outputs = {path};
    write_manifest(ctx, out);
    ctx.out << "int8 model: " << path << '\n';
    return 0;
}

struct CheckDeployOptions {
    std::string profile = "max78000";
};

void add_check_deploy(CLI::App& app, CheckDeployOptions& o) {
    auto* sub = app.add_subcommand("check-deploy", "Check a model config against a device's weight memory and input limits");
    sub->add_option("--profile", o.profile, "target device profile name (max78000)");
}

int run_check_deploy(Context& ctx, const CheckDeployOptions& o) {
    ctx.model = require_config(ctx.global);
    DeviceProfile profile;
    try {
        profile = device_profile(o.profile);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    const DeployReport r = check_deployability(*ctx.model, profile);
    ctx.out << "model:   " << ctx.model->name << " (input " << ctx.model->in_channels << "x" << ctx.model->in_height << "x"
            << ctx.model->in_width << ", " << count_params(*ctx.model).total << " params, " << count_macs(*ctx.model).total
            << " MACs)\n"
            << "profile: " << profile.name << '\n'
            << "weights: " << r.weight_bytes << " B of " << r.weight_budget_bytes << " B\n"
            << "result:  " << (r.pass ? "PASS" : "FAIL") << '\n';
    for (const std::string& reason : r.reasons) ctx.out << "  - " << reason << '\n';
    if (!ctx.global.out.empty()) write_manifest(ctx, ctx.global.out);
    if (!r.pass) throw ValidationFailed{};
    return 0;
}

struct ProfileOptions {
    std::string measurements;
    std::uint64_t reference_macs = 0;
    std::string format = "text";
};

void add_profile(CLI::App& app, ProfileOptions& o) {
    auto* sub = app.add_subcommand("profile", "Efficiency, energy and memory report from measured device rows (model: --config, else the reference config)");
    sub->add_option("--measurements", o.measurements,
                    "CSV with header device,voltage_v,clock_mhz,latency_ms,power_mw [V, MHz, ms, mW]")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--reference-macs", o.reference_macs,
                    "MAC count to report a second inference efficiency with, 0 disables [MAC]");
    sub->add_option("--format", o.format, "output format: text or csv")->check(CLI::IsMember({"text", "csv"}));
}

int run_profile(Context& ctx, const ProfileOptions& o) {
    ctx.model = load_config_or(ctx.global, 1);
    std::vector<DeviceMeasurement> rows;
    try {
        rows = load_measurements_csv(o.measurements);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    std::optional<std::uint64_t> ref;
    if (o.reference_macs > 0) ref = o.reference_macs;
    const MetricsReport report = compare_report(rows, *ctx.model, ref);
    const std::string text = o.format == "csv" ? to_csv(report) : to_text(report);
    ctx.out << text;
    if (!ctx.global.out.empty()) {
        fs::create_directories(ctx.global.out);
        const std::string path = (fs::path(ctx.global.out) / (o.format == "csv" ? "profile.csv" : "profile.txt")).string();
        std::ofstream(path, std::ios::binary | std::ios::trunc) << text;
        ctx.outputs = {path};
        write_manifest(ctx, ctx.global.out);
    }
    return 0;
}

int run_parsed(CLI::App& app, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    GlobalOptions global;
    DatasetGenOptions gen;
    TrainOptions tr;
    EvalOptions ev;
    InferOptions inf;
    QuantizeOptions qu;
    ExportOptions ex;
    CheckDeployOptions cd;
    ProfileOptions pr;

    app.option_defaults()->always_capture_default();
    app.add_option("--seed", global.seed, "RNG seed for data generation, splits, init and shuffling (unsigned integer)");
    app.add_option("--config,--model", global.config, "model config file (text format)");
    app.add_option("--out", global.out, "output directory; manifest.json is written here");
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    add_dataset_gen(app, gen);
    add_train(app, tr);
    add_eval(app, ev);
    add_infer(app, inf);
    add_quantize(app, qu);
    add_export(app, ex);
    add_check_deploy(app, cd);
    add_profile(app, pr);
    for (CLI::App* sub : app.get_subcommands({})) {
        sub->fallthrough();
        sub->footer(footer());
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const auto parsed = app.get_subcommands();
        err << (parsed.empty() ? app.help() : parsed.front()->help());
        return 1;
    }

    CLI::App& sub = *app.get_subcommands().front();
    Context ctx{app, sub, global, out, err, {}, {}};
    try {
        const std::string name = sub.get_name();
        if (name == "dataset-gen") return run_dataset_gen(ctx, gen);
        if (name == "train") return run_train(ctx, tr);
        if (name == "eval") return run_eval(ctx, ev);
        if (name == "infer") return run_infer(ctx, inf);
        if (name == "quantize") return run_quantize(ctx, qu);
        if (name == "export") return run_export(ctx, ex);
        if (name == "check-deploy") return run_check_deploy(ctx, cd);
        if (name == "profile") return run_profile(ctx, pr);
        return 1;
    } catch (const ValidationFailed&) {
        return 1;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tiny YOLO-style detector toolchain: train, quantize, evaluate, profile, check deployability",
                 "tinyyolo"};
    return run_parsed(app, args, out, err);
}

int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace tinyyolo::cli
