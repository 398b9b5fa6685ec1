// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "tinyyolo/model_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>

namespace tinyyolo {

std::string_view to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv3x3: return "conv3x3";
        case LayerKind::maxpool2x2: return "maxpool2x2";
        case LayerKind::flatten: return "flatten";
        case LayerKind::fc: return "fc";
        case LayerKind::relu: return "relu";
    }
    return "?";
}

namespace {

struct Token {
    std::string_view text;
    std::size_t column;  // 1-based
};

std::vector<Token> tokenize(std::string_view line) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        if (line[i] == '#') break;
        if (line[i] == ' ' || line[i] == '\t' || line[i] == '\r') {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r' && line[i] != '#') ++i;
        tokens.push_back({line.substr(start, i - start), start + 1});
    }
    return tokens;
}

std::size_t parse_count(const Token& t, std::size_t line) {
    std::size_t v = 0;
    const auto* end = t.text.data() + t.text.size();
    auto [ptr, ec] = std::from_chars(t.text.data(), end, v);
    if (ec != std::errc() || ptr != end || v == 0)
        throw ParseError("expected a positive integer, got '" + std::string(t.text) + "'", line, t.column);
    return v;
}

void expect_args(const std::vector<Token>& tokens, std::size_t n, std::size_t line) {
    if (tokens.size() != n + 1)
        throw ParseError("'" + std::string(tokens[0].text) + "' takes " + std::to_string(n) + " argument(s), got " +
                             std::to_string(tokens.size() - 1),
                         line, tokens[0].column);
}

// Matches conv<K>x<K> and returns K, or nullopt if the token is not a conv kind.
std::optional<std::pair<std::size_t, std::size_t>> conv_kernel(std::string_view kind) {
    if (!kind.starts_with("conv")) return std::nullopt;
    kind.remove_prefix(4);
    const auto x = kind.find('x');
    if (x == std::string_view::npos) return std::nullopt;
    std::size_t kh = 0, kw = 0;
    auto a = std::from_chars(kind.data(), kind.data() + x, kh);
    auto b = std::from_chars(kind.data() + x + 1, kind.data() + kind.size(), kw);
    if (a.ec != std::errc() || a.ptr != kind.data() + x || b.ec != std::errc() || b.ptr != kind.data() + kind.size())
        return std::nullopt;
    return std::pair{kh, kw};
}

[[noreturn]] void fail(const std::string& what, const std::vector<std::size_t>* lines, std::size_t layer) {
    if (lines && layer < lines->size()) throw ParseError(what, (*lines)[layer], 1);
    throw Error(what);
}

std::vector<Shape> check_and_propagate(const ModelConfig& cfg, const std::vector<std::size_t>* lines) {
    if (cfg.in_channels != 3) fail("input must have 3 channels", lines, 0);
    if (cfg.in_height == 0 || cfg.in_width == 0) fail("input dims must be positive", lines, 0);
    if (cfg.head.grid == 0 || cfg.head.boxes == 0 || cfg.head.classes == 0) fail("head S, B, C must be positive", lines, 0);

    std::vector<Shape> shapes;
    Shape cur = cfg.input_shape();
    std::size_t first_conv_out = 0, widest_conv = 0;
    for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
        const LayerSpec& l = cfg.layers[i];
        const std::string at = std::string(to_string(l.kind)) + " (layer " + std::to_string(i + 1) + ")";
        switch (l.kind) {
            case LayerKind::conv3x3:
                if (cur.size() != 3) fail(at + ": convolution after flatten", lines, i);
                if (l.in != cur[0])
                    fail(at + ": expects " + std::to_string(l.in) + " input channels, previous layer produces " +
                             std::to_string(cur[0]),
                         lines, i);
                if (l.in == 0 || l.out == 0) fail(at + ": channel counts must be positive", lines, i);
                if (first_conv_out == 0) first_conv_out = l.out;
                widest_conv = std::max(widest_conv, l.out);
                if (static_cast<std::int64_t>(9 * l.in) * 128 * 127 >= INT32_MAX)
                    fail(at + ": fan-in can overflow an int32 accumulator", lines, i);
                cur = {l.out, cur[1], cur[2]};
                break;
            case LayerKind::maxpool2x2:
                if (cur.size() != 3) fail(at + ": pooling after flatten", lines, i);
                if (cur[1] < 2 || cur[2] < 2)
                    fail(at + ": spatial dims " + to_string(cur) + " too small to pool", lines, i);
                cur = {cur[0], cur[1] / 2, cur[2] / 2};
                break;
            case LayerKind::flatten:
                if (cur.size() != 3) fail(at + ": already flat", lines, i);
                cur = {shape_size(cur)};
                break;
            case LayerKind::fc:
                if (cur.size() != 1) fail(at + ": fully connected layer needs a flatten first", lines, i);
                if (l.in != cur[0])
                    fail(at + ": expects " + std::to_string(l.in) + " input features, previous layer produces " +
                             std::to_string(cur[0]),
                         lines, i);
                if (l.in == 0 || l.out == 0) fail(at + ": feature counts must be positive", lines, i);
                if (static_cast<std::int64_t>(l.in) * 128 * 127 >= INT32_MAX)
                    fail(at + ": fan-in can overflow an int32 accumulator", lines, i);
                cur = {l.out};
                break;
            case LayerKind::relu:
                if (i == 0 || !cfg.layers[i - 1].has_params())
                    fail(at + ": relu must directly follow conv3x3 or fc", lines, i);
                break;
        }
        shapes.push_back(cur);
    }

    const std::size_t last = cfg.layers.empty() ? 0 : cfg.layers.size() - 1;
    if (cfg.layers.empty()) fail("model has no layers", lines, 0);
    if (cfg.layers.back().kind != LayerKind::fc) fail("model must end with a linear fc layer", lines, last);
    if (cfg.layers.back().out != cfg.head.output_size())
        fail("final fc has " + std::to_string(cfg.layers.back().out) + " outputs, head S*S*(B*5+C) needs " +
                 std::to_string(cfg.head.output_size()),
             lines, last);
    if (first_conv_out == 0) fail("model has no convolution", lines, last);
    if (first_conv_out != 16)
        fail("first convolution must have 16 output channels, got " + std::to_string(first_conv_out), lines, 0);
    if (widest_conv != 128)
        fail("widest convolution must have 128 output channels, got " + std::to_string(widest_conv), lines, last);
    return shapes;
}

}  // namespace

ModelConfig parse_model_config(std::string_view text) {
    ModelConfig cfg;
    std::vector<std::size_t> lines;
    bool have_input = false, have_head = false;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        const std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

        const auto tokens = tokenize(line);
        if (tokens.empty()) continue;
        const std::string_view kind = tokens[0].text;
        if (kind == "name") {
            expect_args(tokens, 1, line_no);
            cfg.name = tokens[1].text;
        } else if (kind == "input") {
            expect_args(tokens, 3, line_no);
            cfg.in_channels = parse_count(tokens[1], line_no);
            cfg.in_height = parse_count(tokens[2], line_no);
            cfg.in_width = parse_count(tokens[3], line_no);
            have_input = true;
        } else if (kind == "head") {
            expect_args(tokens, 3, line_no);
            cfg.head = {parse_count(tokens[1], line_no), parse_count(tokens[2], line_no), parse_count(tokens[3], line_no)};
            have_head = true;
        } else if (auto k = conv_kernel(kind)) {
            if (k->first != 3 || k->second != 3)
                throw ParseError("unsupported kernel " + std::to_string(k->first) + "x" + std::to_string(k->second) +
                                     ": only 3x3 convolutions are allowed",
                                 line_no, tokens[0].column);
            expect_args(tokens, 2, line_no);
            cfg.layers.push_back({LayerKind::conv3x3, parse_count(tokens[1], line_no), parse_count(tokens[2], line_no)});
            lines.push_back(line_no);
        } else if (kind == "fc") {
            expect_args(tokens, 2, line_no);
            cfg.layers.push_back({LayerKind::fc, parse_count(tokens[1], line_no), parse_count(tokens[2], line_no)});
            lines.push_back(line_no);
        } else if (kind == "maxpool2x2" || kind == "flatten" || kind == "relu") {
            expect_args(tokens, 0, line_no);
            const LayerKind lk = kind == "relu" ? LayerKind::relu
                                 : kind == "flatten" ? LayerKind::flatten
                                                     : LayerKind::maxpool2x2;
            cfg.layers.push_back({lk, 0, 0});
            lines.push_back(line_no);
        } else {
            throw ParseError("unknown layer kind '" + std::string(kind) + "'", line_no, tokens[0].column);
        }
    }
    if (!have_input) throw ParseError("missing 'input C H W' line", line_no);
    if (!have_head) throw ParseError("missing 'head S B C' line", line_no);
    check_and_propagate(cfg, &lines);
    return cfg;
}

ModelConfig load_model_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open model config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_model_config(ss.str());
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + std::string(e.what()).substr(std::string(e.what()).find(": ") + 2), e.line(),
                         e.column());
    }
}

std::string to_text(const ModelConfig& cfg) {
    std::ostringstream os;
    if (!cfg.name.empty()) os << "name " << cfg.name << '\n';
    os << "input " << cfg.in_channels << ' ' << cfg.in_height << ' ' << cfg.in_width << '\n';
    os << "head " << cfg.head.grid << ' ' << cfg.head.boxes << ' ' << cfg.head.classes << '\n';
    for (const LayerSpec& l : cfg.layers) {
        os << to_string(l.kind);
        if (l.has_params()) os << ' ' << l.in << ' ' << l.out;
        os << '\n';
    }
    return os.str();
}

void validate(const ModelConfig& cfg) { check_and_propagate(cfg, nullptr); }

std::vector<Shape> propagate_shapes(const ModelConfig& cfg) { return check_and_propagate(cfg, nullptr); }

LayerCounts count_params(const ModelConfig& cfg) {
    LayerCounts counts;
    for (const LayerSpec& l : cfg.layers) {
        std::uint64_t n = 0;
        if (l.kind == LayerKind::conv3x3) n = 9ull * l.in * l.out + l.out;
        if (l.kind == LayerKind::fc) n = static_cast<std::uint64_t>(l.in) * l.out + l.out;
        counts.per_layer.push_back(n);
        counts.total += n;
    }
    return counts;
}

LayerCounts count_macs(const ModelConfig& cfg) {
    LayerCounts counts;
    if (cfg.layers.empty()) return counts;
    const auto shapes = propagate_shapes(cfg);
    for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
        const LayerSpec& l = cfg.layers[i];
        std::uint64_t n = 0;
        if (l.kind == LayerKind::conv3x3) n = static_cast<std::uint64_t>(shapes[i][1]) * shapes[i][2] * 9 * l.in * l.out;
        if (l.kind == LayerKind::fc) n = static_cast<std::uint64_t>(l.in) * l.out;
        counts.per_layer.push_back(n);
        counts.total += n;
    }
    return counts;
}

std::uint64_t count_biases(const ModelConfig& cfg) {
    std::uint64_t n = 0;
    for (const LayerSpec& l : cfg.layers)
        if (l.has_params()) n += l.out;
    return n;
}

std::uint64_t int8_weight_bytes(const ModelConfig& cfg) {
    const std::uint64_t biases = count_biases(cfg);
    return (count_params(cfg).total - biases) + 4 * biases;
}

std::vector<std::size_t> param_layer_indices(const ModelConfig& cfg) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < cfg.layers.size(); ++i)
        if (cfg.layers[i].has_params()) idx.push_back(i);
    return idx;
}

DeviceProfile max78000_profile() { return {"max78000", 442ull * 1024, 90, 91}; }

DeviceProfile device_profile(std::string_view name) {
    if (name == "max78000") return max78000_profile();
    throw Error("unknown device profile '" + std::string(name) + "'");
}

DeployReport check_deployability(const ModelConfig& cfg, const DeviceProfile& profile) {
    DeployReport r;
    r.weight_bytes = int8_weight_bytes(cfg);
    r.weight_budget_bytes = profile.weight_budget_bytes;
    if (r.weight_bytes > profile.weight_budget_bytes) {
        r.pass = false;
        r.reasons.push_back("weight memory: " + std::to_string(r.weight_bytes) + " bytes exceeds " +
                            std::to_string(profile.weight_budget_bytes) + " byte budget");
    }
    if (cfg.in_height >= profile.max_input_height || cfg.in_width >= profile.max_input_width) {
        r.pass = false;
        r.reasons.push_back("input size: " + std::to_string(cfg.in_height) + "x" + std::to_string(cfg.in_width) +
                            " is not below " + std::to_string(profile.max_input_height) + "x" +
                            std::to_string(profile.max_input_width));
    }
    for (const LayerSpec& l : cfg.layers) {
        switch (l.kind) {
            case LayerKind::conv3x3:
            case LayerKind::maxpool2x2:
            case LayerKind::flatten:
            case LayerKind::fc:
            case LayerKind::relu:
                break;
            default:
                r.pass = false;
                r.reasons.push_back("unsupported op: " + std::string(to_string(l.kind)));
        }
    }
    return r;
}

std::string reference_config_text(std::size_t classes) {
    if (classes != 1 && classes != 3) throw Error("reference configs exist for 1 or 3 classes");
    const bool single = classes == 1;
    std::string s;
    s += single ? "name tinyissimo-ref-88\n" : "name tinyissimo-ref-88-3class\n";
    s += "input 3 88 88\n";
    s += single ? "head 4 2 1\n" : "head 4 1 3\n";
    s +=
        "conv3x3 3 16\nrelu\nconv3x3 16 16\nrelu\nmaxpool2x2\n"
        "conv3x3 16 32\nrelu\nconv3x3 32 32\nrelu\nmaxpool2x2\n"
        "conv3x3 32 64\nrelu\nconv3x3 64 64\nrelu\nmaxpool2x2\n"
        "conv3x3 64 128\nrelu\nconv3x3 128 128\nrelu\nmaxpool2x2\n"
        "conv3x3 128 16\nrelu\nmaxpool2x2\n"
        "flatten\nfc 64 256\nrelu\n";
    s += single ? "fc 256 176\n" : "fc 256 128\n";
    return s;
}

}  // namespace tinyyolo
