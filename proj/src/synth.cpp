// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "tinyyolo/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "tinyyolo/rng.hpp"

namespace tinyyolo {

namespace {

struct PixelBox {
    long x0, y0, w, h;  // pixel extent [x0, x0 + w) x [y0, y0 + h)
};

bool inside(int cls, const PixelBox& b, double px, double py) {
    const double u = (px - b.x0) / static_cast<double>(b.w);  // [0, 1] across the box
    const double v = (py - b.y0) / static_cast<double>(b.h);
    if (u < 0 || u > 1 || v < 0 || v > 1) return false;
    switch (cls) {
        case 0: return (u - 0.5) * (u - 0.5) + (v - 0.5) * (v - 0.5) <= 0.25;
        case 1: return true;
        default: return std::fabs(u - 0.5) <= 0.5 * v;  // apex at top center, base along the bottom edge
    }
}

std::uint8_t clamp_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

const std::vector<std::string>& synth_class_names() {
    static const std::vector<std::string> names{"circle", "square", "triangle"};
    return names;
}

void validate(const SynthOptions& o) {
    if (o.classes < 1 || o.classes > 3) throw Error("synthetic datasets support 1 to 3 classes");
    if (o.max_objects < 1 || o.max_objects > 10) throw Error("max objects must be in 1..10");
    if (o.min_objects < 1 || o.min_objects > o.max_objects) throw Error("min objects must be in 1..max objects");
    if (o.image_size < 16) throw Error("image size must be at least 16");
    if (o.grid < 1 || o.grid * o.grid < o.max_objects) throw Error("grid too small for max objects");
    if (!(o.min_extent > 0 && o.min_extent <= o.max_extent && o.max_extent <= 1)) throw Error("invalid box extents");
}

SynthImage synth_render(const SynthOptions& opts, std::size_t index) {
    validate(opts);
    Rng rng(opts.seed * 0x9E3779B97F4A7C15ull + index * 0xBF58476D1CE4E5B9ull + 1);
    const long size = static_cast<long>(opts.image_size);
    SynthImage out{Image(opts.image_size, opts.image_size), {}};

    double bg[3];
    for (double& c : bg) c = rng.uniform(20, 110);
    for (std::size_t y = 0; y < opts.image_size; ++y)
        for (std::size_t x = 0; x < opts.image_size; ++x)
            for (std::size_t c = 0; c < 3; ++c) out.image.at(x, y, c) = clamp_u8(bg[c] + rng.uniform(-25, 25));

    const auto wanted = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(opts.min_objects),
                                                             static_cast<std::int64_t>(opts.max_objects)));
    std::vector<PixelBox> placed;
    std::vector<std::size_t> cells;
    const long min_side = std::max(2L, std::lround(opts.min_extent * size));
    const long max_side = std::max(min_side, std::lround(opts.max_extent * size));
    for (int attempt = 0; attempt < 200 && placed.size() < wanted; ++attempt) {
        PixelBox b;
        b.w = rng.between(min_side, max_side);
        b.h = std::clamp<long>(std::lround(b.w * rng.uniform(0.75, 1.33)), min_side, max_side);
        b.x0 = rng.between(0, size - b.w);
        b.y0 = rng.between(0, size - b.h);
        const double cx = (b.x0 + b.w / 2.0) / size, cy = (b.y0 + b.h / 2.0) / size;
        const std::size_t cell = std::min<std::size_t>(static_cast<std::size_t>(cy * opts.grid), opts.grid - 1) * opts.grid +
                                 std::min<std::size_t>(static_cast<std::size_t>(cx * opts.grid), opts.grid - 1);
        if (std::find(cells.begin(), cells.end(), cell) != cells.end()) continue;
        const bool overlaps = std::any_of(placed.begin(), placed.end(), [&](const PixelBox& o) {
            return b.x0 < o.x0 + o.w + 1 && o.x0 < b.x0 + b.w + 1 && b.y0 < o.y0 + o.h + 1 && o.y0 < b.y0 + b.h + 1;
        });
        if (overlaps) continue;
        placed.push_back(b);
        cells.push_back(cell);
    }

    for (const PixelBox& b : placed) {
        const int cls = static_cast<int>(rng.below(opts.classes));
        double color[3];
        do {
            for (double& c : color) c = rng.uniform(0, 255);
        } while ((color[0] + color[1] + color[2]) / 3 < (bg[0] + bg[1] + bg[2]) / 3 + 70);
        for (long y = b.y0; y < b.y0 + b.h; ++y)
            for (long x = b.x0; x < b.x0 + b.w; ++x)
                if (inside(cls, b, x + 0.5, y + 0.5))
                    for (std::size_t c = 0; c < 3; ++c)
                        out.image.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), c) =
                            clamp_u8(color[c] + rng.uniform(-10, 10));
        const auto s = static_cast<float>(size);
        out.boxes.push_back({static_cast<float>(b.x0 + b.w / 2.0) / s, static_cast<float>(b.y0 + b.h / 2.0) / s,
                             static_cast<float>(b.w) / s, static_cast<float>(b.h) / s, cls});
    }
    return out;
}

std::vector<Sample> synth_generate(const SynthOptions& opts, const std::string& out_dir) {
    validate(opts);
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "images");
    std::vector<Sample> samples;
    std::ofstream jsonl(fs::path(out_dir) / "annotations.jsonl", std::ios::binary | std::ios::trunc);
    if (!jsonl) throw Error("cannot write annotations under '" + out_dir + "'");
    for (std::size_t i = 0; i < opts.count; ++i) {
        SynthImage img = synth_render(opts, i);
        char name[32];
        std::snprintf(name, sizeof name, "images/%06zu.ppm", i);
        write_ppm(img.image, (fs::path(out_dir) / name).string());
        Sample s{name, std::move(img.boxes), name};
        jsonl << to_jsonl_line(s) << '\n';
        samples.push_back(std::move(s));
    }
    std::ofstream classes(fs::path(out_dir) / "classes.txt", std::ios::binary | std::ios::trunc);
    for (std::size_t c = 0; c < opts.classes; ++c) classes << synth_class_names()[c] << ' ' << c << '\n';
    return samples;
}

}  // namespace tinyyolo
