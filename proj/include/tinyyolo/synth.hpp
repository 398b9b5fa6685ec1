// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tinyyolo/datasets.hpp"

namespace tinyyolo {

/// Synthetic shapes dataset: class 0 circle, 1 square, 2 triangle, drawn on a
/// noisy background. Each shape exactly fills its annotated box, boxes never
/// overlap, and no two centers share a cell of the `grid` x `grid` head grid.
struct SynthOptions {
    std::size_t count = 100;
    std::size_t classes = 1;
    std::uint64_t seed = 0;
    std::size_t max_objects = 3;
    std::size_t min_objects = 1;
    std::size_t image_size = 88;
    std::size_t grid = 4;
    double min_extent = 0.16;  // box side as a fraction of the image
    double max_extent = 0.42;
};

struct SynthImage {
    Image image;
    std::vector<Box> boxes;
};

const std::vector<std::string>& synth_class_names();

void validate(const SynthOptions& opts);

/// The i-th image of the dataset described by `opts`; independent of other indices.
SynthImage synth_render(const SynthOptions& opts, std::size_t index);

/// Writes images/NNNNNN.ppm, annotations.jsonl and classes.txt under `out_dir`.
/// Returns the annotations (image paths relative to out_dir).
std::vector<Sample> synth_generate(const SynthOptions& opts, const std::string& out_dir);

}  // namespace tinyyolo
