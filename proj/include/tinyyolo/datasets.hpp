// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tinyyolo/image.hpp"
#include "tinyyolo/yolo_head.hpp"

namespace tinyyolo {

/// Annotation record; the image is loaded on demand.
struct Sample {
    std::string image;  // path, resolved against the annotation file's directory
    std::vector<Box> boxes;
    std::string source_id;

    friend bool operator==(const Sample&, const Sample&) = default;
};

/// Name -> class id. File format: one "name id" pair per line, '#' comments.
class ClassTable {
public:
    ClassTable() = default;
    explicit ClassTable(std::map<std::string, int> ids);

    static ClassTable parse(std::string_view text);
    static ClassTable load(const std::string& path);
    /// person 0, chair 1, car 2.
    static ClassTable voc_three_class();

    /// -1 when the name is not in the table.
    int find(const std::string& name) const;
    std::size_t size() const { return ids_.size(); }
    const std::map<std::string, int>& ids() const { return ids_; }

private:
    std::map<std::string, int> ids_;
};

/// One JSON object per line: {"image": path, "boxes": [{"class": k, "cx": .., "cy": .., "w": .., "h": ..}]}.
/// Blank lines are skipped. Errors name the 1-based line.
std::vector<Sample> parse_jsonl(std::string_view text, const std::string& base_dir = "");
std::vector<Sample> load_jsonl(const std::string& path);
std::string to_jsonl_line(const Sample& s);

struct VocParse {
    Sample sample;
    std::vector<std::string> warnings;  // skipped objects
};

/// Reads the annotation/size and annotation/object[name, bndbox] subset of a
/// VOC XML file. Objects whose name is not in `classes` are skipped with a warning.
VocParse parse_voc_xml(const std::string& xml, const ClassTable& classes, const std::string& image_dir = "");

inline constexpr std::size_t kNoObjectLimit = std::numeric_limits<std::size_t>::max();

/// Keeps samples with at most `max_objects` boxes, order preserved.
std::vector<Sample> filter_max_objects(const std::vector<Sample>& samples, std::size_t max_objects);

/// Parses "inf"/"none"/"all" as kNoObjectLimit, else a positive integer.
std::size_t parse_object_limit(std::string_view text);
std::string object_limit_label(std::size_t max_objects);

struct DatasetSplit {
    std::vector<Sample> train;
    std::vector<Sample> validation;
    std::vector<Sample> test;
    std::uint64_t seed = 0;
};

/// Seeded shuffle, then ceil(0.9 n) samples (at most n - 1) go to train and the rest to validation.
DatasetSplit split_90_10(const std::vector<Sample>& samples, std::uint64_t seed);

/// Preprocessed images held in memory, parallel to their boxes.
struct LoadedDataset {
    std::vector<Tensor> images;
    std::vector<std::vector<Box>> boxes;

    std::size_t size() const { return images.size(); }
};

LoadedDataset load_images(const std::vector<Sample>& samples, std::size_t input_size = kNetworkInput);

}  // namespace tinyyolo
