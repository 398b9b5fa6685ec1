// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "tinyyolo/datasets.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tinyyolo/rng.hpp"

namespace tinyyolo {

namespace {

std::string join_path(const std::string& base, const std::string& rel) {
    if (base.empty() || std::filesystem::path(rel).is_absolute()) return rel;
    return (std::filesystem::path(base) / rel).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

ClassTable::ClassTable(std::map<std::string, int> ids) : ids_(std::move(ids)) {
    for (const auto& [name, id] : ids_)
        if (id < 0) throw Error("class id for '" + name + "' must be non-negative");
}

ClassTable ClassTable::parse(std::string_view text) {
    std::map<std::string, int> ids;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string name, extra;
        int id = 0;
        if (!(ls >> name)) continue;
        if (!(ls >> id) || id < 0) throw ParseError("expected 'name id' with a non-negative id", line_no);
        if (ls >> extra) throw ParseError("unexpected trailing token '" + extra + "'", line_no);
        if (!ids.emplace(name, id).second) throw ParseError("duplicate class name '" + name + "'", line_no);
    }
    return ClassTable(std::move(ids));
}

ClassTable ClassTable::load(const std::string& path) { return parse(slurp(path)); }

ClassTable ClassTable::voc_three_class() { return ClassTable({{"person", 0}, {"chair", 1}, {"car", 2}}); }

int ClassTable::find(const std::string& name) const {
    const auto it = ids_.find(name);
    return it == ids_.end() ? -1 : it->second;
}

std::vector<Sample> parse_jsonl(std::string_view text, const std::string& base_dir) {
    std::vector<Sample> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line_no, e.byte);
        }
        Sample s;
        try {
            s.image = join_path(base_dir, j.at("image").get<std::string>());
            s.source_id = j.value("id", j.at("image").get<std::string>());
            for (const auto& b : j.at("boxes")) {
                Box box{b.at("cx").get<float>(), b.at("cy").get<float>(), b.at("w").get<float>(), b.at("h").get<float>(),
                        b.at("class").get<int>()};
                if (!is_valid(box)) {
                    std::ostringstream os;
                    os << "box out of range (class " << box.class_id << ", cx " << box.cx << ", cy " << box.cy
                       << ", w " << box.w << ", h " << box.h << ")";
                    throw ParseError(os.str(), line_no);
                }
                s.boxes.push_back(box);
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("invalid annotation: ") + e.what(), line_no);
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Sample> load_jsonl(const std::string& path) {
    const std::string base = std::filesystem::path(path).parent_path().string();
    try {
        return parse_jsonl(slurp(path), base);
    } catch (const ParseError& e) {
        throw Error(path + ": " + e.what());
    }
}

std::string to_jsonl_line(const Sample& s) {
    nlohmann::json j;
    j["image"] = s.image;
    j["boxes"] = nlohmann::json::array();
    for (const Box& b : s.boxes) j["boxes"].push_back({{"class", b.class_id}, {"cx", b.cx}, {"cy", b.cy}, {"w", b.w}, {"h", b.h}});
    return j.dump();
}

VocParse parse_voc_xml(const std::string& xml, const ClassTable& classes, const std::string& image_dir) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream in(xml);
        pt::read_xml(in, tree);
    } catch (const pt::xml_parser_error& e) {
        throw ParseError(std::string("malformed XML: ") + e.message(), e.line());
    }
    const auto root = tree.get_child_optional("annotation");
    if (!root) throw Error("VOC XML: missing <annotation> root");
    const auto size = root->get_child_optional("size");
    if (!size) throw Error("VOC XML: missing <size> element");
    const auto width = size->get_optional<double>("width");
    const auto height = size->get_optional<double>("height");
    if (!width || !height || *width <= 0 || *height <= 0) throw Error("VOC XML: <size> needs positive width and height");

    VocParse out;
    const std::string filename = root->get<std::string>("filename", "");
    out.sample.image = join_path(image_dir, filename);
    out.sample.source_id = filename;
    std::size_t index = 0;
    for (const auto& [tag, obj] : *root) {
        if (tag != "object") continue;
        ++index;
        const std::string name = obj.get<std::string>("name", "");
        const auto bb = obj.get_child_optional("bndbox");
        if (!bb) throw Error("VOC XML: object " + std::to_string(index) + " has no <bndbox>");
        const double xmin = bb->get<double>("xmin"), ymin = bb->get<double>("ymin");
        const double xmax = bb->get<double>("xmax"), ymax = bb->get<double>("ymax");
        if (xmax <= xmin || ymax <= ymin)
            throw Error("VOC XML: object " + std::to_string(index) + " ('" + name + "') has xmax <= xmin or ymax <= ymin");
        const int id = classes.find(name);
        if (id < 0) {
            out.warnings.push_back("skipping object " + std::to_string(index) + " with unknown class '" + name + "'");
            continue;
        }
        const double x0 = std::clamp(xmin, 0.0, *width), x1 = std::clamp(xmax, 0.0, *width);
        const double y0 = std::clamp(ymin, 0.0, *height), y1 = std::clamp(ymax, 0.0, *height);
        Box box{static_cast<float>((x0 + x1) / 2 / *width), static_cast<float>((y0 + y1) / 2 / *height),
                static_cast<float>((x1 - x0) / *width), static_cast<float>((y1 - y0) / *height), id};
        if (!is_valid(box)) {
            out.warnings.push_back("skipping object " + std::to_string(index) + " outside the image");
            continue;
        }
        out.sample.boxes.push_back(box);
    }
    return out;
}

std::vector<Sample> filter_max_objects(const std::vector<Sample>& samples, std::size_t max_objects) {
    if (max_objects == 0) throw Error("max objects must be at least 1");
    std::vector<Sample> out;
    for (const Sample& s : samples)
        if (s.boxes.size() <= max_objects) out.push_back(s);
    return out;
}

std::size_t parse_object_limit(std::string_view text) {
    if (text == "inf" || text == "none" || text == "all") return kNoObjectLimit;
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || v == 0)
        throw Error("invalid object limit '" + std::string(text) + "' (expected a positive integer or 'inf')");
    return v;
}

std::string object_limit_label(std::size_t max_objects) {
    return max_objects == kNoObjectLimit ? "no restriction" : "max " + std::to_string(max_objects) + " obj.";
}

DatasetSplit split_90_10(const std::vector<Sample>& samples, std::uint64_t seed) {
    const std::size_t n = samples.size();
    if (n < 2) throw Error("need at least 2 samples to split, got " + std::to_string(n));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));
    const std::size_t n_train = std::min((9 * n + 9) / 10, n - 1);
    DatasetSplit split;
    split.seed = seed;
    for (std::size_t i = 0; i < n; ++i) (i < n_train ? split.train : split.validation).push_back(samples[order[i]]);
    return split;
}

LoadedDataset load_images(const std::vector<Sample>& samples, std::size_t input_size) {
    LoadedDataset d;
    d.images.reserve(samples.size());
    for (const Sample& s : samples) {
        d.images.push_back(preprocess(read_pnm(s.image), input_size));
        d.boxes.push_back(s.boxes);
    }
    return d;
}

}  // namespace tinyyolo
