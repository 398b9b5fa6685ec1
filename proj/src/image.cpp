// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "tinyyolo/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "tinyyolo/serialization.hpp"

namespace tinyyolo {

namespace {

std::size_t read_header_int(const std::vector<std::uint8_t>& b, std::size_t& pos) {
    for (;;) {
        while (pos < b.size() && std::isspace(b[pos])) ++pos;
        if (pos < b.size() && b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
            continue;
        }
        break;
    }
    if (pos >= b.size() || !std::isdigit(b[pos])) throw FormatError("malformed PNM header");
    std::size_t v = 0;
    while (pos < b.size() && std::isdigit(b[pos])) {
        v = v * 10 + (b[pos] - '0');
        if (v > (1u << 20)) throw FormatError("PNM dimension too large");
        ++pos;
    }
    return v;
}

}  // namespace

Image decode_pnm(const std::vector<std::uint8_t>& b) {
    if (b.size() < 2 || b[0] != 'P' || (b[1] != '6' && b[1] != '5')) throw FormatError("not a binary PNM (P5/P6) image");
    std::size_t pos = 2;
    const std::size_t w = read_header_int(b, pos), h = read_header_int(b, pos), maxval = read_header_int(b, pos);
    if (maxval != 255) throw FormatError("only 8-bit PNM (maxval 255) is supported");
    if (w == 0 || h == 0) throw FormatError("PNM image is empty");
    ++pos;  // single whitespace after maxval
    Image img(w, h, b[1] == '6' ? 3 : 1);
    if (b.size() - std::min(pos, b.size()) < img.pixels.size()) throw FormatError("truncated PNM pixel data");
    std::copy_n(b.begin() + static_cast<std::ptrdiff_t>(pos), img.pixels.size(), img.pixels.begin());
    return img;
}

Image read_pnm(const std::string& path) {
    try {
        return decode_pnm(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
    if (img.channels != 3) throw Error("encode_ppm: image must be RGB");
    const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

void write_ppm(const Image& img, const std::string& path) { write_file(path, encode_ppm(img)); }

std::vector<float> resize_bilinear(const Image& img, std::size_t out_w, std::size_t out_h) {
    const std::size_t c = img.channels;
    std::vector<float> out(out_w * out_h * c);
    const double sx = static_cast<double>(img.width) / static_cast<double>(out_w);
    const double sy = static_cast<double>(img.height) / static_cast<double>(out_h);
    auto coord = [](std::size_t dst, double scale, std::size_t src_len, std::size_t& i0, std::size_t& i1, double& t) {
        double s = (static_cast<double>(dst) + 0.5) * scale - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(src_len - 1));
        i0 = static_cast<std::size_t>(std::floor(s));
        i1 = std::min(i0 + 1, src_len - 1);
        t = s - static_cast<double>(i0);
    };
    for (std::size_t y = 0; y < out_h; ++y) {
        std::size_t y0, y1;
        double ty;
        coord(y, sy, img.height, y0, y1, ty);
        for (std::size_t x = 0; x < out_w; ++x) {
            std::size_t x0, x1;
            double tx;
            coord(x, sx, img.width, x0, x1, tx);
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double top = img.at(x0, y0, ch) * (1 - tx) + img.at(x1, y0, ch) * tx;
                const double bot = img.at(x0, y1, ch) * (1 - tx) + img.at(x1, y1, ch) * tx;
                out[(y * out_w + x) * c + ch] = static_cast<float>(top * (1 - ty) + bot * ty);
            }
        }
    }
    return out;
}

Tensor preprocess(const Image& img, std::size_t size) {
    if (img.channels != 3) throw Error("preprocess: expected an RGB image, got " + std::to_string(img.channels) + " channel(s)");
    if (img.width == 0 || img.height == 0) throw Error("preprocess: empty image");
    const std::vector<float> resized = resize_bilinear(img, size, size);
    Tensor t({3, size, size});
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x)
            for (std::size_t c = 0; c < 3; ++c) t.at(c, y, x) = (resized[(y * size + x) * 3 + c] - 128.0f) / 128.0f;
    return t;
}

}  // namespace tinyyolo
