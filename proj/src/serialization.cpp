// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "tinyyolo/serialization.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace tinyyolo {

namespace {

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    template <class T>
    void pod(T v) {
        bytes(&v, sizeof v);
    }
    void u8(std::uint8_t v) { pod(v); }
    void u32(std::uint32_t v) { pod(v); }
    void u64(std::uint64_t v) { pod(v); }
    void f32(float v) { pod(v); }
    void text(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    template <class T>
    void array(std::span<const T> v) {
        u32(static_cast<std::uint32_t>(v.size()));
        bytes(v.data(), v.size() * sizeof(T));
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

    void bytes(void* p, std::size_t n) {
        if (n > in_.size() - pos_) throw FormatError("truncated file at byte " + std::to_string(pos_));
        std::memcpy(p, in_.data() + pos_, n);
        pos_ += n;
    }
    template <class T>
    T pod() {
        T v;
        bytes(&v, sizeof v);
        return v;
    }
    std::uint8_t u8() { return pod<std::uint8_t>(); }
    std::uint32_t u32() { return pod<std::uint32_t>(); }
    std::uint64_t u64() { return pod<std::uint64_t>(); }
    float f32() { return pod<float>(); }
    std::string text() {
        const std::uint32_t n = u32();
        if (n > in_.size() - pos_) throw FormatError("truncated file at byte " + std::to_string(pos_));
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    template <class T>
    std::vector<T> array(std::size_t expected, const char* what) {
        const std::uint32_t n = u32();
        if (n != expected)
            throw FormatError(std::string(what) + ": stored " + std::to_string(n) + " elements, config requires " +
                              std::to_string(expected));
        std::vector<T> v(n);
        bytes(v.data(), n * sizeof(T));
        return v;
    }
    void magic(const char (&m)[5]) {
        char got[4];
        bytes(got, 4);
        if (std::memcmp(got, m, 4) != 0) throw FormatError(std::string("bad magic, expected ") + m);
    }
    void finish() const {
        if (pos_ != in_.size()) throw FormatError("trailing bytes after end of data");
    }

private:
    const std::vector<std::uint8_t>& in_;
    std::size_t pos_ = 0;
};

ModelConfig parse_embedded(const std::string& text) {
    try {
        return parse_model_config(text);
    } catch (const Error& e) {
        throw FormatError(std::string("embedded model config is invalid: ") + e.what());
    }
}

}  // namespace

Checkpoint make_checkpoint(const Network& net, TrainingMeta meta) {
    Checkpoint c{net.config(), net.params(), std::nullopt, meta};
    if (!net.qat().weight_scales.empty()) c.quant = net.qat();
    return c;
}

Network restore_network(const Checkpoint& ckpt) {
    Network net(ckpt.config);
    auto& params = net.mutable_params();
    if (ckpt.params.size() != params.size()) throw FormatError("checkpoint layer count does not match config");
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (ckpt.params[k].weight.shape() != params[k].weight.shape() ||
            ckpt.params[k].bias.shape() != params[k].bias.shape())
            throw FormatError("checkpoint layer " + std::to_string(k) + " shape does not match config");
        params[k] = ckpt.params[k];
    }
    if (ckpt.quant) net.set_qat(*ckpt.quant);
    return net;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    Writer w;
    w.bytes("TYLO", 4);
    w.u32(kCheckpointVersion);
    w.text(to_text(ckpt.config));
    w.u32(ckpt.meta.epoch);
    w.u8(static_cast<std::uint8_t>(ckpt.meta.phase));
    w.u64(ckpt.meta.seed);
    w.u32(static_cast<std::uint32_t>(ckpt.params.size()));
    for (const LayerParams& p : ckpt.params) {
        w.array(p.weight.data());
        w.array(p.bias.data());
    }
    w.u8(ckpt.quant ? 1 : 0);
    if (ckpt.quant) {
        const QatState& q = *ckpt.quant;
        if (q.weight_scales.size() != ckpt.params.size() || q.activation_max.size() != ckpt.params.size())
            throw ShapeError("checkpoint quant state does not match layer count");
        w.f32(q.input_scale);
        w.u8(q.enabled ? 1 : 0);
        w.u8(q.activations_frozen ? 1 : 0);
        for (std::size_t k = 0; k < ckpt.params.size(); ++k) {
            w.f32(q.weight_scales[k]);
            w.f32(q.activation_max[k]);
        }
    }
    return w.take();
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    r.magic("TYLO");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint c;
    c.config = parse_embedded(r.text());
    c.meta.epoch = r.u32();
    const std::uint8_t phase = r.u8();
    if (phase > 1) throw FormatError("invalid training phase");
    c.meta.phase = static_cast<TrainingPhase>(phase);
    c.meta.seed = r.u64();

    const Network shapes(c.config);
    const std::uint32_t count = r.u32();
    if (count != shapes.params().size()) throw FormatError("checkpoint layer count does not match config");
    for (const LayerParams& p : shapes.params()) {
        auto w = r.array<float>(p.weight.size(), "weights");
        auto b = r.array<float>(p.bias.size(), "biases");
        c.params.push_back({Tensor(p.weight.shape(), std::move(w)), Tensor(p.bias.shape(), std::move(b))});
    }
    if (r.u8()) {
        QatState q;
        q.input_scale = r.f32();
        q.enabled = r.u8() != 0;
        q.activations_frozen = r.u8() != 0;
        for (std::size_t k = 0; k < count; ++k) {
            q.weight_scales.push_back(r.f32());
            q.activation_max.push_back(r.f32());
        }
        c.quant = std::move(q);
    }
    r.finish();
    return c;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for '" + path + "'");
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) { write_file(path, serialize_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path)); }

std::array<std::uint8_t, 32> config_digest(const ModelConfig& cfg) {
    const std::string text = to_text(cfg);
    std::array<std::uint8_t, 32> out{};
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size())
        throw Error("SHA-256 computation failed");
    return out;
}

std::vector<std::uint8_t> export_quantized(const QuantizedModel& model) {
    Writer w;
    w.bytes("TYLQ", 4);
    w.u32(kQuantizedBlobVersion);
    const auto digest = config_digest(model.config());
    w.bytes(digest.data(), digest.size());
    w.text(to_text(model.config()));
    w.f32(model.input_params().scale);
    w.u32(static_cast<std::uint32_t>(model.layers().size()));
    for (const QuantizedLayer& l : model.layers()) {
        w.u8(static_cast<std::uint8_t>(l.op));
        w.u8(l.relu ? 1 : 0);
        w.u32(l.in_channels);
        w.u32(l.out_channels);
        w.array(std::span<const std::int8_t>(l.weights));
        w.array(std::span<const std::int32_t>(l.bias));
        w.f32(l.input.scale);
        w.f32(l.weight.scale);
        w.f32(l.output.scale);
        w.pod(l.requant.multiplier);
        w.u8(l.requant.shift);
    }
    return w.take();
}

QuantizedModel import_quantized(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    r.magic("TYLQ");
    const std::uint32_t version = r.u32();
    if (version != kQuantizedBlobVersion)
        throw FormatError("unsupported quantized blob version " + std::to_string(version));
    std::array<std::uint8_t, 32> digest{};
    r.bytes(digest.data(), digest.size());
    const ModelConfig cfg = parse_embedded(r.text());
    if (config_digest(cfg) != digest) throw FormatError("config digest mismatch");
    const QuantParams input{r.f32()};
    const std::uint32_t count = r.u32();
    const auto idx = param_layer_indices(cfg);
    if (count != idx.size()) throw FormatError("quantized layer count does not match config");
    std::vector<QuantizedLayer> layers;
    for (std::size_t k = 0; k < count; ++k) {
        const LayerSpec& spec = cfg.layers[idx[k]];
        QuantizedLayer l;
        const std::uint8_t op = r.u8();
        if (op > 1) throw FormatError("invalid quantized op");
        l.op = static_cast<QuantizedOp>(op);
        l.relu = r.u8() != 0;
        l.in_channels = r.u32();
        l.out_channels = r.u32();
        if (l.in_channels != spec.in || l.out_channels != spec.out)
            throw FormatError("quantized layer " + std::to_string(k) + " dims do not match config");
        const std::size_t nw = (l.op == QuantizedOp::conv3x3 ? 9u : 1u) * l.in_channels * l.out_channels;
        l.weights = r.array<std::int8_t>(nw, "int8 weights");
        l.bias = r.array<std::int32_t>(l.out_channels, "int32 biases");
        l.input.scale = r.f32();
        l.weight.scale = r.f32();
        l.output.scale = r.f32();
        l.requant.multiplier = r.pod<std::int32_t>();
        l.requant.shift = r.u8();
        if (!(l.input.scale > 0) || !(l.weight.scale > 0) || !(l.output.scale > 0))
            throw FormatError("quantized layer " + std::to_string(k) + " has a nonpositive scale");
        layers.push_back(std::move(l));
    }
    r.finish();
    try {
        return QuantizedModel(cfg, input, std::move(layers));
    } catch (const ShapeError& e) {
        throw FormatError(e.what());
    }
}

void save_quantized(const QuantizedModel& model, const std::string& path) { write_file(path, export_quantized(model)); }

QuantizedModel load_quantized(const std::string& path) { return import_quantized(read_file(path)); }

}  // namespace tinyyolo
