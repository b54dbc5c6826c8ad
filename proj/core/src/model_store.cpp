// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "lsic/model_store.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "lsic/error.hpp"

namespace lsic::store {

using nlohmann::ordered_json;
using nn::DType;
using nn::LayerKind;

namespace {

constexpr char kMagic[4] = {'L', 'S', 'I', 'C'};

class Writer {
public:
    template <typename T>
    void put(T v) {
        unsigned char buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));
        bytes.insert(bytes.end(), buf, buf + sizeof(T));
    }
    void put_bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        bytes.insert(bytes.end(), b, b + n);
    }

    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    template <typename T>
    T get() {
        T v;
        std::memcpy(&v, take(sizeof(T)), sizeof(T));
        return v;
    }
    const std::uint8_t* take(std::size_t n) {
        if (n > size_ - pos_) throw Error(ErrorCode::CorruptFile, "unexpected end of model data");
        const std::uint8_t* p = data_ + pos_;
        pos_ += n;
        return p;
    }
    std::size_t remaining() const { return size_ - pos_; }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

ordered_json frontend_to_json(const FrontendConfig& f) {
    ordered_json j;
    j["frame_len"] = f.frame_len;
    j["hop_len"] = f.hop_len;
    j["n_fft"] = f.n_fft;
    j["n_mels"] = f.n_mels;
    j["fmin_hz"] = f.fmin_hz;
    j["fmax_hz"] = f.fmax_hz;
    j["n_mfcc"] = f.n_mfcc;
    j["log_floor"] = f.log_floor;
    return j;
}

FrontendConfig frontend_from_json(const ordered_json& j) {
    FrontendConfig f;
    f.frame_len = j.at("frame_len").get<std::size_t>();
    f.hop_len = j.at("hop_len").get<std::size_t>();
    f.n_fft = j.at("n_fft").get<std::size_t>();
    f.n_mels = j.at("n_mels").get<std::size_t>();
    f.fmin_hz = j.at("fmin_hz").get<double>();
    f.fmax_hz = j.at("fmax_hz").get<double>();
    f.n_mfcc = j.at("n_mfcc").get<std::size_t>();
    f.log_floor = j.at("log_floor").get<double>();
    return f;
}

std::string header_text(const nn::ModelGraph& m) {
    ordered_json j;
    j["arch"] = nn::to_string(m.arch);
    j["head_kind"] = nn::to_string(m.head_kind);
    j["quant"] = nn::to_string(m.quant);
    j["input_frames"] = m.input_frames;
    j["n_mfcc"] = m.n_mfcc;
    j["bn_epsilon"] = m.bn_epsilon;
    j["frontend"] = frontend_to_json(m.frontend);
    ordered_json layers = ordered_json::array();
    for (const auto& l : m.layers) {
        ordered_json lj;
        lj["kind"] = nn::to_string(l.kind);
        lj["name"] = l.name;
        if (l.kind == LayerKind::Conv2d) lj["filters"] = l.filters;
        if (l.kind == LayerKind::Dense) lj["units"] = l.units;
        if (l.kind == LayerKind::Dropout) lj["rate"] = l.rate;
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    ordered_json heads = ordered_json::array();
    for (const auto& h : m.heads) {
        ordered_json hj;
        hj["name"] = h.name;
        hj["labels"] = h.labels;
        heads.push_back(std::move(hj));
    }
    j["heads"] = std::move(heads);
    ordered_json ranges = ordered_json::object();
    for (const auto& [name, r] : m.activation_ranges) ranges[name] = {r.min, r.max};
    j["activation_ranges"] = std::move(ranges);
    return j.dump();
}

void parse_header(const std::string& text, nn::ModelGraph& m) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptFile, std::string("bad model header: ") + e.what());
    }
    try {
        auto arch = nn::parse_arch(j.at("arch").get<std::string>());
        auto heads = nn::parse_head_kind(j.at("head_kind").get<std::string>());
        auto quant = nn::parse_quant_mode(j.at("quant").get<std::string>());
        if (!arch || !heads || !quant) throw Error(ErrorCode::CorruptFile, "bad enum in model header");
        m.arch = *arch;
        m.head_kind = *heads;
        m.quant = *quant;
        m.input_frames = j.at("input_frames").get<std::size_t>();
        m.n_mfcc = j.at("n_mfcc").get<std::size_t>();
        m.bn_epsilon = j.at("bn_epsilon").get<float>();
        m.frontend = frontend_from_json(j.at("frontend"));
        for (const auto& lj : j.at("layers")) {
            const auto kind_name = lj.at("kind").get<std::string>();
            auto kind = nn::parse_layer_kind(kind_name);
            if (!kind) throw Error(ErrorCode::UnknownLayerKind, kind_name);
            nn::LayerSpec spec;
            spec.kind = *kind;
            spec.name = lj.at("name").get<std::string>();
            spec.filters = lj.value("filters", 0);
            spec.units = lj.value("units", 0);
            spec.rate = lj.value("rate", 0.0f);
            m.layers.push_back(std::move(spec));
        }
        for (const auto& hj : j.at("heads")) {
            m.heads.push_back({hj.at("name").get<std::string>(), hj.at("labels").get<std::vector<std::string>>()});
        }
        for (const auto& [name, r] : j.at("activation_ranges").items()) {
            m.activation_ranges[name] = {r.at(0).get<float>(), r.at(1).get<float>()};
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptFile, std::string("bad model header: ") + e.what());
    }
}

std::vector<std::string> required_weights(const nn::ModelGraph& m) {
    std::vector<std::string> names;
    for (const auto& l : m.layers) {
        if (l.kind == LayerKind::Conv2d || l.kind == LayerKind::Dense) {
            names.push_back(l.name + "/kernel");
            names.push_back(l.name + "/bias");
        } else if (l.kind == LayerKind::BatchNorm) {
            for (const char* s : {"/gamma", "/beta", "/moving_mean", "/moving_var"}) names.push_back(l.name + s);
        }
    }
    for (const auto& h : m.heads) {
        names.push_back(h.name + "/kernel");
        names.push_back(h.name + "/bias");
    }
    return names;
}

DType expected_dtype(nn::QuantMode mode, const std::string& name) {
    switch (mode) {
        case nn::QuantMode::Fp32: return DType::F32;
        case nn::QuantMode::Fp16Weights: return DType::F16;
        case nn::QuantMode::Int8Weights:
        case nn::QuantMode::Int8Full: return name.ends_with("/kernel") ? DType::I8 : DType::F32;
    }
    return DType::F32;
}

void validate(const nn::ModelGraph& m) {
    const auto names = required_weights(m);
    std::set<std::string> required(names.begin(), names.end());
    for (const auto& name : names) {
        if (!m.weights.contains(name)) throw Error(ErrorCode::CorruptFile, "missing weight " + name);
    }
    for (const auto& [name, t] : m.weights) {
        if (!required.contains(name)) throw Error(ErrorCode::CorruptFile, "unreferenced weight " + name);
        if (t.dtype != expected_dtype(m.quant, name)) {
            throw Error(ErrorCode::CorruptFile, "dtype of " + name + " inconsistent with quant mode");
        }
        if (t.payload_bytes() != t.elements() * (t.dtype == DType::F32 ? 4 : t.dtype == DType::F16 ? 2 : 1)) {
            throw Error(ErrorCode::CorruptFile, "payload size of " + name + " does not match its shape");
        }
    }
}

}  // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t size) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    while (size > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
        crc = ::crc32(crc, data, chunk);
        data += chunk;
        size -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> serialize(const nn::ModelGraph& model) {
    Writer w;
    w.put_bytes(kMagic, 4);
    w.put<std::uint16_t>(kFormatVersion);
    const std::string header = header_text(model);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(header.size()));
    w.put_bytes(header.data(), header.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(model.weights.size()));
    for (const auto& [name, t] : model.weights) {
        w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
        w.put_bytes(name.data(), name.size());
        w.put<std::uint8_t>(static_cast<std::uint8_t>(t.dtype));
        w.put<std::uint8_t>(static_cast<std::uint8_t>(t.shape.size()));
        for (std::size_t d : t.shape) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
        w.put<float>(t.scale);
        w.put<std::int32_t>(t.zero_point);
        w.put<std::uint64_t>(t.payload_bytes());
        switch (t.dtype) {
            case DType::F32: w.put_bytes(t.f32.data(), t.f32.size() * 4); break;
            case DType::F16: w.put_bytes(t.f16.data(), t.f16.size() * 2); break;
            case DType::I8: w.put_bytes(t.i8.data(), t.i8.size()); break;
        }
    }
    w.put<std::uint32_t>(crc32(w.bytes.data(), w.bytes.size()));
    return std::move(w.bytes);
}

nn::ModelGraph deserialize(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 + 2 + 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw Error(ErrorCode::CorruptFile, "bad magic");
    }
    std::uint16_t version;
    std::memcpy(&version, bytes.data() + 4, 2);
    if (version > kFormatVersion) {
        throw Error(ErrorCode::UnsupportedVersion, "model format version " + std::to_string(version));
    }
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
    if (crc32(bytes.data(), bytes.size() - 4) != stored_crc) throw Error(ErrorCode::CorruptFile, "CRC mismatch");

    Reader r(bytes.data() + 6, bytes.size() - 6 - 4);
    nn::ModelGraph m;
    const auto header_len = r.get<std::uint32_t>();
    const auto* header = r.take(header_len);
    parse_header(std::string(reinterpret_cast<const char*>(header), header_len), m);

    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = r.get<std::uint16_t>();
        std::string name(reinterpret_cast<const char*>(r.take(name_len)), name_len);
        nn::WeightTensor t;
        const auto dtype = r.get<std::uint8_t>();
        if (dtype > static_cast<std::uint8_t>(DType::I8)) throw Error(ErrorCode::CorruptFile, "bad dtype");
        t.dtype = static_cast<DType>(dtype);
        const auto rank = r.get<std::uint8_t>();
        for (std::uint8_t d = 0; d < rank; ++d) t.shape.push_back(r.get<std::uint32_t>());
        t.scale = r.get<float>();
        t.zero_point = r.get<std::int32_t>();
        const auto payload_len = r.get<std::uint64_t>();
        if (payload_len > r.remaining()) throw Error(ErrorCode::CorruptFile, "payload exceeds file");
        const auto* payload = r.take(static_cast<std::size_t>(payload_len));
        switch (t.dtype) {
            case DType::F32:
                t.f32.resize(payload_len / 4);
                std::memcpy(t.f32.data(), payload, t.f32.size() * 4);
                break;
            case DType::F16:
                t.f16.resize(payload_len / 2);
                std::memcpy(t.f16.data(), payload, t.f16.size() * 2);
                break;
            case DType::I8:
                t.i8.resize(payload_len);
                std::memcpy(t.i8.data(), payload, t.i8.size());
                break;
        }
        if (!m.weights.emplace(std::move(name), std::move(t)).second) {
            throw Error(ErrorCode::CorruptFile, "duplicate tensor name");
        }
    }
    if (r.remaining() != 0) throw Error(ErrorCode::CorruptFile, "trailing bytes before CRC");
    validate(m);
    return m;
}

std::size_t save(const nn::ModelGraph& model, const std::filesystem::path& path) {
    const auto bytes = serialize(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
    return bytes.size();
}

nn::ModelGraph load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open model " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return deserialize(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

}  // namespace lsic::store
