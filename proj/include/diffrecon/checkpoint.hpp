#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "diffrecon/denoiser.hpp"
#include "diffrecon/tensor_io.hpp"

namespace diffrecon {

/// Schedule the checkpoint was trained under; reconstruction defaults to it.
struct ScheduleMeta {
    int T = 2000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
};

struct Checkpoint {
    DenoiserParams params;
    ScheduleMeta schedule;
};

namespace detail {

constexpr char kCheckpointMagic[4] = {'D', 'M', 'C', '1'};

}  // namespace detail

/// Checkpoint container: magic "DMC1", u32 little-endian header length, a
/// JSON header (denoiser config, schedule metadata, tensor count), then the
/// parameter tensors as concatenated DMT1 blocks.
inline void save_checkpoint(const std::string& path, const DenoiserParams& params,
                            const ScheduleMeta& schedule) {
    nlohmann::json header;
    header["format"] = 1;
    header["denoiser"] = {{"depth", params.cfg.depth},
                          {"width", params.cfg.width},
                          {"kernel", params.cfg.kernel},
                          {"p_norm", params.cfg.p_norm},
                          {"alpha_embed_dim", params.cfg.alpha_embed_dim}};
    header["schedule"] = {{"T", schedule.T},
                          {"beta_start", schedule.beta_start},
                          {"beta_end", schedule.beta_end}};
    header["tensor_count"] = params.tensors.size();
    const std::string header_str = header.dump();

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw TensorIoError("cannot open for writing: " + path);
    f.write(detail::kCheckpointMagic, 4);
    const std::uint32_t len = static_cast<std::uint32_t>(header_str.size());
    char lenb[4];
    for (int i = 0; i < 4; ++i) lenb[i] = static_cast<char>((len >> (8 * i)) & 0xFF);
    f.write(lenb, 4);
    f.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

    for (const auto& t : params.tensors) {
        Tensor tensor;
        tensor.dtype = TensorDType::F64;
        tensor.dims.assign(t.shape.begin(), t.shape.end());
        tensor.re = t.v;
        const std::string bytes = encode_tensor(tensor);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    if (!f) throw TensorIoError("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw TensorIoError("cannot open: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < 8 || std::memcmp(bytes.data(), detail::kCheckpointMagic, 4) != 0)
        throw TensorFormatError("bad magic bytes (not a DMC1 checkpoint): " + path);

    std::uint32_t header_len = 0;
    for (int i = 0; i < 4; ++i)
        header_len |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[4 + i])) << (8 * i);
    if (8 + static_cast<std::size_t>(header_len) > bytes.size())
        throw TensorTruncationError("truncated checkpoint header: " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(8, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw TensorFormatError(std::string("unparseable checkpoint header: ") + e.what());
    }

    Checkpoint ckpt;
    const auto& d = header.at("denoiser");
    ckpt.params.cfg.depth = d.at("depth").get<int>();
    ckpt.params.cfg.width = d.at("width").get<int>();
    ckpt.params.cfg.kernel = d.at("kernel").get<int>();
    ckpt.params.cfg.p_norm = d.at("p_norm").get<int>();
    ckpt.params.cfg.alpha_embed_dim = d.at("alpha_embed_dim").get<int>();
    ckpt.params.cfg.validate();
    const auto& s = header.at("schedule");
    ckpt.schedule.T = s.at("T").get<int>();
    ckpt.schedule.beta_start = s.at("beta_start").get<double>();
    ckpt.schedule.beta_end = s.at("beta_end").get<double>();

    // Expected tensor layout for this config; loading anything else fails.
    const DenoiserParams reference = init_params(ckpt.params.cfg, 0);
    const std::size_t tensor_count = header.at("tensor_count").get<std::size_t>();
    if (tensor_count != reference.tensors.size())
        throw TensorShapeError("checkpoint tensor count does not match its denoiser config");

    std::size_t off = 8 + header_len;
    for (std::size_t i = 0; i < tensor_count; ++i) {
        std::size_t consumed = 0;
        Tensor t = decode_tensor_stream(reinterpret_cast<const std::uint8_t*>(bytes.data()) + off,
                                        bytes.size() - off, consumed);
        off += consumed;
        const auto& expect = reference.tensors[i].shape;
        if (t.is_complex || t.dims.size() != expect.size())
            throw TensorShapeError("checkpoint tensor " + std::to_string(i) + " has wrong rank");
        for (std::size_t j = 0; j < expect.size(); ++j)
            if (static_cast<int>(t.dims[j]) != expect[j])
                throw TensorShapeError("checkpoint tensor " + std::to_string(i) +
                                       " shape mismatch");
        ParamTensor p;
        p.shape = reference.tensors[i].shape;
        p.v = std::move(t.re);
        ckpt.params.tensors.push_back(std::move(p));
    }
    if (off != bytes.size()) throw TensorFormatError("trailing bytes after checkpoint tensors");
    return ckpt;
}

}  // namespace diffrecon
