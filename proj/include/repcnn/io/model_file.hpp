#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "repcnn/graph.hpp"

namespace repcnn {

/// Binary model container:
///   magic "RPCN" | version u32 LE | header_len u32 LE | UTF-8 JSON topology
///   then per tensor: name_len u32, name, rank u32, dims u32..., f32 LE data.
/// Topology JSON fully describes the layer list, so a loaded file is
/// self-contained. save(load(f)) is byte-identical.
inline constexpr std::uint32_t kModelFileVersion = 1;

namespace detail {

inline nlohmann::json layer_to_json(const Layer& layer) {
    nlohmann::json j;
    if (const auto* conv = std::get_if<Conv1dLayer>(&layer)) {
        j["kind"] = "conv";
        j["in"] = conv->in_channels();
        j["out"] = conv->out_channels();
        j["k"] = conv->kernel_size();
        j["stride"] = conv->stride;
        j["groups"] = conv->groups;
        j["bias"] = conv->bias.has_value();
        j["padding"] = conv->padding == Padding::causal ? "causal" : "none";
    } else if (const auto* bn = std::get_if<BatchNorm1dLayer>(&layer)) {
        j["kind"] = "batchnorm";
        j["channels"] = bn->channels();
        j["eps"] = bn->epsilon;
        j["momentum"] = bn->momentum;
    } else if (const auto* act = std::get_if<Activation>(&layer)) {
        j["kind"] = act->kind == ActKind::relu ? "relu" : "clip";
        if (act->kind == ActKind::clip) {
            j["lower"] = act->lower;
            if (std::isinf(act->upper))
                j["upper"] = nullptr;
            else
                j["upper"] = act->upper;
        }
    } else if (const auto* blk = std::get_if<RepConvBlock>(&layer)) {
        j["kind"] = "repblock";
        j["channels"] = blk->channels;
        j["k"] = blk->kernel_size;
        j["branches"] = blk->num_branches;
        j["eps"] = blk->branch_bns.front().epsilon;
        j["momentum"] = blk->branch_bns.front().momentum;
    }
    return j;
}

inline Layer layer_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind");
    if (kind == "conv") {
        Conv1dLayer conv = Conv1dLayer::make(
            j.at("in"), j.at("out"), j.at("k"), j.at("stride"), j.at("groups"),
            j.at("bias"),
            j.at("padding") == "causal" ? Padding::causal : Padding::none);
        return conv;
    }
    if (kind == "batchnorm") {
        BatchNorm1dLayer bn = BatchNorm1dLayer::make(j.at("channels"));
        bn.epsilon = j.at("eps");
        bn.momentum = j.at("momentum");
        return bn;
    }
    if (kind == "relu") return Activation{ActKind::relu, 0.0f, kInf};
    if (kind == "clip") {
        Activation a{ActKind::clip, j.at("lower"), kInf};
        if (!j.at("upper").is_null()) a.upper = j.at("upper");
        return a;
    }
    if (kind == "repblock") {
        RepConvBlock blk = RepConvBlock::make(j.at("channels"), j.at("k"), j.at("branches"));
        const float eps = j.at("eps");
        const float momentum = j.at("momentum");
        for (auto& bn : blk.branch_bns) {
            bn.epsilon = eps;
            bn.momentum = momentum;
        }
        blk.pointwise_bn.epsilon = eps;
        blk.pointwise_bn.momentum = momentum;
        return blk;
    }
    throw std::runtime_error("model file: unknown layer kind '" + kind + "'");
}

template <typename Fn>
void visit_all_tensors(ModelGraph& g, Fn&& fn) {
    visit_params(g, fn);
    visit_buffers(g, fn);
}

inline void put_u32(std::ostream& f, std::uint32_t v) {
    const unsigned char b[4] = {
        static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
        static_cast<unsigned char>((v >> 16) & 0xff),
        static_cast<unsigned char>((v >> 24) & 0xff)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& f, const std::string& what) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("model file: truncated while reading " + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

inline void save_model(const ModelGraph& graph, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_model: cannot write " + path);

    nlohmann::json header;
    header["mode"] = graph.mode == GraphMode::train ? "train" : "fused";
    header["in_channels"] = graph.in_channels;
    header["layers"] = nlohmann::json::array();
    for (const auto& layer : graph.layers) header["layers"].push_back(detail::layer_to_json(layer));
    const std::string blob = header.dump();

    f.write("RPCN", 4);
    detail::put_u32(f, kModelFileVersion);
    detail::put_u32(f, static_cast<std::uint32_t>(blob.size()));
    f.write(blob.data(), static_cast<std::streamsize>(blob.size()));

    ModelGraph& g = const_cast<ModelGraph&>(graph);  // visitation only
    detail::visit_all_tensors(g, [&](const std::string& name, Tensor& t) {
        detail::put_u32(f, static_cast<std::uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::put_u32(f, static_cast<std::uint32_t>(t.shape.size()));
        for (int d : t.shape) detail::put_u32(f, static_cast<std::uint32_t>(d));
        f.write(reinterpret_cast<const char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    });
    if (!f) throw std::runtime_error("save_model: write failed for " + path);
}

inline ModelGraph load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_model: cannot open " + path);

    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, "RPCN", 4))
        throw std::runtime_error("load_model: " + path + " is not a model file (bad magic)");
    const std::uint32_t version = detail::get_u32(f, "version");
    if (version != kModelFileVersion)
        throw std::runtime_error("load_model: " + path + " has format version " +
                                 std::to_string(version) + ", this build reads version " +
                                 std::to_string(kModelFileVersion));
    const std::uint32_t header_len = detail::get_u32(f, "header length");
    std::string blob(header_len, '\0');
    if (!f.read(blob.data(), header_len))
        throw std::runtime_error("load_model: truncated header in " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(blob);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load_model: corrupt header in " + path + ": " + e.what());
    }

    ModelGraph g;
    g.mode = header.at("mode") == "train" ? GraphMode::train : GraphMode::fused;
    g.in_channels = header.at("in_channels");
    for (const auto& lj : header.at("layers")) g.layers.push_back(detail::layer_from_json(lj));

    std::map<std::string, Tensor*> slots;
    detail::visit_all_tensors(g, [&](const std::string& name, Tensor& t) { slots[name] = &t; });

    std::set<std::string> seen;
    while (true) {
        f.peek();
        if (f.eof()) break;
        const std::uint32_t name_len = detail::get_u32(f, "tensor name length");
        std::string name(name_len, '\0');
        if (!f.read(name.data(), name_len))
            throw std::runtime_error("load_model: truncated tensor name in " + path);
        const std::uint32_t rank = detail::get_u32(f, "tensor rank");
        std::vector<int> shape(rank);
        for (std::uint32_t i = 0; i < rank; ++i)
            shape[i] = static_cast<int>(detail::get_u32(f, "tensor dims"));
        auto it = slots.find(name);
        if (it == slots.end())
            throw std::runtime_error("load_model: unexpected tensor '" + name + "' in " + path);
        if (it->second->shape != shape)
            throw std::runtime_error("load_model: shape mismatch for tensor '" + name + "' in " +
                                     path);
        if (!f.read(reinterpret_cast<char*>(it->second->data.data()),
                    static_cast<std::streamsize>(it->second->data.size() * sizeof(float))))
            throw std::runtime_error("load_model: truncated tensor data for '" + name + "' in " +
                                     path);
        seen.insert(name);
    }
    for (const auto& [name, ptr] : slots)
        if (!seen.count(name))
            throw std::runtime_error("load_model: missing tensor '" + name + "' in " + path);
    return g;
}

}  // namespace repcnn
