#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "repcnn/nn/activations.hpp"
#include "repcnn/nn/batchnorm.hpp"
#include "repcnn/nn/conv1d.hpp"
#include "repcnn/nn/optimizer.hpp"
#include "repcnn/nn/repconv_block.hpp"

namespace repcnn {

enum class GraphMode { train, fused };

using Layer = std::variant<Conv1dLayer, BatchNorm1dLayer, Activation, RepConvBlock>;

/// Ordered layer list. The same object flows through the trainer and the
/// reparameterization pass; `mode` tags which form it currently holds.
struct ModelGraph {
    GraphMode mode = GraphMode::train;
    int in_channels = 0;
    std::vector<Layer> layers;

    void set_bn_mode(BnMode m) {
        for (auto& layer : layers) {
            if (auto* bn = std::get_if<BatchNorm1dLayer>(&layer)) bn->mode = m;
            if (auto* blk = std::get_if<RepConvBlock>(&layer)) blk->set_bn_mode(m);
        }
    }
};

struct LayerCache {
    Tensor input;
    BnBatchStats bn_stats;
    RepBlockCache block;
};

struct ForwardCache {
    std::vector<LayerCache> layers;
};

inline Tensor graph_forward(ModelGraph& g, const Tensor& x, ForwardCache* cache = nullptr) {
    if (cache) {
        cache->layers.clear();
        cache->layers.resize(g.layers.size());
    }
    Tensor cur = x;
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
        LayerCache* lc = cache ? &cache->layers[i] : nullptr;
        if (lc) lc->input = cur;
        Tensor next = std::visit(
            [&](auto& layer) -> Tensor {
                using T = std::decay_t<decltype(layer)>;
                if constexpr (std::is_same_v<T, Conv1dLayer>) {
                    return conv1d_forward(cur, layer);
                } else if constexpr (std::is_same_v<T, BatchNorm1dLayer>) {
                    return batchnorm_forward(cur, layer, lc ? &lc->bn_stats : nullptr);
                } else if constexpr (std::is_same_v<T, Activation>) {
                    return layer.forward(cur);
                } else {
                    return repblock_forward(cur, layer, lc ? &lc->block : nullptr);
                }
            },
            g.layers[i]);
        cur = std::move(next);
    }
    return cur;
}

inline Tensor graph_eval_forward(ModelGraph& g, const Tensor& x) {
    g.set_bn_mode(BnMode::eval);
    return graph_forward(g, x);
}

namespace detail {

inline std::string layer_prefix(std::size_t idx) { return "l" + std::to_string(idx); }

template <typename Fn>
void visit_params(ModelGraph& g, Fn&& fn) {
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
        const std::string p = layer_prefix(i);
        std::visit(
            [&](auto& layer) {
                using T = std::decay_t<decltype(layer)>;
                if constexpr (std::is_same_v<T, Conv1dLayer>) {
                    fn(p + ".weight", layer.weight);
                    if (layer.bias) fn(p + ".bias", *layer.bias);
                } else if constexpr (std::is_same_v<T, BatchNorm1dLayer>) {
                    fn(p + ".gamma", layer.weight);
                    fn(p + ".beta", layer.bias);
                } else if constexpr (std::is_same_v<T, RepConvBlock>) {
                    for (int b = 0; b < layer.num_branches; ++b) {
                        const std::string bp = p + ".branch" + std::to_string(b);
                        fn(bp + ".weight", layer.branch_convs[b].weight);
                        fn(bp + ".gamma", layer.branch_bns[b].weight);
                        fn(bp + ".beta", layer.branch_bns[b].bias);
                    }
                    fn(p + ".pw.weight", layer.pointwise.weight);
                    fn(p + ".pw.gamma", layer.pointwise_bn.weight);
                    fn(p + ".pw.beta", layer.pointwise_bn.bias);
                }
            },
            g.layers[i]);
    }
}

// Non-trainable state that still needs to travel with the model file.
template <typename Fn>
void visit_buffers(ModelGraph& g, Fn&& fn) {
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
        const std::string p = layer_prefix(i);
        std::visit(
            [&](auto& layer) {
                using T = std::decay_t<decltype(layer)>;
                if constexpr (std::is_same_v<T, BatchNorm1dLayer>) {
                    fn(p + ".running_mean", layer.running_mean);
                    fn(p + ".running_var", layer.running_var);
                } else if constexpr (std::is_same_v<T, RepConvBlock>) {
                    for (int b = 0; b < layer.num_branches; ++b) {
                        const std::string bp = p + ".branch" + std::to_string(b);
                        fn(bp + ".running_mean", layer.branch_bns[b].running_mean);
                        fn(bp + ".running_var", layer.branch_bns[b].running_var);
                    }
                    fn(p + ".pw.running_mean", layer.pointwise_bn.running_mean);
                    fn(p + ".pw.running_var", layer.pointwise_bn.running_var);
                }
            },
            g.layers[i]);
    }
}

}  // namespace detail

inline std::vector<NamedParam> named_params(ModelGraph& g) {
    std::vector<NamedParam> out;
    detail::visit_params(g, [&](const std::string& name, Tensor& t) {
        out.push_back({name, &t});
    });
    return out;
}

inline std::pair<Tensor, ParamGrads> graph_backward(ModelGraph& g, const ForwardCache& cache,
                                                    const Tensor& grad_out) {
    if (cache.layers.size() != g.layers.size())
        throw std::invalid_argument("graph_backward: cache does not match graph");
    ParamGrads grads;
    Tensor grad = grad_out;
    for (std::size_t ri = g.layers.size(); ri-- > 0;) {
        const std::string p = detail::layer_prefix(ri);
        const LayerCache& lc = cache.layers[ri];
        grad = std::visit(
            [&](auto& layer) -> Tensor {
                using T = std::decay_t<decltype(layer)>;
                if constexpr (std::is_same_v<T, Conv1dLayer>) {
                    auto [gx, cg] = conv1d_backward(lc.input, layer, grad);
                    grads.add(p + ".weight", cg.weight);
                    if (layer.bias) grads.add(p + ".bias", *cg.bias);
                    return std::move(gx);
                } else if constexpr (std::is_same_v<T, BatchNorm1dLayer>) {
                    auto [gx, bg] = batchnorm_backward(
                        lc.input, layer, layer.mode == BnMode::train ? &lc.bn_stats : nullptr,
                        grad);
                    grads.add(p + ".gamma", bg.weight);
                    grads.add(p + ".beta", bg.bias);
                    return std::move(gx);
                } else if constexpr (std::is_same_v<T, Activation>) {
                    return layer.backward(lc.input, grad);
                } else {
                    auto [gx, bg] = repblock_backward(lc.input, layer, lc.block, grad);
                    for (int b = 0; b < layer.num_branches; ++b) {
                        const std::string bp = p + ".branch" + std::to_string(b);
                        grads.add(bp + ".weight", bg.branch_convs[b].weight);
                        grads.add(bp + ".gamma", bg.branch_bns[b].weight);
                        grads.add(bp + ".beta", bg.branch_bns[b].bias);
                    }
                    grads.add(p + ".pw.weight", bg.pointwise.weight);
                    grads.add(p + ".pw.gamma", bg.pointwise_bn.weight);
                    grads.add(p + ".pw.beta", bg.pointwise_bn.bias);
                    return std::move(gx);
                }
            },
            g.layers[ri]);
    }
    return {std::move(grad), std::move(grads)};
}

/// Primitive layer count: composite blocks contribute their internal conv/BN
/// layers plus the activation, so fusing strictly shrinks the number.
inline int primitive_layer_count(const ModelGraph& g) {
    int n = 0;
    for (const auto& layer : g.layers) {
        if (const auto* blk = std::get_if<RepConvBlock>(&layer))
            n += 2 * (blk->num_branches + 1) + 1;  // convs + BNs + activation
        else
            n += 1;
    }
    return n;
}

}  // namespace repcnn
