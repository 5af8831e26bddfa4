#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "repcnn/graph.hpp"

namespace repcnn {

/// Result of folding a conv + BN pair: one convolution kernel plus bias,
/// same layout as the source conv weight.
struct FusedKernel {
    Tensor weight;  // (out, in/groups, k)
    Tensor bias;    // (out)
};

/// Fold an eval-ready batch norm into the preceding convolution:
///   W = (gamma / sigma) * w       per output channel
///   b = beta - gamma * mu / sigma (+ folded conv bias)
/// with sigma = sqrt(running_var + eps).
inline FusedKernel fold_conv_bn(const Conv1dLayer& conv, const BatchNorm1dLayer& bn) {
    if (conv.out_channels() != bn.channels())
        throw std::invalid_argument("fold_conv_bn: channel mismatch");
    FusedKernel f;
    f.weight = Tensor(conv.weight.shape);
    f.bias = Tensor({conv.out_channels()});
    const int per_out = conv.weight.dim(1) * conv.weight.dim(2);
    for (int o = 0; o < conv.out_channels(); ++o) {
        float scale, shift;
        bn_eval_affine(bn, o, scale, shift);
        for (int i = 0; i < per_out; ++i) {
            const std::size_t idx = static_cast<std::size_t>(o) * per_out + i;
            f.weight.data[idx] = scale * conv.weight.data[idx];
        }
        f.bias.at(o) = shift + (conv.bias ? scale * conv.bias->at(o) : 0.0f);
    }
    return f;
}

/// Spread a 1x1 kernel into a width-k kernel that acts identically under the
/// block's padding scheme. With causal (left-only) padding the current frame
/// is the last tap, so the value lands at index k-1.
inline FusedKernel embed_1x1(const FusedKernel& w1, int k, Padding padding) {
    if (w1.weight.dim(2) != 1) throw std::invalid_argument("embed_1x1: source kernel size != 1");
    if (k < 1) throw std::invalid_argument("embed_1x1: bad target kernel size");
    if (k == 1) return w1;
    if (padding != Padding::causal)
        throw std::invalid_argument("embed_1x1: unsupported padding scheme");
    FusedKernel out;
    out.weight = Tensor({w1.weight.dim(0), w1.weight.dim(1), k});
    out.bias = w1.bias;
    for (int o = 0; o < w1.weight.dim(0); ++o)
        for (int i = 0; i < w1.weight.dim(1); ++i)
            out.weight.at((o * w1.weight.dim(1) + i) * k + (k - 1)) =
                w1.weight.at(o * w1.weight.dim(1) + i);
    return out;
}

/// Sum parallel kernels elementwise (weights and biases). Accumulation runs
/// in double so the result does not depend on branch order.
inline FusedKernel merge_parallel(const std::vector<FusedKernel>& branches) {
    if (branches.empty()) throw std::invalid_argument("merge_parallel: empty branch list");
    for (const auto& b : branches)
        if (b.weight.shape != branches.front().weight.shape ||
            b.bias.shape != branches.front().bias.shape)
            throw std::invalid_argument("merge_parallel: kernel shape mismatch");
    FusedKernel out;
    out.weight = Tensor(branches.front().weight.shape);
    out.bias = Tensor(branches.front().bias.shape);
    for (std::size_t i = 0; i < out.weight.size(); ++i) {
        double acc = 0.0;
        for (const auto& b : branches) acc += b.weight.data[i];
        out.weight.data[i] = static_cast<float>(acc);
    }
    for (std::size_t i = 0; i < out.bias.size(); ++i) {
        double acc = 0.0;
        for (const auto& b : branches) acc += b.bias.data[i];
        out.bias.data[i] = static_cast<float>(acc);
    }
    return out;
}

struct FuseOptions {
    // Upper activation bound for the fused graph's clip layers. +inf keeps
    // clip identical to relu, making fusion equivalence exact.
    float clip_upper = kInf;
};

/// Collapse one RepConvBlock into a single depthwise conv with bias. Branch
/// summation order is canonical: k-branches by ascending index, then the 1x1
/// path.
inline std::pair<Conv1dLayer, Activation> fuse_repblock(const RepConvBlock& block,
                                                        const FuseOptions& opt = {}) {
    std::vector<FusedKernel> parts;
    parts.reserve(block.num_branches + 1);
    for (int i = 0; i < block.num_branches; ++i)
        parts.push_back(fold_conv_bn(block.branch_convs[i], block.branch_bns[i]));
    parts.push_back(embed_1x1(fold_conv_bn(block.pointwise, block.pointwise_bn),
                              block.kernel_size, block.branch_convs.front().padding));
    FusedKernel merged = merge_parallel(parts);

    Conv1dLayer fused = Conv1dLayer::make(block.channels, block.channels, block.kernel_size, 1,
                                          block.channels, /*with_bias=*/true,
                                          block.branch_convs.front().padding);
    fused.weight = std::move(merged.weight);
    fused.bias = std::move(merged.bias);
    return {std::move(fused), Activation{ActKind::clip, 0.0f, opt.clip_upper}};
}

/// Rewrite a training graph into the equivalent single-branch inference
/// graph: every RepConvBlock becomes one depthwise conv + clip, every plain
/// conv + BN pair folds into one conv with bias, and remaining ReLUs become
/// clips.
inline ModelGraph fuse_model(const ModelGraph& graph, const FuseOptions& opt = {}) {
    if (graph.mode == GraphMode::fused)
        throw std::invalid_argument("fuse_model: graph is already fused");

    ModelGraph out;
    out.mode = GraphMode::fused;
    out.in_channels = graph.in_channels;

    std::size_t i = 0;
    while (i < graph.layers.size()) {
        const Layer& layer = graph.layers[i];
        if (const auto* blk = std::get_if<RepConvBlock>(&layer)) {
            auto [conv, act] = fuse_repblock(*blk, opt);
            out.layers.emplace_back(std::move(conv));
            out.layers.emplace_back(act);
            ++i;
            continue;
        }
        if (const auto* conv = std::get_if<Conv1dLayer>(&layer)) {
            if (i + 1 < graph.layers.size()) {
                if (const auto* bn = std::get_if<BatchNorm1dLayer>(&graph.layers[i + 1])) {
                    FusedKernel f = fold_conv_bn(*conv, *bn);
                    Conv1dLayer merged = *conv;
                    merged.weight = std::move(f.weight);
                    merged.bias = std::move(f.bias);
                    out.layers.emplace_back(std::move(merged));
                    i += 2;
                    continue;
                }
            }
            out.layers.emplace_back(*conv);
            ++i;
            continue;
        }
        if (const auto* act = std::get_if<Activation>(&layer)) {
            Activation a = *act;
            if (a.kind == ActKind::relu) a = Activation{ActKind::clip, 0.0f, opt.clip_upper};
            out.layers.emplace_back(a);
            ++i;
            continue;
        }
        throw std::invalid_argument("fuse_model: batch norm without a preceding convolution");
    }
    return out;
}

/// Largest post-ReLU activation over a calibration pass, used to choose a
/// finite clip bound (scaled by 1.05 for headroom).
inline float calibrate_clip_upper(ModelGraph& train_graph, const std::vector<Tensor>& inputs) {
    train_graph.set_bn_mode(BnMode::eval);
    float peak = 0.0f;
    for (const Tensor& x : inputs) {
        Tensor cur = x;
        for (auto& layer : train_graph.layers) {
            cur = std::visit(
                [&](auto& l) -> Tensor {
                    using T = std::decay_t<decltype(l)>;
                    if constexpr (std::is_same_v<T, Conv1dLayer>)
                        return conv1d_forward(cur, l);
                    else if constexpr (std::is_same_v<T, BatchNorm1dLayer>)
                        return batchnorm_forward(cur, l);
                    else if constexpr (std::is_same_v<T, Activation>)
                        return l.forward(cur);
                    else
                        return repblock_forward(cur, l);
                },
                layer);
            if (std::holds_alternative<Activation>(layer) ||
                std::holds_alternative<RepConvBlock>(layer))
                for (float v : cur.data) peak = std::max(peak, v);
        }
    }
    return 1.05f * peak;
}

}  // namespace repcnn
