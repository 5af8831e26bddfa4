#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "repcnn/nn/activations.hpp"
#include "repcnn/nn/batchnorm.hpp"
#include "repcnn/nn/conv1d.hpp"

namespace repcnn {

/// Training-time composite block: n parallel depthwise k-kernels, each with
/// its own batch norm, plus a depthwise 1x1 conv + batch norm emulating a
/// skip path. Branch outputs are summed and passed through one activation.
struct RepConvBlock {
    int channels = 0;
    int kernel_size = 0;
    int num_branches = 1;
    std::vector<Conv1dLayer> branch_convs;
    std::vector<BatchNorm1dLayer> branch_bns;
    Conv1dLayer pointwise;  // depthwise 1x1
    BatchNorm1dLayer pointwise_bn;
    Activation activation{ActKind::relu, 0.0f, kInf};

    static RepConvBlock make(int channels, int kernel_size, int num_branches) {
        if (num_branches < 1) throw std::invalid_argument("repblock: need at least one branch");
        if (kernel_size < 1) throw std::invalid_argument("repblock: bad kernel size");
        RepConvBlock b;
        b.channels = channels;
        b.kernel_size = kernel_size;
        b.num_branches = num_branches;
        for (int i = 0; i < num_branches; ++i) {
            b.branch_convs.push_back(
                Conv1dLayer::make(channels, channels, kernel_size, 1, channels));
            b.branch_bns.push_back(BatchNorm1dLayer::make(channels));
        }
        b.pointwise = Conv1dLayer::make(channels, channels, 1, 1, channels);
        b.pointwise_bn = BatchNorm1dLayer::make(channels);
        return b;
    }

    void init(Rng& rng) {
        for (auto& c : branch_convs) init_conv_uniform(c, rng);
        init_conv_uniform(pointwise, rng);
    }

    void set_bn_mode(BnMode m) {
        for (auto& bn : branch_bns) bn.mode = m;
        pointwise_bn.mode = m;
    }
};

struct RepBlockCache {
    std::vector<Tensor> branch_conv_out;  // per k-branch, pre-BN
    Tensor pointwise_conv_out;
    std::vector<BnBatchStats> branch_stats;
    BnBatchStats pointwise_stats;
    Tensor pre_activation;
};

inline Tensor repblock_forward(const Tensor& x, RepConvBlock& block,
                               RepBlockCache* cache = nullptr) {
    const bool train_stats = block.branch_bns.front().mode == BnMode::train;
    if (cache) {
        cache->branch_conv_out.clear();
        cache->branch_stats.resize(block.num_branches);
    }

    Tensor sum;
    for (int i = 0; i < block.num_branches; ++i) {
        Tensor c = conv1d_forward(x, block.branch_convs[i]);
        Tensor y = batchnorm_forward(c, block.branch_bns[i],
                                     cache && train_stats ? &cache->branch_stats[i] : nullptr);
        if (cache) cache->branch_conv_out.push_back(std::move(c));
        if (i == 0) {
            sum = std::move(y);
        } else {
            for (std::size_t j = 0; j < sum.size(); ++j) sum.data[j] += y.data[j];
        }
    }

    Tensor cp = conv1d_forward(x, block.pointwise);
    Tensor yp = batchnorm_forward(cp, block.pointwise_bn,
                                  cache && train_stats ? &cache->pointwise_stats : nullptr);
    if (cache) cache->pointwise_conv_out = std::move(cp);
    for (std::size_t j = 0; j < sum.size(); ++j) sum.data[j] += yp.data[j];

    Tensor out = block.activation.forward(sum);
    if (cache) cache->pre_activation = std::move(sum);
    return out;
}

// Collected per-path gradients; graph code maps them onto parameter names.
struct RepBlockGrads {
    std::vector<ConvGrads> branch_convs;
    std::vector<BnGrads> branch_bns;
    ConvGrads pointwise;
    BnGrads pointwise_bn;
};

inline std::pair<Tensor, RepBlockGrads> repblock_backward(const Tensor& x,
                                                          const RepConvBlock& block,
                                                          const RepBlockCache& cache,
                                                          const Tensor& grad_out) {
    const bool train_stats = block.branch_bns.front().mode == BnMode::train;
    Tensor grad_sum = block.activation.backward(cache.pre_activation, grad_out);

    RepBlockGrads grads;
    Tensor grad_x(x.shape);

    for (int i = 0; i < block.num_branches; ++i) {
        auto [gc, bn_g] = batchnorm_backward(cache.branch_conv_out[i], block.branch_bns[i],
                                             train_stats ? &cache.branch_stats[i] : nullptr,
                                             grad_sum);
        auto [gx, conv_g] = conv1d_backward(x, block.branch_convs[i], gc);
        for (std::size_t j = 0; j < grad_x.size(); ++j) grad_x.data[j] += gx.data[j];
        grads.branch_bns.push_back(std::move(bn_g));
        grads.branch_convs.push_back(std::move(conv_g));
    }

    auto [gcp, bnp_g] = batchnorm_backward(cache.pointwise_conv_out, block.pointwise_bn,
                                           train_stats ? &cache.pointwise_stats : nullptr,
                                           grad_sum);
    auto [gxp, convp_g] = conv1d_backward(x, block.pointwise, gcp);
    for (std::size_t j = 0; j < grad_x.size(); ++j) grad_x.data[j] += gxp.data[j];
    grads.pointwise_bn = std::move(bnp_g);
    grads.pointwise = std::move(convp_g);

    return {std::move(grad_x), std::move(grads)};
}

}  // namespace repcnn
