#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "repcnn/graph.hpp"
#include "repcnn/util/rng.hpp"

namespace repcnn {

enum class ModelType { repcnn, single_branch };

/// RepCNN topology: stem conv (k=5, stride 2) + BN + ReLU, then per stage
/// kernel two RepConvBlocks followed by pointwise conv + BN + ReLU, then a
/// pointwise head producing one logit per output frame.
struct RepCNNConfig {
    ModelType type = ModelType::repcnn;
    int in_channels = 16;  // MFCC count
    int width = 44;
    int stem_kernel = 5;
    int stem_stride = 2;
    std::vector<int> stage_kernels = {7, 9, 11, 13};
    int blocks_per_stage = 2;
    int num_branches = 2;

    void validate() const {
        if (in_channels < 1 || width < 1) throw std::invalid_argument("model: bad channel counts");
        if (stem_kernel < 1 || stem_stride < 1) throw std::invalid_argument("model: bad stem");
        if (stage_kernels.empty()) throw std::invalid_argument("model: no stage kernels");
        for (int k : stage_kernels)
            if (k < 3 || k % 2 == 0)
                throw std::invalid_argument("model: stage kernels must be odd and >= 3");
        if (blocks_per_stage < 1) throw std::invalid_argument("model: bad blocks_per_stage");
        if (num_branches < 1) throw std::invalid_argument("model: num_branches must be >= 1");
    }
};

/// Receptive field in input frames: 1 + sum (k_i - 1) * jump_i, where the
/// jump multiplies by each layer's stride.
inline int receptive_field(const RepCNNConfig& cfg) {
    cfg.validate();
    int rf = 1;
    int jump = 1;
    rf += (cfg.stem_kernel - 1) * jump;
    jump *= cfg.stem_stride;
    for (int k : cfg.stage_kernels)
        for (int b = 0; b < cfg.blocks_per_stage; ++b) rf += (k - 1) * jump;
    return rf;  // pointwise layers have k=1 and add nothing
}

inline ModelGraph build_repcnn(const RepCNNConfig& cfg, std::uint64_t seed = 0) {
    cfg.validate();
    Rng rng(derive_seed(seed, "model-init"));
    ModelGraph g;
    g.mode = GraphMode::train;
    g.in_channels = cfg.in_channels;

    auto stem = Conv1dLayer::make(cfg.in_channels, cfg.width, cfg.stem_kernel, cfg.stem_stride);
    init_conv_uniform(stem, rng);
    g.layers.emplace_back(std::move(stem));
    g.layers.emplace_back(BatchNorm1dLayer::make(cfg.width));
    g.layers.emplace_back(Activation{ActKind::relu, 0.0f, kInf});

    for (int k : cfg.stage_kernels) {
        for (int b = 0; b < cfg.blocks_per_stage; ++b) {
            if (cfg.type == ModelType::repcnn) {
                auto blk = RepConvBlock::make(cfg.width, k, cfg.num_branches);
                blk.init(rng);
                g.layers.emplace_back(std::move(blk));
            } else {
                auto dw = Conv1dLayer::make(cfg.width, cfg.width, k, 1, cfg.width);
                init_conv_uniform(dw, rng);
                g.layers.emplace_back(std::move(dw));
                g.layers.emplace_back(BatchNorm1dLayer::make(cfg.width));
                g.layers.emplace_back(Activation{ActKind::relu, 0.0f, kInf});
            }
        }
        auto pw = Conv1dLayer::make(cfg.width, cfg.width, 1);
        init_conv_uniform(pw, rng);
        g.layers.emplace_back(std::move(pw));
        g.layers.emplace_back(BatchNorm1dLayer::make(cfg.width));
        g.layers.emplace_back(Activation{ActKind::relu, 0.0f, kInf});
    }

    auto head = Conv1dLayer::make(cfg.width, 1, 1, 1, 1, /*with_bias=*/true);
    init_conv_uniform(head, rng);
    g.layers.emplace_back(std::move(head));
    return g;
}

/// The stacked single-branch reference: same topology with every RepConvBlock
/// replaced by one depthwise conv + BN (no parallel kernels, no 1x1 path).
inline ModelGraph build_single_branch_baseline(RepCNNConfig cfg, std::uint64_t seed = 0) {
    cfg.type = ModelType::single_branch;
    return build_repcnn(cfg, seed);
}

/// Exact scalar count: trainable parameters for train-mode graphs, stored
/// weights for fused graphs.
inline int param_count(ModelGraph& g) {
    long n = 0;
    detail::visit_params(g, [&](const std::string&, Tensor& t) { n += t.size(); });
    return static_cast<int>(n);
}

}  // namespace repcnn
