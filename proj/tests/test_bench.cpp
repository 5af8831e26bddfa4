#include <gtest/gtest.h>

#include "repcnn/eval/bench.hpp"
#include "repcnn/reparam.hpp"

using namespace repcnn;

TEST(Bench, AnalyticPeakBytesHandComputed) {
    // toy graph: conv 3->5 then conv 5->2; live sets are (3+5) and (5+2)
    ModelGraph g;
    g.mode = GraphMode::fused;
    g.in_channels = 3;
    g.layers.emplace_back(Conv1dLayer::make(3, 5, 3, 1, 1, true));
    g.layers.emplace_back(Conv1dLayer::make(5, 2, 1, 1, 1, true));
    EXPECT_EQ(analytic_peak_activation_bytes(g), (3 + 5) * sizeof(float));
}

TEST(Bench, BlockCostsMoreThanFusedConv) {
    RepCNNConfig cfg;
    cfg.width = 20;
    ModelGraph train = build_repcnn(cfg, 1);
    ModelGraph fused = fuse_model(train);
    // block live set is 3C, fused conv live set is 2C
    EXPECT_GT(analytic_peak_activation_bytes(train), analytic_peak_activation_bytes(fused));
    EXPECT_EQ(analytic_peak_activation_bytes(fused), 2u * 20u * sizeof(float));
    EXPECT_EQ(analytic_peak_activation_bytes(train), 3u * 20u * sizeof(float));
}

TEST(Bench, FusedNeverSlowerAcrossConfigs) {
    // median latency ordering holds for every multi-branch config probed
    for (int width : {16, 44}) {
        for (int n : {2, 4}) {
            RepCNNConfig cfg;
            cfg.width = width;
            cfg.num_branches = n;
            cfg.stage_kernels = {7, 13};
            ModelGraph train = build_repcnn(cfg, width + n);
            ModelGraph fused = fuse_model(train);
            BenchReport r = bench(train, fused, 200, 1);
            EXPECT_LE(r.rows[1].median_latency_ms, r.rows[0].median_latency_ms)
                << "width " << width << " n " << n;
        }
    }
}

TEST(Bench, ReportSmoke) {
    RepCNNConfig cfg;
    cfg.width = 20;  // wide enough that the block live set beats the stem's
    cfg.stage_kernels = {7, 9};
    ModelGraph train = build_repcnn(cfg, 2);
    ModelGraph fused = fuse_model(train);
    BenchReport r = bench(train, fused, 50, 3);
    ASSERT_EQ(r.rows.size(), 2u);
    EXPECT_EQ(r.rows[0].graph_name, "train");
    EXPECT_EQ(r.rows[1].graph_name, "fused");
    for (const auto& row : r.rows) {
        EXPECT_GT(row.mean_latency_ms, 0.0);
        EXPECT_GT(row.median_latency_ms, 0.0);
        EXPECT_GT(row.peak_activation_bytes, 0u);
    }
    EXPECT_LT(r.rows[1].parameter_bytes, r.rows[0].parameter_bytes);
    EXPECT_LT(r.rows[1].peak_activation_bytes, r.rows[0].peak_activation_bytes);
}
