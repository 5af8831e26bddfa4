#pragma once

#include <algorithm>
#include <chrono>
#include <string>
#include <vector>

#include "repcnn/model.hpp"
#include "repcnn/stream.hpp"
#include "repcnn/util/rng.hpp"

namespace repcnn {

struct BenchRow {
    std::string graph_name;
    double mean_latency_ms = 0.0;
    double median_latency_ms = 0.0;
    std::size_t peak_activation_bytes = 0;
    std::size_t parameter_bytes = 0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
};

/// Peak transient activation bytes for one streamed output, from the
/// execution schedule: a conv holds its input and output frames, a
/// multi-branch block additionally keeps the branch accumulator alive while
/// each branch output is produced. Ring buffers and weights are persistent
/// state, not transients.
inline std::size_t analytic_peak_activation_bytes(const ModelGraph& g) {
    std::size_t peak = sizeof(float) * static_cast<std::size_t>(g.in_channels);
    for (const auto& layer : g.layers) {
        std::size_t live = 0;
        if (const auto* conv = std::get_if<Conv1dLayer>(&layer))
            live = sizeof(float) *
                   static_cast<std::size_t>(conv->in_channels() + conv->out_channels());
        else if (const auto* blk = std::get_if<RepConvBlock>(&layer))
            live = sizeof(float) * static_cast<std::size_t>(3 * blk->channels);
        else if (const auto* bn = std::get_if<BatchNorm1dLayer>(&layer))
            live = sizeof(float) * static_cast<std::size_t>(bn->channels());
        // activations run in place: no extra buffer
        peak = std::max(peak, live);
    }
    return peak;
}

/// Wall time per emitted output over >= min_outputs warm iterations of the
/// streaming engine, plus the analytic memory numbers.
inline BenchRow bench_graph(ModelGraph& g, const std::string& name, int min_outputs = 1000,
                            std::uint64_t seed = 0) {
    g.set_bn_mode(BnMode::eval);
    StreamState s = stream_init(g);
    Rng rng(derive_seed(seed, "bench/" + name));

    std::vector<float> frame(g.in_channels);
    auto next_frame = [&] {
        for (float& v : frame) v = rng.uniform(-1.0f, 1.0f);
    };

    using clock = std::chrono::steady_clock;
    const int warmup = 100;
    int emitted = 0;
    std::vector<double> per_output_ms;
    per_output_ms.reserve(min_outputs);
    double accum_ms = 0.0;
    while (emitted < warmup + min_outputs) {
        next_frame();
        const auto t0 = clock::now();
        const auto logit = stream_push(s, frame.data(), static_cast<int>(frame.size()));
        const auto t1 = clock::now();
        accum_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
        if (logit) {
            ++emitted;
            if (emitted > warmup) per_output_ms.push_back(accum_ms);
            accum_ms = 0.0;
        }
    }

    BenchRow row;
    row.graph_name = name;
    double sum = 0.0;
    for (double v : per_output_ms) sum += v;
    row.mean_latency_ms = sum / per_output_ms.size();
    std::vector<double> sorted = per_output_ms;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    row.median_latency_ms = sorted[sorted.size() / 2];
    row.peak_activation_bytes = analytic_peak_activation_bytes(g);
    row.parameter_bytes = static_cast<std::size_t>(param_count(g)) * sizeof(float);
    return row;
}

inline BenchReport bench(ModelGraph& train_graph, ModelGraph& fused_graph,
                         int min_outputs = 1000, std::uint64_t seed = 0) {
    BenchReport r;
    r.rows.push_back(bench_graph(train_graph, "train", min_outputs, seed));
    r.rows.push_back(bench_graph(fused_graph, "fused", min_outputs, seed));
    return r;
}

}  // namespace repcnn
