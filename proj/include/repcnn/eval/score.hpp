#pragma once

#include <cmath>
#include <thread>
#include <vector>

#include "repcnn/audio/dataset.hpp"
#include "repcnn/eval/metrics.hpp"
#include "repcnn/stream.hpp"

namespace repcnn {

namespace detail {

// ground-truth input-frame span [start, end) -> inclusive emit-frame range,
// given the stride-2 stem (emit e decides at input frame 2e)
inline std::pair<int, int> gt_to_emit(int start_frame, int end_frame, int stride = 2) {
    const int lo = (start_frame + stride - 1) / stride;
    const int hi = (end_frame - 1) / stride;
    return {lo, hi};
}

}  // namespace detail

/// Stream one file through the fused graph; scores are sigmoid(logit) per
/// emitted frame.
inline ScoredFile score_file(const ModelGraph& graph, const ManifestEntry& entry,
                             const MfccConfig& mfcc_cfg = {}) {
    Utterance u = read_wav(entry.path);
    const Tensor feats = mfcc(u.samples, mfcc_cfg);
    StreamState s = stream_init(graph);

    ScoredFile out;
    out.id = entry.path;
    out.seconds = static_cast<double>(u.samples.size()) / u.sample_rate;
    out.scores.reserve(feats.dim(1) / 2 + 1);
    std::vector<float> frame(feats.dim(0));
    for (int t = 0; t < feats.dim(1); ++t) {
        for (int c = 0; c < feats.dim(0); ++c) frame[c] = feats.at2(c, t);
        if (auto logit = stream_push(s, frame.data(), static_cast<int>(frame.size())))
            out.scores.push_back(1.0f / (1.0f + std::exp(-*logit)));
    }
    if (entry.has_span()) out.gt_emit = detail::gt_to_emit(entry.span_start, entry.span_end);
    return out;
}

/// Score a set of files, optionally across threads. Results land at the
/// entry's index, so aggregation order is deterministic regardless of
/// scheduling.
inline std::vector<ScoredFile> score_test_sets(const ModelGraph& graph,
                                               const std::vector<ManifestEntry>& entries,
                                               const MfccConfig& mfcc_cfg = {},
                                               int threads = 1) {
    std::vector<ScoredFile> out(entries.size());
    if (threads <= 1 || entries.size() < 2) {
        for (std::size_t i = 0; i < entries.size(); ++i)
            out[i] = score_file(graph, entries[i], mfcc_cfg);
        return out;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= entries.size()) return;
            out[i] = score_file(graph, entries[i], mfcc_cfg);
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return out;
}

inline double total_hours(const std::vector<ScoredFile>& files) {
    double s = 0.0;
    for (const auto& f : files) s += f.seconds;
    return s / 3600.0;
}

}  // namespace repcnn
