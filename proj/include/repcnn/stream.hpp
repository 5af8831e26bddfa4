#pragma once

#include <cstring>
#include <optional>
#include <stdexcept>
#include <vector>

#include "repcnn/graph.hpp"

namespace repcnn {

/// Frame-at-a-time causal inference. Each temporal conv keeps a ring of its
/// last (kernel-1) input frames, zero-initialized -- exactly the batch path's
/// causal zero padding -- so streamed outputs equal batch outputs.
///
/// Tap and branch summation orders mirror the batch kernels, keeping the two
/// paths bitwise-aligned on identical inputs.
struct StreamState {
    struct LayerState {
        std::vector<float> ring;  // (k-1) frames x C_in, chronological
        int ring_frames = 0;
        int channels = 0;
        long consumed = 0;
    };

    const ModelGraph* graph = nullptr;
    std::vector<LayerState> layers;
    long frames_consumed = 0;
    long outputs_emitted = 0;

    // scratch ping-pong frame buffers, not part of the persistent state
    std::vector<float> cur, nxt;

    std::size_t state_bytes() const {
        std::size_t bytes = 0;
        for (const auto& l : layers) bytes += l.ring.size() * sizeof(float) + sizeof(long);
        return bytes + 2 * sizeof(long);
    }
};

inline StreamState stream_init(const ModelGraph& g) {
    StreamState s;
    s.graph = &g;
    s.layers.resize(g.layers.size());
    int width = 0;
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
        auto& ls = s.layers[i];
        std::visit(
            [&](const auto& layer) {
                using T = std::decay_t<decltype(layer)>;
                if constexpr (std::is_same_v<T, Conv1dLayer>) {
                    ls.channels = layer.in_channels();
                    ls.ring_frames = layer.kernel_size() - 1;
                    if (layer.padding != Padding::causal && layer.kernel_size() > 1)
                        throw std::invalid_argument("stream: layers must use causal padding");
                } else if constexpr (std::is_same_v<T, RepConvBlock>) {
                    if (layer.branch_bns.front().mode != BnMode::eval ||
                        layer.pointwise_bn.mode != BnMode::eval)
                        throw std::invalid_argument("stream: batch norms must be in eval mode");
                    ls.channels = layer.channels;
                    ls.ring_frames = layer.kernel_size - 1;
                } else if constexpr (std::is_same_v<T, BatchNorm1dLayer>) {
                    if (layer.mode != BnMode::eval)
                        throw std::invalid_argument("stream: batch norms must be in eval mode");
                }
            },
            g.layers[i]);
        ls.ring.assign(static_cast<std::size_t>(ls.ring_frames) * ls.channels, 0.0f);
        width = std::max(width, ls.channels);
    }
    s.cur.reserve(width + 1);
    s.nxt.reserve(width + 1);
    return s;
}

inline void stream_reset(StreamState& s) {
    for (auto& l : s.layers) {
        std::fill(l.ring.begin(), l.ring.end(), 0.0f);
        l.consumed = 0;
    }
    s.frames_consumed = 0;
    s.outputs_emitted = 0;
}

namespace detail {

// one conv step: ring holds the k-1 previous frames, `in` is the newest
inline void stream_conv_frame(const Conv1dLayer& l, const StreamState::LayerState& ls,
                              const float* in, float* out) {
    const int k = l.kernel_size();
    const int in_per_g = l.weight.dim(1);
    const int out_ch = l.out_channels();
    const int out_per_g = out_ch / l.groups;
    for (int o = 0; o < out_ch; ++o) {
        float acc = l.bias ? l.bias->at(o) : 0.0f;
        const int g = o / out_per_g;
        for (int ic = 0; ic < in_per_g; ++ic) {
            const int cin = g * in_per_g + ic;
            const float* w = l.weight.data.data() + (static_cast<std::size_t>(o) * in_per_g + ic) * k;
            for (int j = 0; j < k; ++j) {
                const float x = j < k - 1
                                    ? ls.ring[static_cast<std::size_t>(j) * ls.channels + cin]
                                    : in[cin];
                acc += w[j] * x;
            }
        }
        out[o] = acc;
    }
}

inline void ring_push(StreamState::LayerState& ls, const float* frame) {
    if (ls.ring_frames == 0) return;
    if (ls.ring_frames > 1)
        std::memmove(ls.ring.data(), ls.ring.data() + ls.channels,
                     sizeof(float) * ls.channels * (ls.ring_frames - 1));
    std::memcpy(ls.ring.data() + static_cast<std::size_t>(ls.ring_frames - 1) * ls.channels,
                frame, sizeof(float) * ls.channels);
}

}  // namespace detail

/// Push one feature frame; returns a logit whenever the stride phase emits.
inline std::optional<float> stream_push(StreamState& s, const float* frame, int n_coeffs) {
    const ModelGraph& g = *s.graph;
    if (n_coeffs != g.in_channels)
        throw std::invalid_argument("stream_push: frame has " + std::to_string(n_coeffs) +
                                    " coefficients, graph expects " +
                                    std::to_string(g.in_channels));
    s.frames_consumed += 1;

    s.cur.assign(frame, frame + n_coeffs);
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
        auto& ls = s.layers[i];
        const bool alive = std::visit(
            [&](const auto& layer) -> bool {
                using T = std::decay_t<decltype(layer)>;
                if constexpr (std::is_same_v<T, Conv1dLayer>) {
                    ls.consumed += 1;
                    const bool emit = (ls.consumed - 1) % layer.stride == 0;
                    if (emit) {
                        s.nxt.resize(layer.out_channels());
                        detail::stream_conv_frame(layer, ls, s.cur.data(), s.nxt.data());
                    }
                    detail::ring_push(ls, s.cur.data());
                    if (emit) s.cur.swap(s.nxt);
                    return emit;
                } else if constexpr (std::is_same_v<T, BatchNorm1dLayer>) {
                    for (int c = 0; c < layer.channels(); ++c) {
                        float scale, shift;
                        bn_eval_affine(layer, c, scale, shift);
                        s.cur[c] = scale * s.cur[c] + shift;
                    }
                    return true;
                } else if constexpr (std::is_same_v<T, Activation>) {
                    const float lo = layer.kind == ActKind::relu ? 0.0f : layer.lower;
                    const float hi = layer.kind == ActKind::relu ? kInf : layer.upper;
                    for (float& v : s.cur) v = std::min(std::max(v, lo), hi);
                    return true;
                } else {
                    // train-graph streaming: same rings, one per block
                    ls.consumed += 1;
                    s.nxt.assign(layer.channels, 0.0f);
                    std::vector<float> tmp(layer.channels);
                    for (int b = 0; b < layer.num_branches; ++b) {
                        detail::stream_conv_frame(layer.branch_convs[b], ls, s.cur.data(),
                                                  tmp.data());
                        for (int c = 0; c < layer.channels; ++c) {
                            float scale, shift;
                            bn_eval_affine(layer.branch_bns[b], c, scale, shift);
                            if (b == 0)
                                s.nxt[c] = scale * tmp[c] + shift;
                            else
                                s.nxt[c] += scale * tmp[c] + shift;
                        }
                    }
                    for (int c = 0; c < layer.channels; ++c) {
                        float scale, shift;
                        bn_eval_affine(layer.pointwise_bn, c, scale, shift);
                        s.nxt[c] += scale * (layer.pointwise.weight.at(c) * s.cur[c]) + shift;
                    }
                    detail::ring_push(ls, s.cur.data());
                    const float lo = layer.activation.kind == ActKind::relu
                                         ? 0.0f
                                         : layer.activation.lower;
                    const float hi = layer.activation.kind == ActKind::relu
                                         ? kInf
                                         : layer.activation.upper;
                    for (float& v : s.nxt) v = std::min(std::max(v, lo), hi);
                    s.cur.swap(s.nxt);
                    return true;
                }
            },
            g.layers[i]);
        if (!alive) return std::nullopt;
    }
    s.outputs_emitted += 1;
    return s.cur.at(0);
}

inline std::optional<float> stream_push(StreamState& s, const Tensor& frame) {
    return stream_push(s, frame.data.data(), static_cast<int>(frame.size()));
}

/// Push a (C, T) chunk of frames; returns all logits emitted along the way.
inline std::vector<float> stream_push_chunk(StreamState& s, const Tensor& frames) {
    if (frames.rank() != 2)
        throw std::invalid_argument("stream_push_chunk: expected (C, T) frames");
    const int c = frames.dim(0), t_len = frames.dim(1);
    std::vector<float> out;
    std::vector<float> frame(c);
    for (int t = 0; t < t_len; ++t) {
        for (int i = 0; i < c; ++i) frame[i] = frames.at2(i, t);
        if (auto v = stream_push(s, frame.data(), c)) out.push_back(*v);
    }
    return out;
}

}  // namespace repcnn
