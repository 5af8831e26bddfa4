#pragma once

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>

#include "repcnn/tensor.hpp"
#include "repcnn/util/rng.hpp"

namespace repcnn {

enum class Padding { causal, none };

/// 1-D convolution. Weight layout (out_channels, in_channels/groups, kernel).
/// Causal padding prepends kernel-1 zeros in time before striding, so the
/// output at step t never sees inputs later than t*stride.
struct Conv1dLayer {
    Tensor weight;
    std::optional<Tensor> bias;
    int stride = 1;
    int groups = 1;
    Padding padding = Padding::causal;

    int out_channels() const { return weight.dim(0); }
    int in_channels() const { return weight.dim(1) * groups; }
    int kernel_size() const { return weight.dim(2); }

    bool depthwise() const {
        return groups == in_channels() && groups == out_channels();
    }

    static Conv1dLayer make(int in_ch, int out_ch, int k, int stride = 1, int groups = 1,
                            bool with_bias = false, Padding padding = Padding::causal) {
        if (k < 1) throw std::invalid_argument("conv1d: kernel size must be >= 1");
        if (stride < 1) throw std::invalid_argument("conv1d: stride must be positive");
        if (groups < 1 || in_ch % groups || out_ch % groups)
            throw std::invalid_argument("conv1d: channels must be divisible by groups");
        Conv1dLayer l;
        l.weight = Tensor({out_ch, in_ch / groups, k});
        if (with_bias) l.bias = Tensor({out_ch});
        l.stride = stride;
        l.groups = groups;
        l.padding = padding;
        return l;
    }
};

// Uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
inline void init_conv_uniform(Conv1dLayer& l, Rng& rng) {
    const float bound = 1.0f / std::sqrt(static_cast<float>(l.weight.dim(1) * l.kernel_size()));
    for (float& w : l.weight.data) w = rng.uniform(-bound, bound);
    if (l.bias) l.bias->fill(0.0f);
}

inline int conv1d_output_length(const Conv1dLayer& l, int t_in) {
    const int k = l.kernel_size();
    const int padded = t_in + (l.padding == Padding::causal ? k - 1 : 0);
    if (padded < k)
        throw std::invalid_argument("conv1d: input shorter than kernel");
    return (padded - k) / l.stride + 1;
}

namespace detail {

inline void conv_check_input(const Tensor& x, const Conv1dLayer& l) {
    if (x.rank() != 2 && x.rank() != 3)
        throw std::invalid_argument("conv1d: expected rank-2 (C,T) or rank-3 (N,C,T) input");
    const int c = x.rank() == 2 ? x.dim(0) : x.dim(1);
    if (c != l.in_channels())
        throw std::invalid_argument("conv1d: input has " + std::to_string(c) +
                                    " channels, layer expects " + std::to_string(l.in_channels()));
    if (l.stride < 1) throw std::invalid_argument("conv1d: stride must be positive");
}

// Core per-batch kernel. x: (C_in, T), out: (C_out, T_out), accumulated per tap
// so the time loop stays contiguous for stride 1.
inline void conv_forward_2d(const float* x, int t_in, const Conv1dLayer& l, float* out,
                            int t_out) {
    const int k = l.kernel_size();
    const int in_per_g = l.weight.dim(1);
    const int out_ch = l.out_channels();
    const int out_per_g = out_ch / l.groups;
    const int pad = l.padding == Padding::causal ? k - 1 : 0;
    const int stride = l.stride;

    for (int o = 0; o < out_ch; ++o) {
        float* out_row = out + static_cast<std::size_t>(o) * t_out;
        const float bias = l.bias ? l.bias->at(o) : 0.0f;
        std::fill(out_row, out_row + t_out, bias);
        const int g = o / out_per_g;
        for (int ic = 0; ic < in_per_g; ++ic) {
            const float* x_row = x + static_cast<std::size_t>(g * in_per_g + ic) * t_in;
            const float* w_row =
                l.weight.data.data() + (static_cast<std::size_t>(o) * in_per_g + ic) * k;
            for (int j = 0; j < k; ++j) {
                const float wj = w_row[j];
                const int off = j - pad;
                // valid t range: 0 <= t*stride + off < t_in
                int t_lo = 0;
                if (off < 0) t_lo = (-off + stride - 1) / stride;
                int t_hi = (t_in - 1 - off) / stride;  // inclusive
                if (t_hi > t_out - 1) t_hi = t_out - 1;
                if (stride == 1) {
                    const float* xr = x_row + off;
                    for (int t = t_lo; t <= t_hi; ++t) out_row[t] += wj * xr[t];
                } else {
                    for (int t = t_lo; t <= t_hi; ++t) out_row[t] += wj * x_row[t * stride + off];
                }
            }
        }
    }
}

}  // namespace detail

inline Tensor conv1d_forward(const Tensor& x, const Conv1dLayer& l) {
    detail::conv_check_input(x, l);
    const bool batched = x.rank() == 3;
    const int n_batch = batched ? x.dim(0) : 1;
    const int c_in = batched ? x.dim(1) : x.dim(0);
    const int t_in = batched ? x.dim(2) : x.dim(1);
    const int t_out = conv1d_output_length(l, t_in);
    const int c_out = l.out_channels();

    Tensor out(batched ? std::vector<int>{n_batch, c_out, t_out}
                       : std::vector<int>{c_out, t_out});
    for (int n = 0; n < n_batch; ++n) {
        const float* xp = x.data.data() + static_cast<std::size_t>(n) * c_in * t_in;
        float* op = out.data.data() + static_cast<std::size_t>(n) * c_out * t_out;
        detail::conv_forward_2d(xp, t_in, l, op, t_out);
    }
    return out;
}

struct ConvGrads {
    Tensor weight;
    std::optional<Tensor> bias;
};

inline std::pair<Tensor, ConvGrads> conv1d_backward(const Tensor& x, const Conv1dLayer& l,
                                                    const Tensor& grad_out) {
    detail::conv_check_input(x, l);
    const bool batched = x.rank() == 3;
    const int n_batch = batched ? x.dim(0) : 1;
    const int c_in = batched ? x.dim(1) : x.dim(0);
    const int t_in = batched ? x.dim(2) : x.dim(1);
    const int t_out = conv1d_output_length(l, t_in);
    const int c_out = l.out_channels();

    const std::vector<int> want = batched ? std::vector<int>{n_batch, c_out, t_out}
                                          : std::vector<int>{c_out, t_out};
    if (grad_out.shape != want)
        throw std::invalid_argument("conv1d_backward: grad_out shape " + shape_str(grad_out) +
                                    " does not match forward output");

    const int k = l.kernel_size();
    const int in_per_g = l.weight.dim(1);
    const int out_per_g = c_out / l.groups;
    const int pad = l.padding == Padding::causal ? k - 1 : 0;
    const int stride = l.stride;

    Tensor grad_x(x.shape);
    ConvGrads grads;
    grads.weight = Tensor(l.weight.shape);
    if (l.bias) grads.bias = Tensor({c_out});

    // double accumulators across the batch keep weight grads stable
    std::vector<double> wacc(l.weight.size(), 0.0);
    std::vector<double> bacc(l.bias ? static_cast<std::size_t>(c_out) : 0, 0.0);

    for (int n = 0; n < n_batch; ++n) {
        const float* xb = x.data.data() + static_cast<std::size_t>(n) * c_in * t_in;
        const float* gb = grad_out.data.data() + static_cast<std::size_t>(n) * c_out * t_out;
        float* gxb = grad_x.data.data() + static_cast<std::size_t>(n) * c_in * t_in;

        for (int o = 0; o < c_out; ++o) {
            const float* g_row = gb + static_cast<std::size_t>(o) * t_out;
            if (l.bias) {
                double s = 0.0;
                for (int t = 0; t < t_out; ++t) s += g_row[t];
                bacc[o] += s;
            }
            const int g = o / out_per_g;
            for (int ic = 0; ic < in_per_g; ++ic) {
                const float* x_row = xb + static_cast<std::size_t>(g * in_per_g + ic) * t_in;
                float* gx_row = gxb + static_cast<std::size_t>(g * in_per_g + ic) * t_in;
                const float* w_row =
                    l.weight.data.data() + (static_cast<std::size_t>(o) * in_per_g + ic) * k;
                double* wa_row = wacc.data() + (static_cast<std::size_t>(o) * in_per_g + ic) * k;
                for (int j = 0; j < k; ++j) {
                    const int off = j - pad;
                    int t_lo = 0;
                    if (off < 0) t_lo = (-off + stride - 1) / stride;
                    int t_hi = (t_in - 1 - off) / stride;
                    if (t_hi > t_out - 1) t_hi = t_out - 1;
                    const float wj = w_row[j];
                    float dot = 0.0f;
                    if (stride == 1) {
                        const float* xr = x_row + off;
                        float* gxr = gx_row + off;
                        for (int t = t_lo; t <= t_hi; ++t) {
                            dot += g_row[t] * xr[t];
                            gxr[t] += wj * g_row[t];
                        }
                    } else {
                        for (int t = t_lo; t <= t_hi; ++t) {
                            const int s = t * stride + off;
                            dot += g_row[t] * x_row[s];
                            gx_row[s] += wj * g_row[t];
                        }
                    }
                    wa_row[j] += dot;
                }
            }
        }
    }

    for (std::size_t i = 0; i < wacc.size(); ++i)
        grads.weight.data[i] = static_cast<float>(wacc[i]);
    if (l.bias)
        for (int o = 0; o < c_out; ++o) grads.bias->at(o) = static_cast<float>(bacc[o]);

    return {std::move(grad_x), std::move(grads)};
}

}  // namespace repcnn
