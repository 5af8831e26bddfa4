#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "repcnn/tensor.hpp"

namespace repcnn {

enum class BnMode { train, eval };

/// Per-channel batch normalization over (batch, time).
/// Eval mode normalizes with the tracked running statistics only.
struct BatchNorm1dLayer {
    Tensor weight;        // gamma
    Tensor bias;          // beta
    Tensor running_mean;  // mu
    Tensor running_var;
    float epsilon = 1e-5f;
    float momentum = 0.1f;
    BnMode mode = BnMode::train;

    int channels() const { return weight.dim(0); }

    static BatchNorm1dLayer make(int c) {
        BatchNorm1dLayer l;
        l.weight = Tensor::full({c}, 1.0f);
        l.bias = Tensor({c});
        l.running_mean = Tensor({c});
        l.running_var = Tensor::full({c}, 1.0f);
        return l;
    }
};

// Batch statistics saved by a train-mode forward, consumed by backward.
struct BnBatchStats {
    Tensor mean;
    Tensor inv_std;  // 1/sqrt(var_biased + eps)
};

namespace detail {

inline void bn_check_input(const Tensor& x, const BatchNorm1dLayer& l) {
    if (x.rank() != 2 && x.rank() != 3)
        throw std::invalid_argument("batchnorm: expected rank-2 (C,T) or rank-3 (N,C,T) input");
    const int c = x.rank() == 2 ? x.dim(0) : x.dim(1);
    if (c != l.channels())
        throw std::invalid_argument("batchnorm: input has " + std::to_string(c) +
                                    " channels, layer expects " + std::to_string(l.channels()));
}

}  // namespace detail

// Eval-mode per-channel affine factors; shared with the reparameterization
// pass and the streaming engine so all paths agree bit for bit.
inline void bn_eval_affine(const BatchNorm1dLayer& l, int c, float& scale, float& shift) {
    const float sigma = std::sqrt(l.running_var.at(c) + l.epsilon);
    scale = l.weight.at(c) / sigma;
    shift = l.bias.at(c) - l.running_mean.at(c) * scale;
}

inline Tensor batchnorm_forward(const Tensor& x, BatchNorm1dLayer& l,
                                BnBatchStats* saved = nullptr) {
    detail::bn_check_input(x, l);
    const bool batched = x.rank() == 3;
    const int n_batch = batched ? x.dim(0) : 1;
    const int c_ch = batched ? x.dim(1) : x.dim(0);
    const int t_len = batched ? x.dim(2) : x.dim(1);
    const std::size_t plane = static_cast<std::size_t>(c_ch) * t_len;

    Tensor out(x.shape);

    if (l.mode == BnMode::eval) {
        for (int c = 0; c < c_ch; ++c) {
            float scale, shift;
            bn_eval_affine(l, c, scale, shift);
            for (int n = 0; n < n_batch; ++n) {
                const float* xr = x.data.data() + n * plane + static_cast<std::size_t>(c) * t_len;
                float* yr = out.data.data() + n * plane + static_cast<std::size_t>(c) * t_len;
                for (int t = 0; t < t_len; ++t) yr[t] = scale * xr[t] + shift;
            }
        }
        return out;
    }

    const long m = static_cast<long>(n_batch) * t_len;
    if (m < 2)
        throw std::invalid_argument("batchnorm: train mode needs batch*time >= 2");

    if (saved) {
        saved->mean = Tensor({c_ch});
        saved->inv_std = Tensor({c_ch});
    }

    for (int c = 0; c < c_ch; ++c) {
        double sum = 0.0, sq = 0.0;
        for (int n = 0; n < n_batch; ++n) {
            const float* xr = x.data.data() + n * plane + static_cast<std::size_t>(c) * t_len;
            for (int t = 0; t < t_len; ++t) {
                sum += xr[t];
                sq += static_cast<double>(xr[t]) * xr[t];
            }
        }
        const double mean = sum / m;
        double var = sq / m - mean * mean;
        if (var < 0.0) var = 0.0;  // rounding guard
        const float inv_std = 1.0f / std::sqrt(static_cast<float>(var) + l.epsilon);
        const float gamma = l.weight.at(c);
        const float beta = l.bias.at(c);
        const float fmean = static_cast<float>(mean);

        for (int n = 0; n < n_batch; ++n) {
            const float* xr = x.data.data() + n * plane + static_cast<std::size_t>(c) * t_len;
            float* yr = out.data.data() + n * plane + static_cast<std::size_t>(c) * t_len;
            for (int t = 0; t < t_len; ++t) yr[t] = gamma * (xr[t] - fmean) * inv_std + beta;
        }

        // running stats track the unbiased variance estimate
        const double var_unbiased = var * static_cast<double>(m) / (m - 1);
        l.running_mean.at(c) =
            (1.0f - l.momentum) * l.running_mean.at(c) + l.momentum * fmean;
        l.running_var.at(c) = (1.0f - l.momentum) * l.running_var.at(c) +
                              l.momentum * static_cast<float>(var_unbiased);

        if (saved) {
            saved->mean.at(c) = fmean;
            saved->inv_std.at(c) = inv_std;
        }
    }
    return out;
}

struct BnGrads {
    Tensor weight;
    Tensor bias;
};

// Backward pass. In train mode `saved` must hold the batch statistics from the
// matching forward; eval mode differentiates the running-stat affine map.
inline std::pair<Tensor, BnGrads> batchnorm_backward(const Tensor& x, const BatchNorm1dLayer& l,
                                                     const BnBatchStats* saved,
                                                     const Tensor& grad_out) {
    detail::bn_check_input(x, l);
    if (!grad_out.same_shape(x))
        throw std::invalid_argument("batchnorm_backward: grad_out shape mismatch");
    const bool batched = x.rank() == 3;
    const int n_batch = batched ? x.dim(0) : 1;
    const int c_ch = batched ? x.dim(1) : x.dim(0);
    const int t_len = batched ? x.dim(2) : x.dim(1);
    const std::size_t plane = static_cast<std::size_t>(c_ch) * t_len;

    Tensor grad_x(x.shape);
    BnGrads grads{Tensor({c_ch}), Tensor({c_ch})};

    if (l.mode == BnMode::eval) {
        for (int c = 0; c < c_ch; ++c) {
            float scale, shift;
            bn_eval_affine(l, c, scale, shift);
            (void)shift;
            const float sigma = std::sqrt(l.running_var.at(c) + l.epsilon);
            const float mu = l.running_mean.at(c);
            double dg = 0.0, db = 0.0;
            for (int n = 0; n < n_batch; ++n) {
                const float* xr = x.data.data() + n * plane + static_cast<std::size_t>(c) * t_len;
                const float* gr =
                    grad_out.data.data() + n * plane + static_cast<std::size_t>(c) * t_len;
                float* gx = grad_x.data.data() + n * plane + static_cast<std::size_t>(c) * t_len;
                for (int t = 0; t < t_len; ++t) {
                    gx[t] = gr[t] * scale;
                    dg += static_cast<double>(gr[t]) * (xr[t] - mu) / sigma;
                    db += gr[t];
                }
            }
            grads.weight.at(c) = static_cast<float>(dg);
            grads.bias.at(c) = static_cast<float>(db);
        }
        return {std::move(grad_x), std::move(grads)};
    }

    if (!saved)
        throw std::invalid_argument("batchnorm_backward: train mode requires saved batch stats");

    const double m = static_cast<double>(n_batch) * t_len;
    for (int c = 0; c < c_ch; ++c) {
        const float mean = saved->mean.at(c);
        const float inv_std = saved->inv_std.at(c);
        const float gamma = l.weight.at(c);

        double sum_g = 0.0, sum_gx = 0.0;
        for (int n = 0; n < n_batch; ++n) {
            const float* xr = x.data.data() + n * plane + static_cast<std::size_t>(c) * t_len;
            const float* gr =
                grad_out.data.data() + n * plane + static_cast<std::size_t>(c) * t_len;
            for (int t = 0; t < t_len; ++t) {
                sum_g += gr[t];
                sum_gx += static_cast<double>(gr[t]) * ((xr[t] - mean) * inv_std);
            }
        }
        grads.bias.at(c) = static_cast<float>(sum_g);
        grads.weight.at(c) = static_cast<float>(sum_gx);

        const float k1 = static_cast<float>(sum_g / m);
        const float k2 = static_cast<float>(sum_gx / m);
        for (int n = 0; n < n_batch; ++n) {
            const float* xr = x.data.data() + n * plane + static_cast<std::size_t>(c) * t_len;
            const float* gr =
                grad_out.data.data() + n * plane + static_cast<std::size_t>(c) * t_len;
            float* gx = grad_x.data.data() + n * plane + static_cast<std::size_t>(c) * t_len;
            for (int t = 0; t < t_len; ++t) {
                const float xh = (xr[t] - mean) * inv_std;
                gx[t] = gamma * inv_std * (gr[t] - k1 - xh * k2);
            }
        }
    }
    return {std::move(grad_x), std::move(grads)};
}

}  // namespace repcnn
