#pragma once

// Straight-line double-precision reference forwards, written independently of
// the library kernels. Finite-difference oracles evaluate these so the
// difference quotient is not drowned in float32 rounding noise.

#include <cmath>
#include <vector>

#include "repcnn/graph.hpp"

namespace repcnn::testutil {

struct DTensor {
    std::vector<int> shape;
    std::vector<double> data;
};

inline DTensor to_dtensor(const Tensor& t) {
    DTensor d;
    d.shape = t.shape;
    d.data.assign(t.data.begin(), t.data.end());
    return d;
}

inline DTensor ref_conv(const DTensor& x, const Conv1dLayer& l) {
    const bool batched = x.shape.size() == 3;
    const int n_batch = batched ? x.shape[0] : 1;
    const int c_in = batched ? x.shape[1] : x.shape[0];
    const int t_in = batched ? x.shape[2] : x.shape[1];
    const int k = l.kernel_size();
    const int pad = l.padding == Padding::causal ? k - 1 : 0;
    const int t_out = (t_in + pad - k) / l.stride + 1;
    const int c_out = l.out_channels();
    const int in_per_g = c_in / l.groups;
    const int out_per_g = c_out / l.groups;

    DTensor out;
    out.shape = batched ? std::vector<int>{n_batch, c_out, t_out} : std::vector<int>{c_out, t_out};
    out.data.assign(static_cast<std::size_t>(n_batch) * c_out * t_out, 0.0);
    for (int n = 0; n < n_batch; ++n)
        for (int o = 0; o < c_out; ++o)
            for (int t = 0; t < t_out; ++t) {
                double acc = l.bias ? static_cast<double>(l.bias->at(o)) : 0.0;
                for (int ic = 0; ic < in_per_g; ++ic)
                    for (int j = 0; j < k; ++j) {
                        const int s = t * l.stride + j - pad;
                        if (s < 0 || s >= t_in) continue;
                        const int cin = (o / out_per_g) * in_per_g + ic;
                        acc += static_cast<double>(l.weight.at((o * in_per_g + ic) * k + j)) *
                               x.data[(static_cast<std::size_t>(n) * c_in + cin) * t_in + s];
                    }
                out.data[(static_cast<std::size_t>(n) * c_out + o) * t_out + t] = acc;
            }
    return out;
}

inline DTensor ref_bn(const DTensor& x, const BatchNorm1dLayer& l) {
    const bool batched = x.shape.size() == 3;
    const int n_batch = batched ? x.shape[0] : 1;
    const int c_ch = batched ? x.shape[1] : x.shape[0];
    const int t_len = batched ? x.shape[2] : x.shape[1];

    DTensor out;
    out.shape = x.shape;
    out.data.resize(x.data.size());
    for (int c = 0; c < c_ch; ++c) {
        double mean, var;
        if (l.mode == BnMode::train) {
            double sum = 0.0, sq = 0.0;
            for (int n = 0; n < n_batch; ++n)
                for (int t = 0; t < t_len; ++t) {
                    const double v = x.data[(static_cast<std::size_t>(n) * c_ch + c) * t_len + t];
                    sum += v;
                    sq += v * v;
                }
            const double m = static_cast<double>(n_batch) * t_len;
            mean = sum / m;
            var = sq / m - mean * mean;  // biased, as in normalization
        } else {
            mean = l.running_mean.at(c);
            var = l.running_var.at(c);
        }
        const double inv = 1.0 / std::sqrt(var + static_cast<double>(l.epsilon));
        for (int n = 0; n < n_batch; ++n)
            for (int t = 0; t < t_len; ++t) {
                const std::size_t i = (static_cast<std::size_t>(n) * c_ch + c) * t_len + t;
                out.data[i] = static_cast<double>(l.weight.at(c)) * (x.data[i] - mean) * inv +
                              static_cast<double>(l.bias.at(c));
            }
    }
    return out;
}

inline DTensor ref_act(const DTensor& x, const Activation& a) {
    DTensor out = x;
    const double lo = a.kind == ActKind::relu ? 0.0 : a.lower;
    const double hi = a.kind == ActKind::relu ? std::numeric_limits<double>::infinity() : a.upper;
    for (double& v : out.data) v = std::min(std::max(v, lo), hi);
    return out;
}

inline DTensor ref_repblock(const DTensor& x, const RepConvBlock& b) {
    DTensor sum;
    for (int i = 0; i < b.num_branches; ++i) {
        DTensor y = ref_bn(ref_conv(x, b.branch_convs[i]), b.branch_bns[i]);
        if (i == 0)
            sum = std::move(y);
        else
            for (std::size_t j = 0; j < sum.data.size(); ++j) sum.data[j] += y.data[j];
    }
    DTensor yp = ref_bn(ref_conv(x, b.pointwise), b.pointwise_bn);
    for (std::size_t j = 0; j < sum.data.size(); ++j) sum.data[j] += yp.data[j];
    return ref_act(sum, b.activation);
}

inline DTensor ref_graph_forward(const DTensor& x, const ModelGraph& g) {
    DTensor cur = x;
    for (const auto& layer : g.layers) {
        cur = std::visit(
            [&](const auto& l) -> DTensor {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, Conv1dLayer>)
                    return ref_conv(cur, l);
                else if constexpr (std::is_same_v<T, BatchNorm1dLayer>)
                    return ref_bn(cur, l);
                else if constexpr (std::is_same_v<T, Activation>)
                    return ref_act(cur, l);
                else
                    return ref_repblock(cur, l);
            },
            layer);
    }
    return cur;
}

inline double ref_dot(const DTensor& a, const Tensor& proj) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * proj.data[i];
    return s;
}

inline double ref_focal_mean(const std::vector<float>& logits, const std::vector<float>& labels,
                             double gamma, double alpha) {
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const bool positive = labels[i] == 1.0f;
        const double z = positive ? logits[i] : -static_cast<double>(logits[i]);
        const double log_pt = z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
        const double one_minus_pt = 1.0 / (1.0 + std::exp(z));
        const double at = positive ? alpha : 1.0 - alpha;
        total += -at * std::pow(one_minus_pt, gamma) * log_pt;
    }
    return total / static_cast<double>(logits.size());
}

}  // namespace repcnn::testutil
