#pragma once

#include <limits>
#include <stdexcept>

#include "repcnn/tensor.hpp"

namespace repcnn {

inline constexpr float kInf = std::numeric_limits<float>::infinity();

inline Tensor relu(const Tensor& x) {
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = x.data[i] > 0.0f ? x.data[i] : 0.0f;
    return out;
}

inline Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
    if (!grad_out.same_shape(x)) throw std::invalid_argument("relu_backward: shape mismatch");
    Tensor gx(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i)
        gx.data[i] = x.data[i] > 0.0f ? grad_out.data[i] : 0.0f;
    return gx;
}

/// Elementwise min(max(x, lower), upper). clip(x, 0, +inf) degrades to relu.
inline Tensor clip(const Tensor& x, float lower, float upper) {
    if (!(lower < upper)) throw std::invalid_argument("clip: lower bound must be below upper");
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
        float v = x.data[i];
        if (v < lower) v = lower;
        if (v > upper) v = upper;
        out.data[i] = v;
    }
    return out;
}

inline Tensor clip_backward(const Tensor& x, float lower, float upper, const Tensor& grad_out) {
    if (!grad_out.same_shape(x)) throw std::invalid_argument("clip_backward: shape mismatch");
    Tensor gx(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i)
        gx.data[i] = (x.data[i] > lower && x.data[i] < upper) ? grad_out.data[i] : 0.0f;
    return gx;
}

enum class ActKind { relu, clip };

/// Graph-level activation node. relu is used while training; the fused
/// inference graph replaces it with a clip to keep activations bounded.
struct Activation {
    ActKind kind = ActKind::relu;
    float lower = 0.0f;
    float upper = kInf;

    Tensor forward(const Tensor& x) const {
        return kind == ActKind::relu ? relu(x) : clip(x, lower, upper);
    }
    Tensor backward(const Tensor& x, const Tensor& grad_out) const {
        return kind == ActKind::relu ? relu_backward(x, grad_out)
                                     : clip_backward(x, lower, upper, grad_out);
    }
};

}  // namespace repcnn
