#pragma once

#include <vector>

#include "repcnn/tensor.hpp"
#include "repcnn/util/rng.hpp"

namespace repcnn::testutil {

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
    Tensor t(std::move(shape));
    for (float& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

inline float max_abs_diff(const Tensor& a, const Tensor& b) {
    float worst = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::fabs(a.data[i] - b.data[i]));
    return worst;
}

// max |a-b| / max(|a|, |b|, floor)
inline float max_rel_diff(const Tensor& a, const Tensor& b, float floor = 1e-3f) {
    float worst = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const float denom =
            std::max({std::fabs(a.data[i]), std::fabs(b.data[i]), floor});
        worst = std::max(worst, std::fabs(a.data[i] - b.data[i]) / denom);
    }
    return worst;
}

}  // namespace repcnn::testutil
