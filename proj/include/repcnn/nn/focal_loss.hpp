#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "repcnn/tensor.hpp"

namespace repcnn {

namespace detail {

// log(sigmoid(z)) computed without overflow
inline double log_sigmoid(double z) {
    return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

}  // namespace detail

/// Per-sample focal loss on a single logit:
///   loss = -alpha_t * (1 - p_t)^gamma * log(p_t)
/// with p_t the sigmoid probability of the true class and alpha_t = alpha for
/// positives, 1-alpha for negatives. Also returns d(loss)/d(logit).
inline std::pair<float, float> focal_loss_single(float logit, float label, float gamma,
                                                 float alpha) {
    if (label != 0.0f && label != 1.0f)
        throw std::invalid_argument("focal_loss: labels must be 0 or 1");
    const bool positive = label == 1.0f;
    const double z = positive ? logit : -logit;  // logit of the true class
    const double log_pt = detail::log_sigmoid(z);
    const double pt = std::exp(log_pt);
    const double one_minus_pt = 1.0 / (1.0 + std::exp(z));  // sigmoid(-z), exact 1-pt
    const double at = positive ? alpha : 1.0 - alpha;

    const double pow_term = gamma == 0.0f ? 1.0 : std::pow(one_minus_pt, gamma);
    const double loss = -at * pow_term * log_pt;

    // d loss / d z_true, then flip sign for negatives (z_true = -logit)
    const double dz_true = at * pow_term * (gamma * pt * log_pt - one_minus_pt);
    const double dlogit = positive ? dz_true : -dz_true;
    return {static_cast<float>(loss), static_cast<float>(dlogit)};
}

struct FocalLossResult {
    float loss = 0.0f;    // mean over the batch
    Tensor grad_logits;   // d(mean loss)/d(logits)
};

inline FocalLossResult focal_loss(const Tensor& logits, const Tensor& labels, float gamma,
                                  float alpha) {
    if (logits.shape != labels.shape)
        throw std::invalid_argument("focal_loss: logits/labels length mismatch");
    const std::size_t n = logits.size();
    if (n == 0) throw std::invalid_argument("focal_loss: empty batch");

    FocalLossResult r;
    r.grad_logits = Tensor(logits.shape);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto [loss, dlogit] = focal_loss_single(logits.data[i], labels.data[i], gamma, alpha);
        total += loss;
        r.grad_logits.data[i] = dlogit / static_cast<float>(n);
    }
    r.loss = static_cast<float>(total / static_cast<double>(n));
    return r;
}

}  // namespace repcnn
