#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "repcnn/tensor.hpp"

namespace repcnn {

struct NamedParam {
    std::string name;
    Tensor* value = nullptr;
};

/// Gradients keyed by parameter name. After a full backward pass every
/// trainable parameter has exactly one entry.
struct ParamGrads {
    std::map<std::string, Tensor> by_name;

    Tensor& slot(const std::string& name, const std::vector<int>& shape) {
        auto it = by_name.find(name);
        if (it == by_name.end()) it = by_name.emplace(name, Tensor(shape)).first;
        return it->second;
    }

    void add(const std::string& name, const Tensor& g) {
        Tensor& dst = slot(name, g.shape);
        if (dst.shape != g.shape) throw std::invalid_argument("ParamGrads: shape mismatch " + name);
        for (std::size_t i = 0; i < g.size(); ++i) dst.data[i] += g.data[i];
    }

    const Tensor& at(const std::string& name) const {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw std::out_of_range("ParamGrads: missing " + name);
        return it->second;
    }

    bool all_finite() const {
        for (const auto& [name, g] : by_name)
            if (!g.all_finite()) return false;
        return true;
    }
};

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

struct OptimizerState {
    long step = 0;
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;
};

/// Deterministic in-place parameter update. Plain SGD or Adam.
inline void optimizer_step(std::vector<NamedParam>& params, const ParamGrads& grads,
                           OptimizerState& state, const OptimizerConfig& cfg) {
    if (!(cfg.lr > 0.0f) && cfg.lr != 0.0f)
        throw std::invalid_argument("optimizer: learning rate must be >= 0");
    state.step += 1;
    for (auto& p : params) {
        const Tensor& g = grads.at(p.name);
        if (g.shape != p.value->shape)
            throw std::invalid_argument("optimizer: gradient shape mismatch for " + p.name);
        if (cfg.kind == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < g.size(); ++i) p.value->data[i] -= cfg.lr * g.data[i];
            continue;
        }
        auto mi = state.m.find(p.name);
        if (mi == state.m.end()) mi = state.m.emplace(p.name, Tensor(g.shape)).first;
        auto vi = state.v.find(p.name);
        if (vi == state.v.end()) vi = state.v.emplace(p.name, Tensor(g.shape)).first;
        Tensor& m = mi->second;
        Tensor& v = vi->second;
        const float bc1 = 1.0f - std::pow(cfg.beta1, static_cast<float>(state.step));
        const float bc2 = 1.0f - std::pow(cfg.beta2, static_cast<float>(state.step));
        for (std::size_t i = 0; i < g.size(); ++i) {
            m.data[i] = cfg.beta1 * m.data[i] + (1.0f - cfg.beta1) * g.data[i];
            v.data[i] = cfg.beta2 * v.data[i] + (1.0f - cfg.beta2) * g.data[i] * g.data[i];
            const float mhat = m.data[i] / bc1;
            const float vhat = v.data[i] / bc2;
            p.value->data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

}  // namespace repcnn
