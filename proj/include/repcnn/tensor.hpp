#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace repcnn {

/// Dense 32-bit float N-d array, row-major. Activations use (channels, time)
/// or (batch, channels, time); conv weights use (out, in/groups, kernel).
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;

    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel(shape), 0.0f) {}

    Tensor(std::vector<int> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
        if (numel(shape) != data.size())
            throw std::invalid_argument("Tensor: shape/data size mismatch");
    }

    static std::size_t numel(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    static Tensor full(std::vector<int> s, float v) {
        Tensor t(std::move(s));
        for (float& x : t.data) x = v;
        return t;
    }

    int rank() const { return static_cast<int>(shape.size()); }

    int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

    std::size_t size() const { return data.size(); }

    float& at(int i) { return data[static_cast<std::size_t>(i)]; }
    float at(int i) const { return data[static_cast<std::size_t>(i)]; }

    // rank-2 (C, T)
    float& at2(int c, int t) { return data[static_cast<std::size_t>(c) * shape[1] + t]; }
    float at2(int c, int t) const { return data[static_cast<std::size_t>(c) * shape[1] + t]; }

    // rank-3 (N, C, T)
    float& at3(int n, int c, int t) {
        return data[(static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + t];
    }
    float at3(int n, int c, int t) const {
        return data[(static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + t];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (float v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(float v) {
        for (float& x : data) x = v;
    }
};

inline std::string shape_str(const Tensor& t) {
    std::string s = "(";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(t.shape[i]);
    }
    return s + ")";
}

inline void require_shape(const Tensor& t, const std::vector<int>& shape, const char* what) {
    if (t.shape != shape)
        throw std::invalid_argument(std::string(what) + ": unexpected shape " + shape_str(t));
}

inline void require_finite(const Tensor& t, const char* what) {
    if (!t.all_finite())
        throw std::runtime_error(std::string(what) + ": non-finite values");
}

}  // namespace repcnn
