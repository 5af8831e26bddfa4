#include <gtest/gtest.h>

#include "repcnn/nn/activations.hpp"
#include "repcnn/nn/gradcheck.hpp"
#include "test_util.hpp"

using namespace repcnn;
using testutil::random_tensor;

TEST(Relu, Basics) {
    Tensor x({3}, {-1.0f, 0.0f, 2.0f});
    Tensor y = relu(x);
    EXPECT_EQ(y.data, (std::vector<float>{0.0f, 0.0f, 2.0f}));
}

TEST(Clip, Basics) {
    Tensor x({2}, {7.0f, -1.0f});
    Tensor y = clip(x, 0.0f, 6.0f);
    EXPECT_EQ(y.data, (std::vector<float>{6.0f, 0.0f}));
    EXPECT_THROW(clip(x, 2.0f, 1.0f), std::invalid_argument);
}

TEST(Clip, UnboundedEqualsRelu) {
    Rng rng(9);
    Tensor x = random_tensor({100}, rng, -3.0f, 3.0f);
    Tensor a = clip(x, 0.0f, kInf);
    Tensor b = relu(x);
    EXPECT_EQ(a.data, b.data);
    // gradients match too
    Tensor go = random_tensor({100}, rng);
    EXPECT_EQ(clip_backward(x, 0.0f, kInf, go).data, relu_backward(x, go).data);
}

TEST(Relu, GradientMask) {
    Rng rng(19);
    Tensor x = random_tensor({50}, rng, -2.0f, 2.0f);
    Tensor proj = random_tensor({50}, rng);
    Tensor gx = relu_backward(x, proj);
    auto f = [&](const std::vector<float>& flat) {
        double s = 0.0;
        for (int i = 0; i < 50; ++i) s += std::max(0.0, static_cast<double>(flat[i])) * proj.data[i];
        return s;
    };
    // keep points away from the kink so central differences are clean
    for (float& v : x.data)
        if (std::fabs(v) < 5e-3f) v = 0.1f;
    gx = relu_backward(x, proj);
    EXPECT_LT(finite_difference_check(f, x.data, gx.data, 1e-3f), 1e-3);
}
