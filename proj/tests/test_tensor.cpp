#include <gtest/gtest.h>

#include "repcnn/tensor.hpp"

using namespace repcnn;

TEST(Tensor, ShapeDataConsistency) {
    Tensor t({2, 3});
    EXPECT_EQ(t.size(), 6u);
    EXPECT_THROW(Tensor({2, 3}, {1.0f, 2.0f}), std::invalid_argument);
}

TEST(Tensor, RowMajorIndexing) {
    Tensor t({2, 3}, {0, 1, 2, 3, 4, 5});
    EXPECT_EQ(t.at2(0, 2), 2.0f);
    EXPECT_EQ(t.at2(1, 0), 3.0f);
    Tensor u({2, 2, 2}, {0, 1, 2, 3, 4, 5, 6, 7});
    EXPECT_EQ(u.at3(1, 0, 1), 5.0f);
}

TEST(Tensor, FiniteCheck) {
    Tensor t({2}, {1.0f, 2.0f});
    EXPECT_TRUE(t.all_finite());
    t.data[1] = std::numeric_limits<float>::quiet_NaN();
    EXPECT_FALSE(t.all_finite());
    EXPECT_THROW(require_finite(t, "test"), std::runtime_error);
}
