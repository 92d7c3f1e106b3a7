#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "dasc/errors.hpp"
#include "dasc/tensor.hpp"

using dasc::ConfigError;
using dasc::Tensor;

TEST(Tensor, ValueCountMatchesExtents) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(t.row_size(), 12u);
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5, 0.0)), ConfigError);
}

TEST(Tensor, RejectsZeroExtent) { EXPECT_THROW(Tensor({2, 0}), ConfigError); }

TEST(Tensor, RowMajorLayout) {
  const Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(m.at(1, 0), 4.0);
  EXPECT_EQ(m.row(1)[2], 6.0);
}

TEST(Tensor, ReshapeKeepsValues) {
  const Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  const Tensor r = m.reshaped({3, 2});
  EXPECT_EQ(r.at(2, 1), 6.0);
  EXPECT_THROW((void)m.reshaped({4, 2}), ConfigError);
}

TEST(Tensor, FiniteCheck) {
  Tensor t({3}, 1.0);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
}
