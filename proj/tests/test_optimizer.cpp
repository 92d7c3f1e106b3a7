#include <gtest/gtest.h>

#include <cmath>

#include "dasc/errors.hpp"
#include "dasc/optimizer.hpp"

using namespace dasc;

TEST(LrSchedule, Examples) {
  EXPECT_DOUBLE_EQ(lr_schedule(1e-3, 50, 0), 1e-3);
  EXPECT_DOUBLE_EQ(lr_schedule(1e-3, 50, 50), 5e-4);
  EXPECT_DOUBLE_EQ(lr_schedule(1e-3, 50, 120), 2.5e-4);
  EXPECT_THROW(lr_schedule(1e-3, 0, 3), ConfigError);
}

TEST(LrSchedule, PiecewiseConstantAndNonIncreasing) {
  for (std::size_t period : {1u, 3u, 50u})
    for (std::size_t e = 1; e < 400; ++e) {
      const double prev = lr_schedule(1e-3, period, e - 1), cur = lr_schedule(1e-3, period, e);
      EXPECT_LE(cur, prev);
      if (e % period != 0) EXPECT_EQ(cur, prev);
      else EXPECT_EQ(cur, prev / 2);
    }
}

TEST(Adam, HandSteppedQuadratic) {
  // f(w) = (w - 3)^2 from w = 0, lr 0.1, stepped by hand.
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.1;
  double w = 0.0, m = 0.0, v = 0.0;
  ParamStore store;
  store.add("w", Tensor::vector({0.0}));
  Adam adam;
  for (int t = 1; t <= 3; ++t) {
    const double g = 2.0 * (w - 3.0);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    w -= lr * mhat / (std::sqrt(vhat) + eps);

    auto& p = store.get("w");
    p.grad[0] = 2.0 * (p.value[0] - 3.0);
    adam.step(store, lr);
    EXPECT_NEAR(p.value[0], w, 1e-12) << "step " << t;
    p.grad[0] = 0.0;
  }
  EXPECT_EQ(adam.steps(), 3u);
}
