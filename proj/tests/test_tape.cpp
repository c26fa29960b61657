#include "ade/tape.hpp"

#include <gtest/gtest.h>

#include "ade/rng.hpp"
#include "testing_util.hpp"

using ade::Mat;
using ade::Tape;
using ade::Var;

TEST(Tape, ForwardValues) {
  Tape t;
  Mat a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 5, 6, 7, 8;
  Var va = t.leaf(a), vb = t.leaf(b);

  EXPECT_DOUBLE_EQ(t.sum_all(t.add(va, vb)).value()(0, 0), 36.0);
  EXPECT_DOUBLE_EQ(t.matmul(va, vb).value()(0, 0), 19.0);
  EXPECT_DOUBLE_EQ(t.mul(va, vb).value()(1, 1), 32.0);
  EXPECT_DOUBLE_EQ(t.row_sum(va).value()(1, 0), 7.0);
  EXPECT_DOUBLE_EQ(t.col_sum(va).value()(0, 1), 6.0);
  EXPECT_DOUBLE_EQ(t.mean_all(va).value()(0, 0), 2.5);

  Mat r(1, 2);
  r << 10, 20;
  Var vr = t.leaf(r);
  EXPECT_DOUBLE_EQ(t.add_row(va, vr).value()(1, 1), 24.0);
  EXPECT_DOUBLE_EQ(t.mul_row(va, vr).value()(1, 0), 30.0);

  Var cat = t.concat_cols(va, vb);
  EXPECT_EQ(cat.cols(), 4);
  EXPECT_DOUBLE_EQ(t.slice_cols(cat, 2, 2).value()(0, 0), 5.0);
}

TEST(Tape, ScalarLossContract) {
  Tape t;
  Var a = t.leaf(Mat::Ones(2, 2));
  EXPECT_THROW(t.gradient(a, a), ade::ContractViolation);
}

TEST(Tape, GradientMatchesFiniteDifferences) {
  ade::Rng rng(7);
  Mat x0 = rng.normal_mat(3, 4);
  Mat w0 = rng.normal_mat(4, 2);

  auto loss_value = [&](const Mat& x, const Mat& w) {
    Tape t;
    Var vx = t.leaf(x), vw = t.leaf(w);
    Var h = t.tanh(t.matmul(vx, vw));
    Var z = t.softplus(t.mul(h, h));
    return t.sum_all(t.add(z, t.exp(t.scale(h, 0.3)))).value()(0, 0);
  };

  Tape t;
  Var vx = t.leaf(x0), vw = t.leaf(w0);
  Var h = t.tanh(t.matmul(vx, vw));
  Var z = t.softplus(t.mul(h, h));
  Var loss = t.sum_all(t.add(z, t.exp(t.scale(h, 0.3))));
  const std::array<Var, 2> wrt = {vx, vw};
  auto grads = t.gradients(loss, wrt);

  Mat fd_x = ade::testing::fd_gradient([&](const Mat& x) { return loss_value(x, w0); }, x0);
  Mat fd_w = ade::testing::fd_gradient([&](const Mat& w) { return loss_value(x0, w); }, w0);

  EXPECT_LT(ade::testing::max_rel_error(grads[0].value(), fd_x), 1e-6);
  EXPECT_LT(ade::testing::max_rel_error(grads[1].value(), fd_w), 1e-6);
}

TEST(Tape, GradThroughSliceConcatClip) {
  ade::Rng rng(11);
  Mat x0 = rng.normal_mat(2, 3);

  auto loss_value = [&](const Mat& x) {
    Tape t;
    Var vx = t.leaf(x);
    Var left = t.slice_cols(vx, 0, 1);
    Var rest = t.slice_cols(vx, 1, 2);
    Var joined = t.concat_cols(t.square(left), t.sigmoid(rest));
    return t.sum_all(t.mul_row(joined, t.constant((Mat(1, 3) << 1.0, -2.0, 0.5).finished())))
        .value()(0, 0);
  };

  Tape t;
  Var vx = t.leaf(x0);
  Var left = t.slice_cols(vx, 0, 1);
  Var rest = t.slice_cols(vx, 1, 2);
  Var joined = t.concat_cols(t.square(left), t.sigmoid(rest));
  Var loss = t.sum_all(t.mul_row(joined, t.constant((Mat(1, 3) << 1.0, -2.0, 0.5).finished())));
  Mat g = t.gradient(loss, vx).value();

  Mat fd = ade::testing::fd_gradient(loss_value, x0);
  EXPECT_LT(ade::testing::max_rel_error(g, fd), 1e-6);
}

TEST(Tape, ClipIsStraightThroughInsideZeroOutside) {
  Tape t;
  Mat x(1, 3);
  x << -2.0, 0.25, 3.0;
  Var vx = t.leaf(x);
  Var loss = t.sum_all(t.clip(vx, 1.0));
  Mat g = t.gradient(loss, vx).value();
  EXPECT_DOUBLE_EQ(g(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(g(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(g(0, 2), 0.0);
}

// Second order: d/dw of || d/dx sum(tanh(x w)) ||^2 against finite differences
// over w, exercising gradients of nodes that were emitted by a backward pass.
TEST(Tape, DoubleBackwardMatchesFiniteDifferences) {
  ade::Rng rng(23);
  Mat x0 = rng.normal_mat(2, 3);
  Mat w0 = rng.normal_mat(3, 1);

  auto grad_norm = [&](const Mat& w) {
    Tape t;
    Var vx = t.leaf(x0), vw = t.leaf(w0);
    // rebuild with perturbed w
    vw = t.leaf(w);
    Var y = t.sum_all(t.tanh(t.matmul(vx, vw)));
    Var gx = t.gradient(y, vx);
    return t.sum_all(t.square(gx)).value()(0, 0);
  };

  Tape t;
  Var vx = t.leaf(x0), vw = t.leaf(w0);
  Var y = t.sum_all(t.tanh(t.matmul(vx, vw)));
  Var gx = t.gradient(y, vx);
  Var norm2 = t.sum_all(t.square(gx));
  Mat gw = t.gradient(norm2, vw).value();

  Mat fd = ade::testing::fd_gradient(grad_norm, w0, 1e-5);
  EXPECT_LT(ade::testing::max_rel_error(gw, fd), 1e-5);
}

TEST(Tape, UnreachableLeafGetsZeroGradient) {
  Tape t;
  Var a = t.leaf(Mat::Ones(2, 2));
  Var b = t.leaf(Mat::Ones(3, 1));
  Var loss = t.sum_all(t.square(a));
  Mat g = t.gradient(loss, b).value();
  EXPECT_EQ(g.rows(), 3);
  EXPECT_TRUE((g.array() == 0.0).all());
}

TEST(Tape, ReplayIsBitIdentical) {
  ade::Rng rng(5);
  Tape t;
  Var x = t.leaf(rng.normal_mat(4, 3));
  Var w = t.leaf(rng.normal_mat(3, 3));
  Var y = t.softplus(t.matmul(x, w));
  Var loss = t.sum_all(t.mul(y, t.tanh(x)));
  t.gradient(loss, w);

  std::vector<Mat> before;
  for (std::size_t i = 0; i < t.size(); ++i) before.push_back(t.value(static_cast<int>(i)));
  t.replay();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Mat& after = t.value(static_cast<int>(i));
    ASSERT_EQ(before[i].rows(), after.rows());
    for (Eigen::Index r = 0; r < after.rows(); ++r) {
      for (Eigen::Index c = 0; c < after.cols(); ++c) {
        ASSERT_EQ(before[i](r, c), after(r, c)) << "node " << i;
      }
    }
  }
}

TEST(Tape, DeterministicAcrossRuns) {
  auto build = [] {
    ade::Rng rng(99);
    Tape t;
    Var x = t.leaf(rng.normal_mat(5, 2));
    Var w = t.leaf(rng.normal_mat(2, 4));
    Var loss = t.sum_all(t.sigmoid(t.matmul(x, w)));
    return t.gradient(loss, w).value();
  };
  Mat a = build(), b = build();
  for (Eigen::Index i = 0; i < a.size(); ++i) ASSERT_EQ(a(i), b(i));
}
