#include "ade/potential.hpp"

#include <gtest/gtest.h>

#include "ade/rng.hpp"
#include "testing_util.hpp"

using ade::Activation;
using ade::Mat;
using ade::MlpPotential;
using ade::QuadraticPotential;
using ade::Tape;
using ade::Var;
using ade::Vec;

namespace at = ade::testing;

TEST(Quadratic, ClosedFormValues) {
  QuadraticPotential standard((Vec(1) << 0.0).finished(), (Vec(1) << 1.0).finished());
  Mat x(1, 1);
  x << 1.0;
  EXPECT_DOUBLE_EQ(ade::eval_f(standard, x)(0), -0.5);

  QuadraticPotential shifted((Vec(2) << 1.0, 1.0).finished(), (Vec(2) << 2.0, 2.0).finished());
  Mat x2 = Mat::Zero(1, 2);
  EXPECT_DOUBLE_EQ(ade::eval_f(shifted, x2)(0), -2.0);

  EXPECT_DOUBLE_EQ(ade::grad_x(standard, x)(0, 0), -1.0);

  QuadraticPotential hess((Vec(2) << 0.0, 0.0).finished(), (Vec(2) << 2.0, 3.0).finished());
  Mat any(1, 2);
  any << 0.7, -1.3;
  Mat hd = ade::hessian_diag(hess, any);
  EXPECT_NEAR(hd(0, 0), -2.0, 1e-12);
  EXPECT_NEAR(hd(0, 1), -3.0, 1e-12);
}

TEST(Mlp, ZeroWeightsCollapseToLastBias) {
  ade::Rng rng(3);
  MlpPotential mlp(2, {8, 8}, Activation::kRelu, rng);
  for (auto& p : mlp.parameters()) p.value->setZero();
  auto params = mlp.parameters();
  *params.back().value << 1.75;  // last layer bias
  Mat x = rng.normal_mat(5, 2);
  Vec f = ade::eval_f(mlp, x);
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(f(i), 1.75);

  Mat g = ade::grad_x(mlp, x);
  EXPECT_TRUE((g.array() == 0.0).all());
}

TEST(Mlp, ParameterCount) {
  ade::Rng rng(4);
  MlpPotential mlp(2, {128, 128, 128}, Activation::kRelu, rng);
  // sum over layers of (fan_in + 1) * fan_out
  std::size_t want = (2 + 1) * 128 + (128 + 1) * 128 + (128 + 1) * 128 + (128 + 1) * 1;
  EXPECT_EQ(mlp.parameter_count(), want);
}

TEST(Mlp, GradXMatchesFiniteDifferences) {
  ade::Rng rng(17);
  MlpPotential mlp(3, {16, 16}, Activation::kSoftplus, rng);
  Mat x = rng.normal_mat(4, 3);

  Mat g = ade::grad_x(mlp, x);
  // independent oracle: central differences of eval_f, one row at a time
  for (int r = 0; r < 4; ++r) {
    Mat row = x.row(r);
    Mat fd = at::fd_gradient([&](const Mat& xr) { return ade::eval_f(mlp, xr)(0); }, row, 1e-4);
    EXPECT_LT(at::max_rel_error(g.row(r), fd), 1e-5);
  }
}

TEST(Mlp, GradCheckProperty100Random) {
  // 100 random (potential, x) pairs at double precision; smooth activations.
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    ade::Rng rng(1000 + static_cast<std::uint64_t>(trial));
    const Activation act = (trial % 2 == 0) ? Activation::kSoftplus : Activation::kTanh;
    MlpPotential mlp(2, {10, 10}, act, rng);
    Mat x = rng.normal_mat(1, 2);
    Mat g = ade::grad_x(mlp, x);
    Mat fd = at::fd_gradient([&](const Mat& xr) { return ade::eval_f(mlp, xr)(0); }, x, 1e-4);
    worst = std::max(worst, at::max_rel_error(g, fd));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(GradParams, QuadraticStationaryAtMean) {
  QuadraticPotential pot((Vec(2) << 0.4, -0.2).finished(), (Vec(2) << 1.0, 2.0).finished());
  Mat x(1, 2);
  x << 0.4, -0.2;  // x = mu
  Tape t;
  ade::BoundPotential f(pot, t);
  Var loss = t.sum_all(f(t.constant(x)));
  auto grads = ade::grad_params(f, loss);
  EXPECT_TRUE((grads[0].array().abs() < 1e-15).all());
}

TEST(GradParams, GradNormLossMatchesFiniteDifferences) {
  ade::Rng rng(29);
  MlpPotential mlp(2, {12}, Activation::kSoftplus, rng);
  Mat x = rng.normal_mat(3, 2);

  auto loss_at = [&](MlpPotential& p) {
    Tape t;
    ade::BoundPotential f(p, t);
    Var xv = t.leaf(x);
    Var g = ade::grad_x_var(f, xv);
    return t.sum_all(t.square(g)).value()(0, 0);
  };

  Tape t;
  ade::BoundPotential f(mlp, t);
  Var xv = t.leaf(x);
  Var g = ade::grad_x_var(f, xv);
  Var loss = t.sum_all(t.square(g));
  auto grads = ade::grad_params(f, loss);

  auto params = mlp.parameters();
  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Mat fd = at::fd_gradient(
        [&](const Mat& pm) {
          Mat keep = *params[pi].value;
          *params[pi].value = pm;
          double v = loss_at(mlp);
          *params[pi].value = keep;
          return v;
        },
        *params[pi].value, 1e-4);
    worst = std::max(worst, at::max_rel_error(grads[pi], fd));
  }
  EXPECT_LT(worst, 1e-4);
}

// loss = f(x + 0.1 * grad f(x)) for the unit quadratic at x = 1:
// value is f(0.9) = -0.405 and d loss / d mu at mu=0 is 0.81.
TEST(GradParams, ThroughGradientPath) {
  QuadraticPotential pot((Vec(1) << 0.0).finished(), (Vec(1) << 1.0).finished());
  Mat x(1, 1);
  x << 1.0;

  Tape t;
  ade::BoundPotential f(pot, t);
  Var xv = t.constant(x);
  Var g = ade::grad_x_var(f, xv);
  Var moved = t.add(xv, t.scale(g, 0.1));
  Var loss = t.sum_all(f(moved));
  EXPECT_DOUBLE_EQ(loss.value()(0, 0), -0.405);

  auto grads = ade::grad_params(f, loss);
  EXPECT_NEAR(grads[0](0, 0), 0.81, 1e-12);

  auto params = pot.parameters();
  Mat fd = at::fd_gradient(
      [&](const Mat& mu) {
        Mat keep = *params[0].value;
        *params[0].value = mu;
        Tape t2;
        ade::BoundPotential f2(pot, t2);
        Var xv2 = t2.constant(x);
        Var g2 = ade::grad_x_var(f2, xv2);
        Var moved2 = t2.add(xv2, t2.scale(g2, 0.1));
        double v = t2.sum_all(f2(moved2)).value()(0, 0);
        *params[0].value = keep;
        return v;
      },
      *params[0].value, 1e-5);
  EXPECT_NEAR(grads[0](0, 0), fd(0, 0), 1e-8);
}

TEST(HessianDiag, TanhMlpMatchesSecondDifferences) {
  ade::Rng rng(31);
  MlpPotential mlp(2, {10, 10}, Activation::kTanh, rng);
  Mat x = rng.normal_mat(2, 2);
  Mat hd = ade::hessian_diag(mlp, x);

  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      const double h = 1e-3;
      Mat xp = x, xm = x;
      xp(r, c) += h;
      xm(r, c) -= h;
      const double want =
          (ade::eval_f(mlp, xp.row(r))(0) - 2.0 * ade::eval_f(mlp, x.row(r))(0) +
           ade::eval_f(mlp, xm.row(r))(0)) /
          (h * h);
      const double got = hd(r, c);
      EXPECT_LT(std::abs(got - want) / std::max(std::abs(want), 1e-6), 1e-3);
    }
  }
}

TEST(HessianDiag, LinearPotentialHasZeroCurvature) {
  ade::Rng rng(37);
  MlpPotential lin(3, {}, Activation::kSoftplus, rng);  // single affine layer
  Mat x = rng.normal_mat(2, 3);
  Mat hd = ade::hessian_diag(lin, x);
  EXPECT_TRUE((hd.array().abs() < 1e-14).all());
}

TEST(HessianDiag, ReluRejected) {
  ade::Rng rng(41);
  MlpPotential mlp(2, {8}, Activation::kRelu, rng);
  Mat x = rng.normal_mat(1, 2);
  EXPECT_THROW(ade::hessian_diag(mlp, x), ade::ContractViolation);
}

TEST(EvalF, NonFiniteInputRejected) {
  ade::Rng rng(43);
  MlpPotential mlp(2, {4}, Activation::kTanh, rng);
  Mat x(1, 2);
  x << std::numeric_limits<double>::quiet_NaN(), 0.0;
  EXPECT_THROW(ade::eval_f(mlp, x), ade::ContractViolation);
}
