#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "imap/optimizers.hpp"

using namespace imap;

namespace {

Vector v1(double x) { return Vector::Constant(1, x); }

std::vector<OptimizerSpec> all_kinds() {
  return {OptimizerSpec::gd(0.1), OptimizerSpec::adagrad(0.1), OptimizerSpec::rmsprop(0.1, 0.9),
          OptimizerSpec::adam(0.1, 0.9, 0.999), OptimizerSpec::adadelta(0.9)};
}

}  // namespace

TEST(OptimizerInit, BuffersStartAtZero) {
  OptimizerState gd(OptimizerSpec::gd(0.1), 3);
  EXPECT_EQ(gd.step_count(), 0);
  EXPECT_EQ(gd.first_moment().size(), 0);
  EXPECT_EQ(gd.second_moment().size(), 0);

  OptimizerState adam(OptimizerSpec::adam(0.1, 0.1, 0.1), 1);
  EXPECT_TRUE(adam.first_moment().isZero());
  EXPECT_TRUE(adam.second_moment().isZero());
  EXPECT_EQ(adam.first_moment().size(), 1);

  OptimizerState ad(OptimizerSpec::adadelta(0.9), 2);
  EXPECT_TRUE(ad.second_moment().isZero());
  EXPECT_TRUE(ad.delta_accum().isZero());
  EXPECT_EQ(ad.delta_accum().size(), 2);
}

TEST(OptimizerInit, RejectsInvalidSpecs) {
  EXPECT_THROW(OptimizerState(OptimizerSpec::gd(-0.1), 1), std::invalid_argument);
  EXPECT_THROW(OptimizerState(OptimizerSpec::adam(0.1, 1.0, 0.5), 1), std::invalid_argument);
  EXPECT_THROW(OptimizerState(OptimizerSpec::rmsprop(0.1, 0.0), 1), std::invalid_argument);
  EXPECT_THROW(OptimizerState(OptimizerSpec::adagrad(0.0), 1), std::invalid_argument);
  EXPECT_THROW(OptimizerState(OptimizerSpec::gd(0.1), 0), std::invalid_argument);
  EXPECT_NO_THROW(OptimizerState(OptimizerSpec::gd(0.0), 1));
}

TEST(OptimizerStep, Examples) {
  OptimizerState gd(OptimizerSpec::gd(0.1), 1);
  EXPECT_DOUBLE_EQ(gd.step(v1(2.0))[0], -0.2);
  EXPECT_EQ(gd.step_count(), 1);

  for (double eta : {0.01, 0.1, 1.0}) {
    OptimizerState adam(OptimizerSpec::adam(eta, 0.1, 0.1), 1);
    EXPECT_NEAR(adam.step(v1(3.0))[0], -eta * 3.0 / (3.0 + 1e-8), 1e-15);
  }

  OptimizerState rms(OptimizerSpec::rmsprop(0.1, 0.5), 1);
  EXPECT_NEAR(rms.step(v1(4.0))[0], -0.1 * 4.0 / (std::sqrt(8.0) + 1e-8), 1e-15);
  EXPECT_NEAR(-0.1 * 4.0 / std::sqrt(8.0), -0.141421, 1e-6);

  OptimizerState ada(OptimizerSpec::adagrad(1.0), 1);
  EXPECT_NEAR(ada.step(v1(1.0))[0], -1.0 / (1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(ada.step(v1(1.0))[0], -1.0 / (std::sqrt(2.0) + 1e-8), 1e-15);
}

TEST(OptimizerStep, AdadeltaFirstStepByHand) {
  // v = 0.1 g^2, delta = -sqrt(eps) / sqrt(v + eps) g, u = 0.1 delta^2.
  OptimizerState ad(OptimizerSpec::adadelta(0.9), 1);
  const double g = 2.0, eps = 1e-6;
  const double v = 0.1 * g * g;
  const double want = -std::sqrt(eps) / std::sqrt(v + eps) * g;
  EXPECT_NEAR(ad.step(v1(g))[0], want, 1e-15);
  EXPECT_NEAR(ad.delta_accum()[0], 0.1 * want * want, 1e-20);
}

TEST(OptimizerStep, DimensionMismatchThrows) {
  OptimizerState gd(OptimizerSpec::gd(0.1), 2);
  EXPECT_THROW(gd.step(v1(1.0)), std::invalid_argument);
}

TEST(OptimizerProperties, DescentSign) {
  Rng rng(3);
  std::normal_distribution<double> n(0.0, 5.0);
  for (const auto& spec : all_kinds()) {
    // First step: every optimizer moves against the gradient.
    OptimizerState first(spec, 4);
    Vector g(4);
    for (auto& x : g) x = n(rng);
    const Vector d = first.step(g);
    for (Eigen::Index i = 0; i < 4; ++i) EXPECT_LE(d[i] * g[i], 0.0) << spec.describe();
    // Momentum-free optimizers keep the property on every step.
    if (spec.kind == OptimizerKind::adam || spec.kind == OptimizerKind::adadelta) continue;
    OptimizerState st(spec, 4);
    for (int k = 0; k < 50; ++k) {
      for (auto& x : g) x = n(rng);
      const Vector dk = st.step(g);
      for (Eigen::Index i = 0; i < 4; ++i) EXPECT_LE(dk[i] * g[i], 0.0) << spec.describe();
    }
  }
}

TEST(OptimizerProperties, FirstStepScaleInvariance) {
  for (const auto& spec : {OptimizerSpec::rmsprop(0.1, 0.9), OptimizerSpec::adam(0.1, 0.9, 0.999)}) {
    OptimizerState base(spec, 1);
    const double ref = std::abs(base.step(v1(1.0))[0]);
    for (double c : {2.0, 10.0, 1e3, 1e6}) {
      OptimizerState st(spec, 1);
      EXPECT_NEAR(std::abs(st.step(v1(c))[0]) / ref, 1.0, 1e-3) << spec.describe() << " scale " << c;
    }
  }
}

TEST(OptimizerProperties, Deterministic) {
  Rng rng(11);
  std::normal_distribution<double> n;
  std::vector<Vector> grads;
  for (int k = 0; k < 30; ++k) grads.push_back(Vector::NullaryExpr(3, [&] { return n(rng); }));
  for (const auto& spec : all_kinds()) {
    OptimizerState a(spec, 3), b(spec, 3);
    for (const auto& g : grads) EXPECT_EQ(a.step(g), b.step(g)) << spec.describe();
  }
}

TEST(OptimizerProperties, GdOnQuadraticMatchesClosedForm) {
  const double y = 1.7, x0 = -3.2;
  for (double eta : {0.05, 0.5, 1.0, 1.5}) {
    for (int k : {1, 5, 20}) {
      OptimizerState gd(OptimizerSpec::gd(eta), 1);
      double x = x0;
      for (int i = 0; i < k; ++i) x += gd.step(v1(x - y))[0];
      EXPECT_NEAR(x, y + std::pow(1.0 - eta, k) * (x0 - y), 1e-12);
    }
  }
}

TEST(OptimizerSpec, Describe) {
  EXPECT_EQ(OptimizerSpec::adam(0.1, 0.1, 0.1).describe(), "adam(eta=0.1;beta1=0.1;beta2=0.1)");
  EXPECT_EQ(OptimizerSpec::gd(0.05).describe(), "gd(eta=0.05)");
  EXPECT_EQ(parse_optimizer_kind("rmsprop"), OptimizerKind::rmsprop);
  EXPECT_THROW(parse_optimizer_kind("sgd-nesterov"), std::invalid_argument);
}
