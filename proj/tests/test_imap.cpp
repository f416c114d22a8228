#include <gtest/gtest.h>

#include <cmath>

#include "imap/classical.hpp"
#include "imap/equivalence.hpp"
#include "imap/imap_filter.hpp"
#include "test_util.hpp"

using namespace imap;

namespace {

auto scalar_quadratic(double y) {
  return [y](const Vector& x) -> std::pair<double, Vector> {
    return {0.5 * (y - x[0]) * (y - x[0]), Vector::Constant(1, x[0] - y)};
  };
}

LinearGaussianModel identity_model(double r = 1.0) {
  return LinearGaussianModel(Matrix::Identity(1, 1), Matrix::Identity(1, 1), Matrix::Identity(1, 1),
                             Matrix::Constant(1, 1, r), Vector::Zero(1), Matrix::Identity(1, 1));
}

// Kalman posterior mean by joint-Gaussian conditioning, independent of the
// library's gain code: mu + S H^T (H S H^T + R)^{-1} (y - H mu) via inverse.
double scalar_kalman_mean(double mu, double s, double r, double y) { return mu + s / (s + r) * (y - mu); }

}  // namespace

TEST(ImapPredict, Examples) {
  const auto lin = identity_model();
  EXPECT_EQ(imap_predict(lin, Vector::Constant(1, 2.5), 1)[0], 2.5);
  UngmModel ungm(3, 2);
  EXPECT_DOUBLE_EQ(imap_predict(ungm, Vector::Zero(1), 0)[0], 8.0);
  LorenzModel lor(LorenzConfig{});
  EXPECT_TRUE(imap_predict(lor, Vector::Zero(3), 1).isZero());
  EXPECT_THROW(imap_predict(lor, Vector::Zero(2), 1), std::invalid_argument);
}

TEST(ImapUpdate, Examples) {
  ImapConfig frozen{OptimizerSpec::gd(0.0), 7};
  EXPECT_EQ(imap_update(Vector::Constant(1, 0.3), scalar_quadratic(5.0), frozen)[0], 0.3);

  ImapConfig cfg{OptimizerSpec::gd(0.5), 2};
  const double got = imap_update(Vector::Zero(1), scalar_quadratic(1.0), cfg)[0];
  EXPECT_DOUBLE_EQ(got, 0.75);
  // The implied prior variance for (eta=0.5, K=2, R=1) gives the same mean.
  const double prior = prior_from_lr_matrix(Matrix::Constant(1, 1, 0.5), Matrix::Identity(1, 1),
                                            Matrix::Identity(1, 1), 2)(0, 0);
  EXPECT_NEAR(prior, 3.0, 1e-12);
  EXPECT_NEAR(got, scalar_kalman_mean(0.0, prior, 1.0, 1.0), 1e-12);
}

TEST(ImapUpdate, NonFiniteGradientReportsStepAndIterate) {
  ImapConfig cfg{OptimizerSpec::gd(0.1), 5};
  int calls = 0;
  const auto loss = [&calls](const Vector& x) -> std::pair<double, Vector> {
    ++calls;
    if (calls == 3) return {NAN, x};
    return {0.0, x};
  };
  try {
    imap_update(Vector::Ones(1), loss, cfg, nullptr, 12);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step(), 12);
    EXPECT_EQ(e.iterate(), 2);
  }
}

TEST(ImapUpdate, MoreStepsNeverIncreaseConvexLoss) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = testutil::spd(4, rng);
    const Vector b = testutil::gaussian(4, 1, rng);
    const auto loss = [&](const Vector& x) -> std::pair<double, Vector> {
      return {0.5 * x.dot(a * x) - b.dot(x), a * x - b};
    };
    // Step size below 1/L keeps GD monotone on a quadratic.
    const double eta = 1.0 / Eigen::SelfAdjointEigenSolver<Matrix>(a).eigenvalues().maxCoeff();
    double prev = loss(Vector::Zero(4)).first;
    for (int k = 1; k <= 40; ++k) {
      const double cur = loss(imap_update(Vector::Zero(4), loss, ImapConfig{OptimizerSpec::gd(eta), k})).first;
      EXPECT_LE(cur, prev + 1e-12);
      prev = cur;
    }
  }
}

TEST(ImapFilter, SingleFullStepRecoversObservation) {
  const auto model = identity_model();
  const std::vector<Vector> ys{Vector::Constant(1, 4.2)};
  const auto run = imap_filter(model, Vector::Zero(1), ys, ImapConfig{OptimizerSpec::gd(1.0), 1});
  ASSERT_EQ(run.estimates.size(), 1u);
  EXPECT_DOUBLE_EQ(run.estimates[0][0], 4.2);
  EXPECT_DOUBLE_EQ(run.predictions[0][0], 0.0);
}

TEST(ImapFilter, RejectsBadInputs) {
  const auto model = identity_model();
  EXPECT_THROW(imap_filter(model, Vector::Zero(1), {}, ImapConfig{OptimizerSpec::gd(1.0), 1}), std::invalid_argument);
  EXPECT_THROW(imap_filter(model, Vector::Zero(1), {Vector::Zero(1)}, ImapConfig{OptimizerSpec::gd(1.0), 0}),
               std::invalid_argument);
}

TEST(ImapFilter, DivergenceCarriesTimestep) {
  UngmModel model(3, 2);
  std::vector<Vector> ys(5, Vector::Constant(1, 1e200));
  try {
    imap_filter(model, Vector::Zero(1), ys, ImapConfig{OptimizerSpec::gd(1.0), 3});
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.step(), 1);
  }
}

TEST(ImapFilter, Deterministic) {
  UngmModel model(3, 2);
  Rng rng(4);
  const auto traj = simulate(model, 100, rng);
  const ImapConfig cfg{OptimizerSpec::adam(0.1, 0.1, 0.1), 50};
  const auto a = imap_filter(model, Vector::Zero(1), traj.observations, cfg);
  const auto b = imap_filter(model, Vector::Zero(1), traj.observations, cfg);
  for (std::size_t t = 0; t < a.estimates.size(); ++t) EXPECT_EQ(a.estimates[t], b.estimates[t]);
}

TEST(ImapFilter, CarriedOptimizerStateDiffersFromReset) {
  UngmModel model(3, 2);
  Rng rng(4);
  const auto traj = simulate(model, 20, rng);
  ImapConfig reset{OptimizerSpec::adam(0.1, 0.1, 0.1), 5, true};
  ImapConfig carry = reset;
  carry.reset_optimizer_each_t = false;
  const auto a = imap_filter(model, Vector::Zero(1), traj.observations, reset);
  const auto b = imap_filter(model, Vector::Zero(1), traj.observations, carry);
  EXPECT_EQ(a.estimates[0], b.estimates[0]);
  bool differs = false;
  for (std::size_t t = 1; t < a.estimates.size(); ++t) differs |= a.estimates[t] != b.estimates[t];
  EXPECT_TRUE(differs);
}

// Preconditioning GD with the learning-rate matrix derived from the Kalman
// prior covariance at each step reproduces the Kalman mean sequence.
TEST(ImapFilter, PreconditionedGdMatchesKalmanFilter) {
  Rng rng(2718);
  std::uniform_int_distribution<int> dim(1, 5), steps(1, 6);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = dim(rng), m = dim(rng), k = steps(rng);
    const Matrix f = 0.9 * testutil::gaussian(n, n, rng) / std::sqrt(static_cast<double>(n));
    const Matrix h = testutil::gaussian(m, n, rng);
    const Matrix q = testutil::spd(n, rng), r = testutil::spd(m, rng);
    const Vector mu0 = testutil::gaussian(n, 1, rng);
    LinearGaussianModel model(f, q, h, r, mu0, testutil::spd(n, rng));
    const auto traj = simulate(model, 15, rng);

    // Kalman oracle, keeping every predicted covariance.
    std::vector<Matrix> prior_covs;
    std::vector<Vector> kf_means;
    GaussianBelief b{mu0, model.initial_cov()};
    for (std::size_t t = 0; t < traj.length(); ++t) {
      const auto prior = kf_predict(b, f, q);
      prior_covs.push_back(prior.cov);
      b = kf_update(prior, h, r, traj.observations[t]);
      kf_means.push_back(b.mean);
    }

    const Matrix rinv = r.inverse();
    const auto run = imap_filter_with_loss(model, mu0, traj.observations, ImapConfig{OptimizerSpec::gd(1.0), k},
                                           [&](int t, const Vector& y) {
                                             const Matrix lr = lr_matrix_from_prior(prior_covs[t - 1], h, r, k);
                                             return [&, lr, y](const Vector& x) -> std::pair<double, Vector> {
                                               const Vector res = y - h * x;
                                               return {0.5 * res.dot(rinv * res), -lr * h.transpose() * rinv * res};
                                             };
                                           });
    for (std::size_t t = 0; t < traj.length(); ++t)
      EXPECT_LT(relative_error(run.estimates[t], kf_means[t]), 1e-8) << "trial " << trial << " t " << t + 1;
  }
}

TEST(ImapLoss, UnitAndModelNoise) {
  UngmModel model(3, 2);
  const Vector x = Vector::Constant(1, 4.0), y = Vector::Ones(1);
  const auto [lu, gu] = make_gaussian_loss(model, y, 1, LikelihoodNoise::unit)(x);
  const auto [lm, gm] = make_gaussian_loss(model, y, 1, LikelihoodNoise::model)(x);
  EXPECT_NEAR(lu, 0.5 * 0.04, 1e-15);
  EXPECT_NEAR(lm, 0.5 * 0.04 / 2.0, 1e-15);
  EXPECT_NEAR(gu[0], -0.4 * 0.2, 1e-15);
  EXPECT_NEAR(gm[0], -0.4 * 0.2 / 2.0, 1e-15);
}
