#ifndef IMAP_EQUIVALENCE_HPP_
#define IMAP_EQUIVALENCE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "imap/linalg.hpp"

namespace imap {

/// Basis C and eigenvalues e with C^T A C = I and C^T B C = diag(e).
struct SimDiag {
  Matrix basis;
  Vector eigs;
};

inline Matrix random_gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  return Matrix::NullaryExpr(rows, cols, [&] { return normal(rng); });
}

/// Simultaneously diagonalizes A (SPD) and B (symmetric PSD): whiten with the
/// Cholesky factor A = L L^T, eigendecompose L^{-1} B L^{-T} = V D V^T, and
/// return C = L^{-T} V.
inline SimDiag simultaneous_diagonalize(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
    throw std::invalid_argument("simultaneous_diagonalize: A and B must be square and of equal size");
  require_spd(symmetrize(a), "simultaneous_diagonalize: A");
  Eigen::LLT<Matrix> llt(symmetrize(a));
  if (llt.info() != Eigen::Success) throw std::invalid_argument("simultaneous_diagonalize: A is not positive definite");
  // W = L^{-1} B L^{-T}
  Matrix w = llt.matrixL().solve(symmetrize(b));
  w = llt.matrixL().solve(w.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(w));
  if (es.info() != Eigen::Success) throw NumericalError("simultaneous_diagonalize: eigensolver failed");
  SimDiag out;
  out.basis = llt.matrixU().solve(es.eigenvectors());
  out.eigs = es.eigenvalues();
#ifndef NDEBUG
  const auto n = a.rows();
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  if ((out.basis.transpose() * a * out.basis - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-8 ||
      (out.basis.transpose() * b * out.basis - Matrix(out.eigs.asDiagonal())).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw NumericalError("simultaneous_diagonalize: reconstruction check failed");
#endif
  return out;
}

namespace detail {

// Relative threshold under which a generalized eigenvalue counts as zero.
inline bool is_null_direction(double e, const Vector& all) {
  return std::abs(e) <= 1e-13 * std::max(1.0, all.cwiseAbs().maxCoeff());
}

inline Matrix information_matrix(const Matrix& h, const Matrix& r) {
  require_spd(r, "measurement noise covariance R");
  return symmetrize(h.transpose() * spd_solve(r, h));
}

// Simultaneous diagonalization of (P^{-1}, B) without inverting P: with
// P = L L^T and L^T B L = V D V^T, the basis L V satisfies both conditions.
// Avoids squaring the condition number of P.
inline SimDiag diagonalize_against_inverse(const Matrix& p, const Matrix& b) {
  const Matrix l = cholesky_lower(p);
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(l.transpose() * b * l));
  if (es.info() != Eigen::Success) throw NumericalError("diagonalize_against_inverse: eigensolver failed");
  return {l * es.eigenvectors(), es.eigenvalues()};
}

}  // namespace detail

/// Learning-rate matrix M for which K preconditioned gradient steps from the
/// prior mean land on the Kalman posterior mean under prior covariance Sigma^-.
/// lambda_i = (1/r_i)(1 - (1 + r_i)^{-1/K}), and 1 where r_i = 0.
inline Matrix lr_matrix_from_prior(const Matrix& sigma_minus, const Matrix& h, const Matrix& r, int k) {
  if (k < 1) throw std::invalid_argument("lr_matrix_from_prior: K must be >= 1");
  require_spd(symmetrize(sigma_minus), "lr_matrix_from_prior: prior covariance");
  const auto sd = detail::diagonalize_against_inverse(symmetrize(sigma_minus), detail::information_matrix(h, r));
  Vector lambda(sd.eigs.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double ri = sd.eigs[i];
    // 1 - (1 + r)^{-1/K} = -expm1(-log1p(r) / K), exact for small r.
    lambda[i] = detail::is_null_direction(ri, sd.eigs) ? 1.0 : -std::expm1(-std::log1p(ri) / k) / ri;
  }
  return symmetrize(sd.basis * lambda.asDiagonal() * sd.basis.transpose());
}

/// Prior covariance implied by K gradient steps with learning-rate matrix M.
/// sigma_i = (1/s_i)((1 - s_i)^{-K} - 1), and 1 where s_i = 0. Throws when a
/// direction has s_i >= 1.
inline Matrix prior_from_lr_matrix(const Matrix& m, const Matrix& h, const Matrix& r, int k) {
  if (k < 1) throw std::invalid_argument("prior_from_lr_matrix: K must be >= 1");
  require_spd(symmetrize(m), "prior_from_lr_matrix: learning-rate matrix");
  const auto sd = detail::diagonalize_against_inverse(symmetrize(m), detail::information_matrix(h, r));
  Vector sigma(sd.eigs.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    const double si = sd.eigs[i];
    if (si >= 1.0) throw std::domain_error("step too large: no equivalent finite prior");
    sigma[i] = detail::is_null_direction(si, sd.eigs) ? 1.0 : std::expm1(-k * std::log1p(-si)) / si;
  }
  return symmetrize(sd.basis * sigma.asDiagonal() * sd.basis.transpose());
}

/// K steps of mu <- mu + M H^T R^{-1} (y - H mu) from mu^-.
inline Vector santos_recursion(const Vector& mu_minus, const Matrix& m, const Matrix& h, const Matrix& r,
                               const Vector& y, int k) {
  if (k < 1) throw std::invalid_argument("santos_recursion: K must be >= 1");
  Eigen::LLT<Matrix> llt(symmetrize(r));
  if (llt.info() != Eigen::Success) throw NumericalError("santos_recursion: R is not positive definite");
  const Matrix step = m * h.transpose();
  Vector mu = mu_minus;
  for (int i = 0; i < k; ++i) mu += step * llt.solve(y - h * mu);
  return mu;
}

/// Fixed-covariance natural-gradient step on the expected log-likelihood:
/// x + rho M H^T R^{-1} (y - H x).
inline Vector ngd_vi_update(const Vector& x, const Matrix& m, double rho, const Matrix& h, const Matrix& r,
                            const Vector& y) {
  if (!(rho >= 0.0)) throw std::invalid_argument("ngd_vi_update: rho must be >= 0");
  return santos_recursion(x, rho * m, h, r, y, 1);
}

/// Prior covariance that, paired with R = I, yields the same Kalman gain as
/// (Sigma*, R*): X = Sigma* H^T (R*)^{-1} (H^T)^+.
inline Matrix compensated_prior(const Matrix& sigma_star, const Matrix& h, const Matrix& r_star) {
  const Matrix ht_pinv = h.transpose().completeOrthogonalDecomposition().pseudoInverse();
  return sigma_star * h.transpose() * spd_solve(r_star, ht_pinv);
}

/// Kalman gain P H^T (H P H^T + R)^{-1}. P need not be symmetric, so the
/// innovation matrix is solved with pivoted LU.
inline Matrix kalman_gain(const Matrix& p, const Matrix& h, const Matrix& r) {
  const Matrix s = h * p * h.transpose() + r;
  Eigen::FullPivLU<Matrix> lu(s.transpose());
  if (!lu.isInvertible()) throw NumericalError("kalman_gain: innovation matrix is singular");
  return lu.solve(h * p.transpose()).transpose();
}

/// Posterior mean mu^- + K (y - H mu^-). Evaluated in square-root
/// information form, mu^- + L (I + L^T J L)^{-1} L^T H^T R^{-1} v with
/// Sigma^- = L L^T, which stays accurate when Sigma^- is nearly singular
/// (priors implied by aggressive step sizes reach condition numbers ~1e10).
inline Vector kalman_posterior_mean(const Vector& mu_minus, const Matrix& sigma_minus, const Matrix& h,
                                    const Matrix& r, const Vector& y) {
  require_spd(symmetrize(sigma_minus), "kalman_posterior_mean: prior covariance");
  const Matrix l = cholesky_lower(sigma_minus);
  const Matrix rinv_h = spd_solve(r, h);
  const Matrix a = Matrix::Identity(l.cols(), l.cols()) + l.transpose() * (h.transpose() * rinv_h) * l;
  const Vector b = l.transpose() * (rinv_h.transpose() * (y - h * mu_minus));
  return mu_minus + l * spd_solve(symmetrize(a), b);
}

/// W^T W + 0.1 I with standard normal W.
inline Matrix random_spd(Eigen::Index n, Rng& rng) {
  const Matrix w = random_gaussian_matrix(n, n, rng);
  return w.transpose() * w + 0.1 * Matrix::Identity(n, n);
}

/// Learning-rate matrix whose generalized eigenvalues against H^T R^{-1} H
/// are all below `cap` (< 1), obtained by rescaling a random SPD draw.
inline Matrix random_admissible_lr_matrix(const Matrix& h, const Matrix& r, Rng& rng, double cap = 0.9) {
  Matrix m = random_spd(h.cols(), rng);
  const double top = detail::diagonalize_against_inverse(m, detail::information_matrix(h, r)).eigs.maxCoeff();
  std::uniform_real_distribution<double> unif(0.1, cap);
  if (top > 0.0) m *= unif(rng) / top;
  return symmetrize(m);
}

/// Largest relative residuals of each identity over random instances.
struct EquivalenceReport {
  int instances = 0;
  double forward = 0.0;      // K GD steps with M(Sigma^-) vs Kalman mean
  double reverse = 0.0;      // Kalman mean under Sigma^-(M) vs K GD steps
  double round_trip = 0.0;   // M -> Sigma^- -> M
  double compensated = 0.0;  // gain(X, I) vs gain(Sigma*, R*)
  double ngd = 0.0;          // K natural-gradient steps vs recursion with rho M
};

inline EquivalenceReport verify_equivalence(int instances, std::uint64_t seed) {
  if (instances < 1) throw std::invalid_argument("verify_equivalence: instances must be >= 1");
  Rng rng = make_rng(seed, 0);
  std::uniform_int_distribution<int> dim(1, 5), steps(1, 10);
  std::uniform_real_distribution<double> rho_dist(0.1, 1.0);
  EquivalenceReport rep;
  rep.instances = instances;
  for (int i = 0; i < instances; ++i) {
    const int n = dim(rng), m = dim(rng), k = steps(rng);
    const Matrix h = random_gaussian_matrix(m, n, rng);
    const Matrix r = random_spd(m, rng);
    const Vector mu = random_gaussian_matrix(n, 1, rng);
    const Vector y = random_gaussian_matrix(m, 1, rng);

    const Matrix sigma = random_spd(n, rng);
    const Matrix lr = lr_matrix_from_prior(sigma, h, r, k);
    rep.forward = std::max(rep.forward, relative_error(santos_recursion(mu, lr, h, r, y, k),
                                                       kalman_posterior_mean(mu, sigma, h, r, y)));

    const Matrix m_adm = random_admissible_lr_matrix(h, r, rng);
    const Matrix implied = prior_from_lr_matrix(m_adm, h, r, k);
    rep.reverse = std::max(rep.reverse, relative_error(kalman_posterior_mean(mu, implied, h, r, y),
                                                       santos_recursion(mu, m_adm, h, r, y, k)));
    rep.round_trip = std::max(rep.round_trip, relative_error(lr_matrix_from_prior(implied, h, r, k), m_adm));

    const double rho = rho_dist(rng);
    Vector x = mu;
    for (int j = 0; j < k; ++j) x = ngd_vi_update(x, m_adm, rho, h, r, y);
    rep.ngd = std::max(rep.ngd, relative_error(x, santos_recursion(mu, rho * m_adm, h, r, y, k)));

    const Matrix hs = random_gaussian_matrix(n, n, rng) + 2.0 * Matrix::Identity(n, n);
    const Matrix rs = random_spd(n, rng);
    const Matrix x_comp = compensated_prior(sigma, hs, rs);
    rep.compensated = std::max(rep.compensated, relative_error(kalman_gain(x_comp, hs, Matrix::Identity(n, n)),
                                                               kalman_gain(sigma, hs, rs)));
  }
  return rep;
}

}  // namespace imap

#endif  // IMAP_EQUIVALENCE_HPP_
