#ifndef IMAP_LINALG_HPP_
#define IMAP_LINALG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace imap {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Raised when a factorization or solve cannot be carried out.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A filter run left the region where it produces finite estimates.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int step, int iterate = -1)
      : std::runtime_error(what + " (step " + std::to_string(step) +
                           (iterate >= 0 ? ", iterate " + std::to_string(iterate) : std::string()) + ")"),
        step_(step),
        iterate_(iterate) {}

  int step() const noexcept { return step_; }
  int iterate() const noexcept { return iterate_; }

 private:
  int step_;
  int iterate_;
};

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline bool is_symmetric(const Matrix& a, double tol = 1e-10) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

inline double min_eigenvalue(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline bool is_spd(const Matrix& a) {
  if (!is_symmetric(a) || !a.allFinite()) return false;
  Eigen::LLT<Matrix> llt(a);
  return llt.info() == Eigen::Success && min_eigenvalue(a) > 0.0;
}

inline bool is_psd(const Matrix& a, double tol = 1e-12) {
  if (!is_symmetric(a) || !a.allFinite()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return min_eigenvalue(a) >= -tol * scale;
}

inline void require_spd(const Matrix& a, const std::string& what) {
  if (!is_spd(a)) throw std::invalid_argument(what + " must be symmetric positive definite");
}

inline void require_psd(const Matrix& a, const std::string& what) {
  if (!is_psd(a)) throw std::invalid_argument(what + " must be symmetric positive semidefinite");
}

/// Lower Cholesky factor, retrying with diagonal jitter 1e-12, 1e-11, ..., 1e-6
/// (relative to the mean diagonal) before giving up.
inline Matrix cholesky_lower(const Matrix& a) {
  const Matrix s = symmetrize(a);
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().allFinite()) {
    return llt.matrixL();
  }
  const double scale = std::max(1.0, s.diagonal().cwiseAbs().mean());
  for (double jitter = 1e-12; jitter <= 1e-6 * 1.0001; jitter *= 10.0) {
    Matrix shifted = s;
    shifted.diagonal().array() += jitter * scale;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw NumericalError("Cholesky factorization failed after maximum jitter");
}

/// Factor L with L L^T = a for symmetric PSD a. Uses Cholesky when a is
/// positive definite and a symmetric eigen square root otherwise, so that
/// degenerate (zero) noise covariances remain sampleable.
inline Matrix sampling_factor(const Matrix& a) {
  const Matrix s = symmetrize(a);
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() == Eigen::Success && min_eigenvalue(s) > 0.0) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

inline Vector standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
  return z;
}

inline Vector sample_gaussian(const Vector& mean, const Matrix& factor, Rng& rng) {
  return mean + factor * standard_normal(mean.size(), rng);
}

/// Solve S X = B for symmetric positive definite S without forming S^{-1}.
inline Matrix spd_solve(const Matrix& s, const Matrix& b) {
  Eigen::LLT<Matrix> llt(symmetrize(s));
  if (llt.info() != Eigen::Success) throw NumericalError("matrix is not positive definite; cannot solve");
  Matrix x = llt.solve(b);
  if (!x.allFinite()) throw NumericalError("non-finite solution of positive definite system");
  return x;
}

inline double relative_error(const Matrix& got, const Matrix& want) {
  return (got - want).norm() / std::max(want.norm(), 1e-12);
}

// splitmix64 finalizer; used to derive independent RNG streams from a run seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) { return Rng(mix_seed(seed, stream)); }

}  // namespace imap

#endif  // IMAP_LINALG_HPP_
