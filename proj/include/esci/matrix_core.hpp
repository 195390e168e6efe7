#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "esci/errors.hpp"

namespace esci {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Relative eigenvalue tolerance used for PSD classification throughout.
inline constexpr double kPsdTol = 1e-9;

/// Reciprocal condition number below which an SPD factorization counts as singular.
inline constexpr double kMinRcond = 1e-12;

/// Symmetric real matrix. Entries are symmetrized as (A + Aᵀ)/2 on construction,
/// so (i, j) == (j, i) holds exactly afterwards.
class SymMatrix {
 public:
  explicit SymMatrix(const Mat& a);

  static SymMatrix identity(int dim);
  static SymMatrix zero(int dim);
  static SymMatrix scaled_identity(int dim, double s);
  static SymMatrix diagonal(const Vec& d);

  int dim() const noexcept { return static_cast<int>(m_.rows()); }
  const Mat& mat() const noexcept { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

  double trace() const { return m_.trace(); }
  /// Spectral norm, i.e. the largest absolute eigenvalue.
  double norm() const;
  double min_eigenvalue() const;
  double max_eigenvalue() const;

  bool is_psd(double tol = kPsdTol) const;
  bool is_spd(double tol = kPsdTol) const;
  bool is_zero() const { return m_.isZero(0.0); }

  SymMatrix operator+(const SymMatrix& o) const;
  SymMatrix operator-(const SymMatrix& o) const;
  SymMatrix operator*(double s) const;

 private:
  Mat m_;
};

inline SymMatrix operator*(double s, const SymMatrix& a) { return a * s; }

/// N×N grid of d×d blocks stored as one symmetric Nd×Nd matrix.
class BlockMatrix {
 public:
  BlockMatrix(int block_dim, int block_count, const Mat& full);
  BlockMatrix(int block_dim, const SymMatrix& full);

  static BlockMatrix block_diagonal(std::span<const SymMatrix> blocks);
  static BlockMatrix zero(int block_dim, int block_count);

  int block_dim() const noexcept { return d_; }
  int block_count() const noexcept { return n_; }
  const SymMatrix& full() const noexcept { return full_; }
  const Mat& mat() const noexcept { return full_.mat(); }

  Mat block(int i, int j) const;
  SymMatrix diagonal_block(int i) const;
  bool is_block_diagonal(double tol = 0.0) const;

  /// Keeps only the listed block rows/columns, in the given order.
  BlockMatrix select(std::span<const int> keep) const;

 private:
  int d_;
  int n_;
  SymMatrix full_;
};

/// a ⪯ b in the Loewner order: λmin(b − a) ≥ −tol·max(1, ‖b − a‖₂).
bool loewner_leq(const SymMatrix& a, const SymMatrix& b, double tol = kPsdTol);

/// Largest eigenvalue of a − b (positive means a ⋠ b).
double loewner_violation(const SymMatrix& a, const SymMatrix& b);

/// Unique symmetric PSD square root. Eigenvalues in [−tol·‖a‖, 0) are clamped to zero.
SymMatrix psd_sqrt(const SymMatrix& a, double tol = kPsdTol);

/// Inverse of an SPD matrix via Cholesky; SingularMatrix when not SPD or ill-conditioned.
SymMatrix spd_inverse(const SymMatrix& a);

/// Solves a·X = rhs for SPD a, with the same failure rules as spd_inverse.
Mat spd_solve(const SymMatrix& a, const Mat& rhs);

double log_det_spd(const SymMatrix& a);

/// H = 1_N ⊗ I_d, the Nd×d stack of identities.
Mat build_centralized_H(int n, int d);

/// `count` points on {x : xᵀP⁻¹x = 1}, x_k = P^{1/2}(cos θ_k, sin θ_k), θ_k = 2πk/count.
std::vector<Eigen::Vector2d> ellipse_boundary(const SymMatrix& p, int count);

/// Spectral norm of a general (not necessarily symmetric) matrix.
double spectral_norm(const Mat& a);

void require_finite(const Mat& a, const char* what);

}  // namespace esci
