#include "esci/matrix_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace esci {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::NotPSD: return "NotPSD";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::DegenerateWeights: return "DegenerateWeights";
    case ErrorKind::BoundaryWeight: return "BoundaryWeight";
    case ErrorKind::InvalidCorrelation: return "InvalidCorrelation";
    case ErrorKind::WitnessFailed: return "WitnessFailed";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Schema: return "Schema";
  }
  return "Unknown";
}

void require_finite(const Mat& a, const char* what) {
  if (!a.allFinite()) fail(ErrorKind::NonFinite, std::string(what) + " has non-finite entries");
}

namespace {

Eigen::VectorXd eigenvalues_of(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace

// ---------------------------------------------------------------------------
// SymMatrix

SymMatrix::SymMatrix(const Mat& a) {
  if (a.rows() != a.cols()) fail(ErrorKind::DimensionMismatch, "SymMatrix requires a square matrix");
  if (a.rows() < 1) fail(ErrorKind::InvalidArgument, "SymMatrix requires dim >= 1");
  require_finite(a, "SymMatrix");
  m_ = 0.5 * (a + a.transpose());
}

SymMatrix SymMatrix::identity(int dim) { return SymMatrix(Mat::Identity(dim, dim)); }
SymMatrix SymMatrix::zero(int dim) { return SymMatrix(Mat::Zero(dim, dim)); }
SymMatrix SymMatrix::scaled_identity(int dim, double s) { return SymMatrix(s * Mat::Identity(dim, dim)); }
SymMatrix SymMatrix::diagonal(const Vec& d) { return SymMatrix(Mat(d.asDiagonal())); }

double SymMatrix::norm() const {
  const Vec ev = eigenvalues_of(m_);
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

double SymMatrix::min_eigenvalue() const { return eigenvalues_of(m_)(0); }

double SymMatrix::max_eigenvalue() const {
  const Vec ev = eigenvalues_of(m_);
  return ev(ev.size() - 1);
}

bool SymMatrix::is_psd(double tol) const {
  const Vec ev = eigenvalues_of(m_);
  const double scale = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  return ev(0) >= -tol * scale;
}

bool SymMatrix::is_spd(double tol) const {
  const Vec ev = eigenvalues_of(m_);
  const double top = ev(ev.size() - 1);
  return top > 0.0 && ev(0) > tol * top;
}

SymMatrix SymMatrix::operator+(const SymMatrix& o) const {
  if (o.dim() != dim()) fail(ErrorKind::DimensionMismatch, "SymMatrix addition");
  return SymMatrix(m_ + o.m_);
}

SymMatrix SymMatrix::operator-(const SymMatrix& o) const {
  if (o.dim() != dim()) fail(ErrorKind::DimensionMismatch, "SymMatrix subtraction");
  return SymMatrix(m_ - o.m_);
}

SymMatrix SymMatrix::operator*(double s) const { return SymMatrix(s * m_); }

// ---------------------------------------------------------------------------
// BlockMatrix

BlockMatrix::BlockMatrix(int block_dim, int block_count, const Mat& full)
    : d_(block_dim), n_(block_count), full_(full) {
  if (d_ < 1 || n_ < 1) fail(ErrorKind::InvalidArgument, "BlockMatrix needs positive block dims");
  if (full_.dim() != d_ * n_) fail(ErrorKind::DimensionMismatch, "BlockMatrix size is not N*d");
}

BlockMatrix::BlockMatrix(int block_dim, const SymMatrix& full)
    : d_(block_dim), n_(block_dim > 0 ? full.dim() / block_dim : 0), full_(full) {
  if (d_ < 1 || n_ < 1 || n_ * d_ != full.dim())
    fail(ErrorKind::DimensionMismatch, "BlockMatrix size is not a multiple of the block dim");
}

BlockMatrix BlockMatrix::block_diagonal(std::span<const SymMatrix> blocks) {
  if (blocks.empty()) fail(ErrorKind::InvalidArgument, "block_diagonal of nothing");
  const int d = blocks.front().dim();
  const int n = static_cast<int>(blocks.size());
  Mat full = Mat::Zero(n * d, n * d);
  for (int i = 0; i < n; ++i) {
    if (blocks[i].dim() != d) fail(ErrorKind::DimensionMismatch, "block_diagonal block sizes differ");
    full.block(i * d, i * d, d, d) = blocks[i].mat();
  }
  return BlockMatrix(d, n, full);
}

BlockMatrix BlockMatrix::zero(int block_dim, int block_count) {
  return BlockMatrix(block_dim, block_count, Mat::Zero(block_dim * block_count, block_dim * block_count));
}

Mat BlockMatrix::block(int i, int j) const { return full_.mat().block(i * d_, j * d_, d_, d_); }

SymMatrix BlockMatrix::diagonal_block(int i) const { return SymMatrix(block(i, i)); }

bool BlockMatrix::is_block_diagonal(double tol) const {
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      if (i != j && block(i, j).cwiseAbs().maxCoeff() > tol) return false;
  return true;
}

BlockMatrix BlockMatrix::select(std::span<const int> keep) const {
  const int m = static_cast<int>(keep.size());
  if (m == 0) fail(ErrorKind::InvalidArgument, "BlockMatrix::select with empty index set");
  Mat out(m * d_, m * d_);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) out.block(a * d_, b * d_, d_, d_) = block(keep[a], keep[b]);
  return BlockMatrix(d_, m, out);
}

// ---------------------------------------------------------------------------
// Free functions

bool loewner_leq(const SymMatrix& a, const SymMatrix& b, double tol) {
  if (a.dim() != b.dim()) fail(ErrorKind::DimensionMismatch, "loewner_leq dimensions differ");
  if (tol < 0.0) fail(ErrorKind::InvalidArgument, "loewner_leq tolerance must be >= 0");
  const Vec ev = eigenvalues_of(b.mat() - a.mat());
  const double spec = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  return ev(0) >= -tol * std::max(1.0, spec);
}

double loewner_violation(const SymMatrix& a, const SymMatrix& b) {
  if (a.dim() != b.dim()) fail(ErrorKind::DimensionMismatch, "loewner_violation dimensions differ");
  const Vec ev = eigenvalues_of(a.mat() - b.mat());
  return ev(ev.size() - 1);
}

SymMatrix psd_sqrt(const SymMatrix& a, double tol) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a.mat());
  Vec ev = es.eigenvalues();
  const double scale = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  if (ev(0) < -tol * scale) fail(ErrorKind::NotPSD, "psd_sqrt of an indefinite matrix");
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return SymMatrix(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
}

namespace {

Eigen::LLT<Mat> checked_llt(const SymMatrix& a) {
  Eigen::LLT<Mat> llt(a.mat());
  if (llt.info() != Eigen::Success) fail(ErrorKind::SingularMatrix, "matrix is not positive definite");
  if (llt.rcond() < kMinRcond) fail(ErrorKind::SingularMatrix, "matrix is numerically singular");
  return llt;
}

}  // namespace

SymMatrix spd_inverse(const SymMatrix& a) {
  const auto llt = checked_llt(a);
  return SymMatrix(llt.solve(Mat::Identity(a.dim(), a.dim())));
}

Mat spd_solve(const SymMatrix& a, const Mat& rhs) {
  if (rhs.rows() != a.dim()) fail(ErrorKind::DimensionMismatch, "spd_solve right-hand side");
  return checked_llt(a).solve(rhs);
}

double log_det_spd(const SymMatrix& a) {
  Eigen::LLT<Mat> llt(a.mat());
  if (llt.info() != Eigen::Success) fail(ErrorKind::NotPSD, "log-det of a non-SPD matrix");
  const Mat& l = llt.matrixLLT();
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

Mat build_centralized_H(int n, int d) {
  if (n < 1 || d < 1) fail(ErrorKind::InvalidArgument, "build_centralized_H needs n, d >= 1");
  Mat h(n * d, d);
  for (int i = 0; i < n; ++i) h.block(i * d, 0, d, d).setIdentity();
  return h;
}

std::vector<Eigen::Vector2d> ellipse_boundary(const SymMatrix& p, int count) {
  if (p.dim() != 2) fail(ErrorKind::DimensionMismatch, "ellipse_boundary needs a 2x2 matrix");
  if (count < 1) fail(ErrorKind::InvalidArgument, "ellipse_boundary needs count >= 1");
  if (!p.is_spd(1e-12)) fail(ErrorKind::SingularMatrix, "ellipse_boundary needs an SPD matrix");
  const Mat root = psd_sqrt(p).mat();
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(count);
  for (int k = 0; k < count; ++k) {
    const double th = 2.0 * std::numbers::pi * k / count;
    pts.emplace_back(root * Eigen::Vector2d(std::cos(th), std::sin(th)));
  }
  return pts;
}

double spectral_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues()(0);
}

}  // namespace esci
