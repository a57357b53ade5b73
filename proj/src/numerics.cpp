#include "stlab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "stlab/error.hpp"

namespace stlab {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonSymmetric: return "NonSymmetric";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::NoRoot: return "NoRoot";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::UnknownFigure: return "UnknownFigure";
    case ErrorCode::UnknownField: return "UnknownField";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

namespace numerics {

std::mt19937_64 RngHandle::engine() const {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32), 0x5eedu};
  return std::mt19937_64(seq);
}

RngHandle seeded_rng(std::uint64_t seed, std::uint64_t stream_id) { return {seed, stream_id}; }

void require_finite(const Matrix& m, const char* what) {
  if (m.rows() == 0 || m.cols() == 0) {
    fail(ErrorCode::DimensionMismatch, std::string(what) + " has an empty dimension");
  }
  if (!m.allFinite()) fail(ErrorCode::NumericalFailure, std::string(what) + " has non-finite entries");
}

void require_finite(const Vector& v, const char* what) {
  if (v.size() == 0) fail(ErrorCode::DimensionMismatch, std::string(what) + " is empty");
  if (!v.allFinite()) fail(ErrorCode::NumericalFailure, std::string(what) + " has non-finite entries");
}

bool is_diagonal(const Matrix& m) {
  if (m.rows() != m.cols()) return false;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (i != j && m(i, j) != 0.0) return false;
    }
  }
  return true;
}

namespace {

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

void require_symmetric(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << "expected a square matrix, got " << m.rows() << "x" << m.cols();
    fail(ErrorCode::DimensionMismatch, os.str());
  }
  const double scale = std::max(1.0, max_abs(m));
  const double asym = max_abs(m - m.transpose());
  if (asym > rel_tol * scale) {
    std::ostringstream os;
    os << "max |m - m^T| = " << asym << " exceeds " << rel_tol << " * " << scale;
    fail(ErrorCode::NonSymmetric, os.str());
  }
}

}  // namespace

SymEigen sym_eigendecomposition(const Matrix& m) {
  require_finite(m, "matrix");
  require_symmetric(m, 1e-10);
  const Eigen::Index p = m.rows();

  if (is_diagonal(m)) {
    // Stable sort keeps equal eigenvalues in coordinate order.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
    for (Eigen::Index i = 0; i < p; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return m(a, a) > m(b, b); });
    SymEigen out{Vector(p), Matrix::Zero(p, p)};
    for (Eigen::Index k = 0; k < p; ++k) {
      const Eigen::Index i = order[static_cast<std::size_t>(k)];
      out.values(k) = m(i, i);
      out.vectors(i, k) = 1.0;
    }
    return out;
  }

  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (m + m.transpose()));
  if (solver.info() != Eigen::Success) {
    fail(ErrorCode::NumericalFailure, "symmetric eigensolver did not converge");
  }
  // Eigen returns ascending order.
  SymEigen out{solver.eigenvalues().reverse(), solver.eigenvectors().rowwise().reverse()};
  return out;
}

double default_pinv_tolerance(Eigen::Index rows, Eigen::Index cols) {
  return std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(rows, cols));
}

Matrix pseudoinverse(const Matrix& m, double rel_tol) {
  require_finite(m, "matrix");
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) {
    fail(ErrorCode::InvalidParams, "pseudoinverse tolerance must lie in (0, 1)");
  }
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) fail(ErrorCode::NumericalFailure, "SVD did not converge");

  const Vector& s = svd.singularValues();
  Matrix out = Matrix::Zero(m.cols(), m.rows());
  if (s.size() == 0 || s(0) == 0.0) return out;
  const double cutoff = rel_tol * s(0);
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > cutoff) ++rank;
  const Matrix& u = svd.matrixU();
  const Matrix& v = svd.matrixV();
  out.noalias() = v.leftCols(rank) * s.head(rank).cwiseInverse().asDiagonal() *
                  u.leftCols(rank).transpose();
  return out;
}

Matrix pseudoinverse(const Matrix& m) {
  return pseudoinverse(m, default_pinv_tolerance(m.rows(), m.cols()));
}

Matrix sym_pseudoinverse(const Matrix& m, double rel_tol) {
  require_finite(m, "matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  if (solver.info() != Eigen::Success) {
    fail(ErrorCode::NumericalFailure, "symmetric eigensolver did not converge");
  }
  const Vector& w = solver.eigenvalues();
  const double cutoff = rel_tol * std::max(0.0, w.maxCoeff());
  Vector inv(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) inv(i) = w(i) > cutoff ? 1.0 / w(i) : 0.0;
  const Matrix& v = solver.eigenvectors();
  return v * inv.asDiagonal() * v.transpose();
}

Matrix psd_sqrt(const Matrix& m) {
  require_finite(m, "matrix");
  require_symmetric(m, 1e-10);
  const double norm = max_abs(m);
  const double floor = -1e-10 * std::max(norm, std::numeric_limits<double>::min());

  if (is_diagonal(m)) {
    Matrix out = Matrix::Zero(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double d = m(i, i);
      if (d < floor) {
        std::ostringstream os;
        os << "diagonal entry " << i << " = " << d;
        fail(ErrorCode::NotPSD, os.str());
      }
      out(i, i) = std::sqrt(std::max(d, 0.0));
    }
    return out;
  }

  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (m + m.transpose()));
  if (solver.info() != Eigen::Success) {
    fail(ErrorCode::NumericalFailure, "symmetric eigensolver did not converge");
  }
  Vector w = solver.eigenvalues();
  if (w.minCoeff() < floor) {
    std::ostringstream os;
    os << "smallest eigenvalue " << w.minCoeff() << " below tolerance " << floor;
    fail(ErrorCode::NotPSD, os.str());
  }
  w = w.cwiseMax(0.0).cwiseSqrt();
  const Matrix& v = solver.eigenvectors();
  Matrix out = v * w.asDiagonal() * v.transpose();
  return 0.5 * (out + out.transpose());
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& engine) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) z(i, j) = normal(engine);
  }
  return z;
}

Matrix sample_gaussian_rows(const Matrix& cov_sqrt, Eigen::Index n, const RngHandle& rng) {
  if (cov_sqrt.rows() != cov_sqrt.cols() || cov_sqrt.rows() == 0) {
    fail(ErrorCode::DimensionMismatch, "covariance square root must be square and non-empty");
  }
  if (n <= 0) fail(ErrorCode::DimensionMismatch, "row count must be positive");
  auto engine = rng.engine();
  Matrix z = standard_normal(n, cov_sqrt.cols(), engine);
  if (is_diagonal(cov_sqrt)) {
    z *= cov_sqrt.diagonal().asDiagonal();
    return z;
  }
  return z * cov_sqrt;
}

}  // namespace numerics
}  // namespace stlab
