#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace stlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace numerics {

/// Eigenpairs of a symmetric matrix, eigenvalues sorted descending.
struct SymEigen {
  Vector values;
  Matrix vectors;  // columns are orthonormal eigenvectors
};

/// A reproducible random stream. Distinct stream ids under the same seed give
/// statistically independent sequences; the pair fully determines every draw.
struct RngHandle {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  /// Handle for a sibling stream under the same seed.
  RngHandle with_stream(std::uint64_t stream) const { return {seed, stream}; }

  std::mt19937_64 engine() const;
};

RngHandle seeded_rng(std::uint64_t seed, std::uint64_t stream_id);

/// Throws DimensionMismatch / InvalidSpec style errors for empty or non-finite input.
void require_finite(const Matrix& m, const char* what);
void require_finite(const Vector& v, const char* what);

/// True when every off-diagonal entry is exactly zero.
bool is_diagonal(const Matrix& m);

SymEigen sym_eigendecomposition(const Matrix& m);

/// Default rank cutoff: machine epsilon times the larger dimension.
double default_pinv_tolerance(Eigen::Index rows, Eigen::Index cols);

/// Moore-Penrose pseudoinverse via SVD. Singular values at or below
/// rel_tol * sigma_max are treated as zero.
Matrix pseudoinverse(const Matrix& m, double rel_tol);
Matrix pseudoinverse(const Matrix& m);

/// Pseudoinverse of a symmetric PSD matrix through its eigendecomposition;
/// eigenvalues at or below rel_tol * lambda_max are dropped.
Matrix sym_pseudoinverse(const Matrix& m, double rel_tol);

/// Symmetric PSD square root. Eigenvalues in [-1e-10 ||m||, 0) are clamped to
/// zero; anything more negative raises NotPSD.
Matrix psd_sqrt(const Matrix& m);

/// n i.i.d. rows drawn from N(0, cov_sqrt^2), computed as Z * cov_sqrt with Z
/// a standard normal matrix filled row by row from the handle's stream.
Matrix sample_gaussian_rows(const Matrix& cov_sqrt, Eigen::Index n, const RngHandle& rng);

/// Standard normal matrix, filled row by row.
Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& engine);

}  // namespace numerics
}  // namespace stlab
