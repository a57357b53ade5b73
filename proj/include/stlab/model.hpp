#pragma once

#include <string>
#include <variant>
#include <vector>

#include "stlab/numerics.hpp"

namespace stlab::model {

// Population covariance variants. Spike directions are the leading standard
// basis vectors e_1, ..., e_k.
struct Identity {};
struct SingleSpike {
  double strength = 0.0;  // s > 1
};
struct MultiSpike {
  std::vector<double> strengths;  // s_1 >= ... >= s_k > 1
};
struct PowerLawDiagonal {};  // Sigma_ii = 1 / i
struct ExplicitDiagonal {
  Vector values;
};
struct ExplicitDense {
  Matrix matrix;
};

using CovarianceSpec =
    std::variant<Identity, SingleSpike, MultiSpike, PowerLawDiagonal, ExplicitDiagonal, ExplicitDense>;

struct SpikeAligned {
  double r = 1.0;
};
struct MultiSpikeCoeffs {
  std::vector<double> r;
};
struct SparseOnes {
  Eigen::Index k = 0;
};
struct ExplicitSignal {
  Vector beta;
};

using SignalSpec = std::variant<SpikeAligned, MultiSpikeCoeffs, SparseOnes, ExplicitSignal>;

struct Covariance {
  Matrix matrix;
  numerics::SymEigen eigen;
  /// True when the matrix is diagonal in the standard basis (off-diagonal mass < 1e-12).
  bool shared_eigenbasis = false;
  /// Conditioning notes; the build does not fail on them.
  std::vector<std::string> warnings;
};

struct Dataset {
  Matrix features;  // n x p
  Vector labels;    // n
  double noise_variance = 0.0;
};

std::string describe(const CovarianceSpec& spec);
std::string describe(const SignalSpec& spec);

/// Number of spikes carried by the spec (0 for non-spike variants).
std::size_t spike_count(const CovarianceSpec& spec);

Covariance build_covariance(const CovarianceSpec& spec, Eigen::Index p);

/// Diagonal of a standard-basis-diagonal covariance without materializing the
/// p x p matrix. Raises InvalidSpec for dense variants that are not diagonal.
Vector covariance_diagonal(const CovarianceSpec& spec, Eigen::Index p);

/// Signal vector expressed against the eigenstructure of the covariance.
Vector build_signal(const SignalSpec& spec, const numerics::SymEigen& cov_eigen, Eigen::Index p);

/// Same as above for covariances whose spikes sit on e_1..e_k.
Vector build_signal(const SignalSpec& spec, const CovarianceSpec& cov, Eigen::Index p);

/// Caches the PSD square root of a covariance for repeated sampling.
class GaussianDesign {
 public:
  explicit GaussianDesign(const Matrix& cov);

  Eigen::Index dim() const { return cov_.rows(); }
  const Matrix& covariance() const { return cov_; }
  const Matrix& sqrt() const { return sqrt_; }
  bool diagonal() const { return diagonal_; }

  Matrix sample(Eigen::Index n, std::mt19937_64& engine) const;

 private:
  Matrix cov_;
  Matrix sqrt_;
  Vector diag_sqrt_;
  bool diagonal_ = false;
};

Dataset generate_initial_data(const Matrix& cov, const Vector& beta, Eigen::Index n,
                              double noise_variance, const numerics::RngHandle& rng);
Dataset generate_initial_data(const GaussianDesign& design, const Vector& beta, Eigen::Index n,
                              double noise_variance, const numerics::RngHandle& rng);

Matrix generate_fresh_features(const Matrix& cov, Eigen::Index n_t, const numerics::RngHandle& rng);
Matrix generate_fresh_features(const GaussianDesign& design, Eigen::Index n_t,
                               const numerics::RngHandle& rng);

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
Matrix random_orthogonal(Eigen::Index p, const numerics::RngHandle& rng);

}  // namespace stlab::model
