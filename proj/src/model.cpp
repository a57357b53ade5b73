#include "stlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stlab/error.hpp"

namespace stlab::model {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_spikes(const std::vector<double>& s, Eigen::Index p) {
  if (s.empty()) fail(ErrorCode::InvalidSpec, "multi-spike covariance needs at least one spike");
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (!(s[j] > 1.0) || !std::isfinite(s[j])) {
      std::ostringstream os;
      os << "spike strength s_" << j + 1 << " = " << s[j] << " must be > 1";
      fail(ErrorCode::InvalidSpec, os.str());
    }
    if (j > 0 && s[j] > s[j - 1]) fail(ErrorCode::InvalidSpec, "spike strengths must be sorted descending");
  }
  if (static_cast<Eigen::Index>(s.size()) + 1 > p) {
    fail(ErrorCode::InvalidSpec, "dimension must exceed the number of spikes");
  }
}

constexpr double kEigenFloor = 1e-8;
constexpr double kConditionWarn = 1e6;

}  // namespace

std::string describe(const CovarianceSpec& spec) {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const Identity&) { os << "identity"; },
                 [&](const SingleSpike& s) { os << "single_spike(s=" << s.strength << ")"; },
                 [&](const MultiSpike& m) {
                   os << "multi_spike(";
                   for (std::size_t j = 0; j < m.strengths.size(); ++j) os << (j ? "," : "") << m.strengths[j];
                   os << ")";
                 },
                 [&](const PowerLawDiagonal&) { os << "power_law"; },
                 [&](const ExplicitDiagonal& d) { os << "diagonal(p=" << d.values.size() << ")"; },
                 [&](const ExplicitDense& d) { os << "dense(p=" << d.matrix.rows() << ")"; },
             },
             spec);
  return os.str();
}

std::string describe(const SignalSpec& spec) {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const SpikeAligned& s) { os << "spike_aligned(r=" << s.r << ")"; },
                 [&](const MultiSpikeCoeffs& m) {
                   os << "multi_spike_coeffs(";
                   for (std::size_t j = 0; j < m.r.size(); ++j) os << (j ? "," : "") << m.r[j];
                   os << ")";
                 },
                 [&](const SparseOnes& s) { os << "sparse_ones(k=" << s.k << ")"; },
                 [&](const ExplicitSignal& e) { os << "explicit(p=" << e.beta.size() << ")"; },
             },
             spec);
  return os.str();
}

std::size_t spike_count(const CovarianceSpec& spec) {
  if (std::holds_alternative<SingleSpike>(spec)) return 1;
  if (const auto* m = std::get_if<MultiSpike>(&spec)) return m->strengths.size();
  return 0;
}

Vector covariance_diagonal(const CovarianceSpec& spec, Eigen::Index p) {
  if (p <= 0) fail(ErrorCode::InvalidSpec, "dimension must be positive");
  return std::visit(
      overloaded{
          [&](const Identity&) -> Vector { return Vector::Ones(p); },
          [&](const SingleSpike& s) -> Vector {
            check_spikes({s.strength}, p);
            Vector d = Vector::Ones(p);
            d(0) = s.strength;
            return d;
          },
          [&](const MultiSpike& m) -> Vector {
            check_spikes(m.strengths, p);
            Vector d = Vector::Ones(p);
            for (std::size_t j = 0; j < m.strengths.size(); ++j) d(static_cast<Eigen::Index>(j)) = m.strengths[j];
            return d;
          },
          [&](const PowerLawDiagonal&) -> Vector {
            Vector d(p);
            for (Eigen::Index i = 0; i < p; ++i) d(i) = 1.0 / static_cast<double>(i + 1);
            return d;
          },
          [&](const ExplicitDiagonal& e) -> Vector {
            if (e.values.size() != p) fail(ErrorCode::InvalidSpec, "explicit diagonal length differs from p");
            if (!e.values.allFinite() || (e.values.array() <= 0.0).any()) {
              fail(ErrorCode::InvalidSpec, "explicit diagonal entries must be positive and finite");
            }
            return e.values;
          },
          [&](const ExplicitDense& e) -> Vector {
            if (e.matrix.rows() != p || e.matrix.cols() != p) {
              fail(ErrorCode::InvalidSpec, "explicit dense covariance has the wrong shape");
            }
            const Matrix off = e.matrix - Matrix(e.matrix.diagonal().asDiagonal());
            if (off.cwiseAbs().sum() >= 1e-12) {
              fail(ErrorCode::InvalidSpec, "dense covariance is not diagonal in the standard basis");
            }
            Vector d = e.matrix.diagonal();
            if ((d.array() <= 0.0).any()) fail(ErrorCode::InvalidSpec, "covariance is not positive definite");
            return d;
          },
      },
      spec);
}

Covariance build_covariance(const CovarianceSpec& spec, Eigen::Index p) {
  Covariance out;
  if (const auto* dense = std::get_if<ExplicitDense>(&spec)) {
    if (dense->matrix.rows() != p || dense->matrix.cols() != p) {
      fail(ErrorCode::InvalidSpec, "explicit dense covariance has the wrong shape");
    }
    try {
      out.eigen = numerics::sym_eigendecomposition(dense->matrix);
    } catch (const Error& e) {
      fail(ErrorCode::InvalidSpec, std::string("explicit covariance rejected: ") + e.what());
    }
    out.matrix = 0.5 * (dense->matrix + dense->matrix.transpose());
    const Matrix off = out.matrix - Matrix(out.matrix.diagonal().asDiagonal());
    out.shared_eigenbasis = off.cwiseAbs().sum() < 1e-12;
  } else {
    const Vector d = covariance_diagonal(spec, p);
    out.matrix = d.asDiagonal();
    out.eigen = numerics::sym_eigendecomposition(out.matrix);
    out.shared_eigenbasis = true;
  }

  const double lo = out.eigen.values(p - 1);
  const double hi = out.eigen.values(0);
  if (!(lo > kEigenFloor)) {
    std::ostringstream os;
    os << "smallest eigenvalue " << lo << " is not above " << kEigenFloor;
    fail(ErrorCode::InvalidSpec, os.str());
  }
  if (std::holds_alternative<PowerLawDiagonal>(spec)) {
    std::ostringstream os;
    os << "power-law covariance has lambda_min = 1/p = " << lo << "; conditioning degrades with p";
    out.warnings.push_back(os.str());
  } else if (hi / lo > kConditionWarn) {
    std::ostringstream os;
    os << "covariance condition number " << hi / lo << " exceeds " << kConditionWarn;
    out.warnings.push_back(os.str());
  }
  return out;
}

Vector build_signal(const SignalSpec& spec, const numerics::SymEigen& cov_eigen, Eigen::Index p) {
  if (cov_eigen.values.size() != p || cov_eigen.vectors.rows() != p) {
    fail(ErrorCode::InvalidSpec, "eigenstructure dimension differs from p");
  }
  // A spike subspace of size k exists when eigenvalue k-1 strictly exceeds eigenvalue k.
  auto require_spike_gap = [&](std::size_t k) {
    const auto kk = static_cast<Eigen::Index>(k);
    if (kk == 0 || kk >= p || !(cov_eigen.values(kk - 1) > cov_eigen.values(kk))) {
      std::ostringstream os;
      os << "signal needs " << k << " spike direction(s) separated from the bulk";
      fail(ErrorCode::InvalidSpec, os.str());
    }
  };
  return std::visit(overloaded{
                        [&](const SpikeAligned& s) -> Vector {
                          require_spike_gap(1);
                          return s.r * cov_eigen.vectors.col(0);
                        },
                        [&](const MultiSpikeCoeffs& m) -> Vector {
                          require_spike_gap(m.r.size());
                          Vector beta = Vector::Zero(p);
                          for (std::size_t j = 0; j < m.r.size(); ++j) {
                            beta += m.r[j] * cov_eigen.vectors.col(static_cast<Eigen::Index>(j));
                          }
                          return beta;
                        },
                        [&](const SparseOnes& s) -> Vector {
                          if (s.k <= 0 || s.k > p) fail(ErrorCode::InvalidSpec, "sparse support must satisfy 1 <= k <= p");
                          Vector beta = Vector::Zero(p);
                          beta.head(s.k).setOnes();
                          return beta;
                        },
                        [&](const ExplicitSignal& e) -> Vector {
                          if (e.beta.size() != p) fail(ErrorCode::InvalidSpec, "explicit signal length differs from p");
                          if (!e.beta.allFinite()) fail(ErrorCode::InvalidSpec, "explicit signal is not finite");
                          return e.beta;
                        },
                    },
                    spec);
}

Vector build_signal(const SignalSpec& spec, const CovarianceSpec& cov, Eigen::Index p) {
  const std::size_t k = spike_count(cov);
  auto require_spikes = [&](std::size_t needed) {
    if (k == 0 || needed != k) {
      std::ostringstream os;
      os << "signal needs " << needed << " spike(s) but covariance " << describe(cov) << " has " << k;
      fail(ErrorCode::InvalidSpec, os.str());
    }
  };
  if (const auto* s = std::get_if<SpikeAligned>(&spec)) {
    if (k == 0) fail(ErrorCode::InvalidSpec, "spike-aligned signal requires a spiked covariance");
    Vector beta = Vector::Zero(p);
    beta(0) = s->r;
    return beta;
  }
  if (const auto* m = std::get_if<MultiSpikeCoeffs>(&spec)) {
    require_spikes(m->r.size());
    Vector beta = Vector::Zero(p);
    for (std::size_t j = 0; j < m->r.size(); ++j) beta(static_cast<Eigen::Index>(j)) = m->r[j];
    return beta;
  }
  if (const auto* s = std::get_if<SparseOnes>(&spec)) {
    if (s->k <= 0 || s->k > p) fail(ErrorCode::InvalidSpec, "sparse support must satisfy 1 <= k <= p");
    Vector beta = Vector::Zero(p);
    beta.head(s->k).setOnes();
    return beta;
  }
  const auto& e = std::get<ExplicitSignal>(spec);
  if (e.beta.size() != p) fail(ErrorCode::InvalidSpec, "explicit signal length differs from p");
  return e.beta;
}

GaussianDesign::GaussianDesign(const Matrix& cov) : cov_(cov) {
  sqrt_ = numerics::psd_sqrt(cov);
  diagonal_ = numerics::is_diagonal(sqrt_);
  if (diagonal_) diag_sqrt_ = sqrt_.diagonal();
}

Matrix GaussianDesign::sample(Eigen::Index n, std::mt19937_64& engine) const {
  if (n <= 0) fail(ErrorCode::DimensionMismatch, "row count must be positive");
  Matrix z = numerics::standard_normal(n, dim(), engine);
  if (diagonal_) {
    z *= diag_sqrt_.asDiagonal();
    return z;
  }
  return z * sqrt_;
}

Dataset generate_initial_data(const GaussianDesign& design, const Vector& beta, Eigen::Index n,
                              double noise_variance, const numerics::RngHandle& rng) {
  if (beta.size() != design.dim()) {
    fail(ErrorCode::DimensionMismatch, "signal length differs from covariance dimension");
  }
  if (!(noise_variance >= 0.0)) fail(ErrorCode::InvalidParams, "noise variance must be nonnegative");
  auto engine = rng.engine();
  Dataset data;
  data.features = design.sample(n, engine);
  data.labels = data.features * beta;
  data.noise_variance = noise_variance;
  if (noise_variance > 0.0) {
    std::normal_distribution<double> normal(0.0, std::sqrt(noise_variance));
    for (Eigen::Index i = 0; i < n; ++i) data.labels(i) += normal(engine);
  }
  return data;
}

Dataset generate_initial_data(const Matrix& cov, const Vector& beta, Eigen::Index n,
                              double noise_variance, const numerics::RngHandle& rng) {
  return generate_initial_data(GaussianDesign(cov), beta, n, noise_variance, rng);
}

Matrix generate_fresh_features(const GaussianDesign& design, Eigen::Index n_t,
                               const numerics::RngHandle& rng) {
  auto engine = rng.engine();
  return design.sample(n_t, engine);
}

Matrix generate_fresh_features(const Matrix& cov, Eigen::Index n_t, const numerics::RngHandle& rng) {
  return generate_fresh_features(GaussianDesign(cov), n_t, rng);
}

Matrix random_orthogonal(Eigen::Index p, const numerics::RngHandle& rng) {
  auto engine = rng.engine();
  const Matrix z = numerics::standard_normal(p, p, engine);
  Eigen::HouseholderQR<Matrix> qr(z);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < p; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

}  // namespace stlab::model
