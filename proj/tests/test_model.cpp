#include "helpers.hpp"
#include "stlab/model.hpp"

using namespace stlab;
using namespace stlab::model;
using testing::code_of;
using testing::max_abs;

TEST_CASE("build_covariance examples") {
  const auto id = build_covariance(Identity{}, 3);
  CHECK(id.matrix == Matrix::Identity(3, 3));
  CHECK(id.eigen.values == Vector::Ones(3));

  const auto sp = build_covariance(SingleSpike{25.0}, 4);
  Matrix expect = Matrix::Identity(4, 4);
  expect(0, 0) = 25.0;
  CHECK(sp.matrix == expect);
  CHECK(sp.eigen.values(0) == 25.0);
  CHECK(std::abs(sp.eigen.vectors(0, 0)) == 1.0);

  const auto pl = build_covariance(PowerLawDiagonal{}, 4);
  CHECK(max_abs(pl.matrix.diagonal() - Eigen::Vector4d(1.0, 0.5, 1.0 / 3.0, 0.25)) == 0.0);
  CHECK(!pl.warnings.empty());

  const auto ms = build_covariance(MultiSpike{{9.0, 4.0}}, 5);
  CHECK(ms.matrix(0, 0) == 9.0);
  CHECK(ms.matrix(1, 1) == 4.0);
  CHECK(ms.matrix(2, 2) == 1.0);
}

TEST_CASE("build_covariance reconstructs from its eigenstructure") {
  std::vector<CovarianceSpec> specs{Identity{}, SingleSpike{7.0}, MultiSpike{{5.0, 3.0, 2.0}},
                                    PowerLawDiagonal{}, ExplicitDiagonal{Vector::LinSpaced(8, 0.5, 4.0)},
                                    ExplicitDense{testing::random_psd(8, 5) + Matrix::Identity(8, 8)}};
  for (const auto& spec : specs) {
    const auto c = build_covariance(spec, 8);
    const Matrix back = c.eigen.vectors * c.eigen.values.asDiagonal() * c.eigen.vectors.transpose();
    CHECK(max_abs(back - c.matrix) < 1e-10 * std::max(1.0, max_abs(c.matrix)));
    const Matrix off = c.matrix - Matrix(c.matrix.diagonal().asDiagonal());
    CHECK(c.shared_eigenbasis == (off.cwiseAbs().sum() < 1e-12));
  }
  CHECK(!build_covariance(specs.back(), 8).shared_eigenbasis);
  CHECK(build_covariance(ExplicitDense{Matrix(Vector::LinSpaced(4, 1.0, 2.0).asDiagonal())}, 4).shared_eigenbasis);
}

TEST_CASE("build_covariance rejects invalid specs") {
  CHECK(code_of([] { build_covariance(SingleSpike{1.0}, 4); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([] { build_covariance(SingleSpike{0.5}, 4); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([] { build_covariance(MultiSpike{{2.0, 3.0}}, 4); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([] { build_covariance(MultiSpike{{3.0, 2.0}}, 2); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([] { build_covariance(Identity{}, 0); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([] { build_covariance(ExplicitDiagonal{Eigen::Vector3d(1, 0, 1)}, 3); }) ==
        ErrorCode::InvalidSpec);
  CHECK(code_of([] { build_covariance(ExplicitDiagonal{Vector::Ones(2)}, 3); }) == ErrorCode::InvalidSpec);
  Matrix indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  CHECK(code_of([&] { build_covariance(ExplicitDense{indefinite}, 2); }) == ErrorCode::InvalidSpec);
  Matrix asym(2, 2);
  asym << 2, 1, 0, 2;
  CHECK(code_of([&] { build_covariance(ExplicitDense{asym}, 2); }) == ErrorCode::InvalidSpec);
}

TEST_CASE("build_signal examples") {
  const auto sp = build_covariance(SingleSpike{25.0}, 4);
  const Vector e1 = build_signal(SpikeAligned{1.0}, sp.eigen, 4);
  CHECK(std::abs(e1(0)) == 1.0);
  CHECK(e1.tail(3).squaredNorm() == 0.0);
  CHECK(build_signal(SpikeAligned{1.0}, CovarianceSpec{SingleSpike{25.0}}, 4) == Vector::Unit(4, 0));

  const auto pl = build_covariance(PowerLawDiagonal{}, 1000);
  CHECK(build_signal(SparseOnes{10}, pl.eigen, 1000).squaredNorm() == 10.0);

  const auto ms = build_covariance(MultiSpike{{9.0, 4.0}}, 5);
  const Vector b = build_signal(MultiSpikeCoeffs{{2.0, 3.0}}, ms.eigen, 5);
  CHECK(max_abs(b.cwiseAbs() - Vector(Eigen::VectorXd::Unit(5, 0) * 2 + Eigen::VectorXd::Unit(5, 1) * 3)) == 0.0);
  CHECK(build_signal(MultiSpikeCoeffs{{2.0, 3.0}}, CovarianceSpec{MultiSpike{{9.0, 4.0}}}, 5) ==
        Vector(2 * Vector::Unit(5, 0) + 3 * Vector::Unit(5, 1)));
}

TEST_CASE("build_signal rejects inconsistent specs") {
  const auto id = build_covariance(Identity{}, 4);
  CHECK(code_of([&] { build_signal(SpikeAligned{1.0}, id.eigen, 4); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([&] { build_signal(SpikeAligned{1.0}, CovarianceSpec{Identity{}}, 4); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([&] { build_signal(SparseOnes{5}, id.eigen, 4); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([&] { build_signal(SparseOnes{0}, id.eigen, 4); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([&] { build_signal(ExplicitSignal{Vector::Ones(3)}, id.eigen, 4); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([&] {
          build_signal(MultiSpikeCoeffs{{1.0, 1.0, 1.0}}, CovarianceSpec{MultiSpike{{9.0, 4.0}}}, 5);
        }) == ErrorCode::InvalidSpec);
}

TEST_CASE("generate_initial_data examples") {
  const Matrix cov = build_covariance(SingleSpike{4.0}, 6).matrix;
  const auto rng = numerics::seeded_rng(5, 0);
  const auto zero = generate_initial_data(cov, Vector::Zero(6), 20, 0.0, rng);
  CHECK(zero.labels == Vector::Zero(20));

  const Vector beta = Vector::LinSpaced(6, -1.0, 1.0);
  const auto clean = generate_initial_data(cov, beta, 20, 0.0, rng);
  CHECK(clean.labels == clean.features * beta);

  const auto noisy = generate_initial_data(Matrix::Identity(2, 2), Vector::Zero(2), 100000, 1.0,
                                           numerics::seeded_rng(6, 0));
  const double mean = noisy.labels.mean();
  const double var = (noisy.labels.array() - mean).square().sum() / (100000.0 - 1.0);
  CHECK(var == doctest::Approx(1.0).epsilon(0.03));

  const auto again = generate_initial_data(cov, beta, 20, 1.0, rng);
  const auto again2 = generate_initial_data(cov, beta, 20, 1.0, rng);
  CHECK(again.features == again2.features);
  CHECK(again.labels == again2.labels);

  CHECK(code_of([&] { generate_initial_data(cov, Vector::Zero(5), 20, 0.0, rng); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("generate_fresh_features: reproducible and close to the covariance") {
  const auto rng = numerics::seeded_rng(9, 2);
  CHECK(generate_fresh_features(Matrix::Identity(3, 3), 10, rng) ==
        generate_fresh_features(Matrix::Identity(3, 3), 10, rng));
  CHECK(generate_fresh_features(Matrix::Identity(3, 3), 10, rng) !=
        generate_fresh_features(Matrix::Identity(3, 3), 10, rng.with_stream(3)));
  const Matrix x = generate_fresh_features(Matrix::Identity(3, 3), 50000, rng);
  const Matrix s = x.transpose() * x / 50000.0;
  CHECK(max_abs(s - Matrix::Identity(3, 3)) < 0.05);
}

TEST_CASE("GaussianDesign diagonal fast path matches the dense path") {
  const Matrix cov = build_covariance(PowerLawDiagonal{}, 7).matrix;
  const GaussianDesign fast(cov);
  CHECK(fast.diagonal());
  auto e1 = numerics::seeded_rng(1, 1).engine();
  auto e2 = numerics::seeded_rng(1, 1).engine();
  const Matrix a = fast.sample(30, e1);
  const Matrix b = numerics::standard_normal(30, 7, e2) * numerics::psd_sqrt(cov);
  CHECK(max_abs(a - b) < 1e-14);
}

TEST_CASE("random_orthogonal is orthogonal") {
  const Matrix q = random_orthogonal(10, numerics::seeded_rng(2, 0));
  CHECK(max_abs(q.transpose() * q - Matrix::Identity(10, 10)) < 1e-12);
}
