#include "helpers.hpp"

using namespace stlab;
using namespace stlab::numerics;
using testing::max_abs;

TEST_CASE("sym_eigendecomposition: identity, diagonal, spiked") {
  auto id = sym_eigendecomposition(Matrix::Identity(3, 3));
  CHECK(max_abs(id.values - Vector::Ones(3)) == 0.0);

  Matrix d = Eigen::Vector2d(1.0, 3.0).asDiagonal();
  auto e = sym_eigendecomposition(d);
  CHECK(e.values(0) == 3.0);
  CHECK(e.values(1) == 1.0);
  CHECK(std::abs(e.vectors(1, 0)) == 1.0);
  CHECK(std::abs(e.vectors(0, 1)) == 1.0);

  Matrix s = Matrix::Identity(4, 4);
  s(0, 0) += 24.0;
  auto se = sym_eigendecomposition(s);
  CHECK(se.values(0) == doctest::Approx(25.0));
  for (int i = 1; i < 4; ++i) CHECK(se.values(i) == doctest::Approx(1.0));
}

TEST_CASE("sym_eigendecomposition: orthonormal and reconstructs random input") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix m = testing::random_psd(12, seed) - Matrix::Identity(12, 12);
    const auto e = sym_eigendecomposition(m);
    CHECK(max_abs(e.vectors.transpose() * e.vectors - Matrix::Identity(12, 12)) < 1e-8);
    CHECK(max_abs(e.vectors * e.values.asDiagonal() * e.vectors.transpose() - m) < 1e-8 * max_abs(m));
    for (int i = 1; i < 12; ++i) CHECK(e.values(i - 1) >= e.values(i));
  }
}

TEST_CASE("sym_eigendecomposition rejects asymmetric input") {
  Matrix m = Matrix::Identity(2, 2);
  m(0, 1) = 1e-3;
  CHECK(testing::code_of([&] { sym_eigendecomposition(m); }) == ErrorCode::NonSymmetric);
}

TEST_CASE("pseudoinverse examples") {
  Matrix a(2, 2);
  a << 2, 1, 1, 3;
  CHECK(max_abs(pseudoinverse(a) - a.inverse()) < 1e-12);
  CHECK(max_abs(pseudoinverse(Matrix::Zero(3, 2))) == 0.0);
  CHECK(pseudoinverse(Matrix::Zero(3, 2)).rows() == 2);

  Vector u = Eigen::Vector3d(1, 2, 2) / 3.0;
  Vector v = Eigen::Vector2d(3, 4) / 5.0;
  const Matrix r1 = u * v.transpose();
  CHECK(max_abs(pseudoinverse(r1) - v * u.transpose()) < 1e-12);
  CHECK(testing::code_of([&] { pseudoinverse(a, 0.0); }) == ErrorCode::InvalidParams);
}

TEST_CASE("Penrose identities on random rank-deficient matrices") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::Index r = 1 + static_cast<Eigen::Index>(seed % 5);
    const Matrix m = testing::random_matrix(9, r, seed) * testing::random_matrix(r, 7, seed + 100);
    const Matrix p = pseudoinverse(m);
    const double tol = 1e-8 * std::max(1.0, m.norm());
    CHECK(max_abs(m * p * m - m) < tol);
    CHECK(max_abs(p * m * p - p) < tol * std::max(1.0, p.norm()));
    CHECK(max_abs((m * p).transpose() - m * p) < tol);
    CHECK(max_abs((p * m).transpose() - p * m) < tol);
  }
}

TEST_CASE("psd_sqrt examples and property") {
  CHECK(max_abs(psd_sqrt(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)) == 0.0);
  Matrix d = Eigen::Vector2d(4, 9).asDiagonal();
  Matrix expected = Eigen::Vector2d(2, 3).asDiagonal();
  CHECK(max_abs(psd_sqrt(d) - expected) < 1e-15);

  Matrix s = Matrix::Identity(3, 3);
  s(0, 0) = 25.0;
  const auto e = sym_eigendecomposition(psd_sqrt(s));
  CHECK(e.values(0) == doctest::Approx(5.0));
  CHECK(e.values(2) == doctest::Approx(1.0));

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Eigen::Index p = 2 + static_cast<Eigen::Index>(seed * 5);
    const Matrix m = testing::random_psd(p, seed);
    const Matrix r = psd_sqrt(m);
    CHECK(max_abs(r - r.transpose()) < 1e-12);
    CHECK(max_abs(r * r - m) < 1e-8 * m.norm());
  }

  Matrix bad = Matrix::Identity(2, 2);
  bad(1, 1) = -0.5;
  CHECK(testing::code_of([&] { psd_sqrt(bad); }) == ErrorCode::NotPSD);
}

TEST_CASE("sample_gaussian_rows: zero, determinism, covariance") {
  const RngHandle rng = seeded_rng(3, 0);
  CHECK(max_abs(sample_gaussian_rows(Matrix::Zero(2, 2), 4, rng)) == 0.0);
  CHECK(sample_gaussian_rows(Matrix::Identity(2, 2), 2, rng) == sample_gaussian_rows(Matrix::Identity(2, 2), 2, rng));

  Matrix sq = Eigen::Vector2d(2, 1).asDiagonal();
  const Matrix x = sample_gaussian_rows(sq, 50000, seeded_rng(11, 4));
  const Matrix cov = x.transpose() * x / 50000.0;
  CHECK(cov(0, 0) == doctest::Approx(4.0).epsilon(0.05));
  CHECK(cov(1, 1) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(std::abs(cov(0, 1)) < 0.05);

  CHECK(testing::code_of([&] { sample_gaussian_rows(Matrix::Identity(2, 3), 2, rng); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("sampled covariance within 5% in operator norm for p <= 5") {
  for (Eigen::Index p = 1; p <= 5; ++p) {
    const Matrix target = testing::random_psd(p, static_cast<std::uint64_t>(p)) + Matrix::Identity(p, p);
    const Matrix x = sample_gaussian_rows(psd_sqrt(target), 100000, seeded_rng(static_cast<std::uint64_t>(p), 1));
    const Matrix cov = x.transpose() * x / 100000.0;
    const double op = Eigen::JacobiSVD<Matrix>(cov - target).singularValues()(0);
    const double scale = Eigen::JacobiSVD<Matrix>(target).singularValues()(0);
    CHECK(op < 0.05 * scale);
  }
}

TEST_CASE("seeded_rng streams") {
  CHECK(seeded_rng(0, 0).engine()() == seeded_rng(0, 0).engine()());
  auto a = seeded_rng(0, 0).engine();
  auto b = seeded_rng(0, 1).engine();
  int same = 0;
  for (int i = 0; i < 1000; ++i) same += a() == b();
  CHECK(same == 0);
  // Fixed draw keeps the stream layout stable across builds and runs.
  auto c = seeded_rng(7, 3).engine();
  const auto first = c();
  auto c2 = seeded_rng(7, 3).engine();
  CHECK(first == c2());
}
