#include "helpers.hpp"
#include "stlab/model.hpp"
#include "stlab/selftrain.hpp"

using namespace stlab;
using namespace stlab::selftrain;
using testing::code_of;
using testing::max_abs;

TEST_CASE("ridge_fit examples") {
  const Vector y = Vector::LinSpaced(4, 1.0, 4.0);
  CHECK(max_abs(ridge_fit(Matrix::Identity(4, 4), y, 0.0) - y) < 1e-12);

  const Matrix x = testing::random_matrix(5, 8, 1);
  for (double lambda : {0.0, 0.1, 10.0}) CHECK(max_abs(ridge_fit(x, Vector::Zero(5), lambda)) == 0.0);

  Matrix row(1, 2);
  row << 1, 0;
  const Vector b = ridge_fit(row, Vector::Constant(1, 2.0), 0.0);
  CHECK(b(0) == doctest::Approx(2.0));
  CHECK(std::abs(b(1)) < 1e-14);
}

TEST_CASE("ridge_fit matches the normal equations") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Eigen::Index n = 6 + static_cast<Eigen::Index>(seed);
    const Matrix x = testing::random_matrix(n, 9, seed);
    const Vector y = testing::random_matrix(n, 1, seed + 50).col(0);
    const double lambda = 0.05 * static_cast<double>(seed + 1);
    Matrix s = x.transpose() * x;
    s.diagonal().array() += static_cast<double>(n) * lambda;
    const Vector ref = s.ldlt().solve(x.transpose() * y);
    CHECK(max_abs(ridge_fit(x, y, lambda) - ref) < 1e-10);
  }
}

TEST_CASE("ridgeless fit interpolates and has minimum norm") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix x = testing::random_matrix(10, 25, seed);
    const Vector y = testing::random_matrix(10, 1, seed + 7).col(0);
    const Vector b = ridge_fit(x, y, 0.0);
    CHECK((y - x * b).norm() <= 1e-6 * y.norm());
    CHECK(max_abs(b - numerics::pseudoinverse(x) * y) < 1e-10);
  }
}

TEST_CASE("update_operator examples") {
  const Matrix tall = testing::random_matrix(12, 5, 3);
  CHECK(max_abs(update_operator(tall, 0.0) - Matrix::Identity(5, 5)) < 1e-8);

  Matrix e1 = Matrix::Zero(1, 4);
  e1(0, 0) = 1.0;
  Matrix proj = Matrix::Zero(4, 4);
  proj(0, 0) = 1.0;
  CHECK(max_abs(update_operator(e1, 0.0) - proj) < 1e-12);

  const Matrix wide = testing::random_matrix(4, 9, 8);
  const Matrix big = update_operator(wide, 1e6);
  CHECK(Eigen::JacobiSVD<Matrix>(big).singularValues()(0) < 1e-4);

  CHECK(code_of([&] { update_operator(wide, -1.0); }) == ErrorCode::InvalidParams);
}

TEST_CASE("update_operator matches its defining formula") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    for (auto [n, p] : {std::pair<Eigen::Index, Eigen::Index>{4, 9}, {9, 4}}) {
      const Matrix x = testing::random_matrix(n, p, seed);
      const double lambda = seed == 0 ? 0.0 : 0.1 * static_cast<double>(seed);
      Matrix s = x.transpose() * x;
      const Matrix xtx = s;
      s.diagonal().array() += static_cast<double>(n) * lambda;
      const Matrix ref = numerics::pseudoinverse(s, 1e-10) * xtx;
      CHECK(max_abs(update_operator(x, lambda) - ref) < 1e-8);
      const UpdateOperator op(x, lambda);
      const Vector v = testing::random_matrix(p, 1, seed + 3).col(0);
      CHECK(max_abs(op.apply(v) - ref * v) < 1e-8);
    }
  }
}

TEST_CASE("ridgeless update is an orthogonal projection") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix p = update_operator(testing::random_matrix(6, 15, seed), 0.0);
    CHECK(max_abs(p * p - p) < 1e-8);
    CHECK(max_abs(p - p.transpose()) < 1e-8);
    CHECK(p.trace() == doctest::Approx(6.0));
  }
}

namespace {

struct Setup {
  Matrix cov;
  Vector beta;
  model::Dataset data;
};

Setup spiked_setup(Eigen::Index n, Eigen::Index p, double sigma2, std::uint64_t seed) {
  Setup s;
  s.cov = model::build_covariance(model::SingleSpike{5.0}, p).matrix;
  s.beta = Vector::Unit(p, 0);
  s.data = model::generate_initial_data(s.cov, s.beta, n, sigma2, numerics::seeded_rng(seed, 0));
  return s;
}

}  // namespace

TEST_CASE("self_train_trajectory examples") {
  const auto s = spiked_setup(10, 20, 1.0, 4);
  const auto rng = numerics::seeded_rng(4, 0);
  const auto k0 = self_train_trajectory(s.data, s.cov, FitConfig::uniform(0.0, 10, 0), rng);
  CHECK(k0.estimates.size() == 1);
  CHECK(max_abs(k0.estimates[0] - ridge_fit(s.data.features, s.data.labels, 0.0)) < 1e-12);

  const auto tall = spiked_setup(30, 8, 1.0, 5);
  FitConfig fit = FitConfig::uniform(0.0, 30, 5);
  const auto flat = self_train_trajectory(tall.data, tall.cov, fit, numerics::seeded_rng(5, 0));
  for (const auto& b : flat.estimates) CHECK(max_abs(b - flat.estimates[0]) < 1e-8);

  const auto clean = spiked_setup(30, 8, 0.0, 6);
  const auto exact = self_train_trajectory(clean.data, clean.cov, fit, numerics::seeded_rng(6, 0));
  for (const auto& b : exact.estimates) CHECK(max_abs(b - clean.beta) < 1e-8);
}

TEST_CASE("trajectory invariants on random instances") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(seed);
    const auto s = spiked_setup(n, 24, 0.5, seed);
    FitConfig fit = FitConfig::uniform(0.0, n, 6);
    fit.sizes[3] = 30;  // one tall step: identity
    const auto traj = self_train_trajectory(s.data, s.cov, fit, numerics::seeded_rng(seed, 0));
    REQUIRE(traj.cumulative_operators.size() == 7);
    for (std::size_t t = 1; t < traj.estimates.size(); ++t) {
      CHECK(traj.estimates[t].norm() <= traj.estimates[t - 1].norm() + 1e-10);
      CHECK(max_abs(traj.estimates[t] - traj.cumulative_operators[t] * traj.estimates[0]) < 1e-8);
    }
    CHECK(max_abs(traj.estimates[3] - traj.estimates[2]) < 1e-8);

    const Matrix probe = testing::random_matrix(24, 3, seed);
    TrajectoryOptions opts;
    opts.keep_operators = false;
    opts.track = &probe;
    const auto tracked = self_train_trajectory(s.data, s.cov, fit, numerics::seeded_rng(seed, 0), opts);
    CHECK(tracked.cumulative_operators.empty());
    for (std::size_t t = 0; t < tracked.tracked.size(); ++t) {
      CHECK(max_abs(tracked.tracked[t] - traj.cumulative_operators[t] * probe) < 1e-8);
      CHECK(tracked.estimates[t] == traj.estimates[t]);
    }
  }
}

TEST_CASE("prediction risk is rotation invariant") {
  const Eigen::Index p = 12;
  const auto s = spiked_setup(6, p, 1.0, 21);
  const Matrix q = model::random_orthogonal(p, numerics::seeded_rng(21, 9));
  const auto traj = self_train_trajectory(s.data, s.cov, FitConfig::uniform(0.0, 6, 3), numerics::seeded_rng(21, 0));

  model::Dataset rotated = s.data;
  rotated.features = s.data.features * q.transpose();
  const Matrix rcov = q * s.cov * q.transpose();
  const Vector rbeta = q * s.beta;
  // Rotate the per-step designs by refitting with rotated copies of the same draws.
  std::vector<Vector> rotated_estimates{ridge_fit(rotated.features, rotated.labels, 0.0)};
  const model::GaussianDesign design(s.cov);
  for (int t = 1; t <= 3; ++t) {
    auto engine = numerics::seeded_rng(21, 0).with_stream(static_cast<std::uint64_t>(t)).engine();
    const Matrix xt = design.sample(6, engine) * q.transpose();
    rotated_estimates.push_back(UpdateOperator(xt, 0.0).apply(rotated_estimates.back()));
  }
  for (int t = 0; t <= 3; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    CHECK(prediction_risk(rotated_estimates[ut], rbeta, rcov) ==
          doctest::Approx(prediction_risk(traj.estimates[ut], s.beta, s.cov)).epsilon(1e-8));
  }
}

TEST_CASE("prediction_risk examples") {
  const Matrix cov = model::build_covariance(model::SingleSpike{25.0}, 5).matrix;
  const Vector beta = Vector::Unit(5, 0);
  CHECK(prediction_risk(beta, beta, cov) == 0.0);
  CHECK(prediction_risk(Vector::Zero(5), beta, cov) == 25.0);
  CHECK(prediction_risk(Vector::Unit(3, 0), Vector::Zero(3), Matrix::Identity(3, 3)) == 1.0);
  CHECK(prediction_risk_diag(Vector::Zero(5), beta, cov.diagonal()) == 25.0);
  CHECK(code_of([&] { prediction_risk(Vector::Zero(4), beta, cov); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("mc_test_mse examples") {
  const Vector beta = Vector::LinSpaced(3, 1.0, 3.0);
  const auto rng = numerics::seeded_rng(8, 100);
  CHECK(mc_test_mse(beta, beta, Matrix::Identity(3, 3), 100, rng) == 0.0);
  CHECK(mc_test_mse(Vector(beta + Vector::Unit(3, 0)), beta, Matrix::Identity(3, 3), 100000, rng) ==
        doctest::Approx(1.0).epsilon(0.03));
  CHECK(code_of([&] { mc_test_mse(beta, beta, Matrix::Identity(3, 3), 0, rng); }) == ErrorCode::DimensionMismatch);

  // Within three standard errors of the exact risk.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix cov = testing::random_psd(6, seed) + 0.1 * Matrix::Identity(6, 6);
    const Vector d = testing::random_matrix(6, 1, seed + 1).col(0);
    const Matrix x = model::generate_fresh_features(cov, 4000, numerics::seeded_rng(seed, 1));
    const Vector e = (x * d).array().square();
    const double se = std::sqrt((e.array() - e.mean()).square().sum() / (4000.0 * 3999.0));
    CHECK(std::abs(mc_test_mse(x, d, Vector::Zero(6)) - prediction_risk(d, Vector::Zero(6), cov)) < 3.0 * se);
  }
}

TEST_CASE("optimal_ridge_risk examples") {
  const Matrix cov = Matrix::Identity(5, 5);
  const Vector beta = Vector::Ones(5);
  const auto rng = numerics::seeded_rng(3, 0);
  const std::vector<double> grid{1e-8, 1e-4, 1e-1, 1.0};
  const auto clean = optimal_ridge_risk(cov, beta, 40, 0.0, grid, 3, rng);
  CHECK(clean.best_lambda == 1e-8);
  CHECK(clean.best_mean_risk < 1e-10);

  const std::vector<double> one{0.3};
  const auto single = optimal_ridge_risk(cov, beta, 40, 1.0, one, 2, rng);
  CHECK(single.best_lambda == 0.3);
  CHECK(single.mean_risk.size() == 1);

  std::vector<double> wide;
  for (int i = 0; i < 50; ++i) wide.push_back(std::pow(10.0, 2.5 + 1.3 * i / 49.0) / 40.0);
  const auto crossover = optimal_ridge_risk(model::build_covariance(model::SingleSpike{100.0}, 80).matrix,
                                           Vector::Unit(80, 0), 40, 1.0, wide, 2, rng);
  CHECK(std::isfinite(crossover.best_mean_risk));
  CHECK(std::find(wide.begin(), wide.end(), crossover.best_lambda) != wide.end());

  const std::vector<double> empty;
  CHECK(code_of([&] { optimal_ridge_risk(cov, beta, 40, 1.0, empty, 2, rng); }) == ErrorCode::InvalidParams);
}

TEST_CASE("FitConfig validation") {
  FitConfig bad = FitConfig::uniform(0.0, 10, 3);
  bad.lambdas.pop_back();
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidParams);
  FitConfig neg = FitConfig::uniform(-1.0, 10, 1);
  CHECK(code_of([&] { neg.validate(); }) == ErrorCode::InvalidParams);
  FitConfig zero_n = FitConfig::uniform(0.0, 0, 1);
  CHECK(code_of([&] { zero_n.validate(); }) == ErrorCode::InvalidParams);
}
