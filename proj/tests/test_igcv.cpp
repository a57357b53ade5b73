#include <cmath>

#include "helpers.hpp"
#include "stlab/igcv.hpp"
#include "stlab/model.hpp"
#include "stlab/selftrain.hpp"

using namespace stlab;
using namespace stlab::igcv;
using testing::code_of;
using testing::max_abs;

namespace {

struct Instance {
  Matrix cov;
  Vector beta;
  model::Dataset data;
};

Instance make(Eigen::Index n, Eigen::Index p, double sigma2, std::uint64_t seed, Eigen::Index k = 10) {
  Instance in;
  in.cov = model::build_covariance(model::PowerLawDiagonal{}, p).matrix;
  in.beta = Vector::Zero(p);
  in.beta.head(std::min(k, p)).setOnes();
  in.data = model::generate_initial_data(in.cov, in.beta, n, sigma2, numerics::seeded_rng(seed, 0));
  return in;
}

Matrix trajectory_operator(const Instance& in, double lambda, int t, std::uint64_t seed) {
  const auto fit = selftrain::FitConfig::uniform(lambda, in.data.features.rows(), t);
  return selftrain::self_train_trajectory(in.data, in.cov, fit, numerics::seeded_rng(seed, 0))
      .cumulative_operators.back();
}

}  // namespace

TEST_CASE("leverage multiplier vanishes for A = 0") {
  const auto in = make(40, 60, 1.0, 1);
  const Vector b0 = selftrain::ridge_fit(in.data.features, in.data.labels, 0.1);
  const Matrix zero = Matrix::Zero(60, 60);
  CHECK(leverage_multiplier({in.data.features, in.data.labels, b0, zero, 0.1}) == 0.0);
  const double v = igcv_estimate({in.data.features, in.data.labels, b0, zero, 0.1});
  CHECK(v == doctest::Approx(in.data.labels.squaredNorm() / 40.0).epsilon(1e-12));
}

TEST_CASE("A = I recovers classical GCV") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Eigen::Index p = 5 + static_cast<Eigen::Index>(seed);
    const auto in = make(30, p, 1.0, seed, 3);
    const double lambda = 0.01 * static_cast<double>(seed + 1);
    const Matrix& x = in.data.features;
    const Vector b0 = selftrain::ridge_fit(x, in.data.labels, lambda);
    Matrix s = x.transpose() * x / 30.0;
    s.diagonal().array() += lambda;
    const Matrix h = x * s.inverse() * x.transpose() / 30.0;
    const Vector r = in.data.labels - x * b0;
    const double classical = (r / (1.0 - h.trace() / 30.0)).squaredNorm() / 30.0;
    const Matrix id = Matrix::Identity(p, p);
    CHECK(std::abs(igcv_estimate({x, in.data.labels, b0, id, lambda}) - classical) < 1e-10 * classical);
    const GcvContext ctx(x, in.data.labels, lambda);
    CHECK(std::abs(ctx.value(id) - classical) < 1e-10 * classical);
  }
}

TEST_CASE("denominator is linear in lambda for p > n0") {
  const auto in = make(30, 70, 1.0, 3);
  const Matrix& x = in.data.features;
  const Matrix g = x * x.transpose() / 30.0;
  const double slope = g.inverse().trace() / 30.0;
  const Matrix id = Matrix::Identity(70, 70);
  for (double lambda : {1e-2, 1e-4, 1e-6}) {
    const Vector b0 = selftrain::ridge_fit(x, in.data.labels, lambda);
    const double den = 1.0 / (1.0 + leverage_multiplier({x, in.data.labels, b0, id, lambda}));
    const double exact = lambda * (g + lambda * Matrix::Identity(30, 30)).inverse().trace() / 30.0;
    CHECK(den == doctest::Approx(exact).epsilon(1e-6));
    if (lambda <= 1e-4) CHECK(den / lambda == doctest::Approx(slope).epsilon(1e-2));
  }
  CHECK(code_of([&] {
          const Vector b0 = selftrain::ridge_fit(x, in.data.labels, 1e-14);
          leverage_multiplier({x, in.data.labels, b0, id, 1e-14});
        }) == ErrorCode::DegenerateDenominator);
  CHECK(code_of([&] {
          const Vector b0 = Vector::Zero(70);
          leverage_multiplier({x, in.data.labels, b0, id, 0.0});
        }) == ErrorCode::InvalidParams);
}

TEST_CASE("ridgeless iGCV is the small-lambda limit") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto in = make(40, 80, 1.0, seed);
    const Matrix a = trajectory_operator(in, 0.0, 1 + static_cast<int>(seed % 3), seed);
    const Vector b0 = selftrain::ridge_fit(in.data.features, in.data.labels, 1e-8);
    const double small = igcv_estimate({in.data.features, in.data.labels, b0, a, 1e-8});
    const double limit = igcv_ridgeless(in.data.features, in.data.labels, a);
    CHECK(std::abs(limit - small) <= 1e-3 * (1.0 + limit));
    CHECK(std::abs(GcvContext(in.data.features, in.data.labels, 0.0).value(a) - limit) < 1e-9 * (1.0 + limit));
  }
  const auto in = make(40, 80, 1.0, 11);
  const double at_identity = igcv_ridgeless(in.data.features, in.data.labels, Matrix::Identity(80, 80));
  CHECK(std::isfinite(at_identity));
  CHECK(at_identity > 0.0);

  const auto tall = make(40, 20, 1.0, 12);
  CHECK(code_of([&] { igcv_ridgeless(tall.data.features, tall.data.labels, Matrix::Identity(20, 20)); }) ==
        ErrorCode::RankDeficient);
}

TEST_CASE("context and direct evaluation agree") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const bool wide = seed % 2 == 0;
    const auto in = make(30, wide ? 50 : 20, 1.0, seed);
    const double lambda = 0.05;
    const Matrix a = trajectory_operator(in, lambda, 3, seed);
    const GcvContext ctx(in.data.features, in.data.labels, lambda);
    CHECK(max_abs(ctx.beta0() - selftrain::ridge_fit(in.data.features, in.data.labels, lambda)) < 1e-8);
    const double direct = igcv_estimate({in.data.features, in.data.labels, ctx.beta0(), a, lambda});
    CHECK(ctx.value(a) == doctest::Approx(direct).epsilon(1e-9));
    CHECK(ctx.value(a * ctx.beta0(), a * ctx.probe()) == doctest::Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("tall ridgeless context uses the least-squares leverage") {
  const auto in = make(60, 20, 1.0, 4);
  const Matrix& x = in.data.features;
  const GcvContext ctx(x, in.data.labels, 0.0);
  const Vector r = in.data.labels - x * ctx.beta0();
  const double classical = (r / (1.0 - 20.0 / 60.0)).squaredNorm() / 60.0;
  CHECK(ctx.value(Matrix::Identity(20, 20)) == doctest::Approx(classical).epsilon(1e-10));
  const double near = GcvContext(x, in.data.labels, 1e-10).value(Matrix::Identity(20, 20));
  CHECK(near == doctest::Approx(classical).epsilon(1e-6));
}

TEST_CASE("iGCV tracks risk plus noise for a null signal") {
  const Eigen::Index n = 300, p = 600;
  Instance in;
  in.cov = Matrix::Identity(p, p);
  in.beta = Vector::Zero(p);
  in.data = model::generate_initial_data(in.cov, in.beta, n, 1.0, numerics::seeded_rng(8, 0));
  const auto fit = selftrain::FitConfig::uniform(0.0, n, 3);
  const auto traj = selftrain::self_train_trajectory(in.data, in.cov, fit, numerics::seeded_rng(8, 0));
  const GcvContext ctx(in.data.features, in.data.labels, 0.0);
  for (std::size_t t = 0; t <= 3; ++t) {
    const double risk = selftrain::prediction_risk(traj.estimates[t], in.beta, in.cov);
    CHECK(ctx.value(traj.cumulative_operators[t]) == doctest::Approx(risk + 1.0).epsilon(0.1));
  }
}

TEST_CASE("igcv_profile") {
  const auto in = make(40, 60, 1.0, 5);
  const model::GaussianDesign design(in.cov);
  const auto fit = selftrain::FitConfig::uniform(0.0, 40, 4);
  const auto rng = numerics::seeded_rng(5, 0);

  const std::vector<double> single{0.02};
  const auto one = igcv_profile(in.data, design, fit, single, rng);
  REQUIRE(one.values.size() == 1);
  CHECK(one.values[0].size() == 5);
  CHECK(one.best_lambda == 0.02);
  for (double v : one.values[0]) CHECK(v >= 0.0);

  const auto grid = default_lambda_grid();
  CHECK(grid.size() == 21);
  CHECK(grid.front() == 0.0);
  CHECK(grid[1] == doctest::Approx(1e-6));
  CHECK(grid.back() == doctest::Approx(1.0));
  const auto prof = igcv_profile(in.data, design, fit, grid, rng);
  double best = prof.values[0][0];
  for (const auto& row : prof.values) {
    for (double v : row) {
      CHECK(v >= 0.0);
      best = std::min(best, v);
    }
  }
  CHECK(prof.best_value == best);

  // Each lambda column matches a standalone evaluation on the same streams.
  const auto sched = selftrain::FitConfig::uniform(grid[5], 40, 4);
  const auto traj = selftrain::self_train_trajectory(in.data, in.cov, sched, rng);
  const GcvContext ctx(in.data.features, in.data.labels, grid[5]);
  for (std::size_t t = 0; t <= 4; ++t) {
    CHECK(prof.values[5][t] == doctest::Approx(ctx.value(traj.cumulative_operators[t])).epsilon(1e-9));
  }

  // Duplicate grid values tie; the smaller t and then the smaller lambda win.
  const std::vector<double> dup{0.5, 0.1, 0.1, 0.5};
  const auto tied = igcv_profile(in.data, design, fit, dup, rng);
  CHECK(tied.values[1] == tied.values[2]);
  CHECK(tied.best_value == std::min(tied.values[0][tied.best_t], tied.values[1][tied.best_t]));
  for (std::size_t i = 0; i < dup.size(); ++i) {
    for (std::size_t t = 0; t < tied.best_t; ++t) CHECK(tied.values[i][t] > tied.best_value);
  }

  const std::vector<double> empty;
  CHECK(code_of([&] { igcv_profile(in.data, design, fit, empty, rng); }) == ErrorCode::InvalidParams);
}

TEST_CASE("noiseless identified data selects t = 0") {
  const auto in = make(60, 20, 0.0, 6);
  const model::GaussianDesign design(in.cov);
  const auto fit = selftrain::FitConfig::uniform(0.0, 60, 3);
  const std::vector<double> grid{0.0, 1e-4, 1e-2};
  const auto prof = igcv_profile(in.data, design, fit, grid, numerics::seeded_rng(6, 0));
  CHECK(prof.best_t == 0);
  CHECK(prof.best_lambda == 0.0);
  CHECK(prof.best_value < 1e-20);
}
