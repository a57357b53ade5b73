#pragma once

#include <functional>

#include "doctest.h"
#include "stlab/error.hpp"
#include "stlab/numerics.hpp"

namespace testing {

inline double max_abs(const stlab::Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline stlab::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  auto engine = stlab::numerics::seeded_rng(seed, 99).engine();
  return stlab::numerics::standard_normal(rows, cols, engine);
}

inline stlab::Matrix random_psd(Eigen::Index p, std::uint64_t seed) {
  const stlab::Matrix a = random_matrix(p, p, seed);
  return a * a.transpose() / static_cast<double>(p);
}

inline stlab::ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const stlab::Error& e) {
    return e.code();
  }
  FAIL("expected an stlab::Error");
  return stlab::ErrorCode::IoError;
}

}  // namespace testing
