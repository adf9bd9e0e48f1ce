#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "protoclue/core.hpp"

namespace testing {

inline protoclue::Vec random_vec(std::mt19937_64& rng, std::size_t n, double sigma = 1.0) {
  std::normal_distribution<double> d(0.0, sigma);
  protoclue::Vec v(n);
  for (double& x : v) x = d(rng);
  return v;
}

inline protoclue::Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c,
                                       double sigma = 1.0) {
  protoclue::Matrix m(r, c);
  std::normal_distribution<double> d(0.0, sigma);
  for (double& x : m.data()) x = d(rng);
  return m;
}

/// ||a - b|| / max(||a||, ||b||, floor): relative error of a whole gradient.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b,
                             double floor = 1e-8) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

}  // namespace testing
