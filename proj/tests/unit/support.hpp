#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "phl/matrix.hpp"
#include "phl/numerics.hpp"
#include "phl/system.hpp"

namespace phl::testing {

inline Matrix random_matrix(std::mt19937_64& gen, std::size_t r, std::size_t c) {
  std::normal_distribution<double> nd;
  Matrix m(r, c);
  for (double& v : m.data()) v = nd(gen);
  return m;
}

// Random matrix rescaled so its spectral radius equals `rho`.
inline Matrix random_stable(std::mt19937_64& gen, std::size_t n, double rho) {
  Matrix a = random_matrix(gen, n, n);
  const double r = numerics::spectral_radius(a);
  if (r > 0.0) a *= rho / r;
  return a;
}

inline Matrix random_psd(std::mt19937_64& gen, std::size_t n, std::size_t rank) {
  const Matrix f = random_matrix(gen, n, rank);
  return mul_transposed(f, f);
}

// Stable misspecified system, d_x in [2, 4], partial noisy observation.
inline LtiModel random_misspecified(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> dim(2, 4);
  const std::size_t dx = dim(gen);
  const std::size_t dy = dx > 2 ? 2 : 1;
  std::uniform_real_distribution<double> rho(0.3, 0.95);
  return {random_stable(gen, dx, rho(gen)), Matrix(dx, 0), random_matrix(gen, dx, dx),
          random_matrix(gen, dy, dx), random_matrix(gen, dy, dy) + Matrix::identity(dy) * 2.0};
}

inline double max_diff(const Matrix& a, const Matrix& b) { return (a - b).max_abs(); }

// Minimizes a quadratic f over vec(M) from function values only: gradient
// and Hessian by exact second differences with unit steps.
inline double numeric_quadratic_min(const std::function<double(const Matrix&)>& f,
                                    std::size_t r, std::size_t c) {
  const std::size_t n = r * c;
  auto unit = [&](std::size_t i, double s) {
    Matrix m(r, c);
    m.data()[i] = s;
    return m;
  };
  const double f0 = f(Matrix(r, c));
  Matrix g(n, 1), hess(n, n);
  std::vector<double> fp(n);
  for (std::size_t i = 0; i < n; ++i) {
    fp[i] = f(unit(i, 1.0));
    g(i, 0) = 0.5 * (fp[i] - f(unit(i, -1.0)));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Matrix m = unit(i, 1.0);
      m.data()[j] += 1.0;
      hess(i, j) = f(m) - fp[i] - fp[j] + f0;
    }
  }
  const Matrix step = numerics::solve(symmetrize(hess), g);
  Matrix m(r, c);
  for (std::size_t i = 0; i < n; ++i) m.data()[i] = -step(i, 0);
  return f(m);
}

}  // namespace phl::testing
