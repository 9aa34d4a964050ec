#pragma once

#include <complex>
#include <vector>

#include "phl/matrix.hpp"

/// Dense kernels for small matrices: factorizations, fixed-point solvers for
/// the Lyapunov and Riccati equations, eigenvalues, and Kronecker/vec tools.
namespace phl::numerics {

struct SolverOptions {
  double tolerance = 1e-12;
  int max_iterations = 10000;
};

/// Solves Sigma = A Sigma A^T + Q by doubling. Requires rho(A) < 1 - 1e-9.
Matrix solve_lyapunov(const Matrix& a, const Matrix& q, const SolverOptions& opts = {});

struct RiccatiSolution {
  Matrix s;  ///< stabilizing solution of the filter Riccati equation
  Matrix k;  ///< predictor gain A S C^T (C S C^T + R)^-1
};

/// Filter-form DARE S = A S A^T - A S C^T (C S C^T + R)^-1 C S A^T + Q,
/// solved with the structure-preserving doubling iteration.
RiccatiSolution solve_dare(const Matrix& a, const Matrix& c, const Matrix& q,
                           const Matrix& r, const SolverOptions& opts = {});

/// Residual of the filter DARE at s, in Frobenius norm.
double dare_residual(const Matrix& a, const Matrix& c, const Matrix& q, const Matrix& r,
                     const Matrix& s);

struct SymmetricEigen {
  std::vector<double> values;  ///< ascending
  Matrix vectors;              ///< columns are eigenvectors
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
SymmetricEigen symmetric_eigen(const Matrix& s);

/// Symmetric PSD square root; eigenvalues down to -1e-12 (relative) are clamped.
Matrix psd_sqrt(const Matrix& p);

/// Eigenvalues via Householder Hessenberg reduction and shifted QR.
std::vector<std::complex<double>> eigenvalues(const Matrix& a);
double spectral_radius(const Matrix& a);

Matrix cholesky(const Matrix& spd);
/// Solves spd * X = rhs given a symmetric positive definite matrix.
Matrix solve_spd(const Matrix& spd, const Matrix& rhs);
/// LU with partial pivoting; SingularMatrix when a pivot underflows.
Matrix solve(const Matrix& a, const Matrix& rhs);
Matrix inverse(const Matrix& a);

/// Condition number (2-norm) of a symmetric PSD matrix; +inf when singular.
double spd_condition(const Matrix& s);

/// Least squares y = G z over samples stored as rows of `targets` and
/// `regressors`; solved through a Cholesky factor of the Gram matrix.
Matrix lstsq(const Matrix& targets, const Matrix& regressors);

/// Solves G * gram = cross for G, i.e. G = cross * gram^-1, as used by
/// lstsq once the moments are accumulated. SingularGram when the
/// Gram condition number exceeds 1e12.
Matrix solve_normal_equations(const Matrix& gram, const Matrix& cross);

Matrix kron(const Matrix& a, const Matrix& b);
/// Column-stacking vectorization.
Matrix vec(const Matrix& a);
/// n x n matrix with ones on the first subdiagonal.
Matrix downshift(std::size_t n);
/// d^2 x d^2 commutation matrix K with K vec(M) = vec(M^T).
Matrix commutation(std::size_t d);

}  // namespace phl::numerics
