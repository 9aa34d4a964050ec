#include "phl/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "phl/error.hpp"

namespace phl::numerics {

namespace {

void require_square(const Matrix& m, const char* what) {
  if (!m.is_square()) {
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + " must be square");
  }
}

double scale_of(const Matrix& m) { return std::max(1.0, m.frobenius_norm()); }

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace

Matrix solve_lyapunov(const Matrix& a, const Matrix& q, const SolverOptions& opts) {
  require_square(a, "A");
  if (q.rows() != a.rows() || q.cols() != a.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "Lyapunov: A and Q differ in dimension");
  }
  const double rho = spectral_radius(a);
  if (rho >= 1.0 - 1e-9) {
    throw Error(ErrorKind::UnstableA, "spectral radius " + std::to_string(rho) + " >= 1");
  }

  // Sigma_{k+1} = Sigma_k + A_k Sigma_k A_k^T, A_{k+1} = A_k^2.
  Matrix sigma = symmetrize(q);
  Matrix ak = a;
  bool converged = false;
  for (int it = 0; it < opts.max_iterations; ++it) {
    Matrix inc = congruence(ak, sigma);
    sigma += inc;
    ak = ak * ak;
    const double inc_norm = inc.frobenius_norm();
    if (inc_norm <= opts.tolerance * scale_of(sigma) || ak.max_abs() == 0.0) {
      converged = true;
      break;
    }
  }
  sigma = symmetrize(sigma);
  const double residual = (sigma - congruence(a, sigma) - q).frobenius_norm();
  if (!converged || residual > 1e-10 * scale_of(sigma)) {
    throw Error(ErrorKind::NotConverged,
                "Lyapunov doubling residual " + sci(residual));
  }
  return sigma;
}

namespace {

struct DareTerms {
  double residual;
  double scale;  // largest term of the equation, for a relative test
};

DareTerms dare_terms(const Matrix& a, const Matrix& c, const Matrix& q, const Matrix& r,
                     const Matrix& s) {
  const Matrix innov = congruence(c, s) + r;
  const Matrix csa = c * s * a.transpose();  // C S A^T
  const Matrix correction = csa.transpose() * solve(innov, csa);
  const Matrix asa = congruence(a, s);
  const double scale = std::max({scale_of(s), asa.frobenius_norm(), correction.frobenius_norm(),
                                 q.frobenius_norm()});
  return {(asa - correction + q - s).frobenius_norm(), scale};
}

}  // namespace

double dare_residual(const Matrix& a, const Matrix& c, const Matrix& q, const Matrix& r,
                     const Matrix& s) {
  return dare_terms(a, c, q, r, s).residual;
}

RiccatiSolution solve_dare(const Matrix& a, const Matrix& c, const Matrix& q,
                           const Matrix& r, const SolverOptions& opts) {
  require_square(a, "A");
  require_square(r, "R");
  const std::size_t n = a.rows();
  if (c.cols() != n || r.rows() != c.rows() || q.rows() != n || q.cols() != n) {
    throw Error(ErrorKind::ShapeMismatch, "DARE dimensions are inconsistent");
  }
  if (!(spd_condition(r) < 1e14)) {
    throw Error(ErrorKind::SingularInnovations, "measurement noise covariance is singular");
  }

  // Doubling on the dual (control-form) problem with A -> A^T, B -> C^T:
  // X = A_d^T X (I + G X)^-1 A_d + H, G = C^T R^-1 C, H = Q.
  Matrix ak = a.transpose();
  Matrix gk = symmetrize(c.transpose() * solve(r, c));
  Matrix hk = symmetrize(q);
  const Matrix eye = Matrix::identity(n);
  bool converged = false;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const Matrix w = eye + gk * hk;
    const Matrix w_inv_a = solve(w, ak);
    const Matrix w_inv_g = solve(w, gk);
    Matrix h_next = symmetrize(hk + ak.transpose() * hk * w_inv_a);
    Matrix g_next = symmetrize(gk + ak * w_inv_g * ak.transpose());
    ak = ak * w_inv_a;
    const double change = (h_next - hk).frobenius_norm();
    hk = std::move(h_next);
    gk = std::move(g_next);
    if (!hk.all_finite()) break;
    if (change <= opts.tolerance * scale_of(hk)) {
      converged = true;
      break;
    }
  }
  if (!converged) throw Error(ErrorKind::NotConverged, "Riccati doubling did not converge");

  // A few Riccati fixed-point steps polish the doubling result, which loses
  // digits when C^T R^-1 C is large (nearly noiseless measurements). Near the
  // stabilizing solution the map contracts at rate rho(A - KC)^2.
  for (int it = 0; it < 50; ++it) {
    const Matrix csa = c * hk * a.transpose();
    Matrix next =
        symmetrize(congruence(a, hk) - csa.transpose() * solve(congruence(c, hk) + r, csa) + q);
    const double change = (next - hk).frobenius_norm();
    hk = std::move(next);
    if (change <= 1e-15 * scale_of(hk)) break;
  }

  RiccatiSolution sol;
  sol.s = hk;
  const Matrix innov = congruence(c, sol.s) + r;
  if (!(spd_condition(innov) < 1e14)) {
    throw Error(ErrorKind::SingularInnovations, "C S C^T + R is numerically singular");
  }
  // K = A S C^T innov^-1  <=>  K^T = innov^-1 C S A^T
  sol.k = solve_spd(innov, c * sol.s * a.transpose()).transpose();

  // Relative to the largest term: with nearly noiseless measurements the
  // correction term dwarfs S and cancellation sets the attainable accuracy.
  const DareTerms res = dare_terms(a, c, q, r, sol.s);
  if (res.residual > 1e-10 * res.scale) {
    throw Error(ErrorKind::NotConverged, "Riccati residual " + sci(res.residual));
  }
  if (spectral_radius(a - sol.k * c) >= 1.0) {
    throw Error(ErrorKind::NotConverged, "Riccati solution is not stabilizing");
  }
  return sol;
}

SymmetricEigen symmetric_eigen(const Matrix& s) {
  require_square(s, "symmetric_eigen input");
  const std::size_t n = s.rows();
  Matrix a = symmetrize(s);
  Matrix v = Matrix::identity(n);
  const double total = a.squared_norm();

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off == 0.0 || off <= 1e-32 * total) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

Matrix psd_sqrt(const Matrix& p) {
  require_square(p, "psd_sqrt input");
  const double scale = std::max(1.0, p.max_abs());
  const double asym = (p - p.transpose()).max_abs();
  if (asym > 1e-12 * scale) {
    throw Error(ErrorKind::NotSymmetric, "asymmetry " + std::to_string(asym));
  }
  const SymmetricEigen eig = symmetric_eigen(p);
  const std::size_t n = p.rows();
  Matrix scaled = eig.vectors;
  for (std::size_t k = 0; k < n; ++k) {
    double lambda = eig.values[k];
    if (lambda < -1e-12 * scale) {
      throw Error(ErrorKind::NegativeEigenvalue, "eigenvalue " + std::to_string(lambda));
    }
    const double root = std::sqrt(std::max(lambda, 0.0));
    for (std::size_t i = 0; i < n; ++i) scaled(i, k) *= root;
  }
  return symmetrize(mul_transposed(scaled, eig.vectors));
}

namespace {

// Householder reduction to upper Hessenberg form, in place.
void hessenberg(Matrix& a) {
  const std::size_t n = a.rows();
  if (n < 3) return;
  std::vector<double> v(n);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    double norm = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) norm += a(i, k) * a(i, k);
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    const double alpha = a(k + 1, k) > 0.0 ? -norm : norm;
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t i = k + 1; i < n; ++i) v[i] = a(i, k);
    v[k + 1] -= alpha;
    double vnorm2 = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 == 0.0) continue;
    // A <- (I - 2 v v^T / |v|^2) A (I - 2 v v^T / |v|^2)
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t i = k + 1; i < n; ++i) dot += v[i] * a(i, j);
      const double f = 2.0 * dot / vnorm2;
      for (std::size_t i = k + 1; i < n; ++i) a(i, j) -= f * v[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) dot += a(i, j) * v[j];
      const double f = 2.0 * dot / vnorm2;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= f * v[j];
    }
    for (std::size_t i = k + 2; i < n; ++i) a(i, k) = 0.0;
  }
}

double sign_of(double magnitude, double s) {
  return s >= 0.0 ? std::abs(magnitude) : -std::abs(magnitude);
}

// Francis double-shift QR on an upper Hessenberg matrix; 2x2 trailing blocks
// are resolved with the quadratic formula.
std::vector<std::complex<double>> hessenberg_qr(Matrix a) {
  const int n = static_cast<int>(a.rows());
  std::vector<double> wr(n), wi(n);
  double anorm = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(a(i, j));

  int nn = n - 1;
  double t = 0.0;
  double p = 0, q = 0, r = 0, s = 0, w = 0, x = 0, y = 0, z = 0;
  while (nn >= 0) {
    int its = 0;
    int l = 0;
    do {
      for (l = nn; l >= 1; --l) {
        s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::abs(a(l, l - 1)) + s == s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      x = a(nn, nn);
      if (l == nn) {
        wr[nn] = x + t;
        wi[nn] = 0.0;
        --nn;
      } else {
        y = a(nn - 1, nn - 1);
        w = a(nn, nn - 1) * a(nn - 1, nn);
        if (l == nn - 1) {
          p = 0.5 * (y - x);
          q = p * p + w;
          z = std::sqrt(std::abs(q));
          x += t;
          if (q >= 0.0) {
            z = p + sign_of(z, p);
            wr[nn - 1] = wr[nn] = x + z;
            if (z != 0.0) wr[nn] = x - w / z;
            wi[nn - 1] = wi[nn] = 0.0;
          } else {
            wr[nn - 1] = wr[nn] = x + p;
            wi[nn - 1] = -z;
            wi[nn] = z;
          }
          nn -= 2;
        } else {
          if (its == 60) throw Error(ErrorKind::NotConverged, "QR eigenvalue iteration");
          if (its == 10 || its == 20 || its == 40) {
            t += x;
            for (int i = 0; i <= nn; ++i) a(i, i) -= x;
            s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          int m = nn - 2;
          for (; m >= l; --m) {
            z = a(m, m);
            r = x - z;
            s = y - z;
            p = (r * s - w) / a(m + 1, m) + a(m, m + 1);
            q = a(m + 1, m + 1) - z - r - s;
            r = a(m + 2, m + 1);
            s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
            const double v = std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) +
                                            std::abs(a(m + 1, m + 1)));
            if (u + v == v) break;
          }
          for (int i = m + 2; i <= nn; ++i) {
            a(i, i - 2) = 0.0;
            if (i != m + 2) a(i, i - 3) = 0.0;
          }
          for (int k = m; k <= nn - 1; ++k) {
            if (k != m) {
              p = a(k, k - 1);
              q = a(k + 1, k - 1);
              r = 0.0;
              if (k != nn - 1) r = a(k + 2, k - 1);
              if ((x = std::abs(p) + std::abs(q) + std::abs(r)) != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            if ((s = sign_of(std::sqrt(p * p + q * q + r * r), p)) != 0.0) {
              if (k == m) {
                if (l != m) a(k, k - 1) = -a(k, k - 1);
              } else {
                a(k, k - 1) = -s * x;
              }
              p += s;
              x = p / s;
              y = q / s;
              z = r / s;
              q /= p;
              r /= p;
              for (int j = k; j <= nn; ++j) {
                p = a(k, j) + q * a(k + 1, j);
                if (k != nn - 1) {
                  p += r * a(k + 2, j);
                  a(k + 2, j) -= p * z;
                }
                a(k + 1, j) -= p * y;
                a(k, j) -= p * x;
              }
              const int mmin = nn < k + 3 ? nn : k + 3;
              for (int i = l; i <= mmin; ++i) {
                p = x * a(i, k) + y * a(i, k + 1);
                if (k != nn - 1) {
                  p += z * a(i, k + 2);
                  a(i, k + 2) -= p * r;
                }
                a(i, k + 1) -= p * q;
                a(i, k) -= p;
              }
            }
          }
        }
      }
    } while (l < nn - 1);
  }

  std::vector<std::complex<double>> out(n);
  for (int i = 0; i < n; ++i) out[i] = {wr[i], wi[i]};
  return out;
}

}  // namespace

std::vector<std::complex<double>> eigenvalues(const Matrix& a) {
  require_square(a, "eigenvalues input");
  if (a.rows() == 0) return {};
  if (!a.all_finite()) throw Error(ErrorKind::NonFinite, "eigenvalues of non-finite matrix");
  Matrix h = a;
  hessenberg(h);
  return hessenberg_qr(std::move(h));
}

double spectral_radius(const Matrix& a) {
  double rho = 0.0;
  for (const auto& lambda : eigenvalues(a)) rho = std::max(rho, std::abs(lambda));
  return rho;
}

Matrix cholesky(const Matrix& spd) {
  require_square(spd, "cholesky input");
  const std::size_t n = spd.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = spd(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) throw Error(ErrorKind::SingularMatrix, "matrix is not positive definite");
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = spd(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / ljj;
    }
  }
  return l;
}

Matrix solve_spd(const Matrix& spd, const Matrix& rhs) {
  if (rhs.rows() != spd.rows()) throw Error(ErrorKind::ShapeMismatch, "solve_spd rhs rows");
  const Matrix l = cholesky(spd);
  const std::size_t n = l.rows();
  Matrix x = rhs;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double v = x(i, c);
      for (std::size_t k = 0; k < i; ++k) v -= l(i, k) * x(k, c);
      x(i, c) = v / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double v = x(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) v -= l(k, ii) * x(k, c);
      x(ii, c) = v / l(ii, ii);
    }
  }
  return x;
}

Matrix solve(const Matrix& a, const Matrix& rhs) {
  require_square(a, "solve matrix");
  if (rhs.rows() != a.rows()) throw Error(ErrorKind::ShapeMismatch, "solve rhs rows");
  const std::size_t n = a.rows();
  Matrix lu = a;
  Matrix x = rhs;
  const double tiny = 1e-14 * std::max(lu.max_abs(), std::numeric_limits<double>::min());
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) piv = i;
    if (!(std::abs(lu(piv, k)) > tiny)) {
      throw Error(ErrorKind::SingularMatrix, "LU pivot vanished");
    }
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
      for (std::size_t j = 0; j < x.cols(); ++j) std::swap(x(k, j), x(piv, j));
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu(i, k) / lu(k, k);
      if (f == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
      for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) -= f * x(k, j);
    }
  }
  for (std::size_t c = 0; c < x.cols(); ++c) {
    for (std::size_t ii = n; ii-- > 0;) {
      double v = x(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) v -= lu(ii, k) * x(k, c);
      x(ii, c) = v / lu(ii, ii);
    }
  }
  return x;
}

Matrix inverse(const Matrix& a) { return solve(a, Matrix::identity(a.rows())); }

double spd_condition(const Matrix& s) {
  const SymmetricEigen eig = symmetric_eigen(s);
  if (eig.values.empty()) return 1.0;
  const double lo = eig.values.front(), hi = eig.values.back();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

Matrix solve_normal_equations(const Matrix& gram, const Matrix& cross) {
  if (cross.cols() != gram.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "normal equations: cross/gram mismatch");
  }
  const double cond = spd_condition(gram);
  if (!(cond <= 1e12)) {
    throw Error(ErrorKind::SingularGram, "Gram condition number " + std::to_string(cond));
  }
  return solve_spd(gram, cross.transpose()).transpose();
}

Matrix lstsq(const Matrix& targets, const Matrix& regressors) {
  if (targets.rows() != regressors.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "lstsq: sample counts differ");
  }
  const std::size_t n = regressors.rows(), q = regressors.cols(), p = targets.cols();
  Matrix gram(q, q), cross(p, q);
  for (std::size_t t = 0; t < n; ++t) {
    auto z = regressors.row(t);
    auto y = targets.row(t);
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t j = i; j < q; ++j) gram(i, j) += z[i] * z[j];
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < q; ++j) cross(i, j) += y[i] * z[j];
  }
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < i; ++j) gram(i, j) = gram(j, i);
  return solve_normal_equations(gram, cross);
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      for (std::size_t k = 0; k < b.rows(); ++k)
        for (std::size_t l = 0; l < b.cols(); ++l)
          out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
  return out;
}

Matrix vec(const Matrix& a) {
  Matrix out(a.size(), 1);
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i) out(j * a.rows() + i, 0) = a(i, j);
  return out;
}

Matrix downshift(std::size_t n) {
  Matrix l(n, n);
  for (std::size_t i = 1; i < n; ++i) l(i, i - 1) = 1.0;
  return l;
}

Matrix commutation(std::size_t d) {
  Matrix k(d * d, d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) k(j * d + i, i * d + j) = 1.0;
  return k;
}

}  // namespace phl::numerics
