#include "phl/theory.hpp"

#include <cstdlib>

#include "phl/error.hpp"
#include "phl/numerics.hpp"

namespace phl::theory {

namespace {

void require_well(const LtiModel& model) {
  if (!model.well_specified()) {
    throw Error(ErrorKind::RegimeMismatch, "expects a well-specified model (C = I, D_v = 0)");
  }
}

void require_mis(const LtiModel& model, const CovarianceBundle& bundle) {
  if (model.well_specified() || !bundle.has_kalman) {
    throw Error(ErrorKind::RegimeMismatch, "expects a misspecified model");
  }
  if (model.du() != 0) {
    throw Error(ErrorKind::RegimeMismatch, "misspecified formulas assume no inputs");
  }
}

std::vector<Matrix> powers(const Matrix& a, int count) {
  std::vector<Matrix> out{Matrix::identity(a.rows())};
  for (int k = 1; k <= count; ++k) out.push_back(out.back() * a);
  return out;
}

std::size_t uz(int v) { return static_cast<std::size_t>(v); }

// tr(Gamma (M kron I_d) Gamma^T) without forming the Kronecker product.
double kron_quadratic(const Matrix& gamma, const Matrix& m, std::size_t d) {
  const std::size_t h = m.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < h; ++i) {
    const Matrix gi = gamma.block(0, i * d, gamma.rows(), d);
    for (std::size_t j = 0; j < h; ++j) {
      if (m(i, j) == 0.0) continue;
      total += m(i, j) * frobenius_inner(gi, gamma.block(0, j * d, gamma.rows(), d));
    }
  }
  return total;
}

// X Sigma^-1 for symmetric positive definite Sigma.
Matrix right_solve(const Matrix& x, const Matrix& sigma) {
  return numerics::solve_spd(sigma, x.transpose()).transpose();
}

Matrix all_ones(std::size_t d) {
  Matrix j(d, d);
  for (double& v : j.data()) v = 1.0;
  return j;
}

// Building blocks of omega that depend only on the system.
struct OmegaParts {
  Matrix xa;  // Sigma_y^-1 DD Sigma_y^-1
  Matrix ya;  // P Sigma_xhat P^T, P = C (A - K C)
  Matrix xb;  // Sigma_y^-1 DD J Sigma_y^-1
  Matrix yb;  // P (A Sigma_xhat C^T + K DD) J
  Matrix sy_inv;
  Matrix dd;
};

OmegaParts omega_parts(const LtiModel& model, const CovarianceBundle& b) {
  const Matrix& k = b.kalman_k();
  const std::size_t dy = model.dy();
  const Matrix sy_inv = numerics::inverse(b.sigma_y);
  const Matrix dd = mul_transposed(b.d_e, b.d_e);
  const Matrix p = model.c() * (model.a() - k * model.c());
  const Matrix j = all_ones(dy);
  OmegaParts o;
  o.xa = sy_inv * dd * sy_inv;
  o.ya = congruence(p, b.sigma_xhat);
  o.xb = sy_inv * dd * j * sy_inv;
  o.yb = p * (model.a() * b.sigma_xhat * model.c().transpose() + k * dd) * j;
  o.sy_inv = sy_inv;
  o.dd = dd;
  return o;
}

double omega_eval(const OmegaParts& o, const Matrix& x, const Matrix& y) {
  // tr(U V) = <U, V^T>, tr(U^T V) = <U, V>
  return frobenius_inner(o.xa, x.transpose()) * frobenius_inner(o.ya, y.transpose()) +
         frobenius_inner(o.xb, x.transpose()) * frobenius_inner(o.yb, y.transpose()) +
         frobenius_inner(x, o.xb) * frobenius_inner(y, o.yb) +
         frobenius_inner(o.sy_inv, x.transpose()) * frobenius_inner(o.dd, y.transpose());
}

}  // namespace

Matrix m_ms(const LtiModel& model, int horizon) {
  const auto ap = powers(model.a(), horizon);
  const std::size_t h = uz(horizon);
  Matrix m(h, h);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < h; ++j) m(i, j) = ap[i > j ? i - j : j - i].trace();
  return m;
}

Matrix m_ss(const LtiModel& model, const CovarianceBundle& bundle, int horizon) {
  const auto ap = powers(model.a(), horizon);
  const std::size_t h = uz(horizon), n = model.dx();
  const Matrix q = mul_transposed(model.b_w(), model.b_w());
  // inner[m] = I - Sigma_x^-1 sum_{l=0}^{m-2} A^l Q A^l^T, for m = min(i, j) >= 1
  std::vector<Matrix> inner(h + 1);
  Matrix partial(n, n);
  inner[1] = Matrix::identity(n);
  for (std::size_t m = 2; m <= h; ++m) {
    partial += congruence(ap[m - 2], q);
    inner[m] = Matrix::identity(n) - numerics::solve_spd(bundle.sigma_x, partial);
  }
  Matrix out(h, h);
  for (std::size_t i = 1; i <= h; ++i) {
    for (std::size_t j = 1; j <= h; ++j) {
      const std::size_t lag = i > j ? i - j : j - i;
      out(i - 1, j - 1) = frobenius_inner(inner[std::min(i, j)], ap[lag]);
    }
  }
  return out;
}

double prop1_multistep_rate(const LtiModel& model, const SystemAnalysis& sys) {
  require_well(model);
  const int h = sys.ops.horizon;
  Matrix m = m_ms(model, h);
  m += static_cast<double>(uz(h) * model.du()) * Matrix::identity(uz(h));
  return kron_quadratic(sys.ops.gamma_w, m, model.dw());
}

double prop2_singlestep_rate(const LtiModel& model, const SystemAnalysis& sys) {
  require_well(model);
  const int h = sys.ops.horizon;
  Matrix m = m_ss(model, sys.bundle, h);
  m += static_cast<double>(model.du()) * Matrix::identity(uz(h));
  return kron_quadratic(sys.ops.gamma_w, m, model.dw());
}

GapMatrices gap_matrices(const LtiModel& model, const CovarianceBundle& bundle, int horizon) {
  require_well(model);
  GapMatrices g;
  g.m_ms = m_ms(model, horizon);
  g.m_ss = m_ss(model, bundle, horizon);
  g.gap = g.m_ms - g.m_ss;
  g.gap_inputs = g.gap + static_cast<double>(uz(horizon - 1) * model.du()) *
                             Matrix::identity(uz(horizon));
  return g;
}

Matrix gap_gram(const LtiModel& model, const CovarianceBundle& bundle, int horizon) {
  require_well(model);
  const std::size_t h = uz(horizon);
  const Matrix root_inv = numerics::inverse(numerics::psd_sqrt(bundle.sigma_x));
  const auto ap = powers(model.a(), horizon);
  std::vector<Matrix> v;
  for (std::size_t l = 0; l + 1 < h; ++l) v.push_back(numerics::vec(root_inv * ap[l] * model.b_w()));
  const std::size_t len = v.empty() ? 0 : v.front().rows();
  // Row i holds v_{i-2}, v_{i-3}, ..., v_0 in consecutive slots.
  Matrix w(h, std::max<std::size_t>(1, (h - 1) * len));
  for (std::size_t i = 2; i <= h; ++i) {
    for (std::size_t s = 0; s + 2 <= i; ++s) {
      const Matrix& vl = v[i - 2 - s];
      for (std::size_t r = 0; r < len; ++r) w(i - 1, s * len + r) = vl(r, 0);
    }
  }
  return mul_transposed(w, w);
}

Matrix single_step_limit(const LtiModel& model, const CovarianceBundle& bundle) {
  const Matrix cac = model.c() * model.a() * bundle.sigma_x * model.c().transpose();
  return right_solve(cac, bundle.sigma_y);
}

double lemma1_check(const LtiModel& model, const CovarianceBundle& bundle) {
  return numerics::spectral_radius(single_step_limit(model, bundle));
}

Predictor population_predictor(const LtiModel& model, const SystemAnalysis& sys,
                               Structure structure) {
  const int h = sys.ops.horizon;
  const std::size_t dy = model.dy(), du = model.du();
  if (structure == Structure::SingleStepRollout) {
    return compose_rollout(single_step_limit(model, sys.bundle), model.c() * model.b(), h);
  }
  if (structure != Structure::DirectMultiStep) {
    throw Error(ErrorKind::InvalidConfig, "no closed-form limit for this structure");
  }
  // Inputs are white and independent of y_t, so their coefficients are the
  // true responses; the state block projects C A^k x_t onto y_t.
  const Matrix xc = sys.bundle.sigma_x * model.c().transpose();
  Matrix gy(h * dy, dy);
  Matrix ak = model.a();
  for (int k = 0; k < h; ++k) {
    gy.set_block(k * dy, 0, right_solve(model.c() * ak * xc, sys.bundle.sigma_y));
    ak = ak * model.a();
  }
  Predictor p;
  p.structure = Structure::DirectMultiStep;
  p.horizon = h;
  p.dy = dy;
  p.du = du;
  p.g = hstack({gy, sys.ops.g_star.block(0, dy, h * dy, h * du)});
  return p;
}

double bias_objective(const LtiModel& model, const SystemAnalysis& sys, const Matrix& offset) {
  require_mis(model, sys.bundle);
  const Matrix e = sys.ops.phi + offset * model.c();
  return frobenius_inner(e * sys.bundle.sigma_xhat, e) +
         (offset * sys.bundle.d_e).squared_norm() + sys.ops.gamma_e.squared_norm();
}

double prop3_multistep_bias(const LtiModel& model, const SystemAnalysis& sys) {
  require_mis(model, sys.bundle);
  const CovarianceBundle& b = sys.bundle;
  const Matrix xc = b.sigma_xhat * model.c().transpose();  // Sigma_xhat C^T
  const Matrix proj = b.sigma_xhat - xc * numerics::solve_spd(b.sigma_y, xc.transpose());
  return frobenius_inner(sys.ops.phi * symmetrize(proj), sys.ops.phi) +
         sys.ops.gamma_e.squared_norm();
}

Matrix prop4_offset(const LtiModel& model, const SystemAnalysis& sys) {
  require_mis(model, sys.bundle);
  const std::size_t dy = model.dy(), h = uz(sys.ops.horizon);
  const Matrix r = single_step_limit(model, sys.bundle);
  Matrix m = sys.ops.g_star.block(0, 0, h * dy, dy);
  Matrix rk = Matrix::identity(dy);
  for (std::size_t k = 0; k < h; ++k) {
    rk = rk * r;
    m.add_block(k * dy, 0, -rk);
  }
  return m;
}

double prop4_singlestep_bias(const LtiModel& model, const SystemAnalysis& sys) {
  return bias_objective(model, sys, prop4_offset(model, sys));
}

RateTerms prop3_reducible_terms(const LtiModel& model, const SystemAnalysis& sys) {
  require_mis(model, sys.bundle);
  const CovarianceBundle& b = sys.bundle;
  const std::size_t dy = model.dy(), h = uz(sys.ops.horizon);
  const Matrix& k = b.kalman_k();
  const Matrix& c = model.c();
  const Matrix dd = mul_transposed(b.d_e, b.d_e);
  const auto ap = powers(model.a(), sys.ops.horizon);

  const double t1 = frobenius_inner(sys.ops.phi * b.sigma_xhat, sys.ops.phi) *
                    frobenius_inner(b.d_e, numerics::solve_spd(b.sigma_y, b.d_e));

  // M1: Toeplitz in tr(Sigma_y^(i)), diagonal tr(I) = d_y.
  std::vector<double> lag_trace(h, static_cast<double>(dy));
  for (std::size_t i = 1; i < h; ++i) {
    const Matrix num = c * ap[i] * b.sigma_xhat * c.transpose() + c * ap[i - 1] * k * dd;
    lag_trace[i] = right_solve(num, b.sigma_y).trace();
  }
  Matrix m1(h, h);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < h; ++j) m1(i, j) = lag_trace[i > j ? i - j : j - i];
  const double t2 = kron_quadratic(sys.ops.gamma_e, m1, dy);

  // 2 tr(Phi M2 (I_H kron X) Gamma_e^T), X = (A Sigma_xhat C^T + K DD) Sigma_y^-1 D_e
  const Matrix x = right_solve(model.a() * b.sigma_xhat * c.transpose() + k * dd, b.sigma_y) *
                   b.d_e;
  double t3 = 0.0;
  for (std::size_t j = 0; j < h; ++j) {
    const Matrix col = sys.ops.phi * ap[j] * x;  // H d_y x d_y
    t3 += frobenius_inner(col, sys.ops.gamma_e.block(0, j * dy, h * dy, dy));
  }
  t3 *= 2.0;

  RateTerms out;
  out.value = t1 + t2 + t3;
  out.components = {{"bias_projection", t1}, {"innovation_toeplitz", t2}, {"cross", t3}};
  return out;
}

double prop3_reducible_rate(const LtiModel& model, const SystemAnalysis& sys) {
  return prop3_reducible_terms(model, sys).value;
}

double omega(const Matrix& x, const Matrix& y, const LtiModel& model,
             const CovarianceBundle& bundle) {
  require_mis(model, bundle);
  const std::size_t dy = model.dy();
  if (x.rows() != dy || x.cols() != dy || y.rows() != dy || y.cols() != dy) {
    throw Error(ErrorKind::ShapeMismatch, "omega arguments must be d_y x d_y");
  }
  return omega_eval(omega_parts(model, bundle), x, y);
}

RateTerms prop4_reducible_terms(const LtiModel& model, const SystemAnalysis& sys) {
  require_mis(model, sys.bundle);
  const CovarianceBundle& b = sys.bundle;
  const std::size_t dy = model.dy(), h = uz(sys.ops.horizon);
  const OmegaParts parts = omega_parts(model, b);
  const Matrix r = single_step_limit(model, b);
  const auto rp = powers(r, sys.ops.horizon);
  const Matrix j = all_ones(dy);

  Matrix gamma(h * dy, h * dy);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t jj = 0; jj <= i; ++jj) gamma.set_block(i * dy, jj * dy, rp[i - jj]);
  const Matrix gtg = gamma.transpose() * gamma;
  const Matrix m = prop4_offset(model, sys);
  const Matrix lh = numerics::kron(numerics::downshift(h), Matrix::identity(dy));
  const Matrix z = gamma.transpose() * lh.transpose() *
                   (m * b.sigma_y + sys.ops.phi * b.sigma_x * model.c().transpose());

  double first = 0.0, second = 0.0;
  for (std::size_t i = 0; i < h; ++i) {
    const Matrix zi = z.block(i * dy, 0, dy, dy);
    for (std::size_t jj = 0; jj < h; ++jj) {
      const Matrix x1 = rp[i] * b.sigma_y * rp[jj].transpose();
      first += omega_eval(parts, x1, gtg.block(i * dy, jj * dy, dy, dy));
      const Matrix x2 = gamma.block(i * dy, jj * dy, dy, dy) * j;
      second += omega_eval(parts, x2, zi * rp[jj].transpose() * j);
    }
  }
  RateTerms out;
  out.value = first + second;
  out.components = {{"first_order", first}, {"second_order_cross", second}};
  return out;
}

double prop4_reducible_rate(const LtiModel& model, const SystemAnalysis& sys) {
  return prop4_reducible_terms(model, sys).value;
}

AsymptoticReport asymptotic_report(const LtiModel& model, const SystemAnalysis& sys,
                                   PredictorKind kind) {
  AsymptoticReport rep;
  rep.kind = kind;
  rep.horizon = sys.ops.horizon;
  if (model.well_specified()) {
    rep.regime = Regime::Well;
    rep.irreducible = sys.ops.gamma_w.squared_norm();
    rep.reducible_rate = kind == PredictorKind::Multi ? prop1_multistep_rate(model, sys)
                                                      : prop2_singlestep_rate(model, sys);
    rep.components = {{"gamma_w_sq", rep.irreducible}};
    return rep;
  }
  rep.regime = Regime::Mis;
  if (kind == PredictorKind::Multi) {
    rep.irreducible = prop3_multistep_bias(model, sys);
    RateTerms t = prop3_reducible_terms(model, sys);
    rep.reducible_rate = t.value;
    rep.components = std::move(t.components);
  } else {
    rep.irreducible = prop4_singlestep_bias(model, sys);
    RateTerms t = prop4_reducible_terms(model, sys);
    rep.reducible_rate = t.value;
    rep.components = std::move(t.components);
  }
  rep.components.emplace_back("gamma_e_sq", sys.ops.gamma_e.squared_norm());
  return rep;
}

}  // namespace phl::theory
