#include "phl/system.hpp"

#include <cmath>
#include <vector>

#include "json_io.hpp"
#include "phl/error.hpp"
#include "phl/numerics.hpp"
#include "phl/rng.hpp"

namespace phl {

namespace {

bool is_identity(const Matrix& m) {
  return m.is_square() && m == Matrix::identity(m.rows());
}

std::vector<Matrix> powers(const Matrix& a, int count) {
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(count) + 1);
  out.push_back(Matrix::identity(a.rows()));
  for (int k = 1; k <= count; ++k) out.push_back(out.back() * a);
  return out;
}

// out = m * v for raw vectors (m row-major), accumulating when `add` is set.
void matvec(const Matrix& m, const double* v, double* out, bool add) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = add ? out[i] : 0.0;
    auto row = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) s += row[j] * v[j];
    out[i] = s;
  }
}

}  // namespace

LtiModel::LtiModel(Matrix a, Matrix b, Matrix b_w, Matrix c, Matrix d_v)
    : a_(std::move(a)), b_(std::move(b)), b_w_(std::move(b_w)), c_(std::move(c)),
      d_v_(std::move(d_v)) {
  if (a_.empty() || !a_.is_square()) throw Error(ErrorKind::InvalidModel, "A must be square");
  const std::size_t n = a_.rows();
  if (b_.rows() == 0 && b_.cols() == 0) b_ = Matrix(n, 0);
  if (b_.rows() != n) throw Error(ErrorKind::InvalidModel, "B must have d_x rows");
  if (b_w_.rows() != n) throw Error(ErrorKind::InvalidModel, "B_w must have d_x rows");
  if (c_.cols() != n || c_.rows() == 0) {
    throw Error(ErrorKind::InvalidModel, "C must have d_x columns");
  }
  if (!d_v_.is_square() || d_v_.rows() != c_.rows()) {
    throw Error(ErrorKind::InvalidModel, "D_v must be d_y x d_y");
  }
  for (const Matrix* m : {&a_, &b_, &b_w_, &c_, &d_v_}) {
    if (!m->all_finite()) throw Error(ErrorKind::NonFinite, "model entries must be finite");
  }
  const double rho = numerics::spectral_radius(a_);
  if (!(rho < 1.0)) {
    throw Error(ErrorKind::UnstableA, "rho(A) = " + std::to_string(rho) + " is not below 1");
  }
  well_specified_ = is_identity(c_) && d_v_.max_abs() == 0.0;
  if (!well_specified_ && !(numerics::spd_condition(mul_transposed(d_v_, d_v_)) < 1e14)) {
    throw Error(ErrorKind::InvalidModel,
                "a partially observed model needs D_v D_v^T positive definite");
  }
}

LtiModel LtiModel::with_input(Matrix b) const { return {a_, std::move(b), b_w_, c_, d_v_}; }

LtiModel eq10_system(double a, bool well_specified) {
  const Matrix am = Matrix::from_rows({{a, 1.0}, {0.0, 0.75}});
  if (well_specified) {
    return {am, Matrix::from_rows({{0.0}, {1.0}}), Matrix::identity(2), Matrix::identity(2),
            Matrix(2, 2)};
  }
  return {am, Matrix(2, 0), Matrix::identity(2), Matrix::from_rows({{1.0, 0.0}}),
          Matrix::from_rows({{1.0}})};
}

LtiModel example1_system() {
  return {Matrix::from_rows({{0.9, 1.0}, {0.0, 0.9}}), Matrix(2, 0), Matrix::identity(2),
          Matrix::from_rows({{1.0, 0.0}}), Matrix::from_rows({{1.0}})};
}

Trajectory simulate(const LtiModel& model, std::size_t n, std::uint64_t seed,
                    const SimulateOptions& opts) {
  const std::size_t dx = model.dx(), du = model.du(), dy = model.dy(), dw = model.dw();
  NormalStream w_gen(seed, Stream::Process);
  NormalStream v_gen(seed, Stream::Measurement);
  NormalStream u_gen(seed, Stream::Input);

  Trajectory traj{Matrix(n, dy), Matrix(n, du), std::nullopt};
  if (opts.record_state) traj.x = Matrix(n, dx);
  std::vector<double> x(dx, 0.0), next(dx), w(dw), v(dy);
  for (std::size_t t = 0; t < n; ++t) {
    auto u = traj.u.row(t);
    if (!opts.zero_inputs) u_gen.fill(u);
    w_gen.fill(w);
    v_gen.fill(v);
    if (traj.x) std::copy(x.begin(), x.end(), traj.x->row(t).begin());
    double* y = traj.y.row(t).data();
    matvec(model.c(), x.data(), y, false);
    matvec(model.d_v(), v.data(), y, true);
    matvec(model.a(), x.data(), next.data(), false);
    if (du > 0) matvec(model.b(), u.data(), next.data(), true);
    matvec(model.b_w(), w.data(), next.data(), true);
    x.swap(next);
  }
  return traj;
}

Trajectory closed_loop_simulate(const LtiModel& model, const Matrix& f, std::size_t n,
                                std::uint64_t seed) {
  const std::size_t dx = model.dx(), du = model.du(), dy = model.dy(), dw = model.dw();
  if (f.rows() != du || f.cols() != dy) {
    throw Error(ErrorKind::ShapeMismatch, "feedback must be d_u x d_y");
  }
  NormalStream w_gen(seed, Stream::Process);
  NormalStream v_gen(seed, Stream::Measurement);

  Trajectory traj{Matrix(n, dy), Matrix(n, du), Matrix(n, dx)};
  std::vector<double> x(dx, 0.0), next(dx), w(dw), v(dy);
  for (std::size_t t = 0; t < n; ++t) {
    w_gen.fill(w);
    v_gen.fill(v);
    std::copy(x.begin(), x.end(), traj.x->row(t).begin());
    double* y = traj.y.row(t).data();
    matvec(model.c(), x.data(), y, false);
    matvec(model.d_v(), v.data(), y, true);
    double* u = traj.u.row(t).data();
    matvec(f, y, u, false);
    matvec(model.a(), x.data(), next.data(), false);
    if (du > 0) matvec(model.b(), u, next.data(), true);
    matvec(model.b_w(), w.data(), next.data(), true);
    x.swap(next);
  }
  return traj;
}

const Matrix& CovarianceBundle::kalman_k() const {
  if (!has_kalman) {
    throw Error(ErrorKind::MissingKalman, "Kalman gain is undefined for a well-specified model");
  }
  return k_;
}

CovarianceBundle covariances(const LtiModel& model, int horizon) {
  if (horizon < 1) throw Error(ErrorKind::InvalidConfig, "horizon must be at least 1");
  const std::size_t h = static_cast<std::size_t>(horizon);
  CovarianceBundle out;
  out.horizon = horizon;
  const Matrix q = mul_transposed(model.b_w(), model.b_w());
  const Matrix bb = mul_transposed(model.b(), model.b());
  out.sigma_x = numerics::solve_lyapunov(model.a(), bb + q);
  const Matrix r = mul_transposed(model.d_v(), model.d_v());
  out.sigma_y = congruence(model.c(), out.sigma_x) + r;
  out.sigma_z = block_diagonal(out.sigma_y, Matrix::identity(h * model.du()));

  if (model.well_specified()) {
    out.riccati_s = Matrix(model.dx(), model.dx());
    out.d_e = Matrix(model.dy(), model.dy());
    out.sigma_xhat = out.sigma_x;
    return out;
  }
  auto dare = numerics::solve_dare(model.a(), model.c(), q, r);
  out.riccati_s = dare.s;
  out.d_e = numerics::psd_sqrt(congruence(model.c(), dare.s) + r);
  const Matrix kd = dare.k * out.d_e;
  out.sigma_xhat = numerics::solve_lyapunov(model.a(), bb + mul_transposed(kd, kd));
  out.set_kalman_k(std::move(dare.k));
  out.has_kalman = true;
  return out;
}

RolloutOperators rollout_operators(const LtiModel& model, const CovarianceBundle& bundle,
                                   int horizon) {
  if (horizon < 1) throw Error(ErrorKind::InvalidConfig, "horizon must be at least 1");
  const std::size_t h = static_cast<std::size_t>(horizon);
  const std::size_t dx = model.dx(), du = model.du(), dy = model.dy();
  const auto ap = powers(model.a(), horizon);
  RolloutOperators ops;
  ops.horizon = horizon;
  ops.well_specified = model.well_specified();

  if (ops.well_specified) {
    const std::size_t dw = model.dw();
    ops.g_star = Matrix(h * dx, dx + h * du);
    ops.gamma_w = Matrix(h * dx, h * dw);
    for (std::size_t k = 1; k <= h; ++k) {
      const std::size_t r0 = (k - 1) * dx;
      ops.g_star.set_block(r0, 0, ap[k]);
      for (std::size_t j = 0; j < k; ++j) {
        if (du > 0) ops.g_star.set_block(r0, dx + j * du, ap[k - 1 - j] * model.b());
        ops.gamma_w.set_block(r0, j * dw, ap[k - 1 - j] * model.b_w());
      }
    }
    return ops;
  }

  if (!bundle.has_kalman) {
    throw Error(ErrorKind::MissingKalman, "misspecified operators need innovations quantities");
  }
  const Matrix& k = bundle.kalman_k();
  const Matrix& c = model.c();
  const Matrix a_kc = model.a() - k * c;
  ops.phi = Matrix(h * dy, dx);
  ops.g_star = Matrix(h * dy, dy + h * du);
  ops.gamma_e = Matrix(h * dy, h * dy);
  std::vector<Matrix> cak;  // C A^j K D_e
  for (std::size_t j = 0; j < h; ++j) cak.push_back(c * ap[j] * k * bundle.d_e);
  for (std::size_t kk = 1; kk <= h; ++kk) {
    const std::size_t r0 = (kk - 1) * dy;
    const Matrix ca = c * ap[kk - 1];
    ops.phi.set_block(r0, 0, ca * a_kc);
    ops.g_star.set_block(r0, 0, ca * k);
    for (std::size_t j = 0; j < kk; ++j) {
      if (du > 0) ops.g_star.set_block(r0, dy + j * du, c * ap[kk - 1 - j] * model.b());
    }
    for (std::size_t j = 1; j < kk; ++j) ops.gamma_e.set_block(r0, (j - 1) * dy, cak[kk - 1 - j]);
    ops.gamma_e.set_block(r0, (kk - 1) * dy, bundle.d_e);
  }
  return ops;
}

Trajectory innovations_simulate(const LtiModel& model, const CovarianceBundle& bundle,
                                std::size_t n, std::uint64_t seed, bool zero_gain) {
  if (model.well_specified() || !bundle.has_kalman) {
    throw Error(ErrorKind::MissingKalman, "innovations form needs a misspecified model");
  }
  const std::size_t dx = model.dx(), du = model.du(), dy = model.dy();
  const Matrix kd = zero_gain ? Matrix(dx, dy) : bundle.kalman_k() * bundle.d_e;
  NormalStream e_gen(seed, Stream::Innovation);
  NormalStream u_gen(seed, Stream::Input);

  Trajectory traj{Matrix(n, dy), Matrix(n, du), Matrix(n, dx)};
  std::vector<double> x(dx, 0.0), next(dx), e(dy);
  for (std::size_t t = 0; t < n; ++t) {
    auto u = traj.u.row(t);
    u_gen.fill(u);
    e_gen.fill(e);
    std::copy(x.begin(), x.end(), traj.x->row(t).begin());
    double* y = traj.y.row(t).data();
    matvec(model.c(), x.data(), y, false);
    matvec(bundle.d_e, e.data(), y, true);
    matvec(model.a(), x.data(), next.data(), false);
    if (du > 0) matvec(model.b(), u.data(), next.data(), true);
    matvec(kd, e.data(), next.data(), true);
    x.swap(next);
  }
  return traj;
}

SystemAnalysis analyze(const LtiModel& model, int horizon) {
  SystemAnalysis out;
  out.bundle = covariances(model, horizon);
  out.ops = rollout_operators(model, out.bundle, horizon);
  return out;
}

LtiModel model_from_json(const std::string& text) {
  detail::json j;
  try {
    j = detail::json::parse(text);
  } catch (const detail::json::parse_error& e) {
    throw Error(ErrorKind::InvalidModel, std::string("model JSON: ") + e.what());
  }
  return detail::model_from_json_object(j);
}

std::string model_to_json(const LtiModel& model) {
  return detail::model_to_json_object(model).dump(2);
}

}  // namespace phl
