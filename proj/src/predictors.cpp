#include "phl/predictors.hpp"

#include <cmath>
#include <limits>

#include "json_io.hpp"
#include "phl/error.hpp"
#include "phl/numerics.hpp"
#include "phl/rng.hpp"

namespace phl {

namespace {

void check_horizon(int horizon) {
  if (horizon < 1) throw Error(ErrorKind::InvalidConfig, "horizon must be at least 1");
}

// Regressor z_t = [y_t; u_t; ...; u_{t+H-1}] written into `z`.
void fill_regressor(const Trajectory& d, std::size_t t, std::size_t h, double* z) {
  const std::size_t dy = d.y.cols(), du = d.u.cols();
  auto y = d.y.row(t);
  std::copy(y.begin(), y.end(), z);
  for (std::size_t j = 0; j < h && du > 0; ++j) {
    auto u = d.u.row(t + j);
    std::copy(u.begin(), u.end(), z + dy + j * du);
  }
}

void fill_target(const Trajectory& d, std::size_t t, std::size_t h, double* out) {
  const std::size_t dy = d.y.cols();
  for (std::size_t k = 1; k <= h; ++k) {
    auto y = d.y.row(t + k);
    std::copy(y.begin(), y.end(), out + (k - 1) * dy);
  }
}

void check_trajectory(const Trajectory& d) {
  if (d.u.rows() != d.y.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "y and u must have the same length");
  }
}

Matrix fit_from_moments(const RegressionMoments& m, double ridge) {
  const std::size_t dz = m.gram.rows();
  if (m.count < dz) {
    throw Error(ErrorKind::TooShort, std::to_string(m.count) + " windows for " +
                                         std::to_string(dz) + " regressors");
  }
  if (ridge < 0.0) throw Error(ErrorKind::InvalidConfig, "ridge must be nonnegative");
  if (ridge == 0.0) return numerics::solve_normal_equations(m.gram, m.cross);
  return numerics::solve_normal_equations(m.gram + ridge * Matrix::identity(dz), m.cross);
}

}  // namespace

std::string_view to_string(Structure s) {
  switch (s) {
    case Structure::SingleStepRollout: return "single_step";
    case Structure::DirectMultiStep: return "multi_step";
    case Structure::StructuredGD: return "structured_gd";
  }
  return "unknown";
}

Structure structure_from_string(std::string_view name) {
  if (name == "single_step") return Structure::SingleStepRollout;
  if (name == "multi_step") return Structure::DirectMultiStep;
  if (name == "structured_gd") return Structure::StructuredGD;
  throw Error(ErrorKind::InvalidConfig, "unknown predictor structure '" + std::string(name) + "'");
}

Predictor compose_rollout(const Matrix& g_y, const Matrix& g_u, int horizon,
                          Structure structure) {
  check_horizon(horizon);
  if (!g_y.is_square() || g_u.rows() != g_y.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "G_y must be square and share rows with G_u");
  }
  const std::size_t h = static_cast<std::size_t>(horizon);
  const std::size_t dy = g_y.rows(), du = g_u.cols(), dz = dy + h * du;
  Predictor p;
  p.structure = structure;
  p.horizon = horizon;
  p.dy = dy;
  p.du = du;
  p.g = Matrix(h * dy, dz);
  p.g_y = g_y;
  p.g_u = g_u;

  // S_k = G_y S_{k-1} + [0 .. G_u (input block k-1) .. 0], S_0 = [I 0].
  Matrix prev(dy, dz);
  for (std::size_t i = 0; i < dy; ++i) prev(i, i) = 1.0;
  for (std::size_t k = 1; k <= h; ++k) {
    Matrix cur = g_y * prev;
    if (du > 0) cur.add_block(0, dy + (k - 1) * du, g_u);
    p.g.set_block((k - 1) * dy, 0, cur);
    prev = std::move(cur);
  }
  return p;
}

RegressionMoments regression_moments(const Trajectory& data, int horizon) {
  check_horizon(horizon);
  check_trajectory(data);
  const std::size_t h = static_cast<std::size_t>(horizon);
  const std::size_t n = data.length(), dy = data.y.cols(), du = data.u.cols();
  if (n <= h) throw Error(ErrorKind::TooShort, "trajectory shorter than the horizon");
  const std::size_t dz = dy + h * du, dt = h * dy;

  RegressionMoments m;
  m.horizon = horizon;
  m.dy = dy;
  m.du = du;
  m.count = n - h;
  m.gram = Matrix(dz, dz);
  m.cross = Matrix(dt, dz);
  std::vector<double> z(dz), y(dt);
  for (std::size_t t = 0; t < m.count; ++t) {
    fill_regressor(data, t, h, z.data());
    fill_target(data, t, h, y.data());
    for (std::size_t i = 0; i < dz; ++i) {
      auto row = m.gram.row(i);
      for (std::size_t j = i; j < dz; ++j) row[j] += z[i] * z[j];
    }
    for (std::size_t i = 0; i < dt; ++i) {
      auto row = m.cross.row(i);
      for (std::size_t j = 0; j < dz; ++j) row[j] += y[i] * z[j];
      m.yy += y[i] * y[i];
    }
  }
  for (std::size_t i = 0; i < dz; ++i)
    for (std::size_t j = 0; j < i; ++j) m.gram(i, j) = m.gram(j, i);
  return m;
}

RegressionData regression_data(const Trajectory& data, int horizon) {
  check_horizon(horizon);
  check_trajectory(data);
  const std::size_t h = static_cast<std::size_t>(horizon);
  const std::size_t n = data.length(), dy = data.y.cols(), du = data.u.cols();
  if (n <= h) throw Error(ErrorKind::TooShort, "trajectory shorter than the horizon");
  RegressionData out;
  out.count = n - h;
  out.targets = Matrix(out.count, h * dy);
  out.regressors = Matrix(out.count, dy + h * du);
  for (std::size_t t = 0; t < out.count; ++t) {
    fill_regressor(data, t, h, out.regressors.row(t).data());
    fill_target(data, t, h, out.targets.row(t).data());
  }
  return out;
}

SingleStepFit fit_single_step(const Trajectory& data, double ridge) {
  const Matrix g = fit_from_moments(regression_moments(data, 1), ridge);
  const std::size_t dy = data.y.cols();
  return {g.block(0, 0, dy, dy), g.block(0, dy, dy, g.cols() - dy)};
}

Predictor fit_multi_step(const Trajectory& data, int horizon, double ridge) {
  Predictor p;
  p.structure = Structure::DirectMultiStep;
  p.horizon = horizon;
  p.dy = data.y.cols();
  p.du = data.u.cols();
  p.g = fit_from_moments(regression_moments(data, horizon), ridge);
  return p;
}

Predictor single_step_predictor(const Trajectory& data, int horizon, double ridge) {
  const SingleStepFit fit = fit_single_step(data, ridge);
  return compose_rollout(fit.g_y, fit.g_u, horizon, Structure::SingleStepRollout);
}

LossGradient structured_loss_gradient(const RegressionMoments& m, const Matrix& g_y,
                                      const Matrix& g_u) {
  const std::size_t h = static_cast<std::size_t>(m.horizon);
  const std::size_t dy = m.dy, du = m.du, dz = dy + h * du;
  if (g_y.rows() != dy || g_y.cols() != dy || g_u.rows() != dy || g_u.cols() != du) {
    throw Error(ErrorKind::ShapeMismatch, "structured parameters do not match the moments");
  }
  if (m.count == 0) throw Error(ErrorKind::TooShort, "no regression windows");
  const double inv_n = 1.0 / static_cast<double>(m.count);

  // Forward pass: s[k] is the k-th row block of the rolled-out matrix.
  std::vector<Matrix> s;
  s.reserve(h + 1);
  Matrix s0(dy, dz);
  for (std::size_t i = 0; i < dy; ++i) s0(i, i) = 1.0;
  s.push_back(std::move(s0));
  for (std::size_t k = 1; k <= h; ++k) {
    Matrix cur = g_y * s.back();
    if (du > 0) cur.add_block(0, dy + (k - 1) * du, g_u);
    s.push_back(std::move(cur));
  }

  // loss = (yy - 2<S, cross> + <S, S gram>) / n, dL/dS = 2 (S gram - cross) / n
  LossGradient out;
  double loss = m.yy;
  std::vector<Matrix> dl(h + 1);
  for (std::size_t k = 1; k <= h; ++k) {
    const Matrix cross_k = m.cross.block((k - 1) * dy, 0, dy, dz);
    const Matrix sg = s[k] * m.gram;
    loss += frobenius_inner(s[k], sg) - 2.0 * frobenius_inner(s[k], cross_k);
    dl[k] = (2.0 * inv_n) * (sg - cross_k);
  }
  out.loss = loss * inv_n;

  // Reverse pass through S_k = G_y S_{k-1} + U_k.
  out.grad_gy = Matrix(dy, dy);
  out.grad_gu = Matrix(dy, du);
  const Matrix gyt = g_y.transpose();
  Matrix adj(dy, dz);
  for (std::size_t k = h; k >= 1; --k) {
    adj = dl[k] + gyt * adj;
    out.grad_gy += mul_transposed(adj, s[k - 1]);
    if (du > 0) out.grad_gu += adj.block(0, dy + (k - 1) * du, dy, du);
  }
  return out;
}

GdResult fit_structured_gd(const RegressionMoments& moments, const SingleStepFit& init,
                           const GdOptions& opts) {
  if (!(opts.step > 0.0)) throw Error(ErrorKind::InvalidConfig, "step size must be positive");
  if (opts.iterations < 0) throw Error(ErrorKind::InvalidConfig, "negative iteration count");
  if (!init.g_y.all_finite() || !init.g_u.all_finite()) {
    throw Error(ErrorKind::NonFinite, "initial structured parameters are not finite");
  }
  Matrix gy = init.g_y, gu = init.g_u;
  Matrix best_gy = gy, best_gu = gu;
  GdResult res;
  res.best_loss = std::numeric_limits<double>::infinity();
  if (opts.record_trace) res.loss_trace.reserve(static_cast<std::size_t>(opts.iterations) + 1);

  for (int it = 0; it <= opts.iterations; ++it) {
    const LossGradient lg = structured_loss_gradient(moments, gy, gu);
    if (!std::isfinite(lg.loss) || lg.loss > 1e12) {
      throw Error(ErrorKind::Diverged,
                  "training loss " + std::to_string(lg.loss) + " at iteration " +
                      std::to_string(it));
    }
    if (opts.record_trace) res.loss_trace.push_back(lg.loss);
    if (lg.loss < res.best_loss) {
      res.best_loss = lg.loss;
      res.best_iteration = it;
      best_gy = gy;
      best_gu = gu;
    }
    if (it == opts.iterations) break;
    gy -= opts.step * lg.grad_gy;
    gu -= opts.step * lg.grad_gu;
  }
  res.predictor = compose_rollout(best_gy, best_gu, moments.horizon, Structure::StructuredGD);
  return res;
}

GdResult fit_structured_gd(const Trajectory& data, int horizon, const SingleStepFit& init,
                           const GdOptions& opts) {
  return fit_structured_gd(regression_moments(data, horizon), init, opts);
}

std::vector<double> predict(const Predictor& p, std::span<const double> y_t,
                            std::span<const double> u_future) {
  if (y_t.size() != p.dy || u_future.size() != static_cast<std::size_t>(p.horizon) * p.du) {
    throw Error(ErrorKind::ShapeMismatch, "predict: regressor does not match the predictor");
  }
  std::vector<double> z(y_t.begin(), y_t.end());
  z.insert(z.end(), u_future.begin(), u_future.end());
  std::vector<double> out(p.g.rows(), 0.0);
  for (std::size_t i = 0; i < p.g.rows(); ++i) {
    auto row = p.g.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) s += row[j] * z[j];
    out[i] = s;
  }
  return out;
}

std::vector<double> rollout_recursive(const Matrix& g_y, const Matrix& g_u,
                                      std::span<const double> y_t,
                                      std::span<const double> u_future, int horizon) {
  check_horizon(horizon);
  const std::size_t dy = g_y.rows(), du = g_u.cols(), h = static_cast<std::size_t>(horizon);
  if (y_t.size() != dy || u_future.size() != h * du) {
    throw Error(ErrorKind::ShapeMismatch, "rollout: regressor does not match the model");
  }
  std::vector<double> y(y_t.begin(), y_t.end()), next(dy), out;
  out.reserve(h * dy);
  for (std::size_t k = 0; k < h; ++k) {
    for (std::size_t i = 0; i < dy; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < dy; ++j) s += g_y(i, j) * y[j];
      for (std::size_t j = 0; j < du; ++j) s += g_u(i, j) * u_future[k * du + j];
      next[i] = s;
    }
    y.swap(next);
    out.insert(out.end(), y.begin(), y.end());
  }
  return out;
}

double empirical_loss(const Predictor& p, const Trajectory& trajectory, std::size_t burn_in) {
  check_trajectory(trajectory);
  const std::size_t h = static_cast<std::size_t>(p.horizon);
  const std::size_t n = trajectory.length();
  if (trajectory.y.cols() != p.dy || trajectory.u.cols() != p.du) {
    throw Error(ErrorKind::ShapeMismatch, "trajectory does not match the predictor");
  }
  if (n < burn_in + h + 1) throw Error(ErrorKind::TooShort, "evaluation rollout too short");
  const std::size_t dz = p.g.cols(), dt = p.g.rows();
  std::vector<double> z(dz), y(dt);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t t = burn_in; t + h < n; ++t, ++count) {
    fill_regressor(trajectory, t, h, z.data());
    fill_target(trajectory, t, h, y.data());
    for (std::size_t i = 0; i < dt; ++i) {
      auto row = p.g.row(i);
      double r = y[i];
      for (std::size_t j = 0; j < dz; ++j) r -= row[j] * z[j];
      total += r * r;
    }
  }
  return total / static_cast<double>(count);
}

double empirical_loss(const Predictor& p, const LtiModel& model, std::size_t eval_len,
                      std::uint64_t seed, std::size_t burn_in) {
  return empirical_loss(p, simulate(model, eval_len, seed), burn_in);
}

double analytic_loss(const Predictor& p, const LtiModel& model, const SystemAnalysis& sys,
                     Regime regime) {
  const RolloutOperators& ops = sys.ops;
  if ((regime == Regime::Well) != ops.well_specified) {
    throw Error(ErrorKind::RegimeMismatch, "operators were built for the other regime");
  }
  if (ops.horizon != p.horizon || p.g.rows() != ops.g_star.rows() ||
      p.g.cols() != ops.g_star.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "predictor does not match the rollout operators");
  }
  if (regime == Regime::Well) {
    const Matrix delta = p.g - ops.g_star;
    return frobenius_inner(delta * sys.bundle.sigma_z, delta) + ops.gamma_w.squared_norm();
  }
  const std::size_t dy = p.dy;
  const Matrix e = ops.g_star.block(0, 0, ops.g_star.rows(), dy) - p.state_block();
  const Matrix bias = ops.phi + e * model.c();
  double loss = frobenius_inner(bias * sys.bundle.sigma_xhat, bias) +
                (e * sys.bundle.d_e).squared_norm() + ops.gamma_e.squared_norm();
  if (p.du > 0) {
    loss += (ops.g_star.block(0, dy, ops.g_star.rows(), ops.g_star.cols() - dy) -
             p.input_block())
                .squared_norm();
  }
  return loss;
}

double analytic_loss(const Predictor& p, const LtiModel& model, const SystemAnalysis& sys) {
  return analytic_loss(p, model, sys, sys.ops.well_specified ? Regime::Well : Regime::Mis);
}

std::string predictor_to_json(const Predictor& p) {
  detail::json j;
  j["structure"] = std::string(to_string(p.structure));
  j["horizon"] = p.horizon;
  j["dy"] = p.dy;
  j["du"] = p.du;
  j["G"] = detail::matrix_to_json(p.g);
  if (p.g_y) j["G_y"] = detail::matrix_to_json(*p.g_y);
  if (p.g_u && p.du > 0) j["G_u"] = detail::matrix_to_json(*p.g_u);
  return j.dump(2);
}

Predictor predictor_from_json(const std::string& text) {
  detail::json j;
  try {
    j = detail::json::parse(text);
  } catch (const detail::json::parse_error& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("predictor JSON: ") + e.what());
  }
  try {
    Predictor p;
    p.structure = structure_from_string(j.at("structure").get<std::string>());
    p.horizon = j.at("horizon").get<int>();
    p.dy = j.at("dy").get<std::size_t>();
    p.du = j.at("du").get<std::size_t>();
    p.g = detail::matrix_from_json(j.at("G"), "G");
    const std::size_t h = static_cast<std::size_t>(p.horizon);
    if (p.horizon < 1 || p.g.rows() != h * p.dy || p.g.cols() != p.dy + h * p.du) {
      throw Error(ErrorKind::ShapeMismatch, "predictor matrix has the wrong shape");
    }
    if (j.contains("G_y")) {
      p.g_y = detail::matrix_from_json(j.at("G_y"), "G_y");
      p.g_u = j.contains("G_u") ? detail::matrix_from_json(j.at("G_u"), "G_u") : Matrix(p.dy, 0);
    }
    return p;
  } catch (const detail::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("predictor JSON: ") + e.what());
  }
}

}  // namespace phl
