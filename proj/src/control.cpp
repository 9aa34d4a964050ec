#include "phl/control.hpp"

#include <limits>

#include "phl/error.hpp"
#include "phl/numerics.hpp"

namespace phl {

MpcGain synthesize_mpc(const Predictor& p, const MpcOptions& opts) {
  const int h = opts.horizon == 0 ? p.horizon : opts.horizon;
  if (h < 1 || h > p.horizon) {
    throw Error(ErrorKind::InvalidConfig, "MPC horizon must lie in [1, predictor horizon]");
  }
  if (p.du == 0) throw Error(ErrorKind::InvalidConfig, "MPC needs a predictor with inputs");
  const std::size_t dy = p.dy, du = p.du, hu = static_cast<std::size_t>(h) * du;

  // Rows of block k: yhat_{t+k} = gy_k y_t + gu_k u, keeping the first H inputs.
  auto gy = [&](std::size_t k) { return p.g.block((k - 1) * dy, 0, dy, dy); };
  auto gu = [&](std::size_t k) { return p.g.block((k - 1) * dy, dy, dy, hu); };

  Matrix q = Matrix::identity(hu);
  Matrix c(hu, dy);
  for (std::size_t k = 1; k < static_cast<std::size_t>(h); ++k) {
    const Matrix guk = gu(k);
    q += guk.transpose() * guk;
    c += guk.transpose() * gy(k);
  }
  Matrix e = gu(static_cast<std::size_t>(h));
  Matrix f_term = gy(static_cast<std::size_t>(h));

  // Terminal rows: full row rank, or (MinNorm) restricted to their range.
  const auto eig = numerics::symmetric_eigen(mul_transposed(e, e));
  const double top = eig.values.empty() ? 0.0 : eig.values.back();
  std::size_t keep = 0;
  for (double v : eig.values)
    if (v > 1e-12 * std::max(top, 1e-300)) ++keep;
  if (keep < dy) {
    if (opts.terminal == TerminalMode::Error) {
      throw Error(ErrorKind::DegenerateTerminal, "terminal constraint rows are rank deficient");
    }
    Matrix basis(dy, keep);
    for (std::size_t j = 0; j < keep; ++j)
      for (std::size_t i = 0; i < dy; ++i) basis(i, j) = eig.vectors(i, dy - keep + j);
    e = basis.transpose() * e;
    f_term = basis.transpose() * f_term;
  }
  const std::size_t nc = e.rows();

  Matrix kkt(hu + nc, hu + nc);
  kkt.set_block(0, 0, q);
  kkt.set_block(0, hu, e.transpose());
  kkt.set_block(hu, 0, e);
  Matrix rhs(hu + nc, dy);
  rhs.set_block(0, 0, -c);
  rhs.set_block(hu, 0, -f_term);
  Matrix sol;
  try {
    sol = numerics::solve(kkt, rhs);
  } catch (const Error& err) {
    if (err.kind() == ErrorKind::SingularMatrix) throw Error(ErrorKind::SingularKkt, err.what());
    throw;
  }
  MpcGain gain;
  gain.w = -sol.block(0, 0, hu, dy);
  gain.f = sol.block(0, 0, du, dy);
  gain.horizon = h;
  gain.structure = p.structure;
  if (!gain.f.all_finite()) throw Error(ErrorKind::SingularKkt, "non-finite MPC gain");
  return gain;
}

ClosedLoopMetrics closed_loop_metrics(const LtiModel& model, const Matrix& f) {
  if (f.rows() != model.du() || f.cols() != model.dy()) {
    throw Error(ErrorKind::ShapeMismatch, "feedback must be d_u x d_y");
  }
  ClosedLoopMetrics out;
  const Matrix bf = model.b() * f;
  const Matrix a_cl = model.a() + bf * model.c();
  out.rho_cl = numerics::spectral_radius(a_cl);
  out.stable = out.rho_cl < 1.0 - 1e-9;
  if (!out.stable) {
    out.lqr_cost = std::numeric_limits<double>::infinity();
    return out;
  }
  const Matrix r = mul_transposed(model.d_v(), model.d_v());
  const Matrix noise = congruence(bf, r) + mul_transposed(model.b_w(), model.b_w());
  const Matrix sigma = numerics::solve_lyapunov(a_cl, noise);
  const Matrix sigma_y = congruence(model.c(), sigma) + r;
  out.lqr_cost = sigma_y.trace() + congruence(f, sigma_y).trace();
  return out;
}

ClosedLoopMetrics closed_loop_metrics(const LtiModel& model, const MpcGain& gain) {
  return closed_loop_metrics(model, gain.f);
}

}  // namespace phl
