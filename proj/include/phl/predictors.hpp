#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phl/matrix.hpp"
#include "phl/system.hpp"

namespace phl {

enum class Structure { SingleStepRollout, DirectMultiStep, StructuredGD };

std::string_view to_string(Structure s);
Structure structure_from_string(std::string_view name);

/// H-step linear predictor y_{t+1:t+H} ~ G [y_t; u_{t:t+H-1}]. For the two
/// structured kinds the single-step base (G_y, G_u) is kept and G is exactly
/// its composed rollout.
struct Predictor {
  Structure structure = Structure::DirectMultiStep;
  int horizon = 1;
  std::size_t dy = 0;
  std::size_t du = 0;
  Matrix g;
  std::optional<Matrix> g_y;
  std::optional<Matrix> g_u;

  Matrix state_block() const { return g.block(0, 0, g.rows(), dy); }
  Matrix input_block() const { return g.block(0, dy, g.rows(), g.cols() - dy); }
};

/// Block (k, 0) = G_y^k, block (k, j) = G_y^{k-j} G_u for j <= k.
Predictor compose_rollout(const Matrix& g_y, const Matrix& g_u, int horizon,
                          Structure structure = Structure::SingleStepRollout);

/// Sufficient statistics of the H-step regression over windows t = 0..N-H-1:
/// gram = sum z z^T, cross = sum Y z^T, yy = sum |Y|^2 with
/// z_t = [y_t; u_{t:t+H-1}] and Y_t = y_{t+1:t+H}.
struct RegressionMoments {
  int horizon = 1;
  std::size_t dy = 0;
  std::size_t du = 0;
  std::size_t count = 0;
  Matrix gram;
  Matrix cross;
  double yy = 0.0;
};

RegressionMoments regression_moments(const Trajectory& data, int horizon);

/// Stacked rows z_t^T and Y_t^T, mainly for inspection and tests.
struct RegressionData {
  Matrix targets;
  Matrix regressors;
  std::size_t count = 0;
};
RegressionData regression_data(const Trajectory& data, int horizon);

struct SingleStepFit {
  Matrix g_y;
  Matrix g_u;
};

/// One-step least squares over t = 0..N-2. `ridge` adds ridge * I to the
/// Gram matrix (0 reproduces plain least squares).
SingleStepFit fit_single_step(const Trajectory& data, double ridge = 0.0);

/// Unconstrained H-step least squares; H = 1 runs the same code path as
/// fit_single_step.
Predictor fit_multi_step(const Trajectory& data, int horizon, double ridge = 0.0);

/// Rollout of the single-step fit.
Predictor single_step_predictor(const Trajectory& data, int horizon, double ridge = 0.0);

struct LossGradient {
  double loss = 0.0;
  Matrix grad_gy;
  Matrix grad_gu;
};

/// Mean H-step training loss of the rolled-out (G_y, G_u) and its gradient.
LossGradient structured_loss_gradient(const RegressionMoments& m, const Matrix& g_y,
                                      const Matrix& g_u);

struct GdOptions {
  double step = 2e-5;
  int iterations = 20000;
  bool record_trace = false;
};

struct GdResult {
  Predictor predictor;
  double best_loss = 0.0;
  int best_iteration = 0;
  std::vector<double> loss_trace;
};

/// Full-batch gradient descent on the mean H-step loss from `init`; returns
/// the iterate with the lowest training loss seen. Diverged when the loss
/// exceeds 1e12 or stops being finite.
GdResult fit_structured_gd(const Trajectory& data, int horizon, const SingleStepFit& init,
                           const GdOptions& opts = {});
GdResult fit_structured_gd(const RegressionMoments& moments, const SingleStepFit& init,
                           const GdOptions& opts = {});

/// G [y_t; u_future], u_future holding H stacked inputs.
std::vector<double> predict(const Predictor& p, std::span<const double> y_t,
                            std::span<const double> u_future);

/// Literal autoregressive recursion y <- G_y y + G_u u_k, for reference.
std::vector<double> rollout_recursive(const Matrix& g_y, const Matrix& g_u,
                                      std::span<const double> y_t,
                                      std::span<const double> u_future, int horizon);

/// Time average of |Y_t - G z_t|^2 over `trajectory` after `burn_in` steps.
double empirical_loss(const Predictor& p, const Trajectory& trajectory,
                      std::size_t burn_in = 1000);
/// Same, on a fresh rollout of `model` with the given seed.
double empirical_loss(const Predictor& p, const LtiModel& model, std::size_t eval_len,
                      std::uint64_t seed, std::size_t burn_in = 1000);

enum class Regime { Well, Mis };

/// Exact stationary H-step loss of a fixed predictor.
/// well: tr((G - G*) Sigma_z (G - G*)^T) + |Gamma_w|^2
/// mis:  |(Phi + (G* - G_y) C) Sigma_xhat^1/2|^2 + |(G* - G_y) D_e|^2 + |Gamma_e|^2
///       (+ |G*_u - G_u|^2 when inputs are present)
double analytic_loss(const Predictor& p, const LtiModel& model, const SystemAnalysis& sys,
                     Regime regime);
double analytic_loss(const Predictor& p, const LtiModel& model, const SystemAnalysis& sys);

std::string predictor_to_json(const Predictor& p);
Predictor predictor_from_json(const std::string& text);

}  // namespace phl
