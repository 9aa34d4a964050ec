#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "phl/matrix.hpp"

namespace phl {

/// x_{t+1} = A x_t + B u_t + B_w w_t,  y_t = C x_t + D_v v_t
/// with w, v, u iid standard normal. The constructor validates shapes and
/// stability; a model is "well specified" exactly when C = I and D_v = 0, and
/// any other model must have D_v D_v^T positive definite.
class LtiModel {
 public:
  LtiModel(Matrix a, Matrix b, Matrix b_w, Matrix c, Matrix d_v);

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }
  const Matrix& b_w() const { return b_w_; }
  const Matrix& c() const { return c_; }
  const Matrix& d_v() const { return d_v_; }

  std::size_t dx() const { return a_.rows(); }
  std::size_t du() const { return b_.cols(); }
  std::size_t dw() const { return b_w_.cols(); }
  std::size_t dy() const { return c_.rows(); }
  bool well_specified() const { return well_specified_; }

  /// Same model with a different input matrix (d_x x d_u, possibly d_u = 0).
  LtiModel with_input(Matrix b) const;

 private:
  Matrix a_, b_, b_w_, c_, d_v_;
  bool well_specified_ = false;
};

/// A = [[a, 1], [0, 0.75]], Sigma_w = I. Well specified: B = [0 1]^T, C = I,
/// D_v = 0. Misspecified: B = 0 (no inputs), C = [1 0], D_v = 1.
LtiModel eq10_system(double a, bool well_specified);

/// A = [[0.9, 1], [0, 0.9]], B_w = I, C = [1 0], D_v = 1, no inputs.
LtiModel example1_system();

/// Rows are time steps; row 0 is the first sample, generated from x = 0.
struct Trajectory {
  Matrix y;                 // N x d_y
  Matrix u;                 // N x d_u
  std::optional<Matrix> x;  // N x d_x, diagnostics only

  std::size_t length() const { return y.rows(); }
};

struct SimulateOptions {
  bool zero_inputs = false;
  bool record_state = false;
};

Trajectory simulate(const LtiModel& model, std::size_t n, std::uint64_t seed,
                    const SimulateOptions& opts = {});

/// Same recursion with u_t = F y_t. State is always recorded. Once the state
/// overflows the remaining samples are left as +/-inf or NaN.
Trajectory closed_loop_simulate(const LtiModel& model, const Matrix& f, std::size_t n,
                                std::uint64_t seed);

/// Stationary and filter quantities. For a well-specified model the
/// innovations quantities degenerate: S = 0, D_e = 0, Sigma_xhat = Sigma_x,
/// and asking for K is an error.
struct CovarianceBundle {
  int horizon = 1;
  Matrix sigma_x;
  Matrix sigma_z;  // blockdiag(Sigma_y, I_{H d_u}), the regressor covariance
  Matrix sigma_y;
  Matrix riccati_s;
  Matrix d_e;
  Matrix sigma_xhat;
  bool has_kalman = false;

  const Matrix& kalman_k() const;
  void set_kalman_k(Matrix k) { k_ = std::move(k); }

 private:
  Matrix k_;
};

CovarianceBundle covariances(const LtiModel& model, int horizon);

/// Block operators of the H-step rollout. Well specified: g_star, gamma_w.
/// Misspecified: phi, g_star, gamma_e. Unused members are empty.
///   well:  y_{t+1:t+H} = g_star [x_t; u_{t:t+H-1}] + gamma_w w_{t:t+H-1}
///   mis:   y_{t+1:t+H} = phi xhat_t + g_star [y_t; u_{t:t+H-1}] + gamma_e e_{t+1:t+H}
struct RolloutOperators {
  int horizon = 1;
  bool well_specified = true;
  Matrix g_star;
  Matrix gamma_w;
  Matrix phi;
  Matrix gamma_e;
};

RolloutOperators rollout_operators(const LtiModel& model, const CovarianceBundle& bundle,
                                   int horizon);

/// Misspecified models only: y from xhat_{t+1} = A xhat_t + B u_t + K D_e e_t,
/// y_t = C xhat_t + D_e e_t. `zero_gain` forces K = 0 for diagnostics.
Trajectory innovations_simulate(const LtiModel& model, const CovarianceBundle& bundle,
                                std::size_t n, std::uint64_t seed, bool zero_gain = false);

struct SystemAnalysis {
  CovarianceBundle bundle;
  RolloutOperators ops;
};

SystemAnalysis analyze(const LtiModel& model, int horizon);

/// Model documents: {"A": [[..]], "B": [[..]], "B_w": .., "C": .., "D_v": ..}
/// with row-major nested arrays; an omitted B means no inputs.
LtiModel model_from_json(const std::string& text);
std::string model_to_json(const LtiModel& model);

}  // namespace phl
