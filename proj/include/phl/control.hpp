#pragma once

#include "phl/matrix.hpp"
#include "phl/predictors.hpp"
#include "phl/system.hpp"

namespace phl {

enum class TerminalMode {
  Error,    // rank-deficient terminal rows raise DegenerateTerminal
  MinNorm,  // drop the dependent constraint directions instead
};

struct MpcOptions {
  int horizon = 0;  // 0 means the predictor horizon
  TerminalMode terminal = TerminalMode::Error;
};

/// Receding-horizon gain: u_{t:t+H-1} = -W y_t minimizes
/// sum_{k=1}^{H-1} |yhat_{t+k}|^2 + sum_{k=0}^{H-1} |u_{t+k}|^2 subject to
/// yhat_{t+H} = 0, and the applied feedback is u_t = F y_t.
struct MpcGain {
  Matrix f;  // d_u x d_y
  Matrix w;  // H d_u x d_y
  int horizon = 1;
  Structure structure = Structure::DirectMultiStep;
};

MpcGain synthesize_mpc(const Predictor& p, const MpcOptions& opts = {});

struct ClosedLoopMetrics {
  double lqr_cost = 0.0;  // stationary E[|y|^2 + |u|^2]; +inf when unstable
  double rho_cl = 0.0;
  bool stable = false;
};

/// Applies u_t = F y_t to the true model; A_cl = A + B F C.
ClosedLoopMetrics closed_loop_metrics(const LtiModel& model, const Matrix& f);
ClosedLoopMetrics closed_loop_metrics(const LtiModel& model, const MpcGain& gain);

}  // namespace phl
