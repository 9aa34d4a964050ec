#pragma once

#include <string>
#include <utility>
#include <vector>

#include "phl/matrix.hpp"
#include "phl/predictors.hpp"
#include "phl/system.hpp"

/// Closed-form asymptotics of the single-step and multi-step predictors.
/// Well-specified rates need a well-specified model; every misspecified
/// quantity additionally assumes no inputs (d_u = 0). Violations raise
/// RegimeMismatch.
namespace phl::theory {

/// M_MS^{ij} = tr(A^{|i-j|}).
Matrix m_ms(const LtiModel& model, int horizon);

/// M_SS^{ij} = tr((I - Sigma_x^-1 sum_{l=0}^{min(i,j)-2} A^l B_w B_w^T A^l^T) A^{|j-i|}^T),
/// the sum being empty when min(i, j) = 1.
Matrix m_ss(const LtiModel& model, const CovarianceBundle& bundle, int horizon);

/// Limit of N E[L - |Gamma_w|^2] for the direct multi-step fit.
double prop1_multistep_rate(const LtiModel& model, const SystemAnalysis& sys);
/// Same for the rolled-out single-step fit.
double prop2_singlestep_rate(const LtiModel& model, const SystemAnalysis& sys);

struct GapMatrices {
  Matrix m_ms;
  Matrix m_ss;
  Matrix gap;         // M_MS - M_SS
  Matrix gap_inputs;  // M_MS - M_SS + (H - 1) d_u I
};

GapMatrices gap_matrices(const LtiModel& model, const CovarianceBundle& bundle, int horizon);

/// The same gap built as a Gram matrix of the vectors
/// v_l = vec(Sigma_x^{-1/2} A^l B_w), which makes it PSD by construction.
Matrix gap_gram(const LtiModel& model, const CovarianceBundle& bundle, int horizon);

/// R = C A Sigma_x C^T Sigma_y^-1, the limit of the single-step estimate of G_y.
Matrix single_step_limit(const LtiModel& model, const CovarianceBundle& bundle);

/// rho(R); Lemma-style bound says it never exceeds one.
double lemma1_check(const LtiModel& model, const CovarianceBundle& bundle);

/// N -> infinity limit of the least-squares fit of the given structure
/// (single-step rollout or direct multi-step), in either regime.
Predictor population_predictor(const LtiModel& model, const SystemAnalysis& sys,
                               Structure structure);

/// Irreducible loss of a predictor whose state block is G* - offset:
/// tr((Phi + M C) Sigma_xhat (Phi + M C)^T) + tr(M D_e D_e^T M^T) + |Gamma_e|^2.
double bias_objective(const LtiModel& model, const SystemAnalysis& sys, const Matrix& offset);

/// tr(Phi (Sigma_xhat - Sigma_xhat C^T Sigma_y^-1 C Sigma_xhat) Phi^T) + |Gamma_e|^2.
double prop3_multistep_bias(const LtiModel& model, const SystemAnalysis& sys);

/// M = G* - [R; R^2; ...; R^H], the limiting offset of the single-step rollout.
Matrix prop4_offset(const LtiModel& model, const SystemAnalysis& sys);
double prop4_singlestep_bias(const LtiModel& model, const SystemAnalysis& sys);

struct RateTerms {
  double value = 0.0;
  std::vector<std::pair<std::string, double>> components;
};

/// Limit of N E[eps_N] for the multi-step fit under misspecification.
RateTerms prop3_reducible_terms(const LtiModel& model, const SystemAnalysis& sys);
double prop3_reducible_rate(const LtiModel& model, const SystemAnalysis& sys);

/// lim N E[tr(vec(E) vec(E)^T (X kron Y))] for the first-order error E of the
/// single-step estimate of G_y.
double omega(const Matrix& x, const Matrix& y, const LtiModel& model,
             const CovarianceBundle& bundle);

/// Theta: limit of N E[eps_N] for the rolled-out single-step fit.
RateTerms prop4_reducible_terms(const LtiModel& model, const SystemAnalysis& sys);
double prop4_reducible_rate(const LtiModel& model, const SystemAnalysis& sys);

enum class PredictorKind { Single, Multi };

struct AsymptoticReport {
  Regime regime = Regime::Well;
  PredictorKind kind = PredictorKind::Multi;
  int horizon = 1;
  double irreducible = 0.0;
  double reducible_rate = 0.0;
  std::vector<std::pair<std::string, double>> components;
};

AsymptoticReport asymptotic_report(const LtiModel& model, const SystemAnalysis& sys,
                                   PredictorKind kind);

}  // namespace phl::theory
