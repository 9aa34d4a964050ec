"""Multi-step vs single-step linear prediction (C++ core)."""

from ._core import (
    Model,
    PhlError,
    Predictor,
    analytic_loss,
    closed_loop_metrics,
    compose_rollout,
    eq10_system,
    example1_system,
    fit_multi_step,
    fit_single_step,
    run_experiment,
    simulate,
    synthesize_mpc,
    theory,
)

__all__ = [
    "Model",
    "PhlError",
    "Predictor",
    "analytic_loss",
    "closed_loop_metrics",
    "compose_rollout",
    "eq10_system",
    "example1_system",
    "fit_multi_step",
    "fit_single_step",
    "run_experiment",
    "simulate",
    "synthesize_mpc",
    "theory",
]
