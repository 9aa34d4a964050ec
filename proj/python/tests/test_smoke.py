import json

import numpy as np
import pytest

import phl


def test_example1_theory():
    t = phl.theory(phl.example1_system(), 5)
    assert t["regime"] == "mis"
    assert t["rho_A"] == pytest.approx(0.9, abs=1e-8)
    assert t["single_step_limit_rho"] == pytest.approx(0.99, abs=0.005)
    assert t["single_step_irreducible"] > t["multi_step_irreducible"]


def test_fit_and_loss_well_specified():
    m = phl.eq10_system(0.75, True)
    y, u = phl.simulate(m, 2000, 4)
    assert y.shape == (2000, 2) and u.shape == (2000, 1)
    ms = phl.fit_multi_step(y, u, 4)
    ss = phl.fit_single_step(y, u, 4)
    assert ms.G.shape == (8, 6)
    assert ss.structure == "single_step"
    floor = phl.theory(m, 4)["multi_step_irreducible"]
    for p in (ms, ss):
        loss = phl.analytic_loss(p, m)
        assert floor <= loss < 1.1 * floor


def test_h1_fits_agree():
    m = phl.eq10_system(0.5, True)
    y, u = phl.simulate(m, 300, 1)
    assert np.array_equal(phl.fit_multi_step(y, u, 1).G, phl.fit_single_step(y, u, 1).G)


def test_rollout_predicts_like_recursion():
    gy = np.array([[0.5, 0.1], [0.0, 0.3]])
    gu = np.array([[1.0], [0.5]])
    p = phl.compose_rollout(gy, gu, 3)
    y0, u = np.array([1.0, -1.0]), np.array([0.2, 0.0, -0.4])
    cur, expect = y0, []
    for k in range(3):
        cur = gy @ cur + gu[:, 0] * u[k]
        expect.extend(cur)
    np.testing.assert_allclose(p.predict(y0, u), expect, atol=1e-12)


def test_mpc_on_exact_model_is_stable():
    m = phl.eq10_system(0.9, True)
    y, u = phl.simulate(m, 3000, 2)
    f = phl.synthesize_mpc(phl.fit_multi_step(y, u, 10))
    assert f.shape == (1, 2)
    cl = phl.closed_loop_metrics(m, f)
    assert cl["stable"] and cl["rho_cl"] < 1.0


def test_run_experiment_csv():
    cfg = {"experiment": "fig2", "a_grid": [0.5], "n_grid": [50, 100], "reps": 5}
    csv = phl.run_experiment(json.dumps(cfg))
    lines = csv.strip().splitlines()
    assert lines[0] == "experiment,a,H,N,predictor,metric,mean,stderr,reps,seed,notes"
    assert len(lines) == 1 + 3 + 2 * 2


def test_errors_surface_as_phl_error():
    with pytest.raises(phl.PhlError, match="InvalidConfig"):
        phl.run_experiment('{"experiment": "fig9"}')
    m = phl.eq10_system(0.5, True)
    y, u = phl.simulate(m, 6, 1)
    with pytest.raises(phl.PhlError, match="TooShort"):
        phl.fit_multi_step(y, u, 5)


def test_model_json_round_trip():
    m = phl.Model(np.array([[0.5]]), np.zeros((1, 0)), np.eye(1), np.eye(1), np.eye(1))
    back = phl.Model.from_json(m.to_json())
    assert not back.well_specified
    np.testing.assert_array_equal(back.A, m.A)
