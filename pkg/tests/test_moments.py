import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nudgeda.core import ENDPOINT_INCLUSIVE, Field, Grid1D, make_uniform_grid
from nudgeda.errors import MissingTraceError, ShapeMismatchError
from nudgeda.io import read_csv
from nudgeda.models import rte_moment_matrices
from nudgeda.moments import (Cascade, MomentSet, RecoveryConfig, close_periodic, closed_grid,
                             cascade_recover, export_moment_set, extract_gradient,
                             integrate_moment, recover_low_moments, run_rte_recovery)
from nudgeda.numerics import central_difference
from nudgeda.reference import Observer, observe, rte_initial_data, solve_rte_kinetic

TWO_PI = 2 * np.pi


@pytest.fixture(scope="module")
def kinetic():
    g = make_uniform_grid(0, 1, 200)
    return solve_rte_kinetic(rte_initial_data, 1.0, 1.0, g, T=0.3, n_moments=6)


def _small_cfg(**kw):
    base = dict(obs_grid=make_uniform_grid(0, 1, 40), comp_grid=make_uniform_grid(0, 1, 200),
                cfl=0.5, record_every=5)
    base.update(kw)
    return RecoveryConfig(**base)


# --------------------------------------------------------------------------- config


def test_config_defaults_and_validation():
    cfg = RecoveryConfig()
    assert (cfg.n_observed, cfg.N_target, cfg.order, cfg.mu) == (1, 4, 5, 6.0)
    assert cfg.obs_grid.n == 60 and cfg.comp_grid.n == 300 and cfg.sigma_t == 2.0
    assert np.array_equal(cfg.initial_low(), [0.5, 0.0])
    with pytest.raises(ValueError):
        RecoveryConfig(n_observed=5, N_target=4)
    with pytest.raises(ValueError):
        RecoveryConfig(sigma_s=-1.0)
    with pytest.raises(ValueError):
        RecoveryConfig(comp_grid=make_uniform_grid(0, 1, 30, ENDPOINT_INCLUSIVE))


def test_moment_set_validation():
    g = make_uniform_grid(0, 1, 10)
    with pytest.raises(ValueError):
        MomentSet(0.0, g, [], {}, np.zeros((1, 2)))
    cg = closed_grid(g)
    assert cg.n == 11 and cg.layout == ENDPOINT_INCLUSIVE and cg.dx == g.dx
    with pytest.raises(ValueError):
        MomentSet(0.0, cg, [], {}, np.full((1, 2), np.nan))


def test_a1_matrix():
    assert np.allclose(rte_moment_matrices(1, 1.0, 1.0).A, [[0, 1], [1 / 3, 0]])


# --------------------------------------------------------------------------- gradient extraction


def test_extract_gradient_examples():
    g = make_uniform_grid(0, 1, 16)
    c = np.linspace(-1, 2, 16)
    out = extract_gradient(Field(g, np.stack([np.ones(16), -2 / 3 * c])), 1)
    assert np.allclose(out.values[0], c, atol=1e-15)
    assert np.all(extract_gradient(Field(g, np.zeros((2, 16))), 1).values == 0)
    with pytest.raises(ShapeMismatchError):
        extract_gradient(Field(g, np.zeros((3, 16))), 1)


@given(st.integers(0, 12), arrays(np.float64, 12, elements=st.floats(-1e3, 1e3)))
def test_coefficient_consistency(n, vals):
    g = make_uniform_grid(0, 1, 12)
    force = np.zeros((n + 1, 12))
    force[n] = -(n + 1) / (2 * n + 1) * vals
    out = extract_gradient(Field(g, force), n).values[0]
    assert np.all(np.abs(out - vals) <= 1e-15 * np.maximum(1.0, np.abs(vals)) * 4)


def test_manufactured_truncation_gradient():
    g = make_uniform_grid(0, 1, 300)
    x = g.nodes
    dm2 = TWO_PI * np.cos(TWO_PI * x)
    force = Field(g, np.stack([np.zeros_like(x), -2 / 3 * dm2]))
    grad = extract_gradient(force, 1)
    assert np.max(np.abs(grad.values[0] - dm2)) <= 1e-12
    m2 = integrate_moment(grad, 0.0, 0.0)
    assert m2.grid.n == 301
    xc = m2.grid.nodes
    assert np.max(np.abs(m2.values[0] - np.sin(TWO_PI * xc))) < 1e-4


def test_integrate_examples():
    g = make_uniform_grid(0, 1, 50, ENDPOINT_INCLUSIVE)
    out = integrate_moment(Field(g, np.zeros(50)), 0.3, 0.3)
    assert np.all(out.values == 0.3)


@given(arrays(np.float64, 41, elements=st.floats(-50, 50)), st.floats(-5, 5), st.floats(-5, 5))
def test_integrate_endpoint_exact(grad, left, right):
    g = make_uniform_grid(0, 1, 40)
    out = integrate_moment(Field(g, grad[:40]), left, right).values[0]
    assert abs(out[0] - left) <= 1e-14 and abs(out[-1] - right) <= 1e-14


def test_periodic_correction_constant():
    # equal traces: the correction slope is minus the mean gradient
    g = make_uniform_grid(0, 1, 64)
    grad = 1.5 + np.sin(TWO_PI * g.nodes) + 0.3 * np.cos(6 * np.pi * g.nodes) ** 2
    out = integrate_moment(Field(g, grad), 0.7, 0.7).values[0]
    closed = close_periodic(grad)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * g.dx * (closed[1:] + closed[:-1]))])
    xs = g.dx * np.arange(65)
    c = -cum[-1] / 1.0
    assert np.allclose(out, 0.7 + cum + c * xs, atol=1e-14)


def test_integrate_true_gradient_converges():
    errs = []
    for n in (50, 100, 200):
        g = make_uniform_grid(0, 1, n)
        traj = solve_rte_kinetic(rte_initial_data, 1.0, 1.0, g, T=0.1, n_moments=3)
        m2 = traj.states[-1, 2]
        dm2 = central_difference(m2, g.dx, periodic=True)
        left, right = traj.boundary_traces[-1, 2]
        rec = integrate_moment(Field(g, dm2), left, right).values[0]
        errs.append(np.max(np.abs(rec - close_periodic(m2))))
    assert errs[1] < errs[0] / 3.5 and errs[2] < errs[1] / 3.5


# --------------------------------------------------------------------------- cascade


def test_zero_cascade():
    cfg = _small_cfg()
    cas = Cascade(cfg)
    n = cfg.comp_grid.n
    for t in (0.0, 0.01, 0.02):
        ms = cas(t, np.zeros((2, n)), np.zeros((2, n)), np.zeros((6, 2)))
    assert ms.order == 5
    assert np.all(ms.values() == 0)
    assert sorted(ms.gradients) == [2, 3, 4, 5]


def test_missing_trace():
    cfg = _small_cfg()
    n = cfg.comp_grid.n
    with pytest.raises(MissingTraceError):
        Cascade(cfg)(0.0, np.zeros((2, n)), np.zeros((2, n)), np.zeros((4, 2)))


def test_degenerate_cascade():
    cfg = _small_cfg(n_observed=2, N_target=2)
    n = cfg.comp_grid.n
    ms = Cascade(cfg)(0.0, np.ones((3, n)), np.zeros((3, n)), np.ones((4, 2)) * 0.25)
    assert ms.order == 3 and list(ms.gradients) == [3]
    assert np.allclose(ms.fields[3].values, 0.25)


def test_truth_closure_residual_refines():
    # kinetic moments satisfy each moment equation up to discretization error
    res = []
    for n in (50, 100):
        g = make_uniform_grid(0, 1, n)
        traj = solve_rte_kinetic(rte_initial_data, 1.0, 1.0, g, T=0.1, n_moments=5)
        m, t = traj.states, traj.times
        i = len(t) // 2
        dt_m = (m[i + 1] - m[i - 1]) / (t[i + 1] - t[i - 1])
        dx = lambda f: central_difference(f, g.dx, periodic=True)  # noqa: E731
        worst = 0.0
        for k in (1, 2, 3):
            r = dt_m[k] + k / (2 * k + 1) * dx(m[i, k - 1]) + (k + 1) / (2 * k + 1) * dx(m[i, k + 1]) \
                + 2.0 * m[i, k]
            worst = max(worst, np.max(np.abs(r)))
        res.append(worst)
    assert res[1] < res[0] / 3


def _cascade_truth_errors(n, n_ob):
    g = make_uniform_grid(0, 1, n)
    kin = solve_rte_kinetic(rte_initial_data, 1.0, 1.0, g, T=0.3, n_moments=5)
    cas = Cascade(_small_cfg(N_target=3, comp_grid=g, obs_grid=make_uniform_grid(0, 1, n_ob)))
    for t, m, tr in zip(kin.times, kin.states, kin.boundary_traces):
        force = np.stack([np.zeros(g.n), -2 / 3 * central_difference(m[2], g.dx, periodic=True)])
        ms = cas(t, m[:2], force, tr)
    truth = close_periodic(kin.states[-1])
    for k in range(2, 5):
        assert ms.fields[k].values[0, 0] == kin.boundary_traces[-1, k, 0]
        assert ms.fields[k].values[0, -1] == kin.boundary_traces[-1, k, 1]
    return np.array([np.mean(np.abs(ms.fields[k].values[0] - truth[k])) / np.mean(np.abs(truth[k]))
                     for k in (2, 3, 4)])


def test_cascade_from_truth_converges():
    # exact m_0, m_1 and truncation force in: recovered m_2..m_4 converge as h, sigma shrink
    coarse = _cascade_truth_errors(200, 100)
    fine = _cascade_truth_errors(400, 200)
    assert np.all(coarse < 0.05)
    assert np.all(fine < coarse / 3)


# --------------------------------------------------------------------------- end to end


def test_recover_low_moments_isotropic_steady():
    # sigma = 0 and constant m_0: zero truncation flux throughout
    g = make_uniform_grid(0, 1, 100)
    traj = solve_rte_kinetic(lambda x, v: 0.8 + 0.0 * x * v, 0.0, 0.0, g, T=0.3, n_moments=3)
    cfg = _small_cfg(sigma_a=0.0, sigma_s=0.0, comp_grid=g, obs_grid=make_uniform_grid(0, 1, 25))
    obs = observe(traj, cfg.obs_grid, components=[0, 1])
    low, g_tilde = recover_low_moments(cfg, obs, 0.3)
    assert low.times[0] == 0 and low.times[-1] == pytest.approx(0.3)
    assert g_tilde.shape == low.states.shape
    assert np.max(np.abs(g_tilde[-1])) < 1e-10
    assert np.max(np.abs(low.states[-1, 0] - 0.8)) < np.max(np.abs(low.states[0, 0] - 0.8))


def test_run_rte_recovery_small(kinetic, tmp_path):
    cfg = _small_cfg()
    final, hist = run_rte_recovery(cfg, kinetic, T=0.3, snapshot_times=(0.0, 0.15, 0.3))
    assert final.t == pytest.approx(0.3) and final.order == 5
    assert [round(s.t, 12) for s in final.snapshots] == [0.0, 0.15, 0.3]
    for s in final.snapshots:
        for k in range(2, 6):
            assert s.fields[k].values[0, 0] == s.boundary_traces[k, 0]
            assert s.fields[k].values[0, -1] == s.boundary_traces[k, 1]
            # periodic setup: both traces coincide
            assert s.boundary_traces[k, 0] == s.boundary_traces[k, 1]
    names = hist.names()
    for k in range(6):
        assert f"moment_err_L1_m{k}" in names and f"moment_err_rel_L1_m{k}" in names
    e0 = hist["moment_err_L1_m0"]
    assert e0[-1] < e0[0]
    files = export_moment_set(final, tmp_path, params={"mu": cfg.mu})
    assert [p.name for p in files] == [f"m{k}.csv" for k in range(6)] + ["manifest.json"]
    header, data = read_csv(tmp_path / "m3.csv")
    assert header[0] == "x" and len(header) == 4
    assert np.array_equal(data[:, -1], final.fields[3].values[0])
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["order"] == 5 and man["params"]["mu"] == 6.0 and len(man["times"]) == 3


def test_stored_pipeline_matches_streamed(kinetic):
    cfg = _small_cfg()
    obs = Observer(kinetic, cfg.obs_grid, components=[0, 1])
    low, g_tilde = recover_low_moments(cfg, obs, 0.3)
    stored = cascade_recover(cfg, low, g_tilde, kinetic.traces_at, 0.3)
    streamed, _ = run_rte_recovery(cfg, kinetic, T=0.3)
    assert stored.t == streamed.t
    assert np.array_equal(stored.values(), streamed.values())
    with pytest.raises(ValueError):
        cascade_recover(cfg, low, g_tilde, kinetic.traces_at, -1.0)


def test_run_rte_recovery_needs_high_moments():
    g = make_uniform_grid(0, 1, 40)
    traj = solve_rte_kinetic(rte_initial_data, 1.0, 1.0, g, T=0.05, n_moments=3)
    with pytest.raises(MissingTraceError):
        run_rte_recovery(_small_cfg(comp_grid=g), traj, T=0.05)


def test_grid_helpers():
    assert closed_grid(Grid1D(0, 1, 5, ENDPOINT_INCLUSIVE)).n == 5
    assert np.array_equal(close_periodic(np.array([[1.0, 2.0]])), [[1.0, 2.0, 1.0]])
