import numpy as np
import pytest

from nudgeda.core import Field, make_uniform_grid
from nudgeda.errors import CFLViolationError, NonfiniteStateError, ShapeMismatchError
from nudgeda.interpolant import build, restrict
from nudgeda.models import euler1d_system, scalar_system
from nudgeda.nudge import (STEP_START, NudgeConfig, fitted_decay_rate, init_nudge, nudge_step,
                           run_nudge)
from nudgeda.reference import Observer, solve_reference, true_force

TWO_PI = 2 * np.pi


def _scalar_u0(x):
    return -0.8 * np.sin(x) + 0.4 * np.sin(2 * x) + 0.02 * np.cos(10 * x)


@pytest.fixture(scope="module")
def scalar_case():
    grid = make_uniform_grid(0, TWO_PI, 400)
    traj = solve_reference(scalar_system(), Field(grid, _scalar_u0(grid.nodes)[None]), 1.5)
    og = make_uniform_grid(0, TWO_PI, 100)
    return grid, og, traj


class LinearInTime:
    """Spatially constant observations c(t) = a + b t."""

    def __init__(self, grid, a, b):
        self.grid, self.a, self.b = grid, a, b

    def at(self, t):
        return np.full((1, *self.grid.shape), self.a + self.b * t)


def test_config_validation():
    g = make_uniform_grid(0, 1, 40)
    interp = build(g, g)
    with pytest.raises(ValueError):
        NudgeConfig(-1.0, interp)
    assert NudgeConfig(0.0, interp).max_dt(scalar_system(), np.zeros((1, 40))) < np.inf
    with pytest.raises(ValueError):
        NudgeConfig(1.0, interp, cfl=1.2)
    with pytest.raises(ValueError):
        NudgeConfig(1.0, interp, stage_observation_policy="whenever")


def test_init_state():
    comp = make_uniform_grid(0, 1, 80)
    og = make_uniform_grid(0, 1, 20)
    cfg = NudgeConfig(2.0, build(og, comp))
    V0 = Field(comp, np.stack([np.ones(80), np.zeros(80)]))
    st = init_nudge(cfg, V0, obs0=np.ones((2, 20)))
    assert st.t == 0 and st.step == 0
    assert np.all(st.G_tilde.values == 0) and st.G_tilde.values.shape == (2, 80)
    assert np.array_equal(st.U_tilde.values, V0.values)
    assert len(st.obs_interp_buffer) == 1
    with pytest.raises(ShapeMismatchError):
        init_nudge(cfg, V0, obs0=np.ones((1, 20)))
    with pytest.raises(ShapeMismatchError):
        init_nudge(cfg, Field(og, np.ones(20)))
    with pytest.raises(ShapeMismatchError):
        init_nudge(cfg, V0, G0=Field(comp, np.ones(80)))


def test_force_reconstruction_manufactured():
    # constant-in-space data c(t) = a + b t: every flux divergence vanishes, so
    # G~ = b - S(c) exactly and V relaxes toward c under spatially uniform dynamics
    comp = make_uniform_grid(0, TWO_PI, 120)
    og = make_uniform_grid(0, TWO_PI, 30)
    cfg = NudgeConfig(3.0, build(og, comp))
    spec = scalar_system()
    src = LinearInTime(og, 0.4, -0.7)
    V0 = Field(comp, np.full((1, 120), 1.0))
    state = init_nudge(cfg, V0, obs0=src.at(0.0))
    dt = 0.02
    for _ in range(4):
        state = nudge_step(cfg, state, spec, src.at(state.t + dt), dt)
        c = 0.4 - 0.7 * state.t
        assert np.allclose(state.G_tilde.values, -0.7 - 0.2 * np.sqrt(1 + c * c), atol=1e-12)
        v = state.V.values
        assert np.ptp(v) < 1e-12
        assert np.allclose(state.U_tilde.values, c, atol=1e-12)


def test_step_policies_agree_for_static_data():
    comp = make_uniform_grid(0, TWO_PI, 120)
    og = make_uniform_grid(0, TWO_PI, 30)
    spec = scalar_system()
    src = LinearInTime(og, 0.3, 0.0)
    V0 = Field(comp, np.sin(comp.nodes)[None])
    finals = []
    for policy in ("stage-times", STEP_START):
        cfg = NudgeConfig(3.0, build(og, comp), stage_observation_policy=policy)
        st, _ = run_nudge(cfg, spec, src, V0, T=0.2, truth=False)
        finals.append(st.V.values)
    assert np.allclose(finals[0], finals[1], rtol=0, atol=1e-13)


def test_truth_free_history(tmp_path):
    comp = make_uniform_grid(0, TWO_PI, 120)
    og = make_uniform_grid(0, TWO_PI, 30)
    cfg = NudgeConfig(3.0, build(og, comp))
    src = LinearInTime(og, 0.3, 0.0)
    _, hist = run_nudge(cfg, scalar_system(), src, Field(comp, np.zeros((1, 120))), T=0.1)
    assert hist.names() == ["V_norm_L1", "G_norm_L1"]
    assert hist["t"][0] == 0 and hist["t"][-1] == pytest.approx(0.1)


def test_unnudged_tracks_reference():
    # mu = 0 and G~ reset to the true force each step: V follows the truth solve
    spec = scalar_system()
    errs = []
    for n in (100, 200, 400):
        g = make_uniform_grid(0, TWO_PI, n)
        U0 = _scalar_u0(g.nodes)[None]
        cfg = NudgeConfig(0.0, build(make_uniform_grid(0, TWO_PI, n // 4), g))
        dt = 0.9 * cfg.max_dt(spec, U0)
        ref = solve_reference(spec, Field(g, U0), 10 * dt, cfl=cfg.cfl)
        obs = Observer(ref, cfg.obs_grid)
        st = init_nudge(cfg, Field(g, U0), Field(g, ref.forces[0]), obs.at(0.0))
        for _ in range(10):
            st = nudge_step(cfg, st, spec, obs.at(st.t + dt), dt)
            st.G_tilde = Field(g, true_force(spec, st.V.values, g))
        errs.append(np.max(np.abs(st.V.values - ref.states[-1])))
    # G~ is held fixed through the stages, so the step error is second order in dt
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5
    assert errs[-1] < 1e-3


def test_force_identity_with_identity_interpolant():
    # obs grid = comp grid with sigma << h makes I_h the identity: G~ is the truth residual
    spec = scalar_system()
    errs = []
    for n in (100, 200, 400):
        g = make_uniform_grid(0, TWO_PI, n)
        ref = solve_reference(spec, Field(g, _scalar_u0(g.nodes)[None]), 0.3)
        interp = build(g, g, sigma=0.15 * g.dx)
        v = np.sin(g.nodes) + np.cos(5 * g.nodes)
        assert np.max(np.abs(interp(v) - v)) < 1e-14
        cfg = NudgeConfig(3.0, interp)
        st, hist = run_nudge(cfg, spec, ref, Field(g, ref.states[0]), Field(g, ref.forces[0]), T=0.3)
        assert np.max(np.abs(st.U_tilde.values - ref.states[-1])) < 1e-12
        errs.append(hist["force_err_rel_L1_c0"][-1])
    assert errs[0] / errs[1] > 3 and errs[1] / errs[2] > 3


def test_u_tilde_smoothing_consistency(scalar_case):
    # I_h(U~) stays within twice the single smoothing error of I_h(U)
    grid, og, traj = scalar_case
    cfg = NudgeConfig(3.0, build(og, grid))
    checked = []

    def probe(state):
        if state.step in (5, 50, 100):
            U = traj.state_at(state.t)
            ih_u = cfg.interp(restrict(U, og, grid))
            lhs = np.max(np.abs(cfg.smooth(state.U_tilde.values) - ih_u))
            assert lhs <= 2 * np.max(np.abs(ih_u - U))
            checked.append(state.step)

    run_nudge(cfg, scalar_system(), traj, Field(grid, np.zeros((1, grid.n))), T=1.0, on_step=probe)
    assert checked == [5, 50, 100]


def test_scalar_nudging_converges(scalar_case, tmp_path):
    grid, og, traj = scalar_case
    cfg = NudgeConfig(3.0, build(og, grid))
    state, hist = run_nudge(cfg, scalar_system(), traj, Field(grid, np.zeros((1, grid.n))),
                            T=1.5, stop_times=(0.5,))
    assert state.t == 1.5
    e = hist["state_err_L1_c0"]
    t = hist["t"]
    assert np.any(t == 0.5)
    assert e[-1] < e[t == 0.5][0] / 5
    assert fitted_decay_rate(t, e, 0.2, 0.8) <= -1.0
    path = hist.to_csv(tmp_path / "h.csv")
    header = path.read_text().splitlines()[0].split(",")
    assert header == ["t", "state_err_L1_c0", "state_err_L2_c0", "force_err_rel_L1_c0"]


def test_truth_start_stays_close(scalar_case):
    grid, og, traj = scalar_case
    cfg = NudgeConfig(3.0, build(og, grid))
    V0 = Field(grid, traj.states[0])
    G0 = Field(grid, traj.forces[0])
    _, hist = run_nudge(cfg, scalar_system(), traj, V0, G0, T=1.5)
    _, cold = run_nudge(cfg, scalar_system(), traj, Field(grid, np.zeros((1, grid.n))), T=1.5)
    warm = hist["state_err_L1_c0"]
    assert warm[0] == 0
    # only the interpolation floor remains: below the cold start at every time
    cold_at = np.interp(hist["t"], cold["t"], cold["state_err_L1_c0"])
    assert np.all(warm[1:] < cold_at[1:])
    assert np.max(warm) < cold["state_err_L1_c0"][-1] / 2


def test_euler1d_nudging_converges():
    spec = euler1d_system()
    grid = make_uniform_grid(0, 4, 300)
    rho = 1.0 + 0.2 * np.sin(np.pi * grid.nodes)
    traj = solve_reference(spec, Field(grid, np.stack([rho, rho])), 1.5)
    og = make_uniform_grid(0, 4, 100)
    cfg = NudgeConfig(5.0, build(og, grid))
    V0 = Field(grid, np.stack([np.ones(grid.n), 0.5 * np.ones(grid.n)]))
    _, hist = run_nudge(cfg, spec, traj, V0, T=1.5, stop_times=(0.5,))
    t = hist["t"]
    for k in (0, 1):
        e = hist[f"state_err_L1_c{k}"]
        assert e[-1] < e[t == 0.5][0] / 5
    assert "force_err_rel_L1_c1" in hist.names() and "force_err_rel_L1_c0" not in hist.names()


@pytest.mark.slow
@pytest.mark.parametrize("experiment", ["scalar", "euler1d"])
def test_full_config_error_drop(experiment, tmp_path):
    from nudgeda.harness import ExperimentConfig, run_experiment
    from nudgeda.io import read_csv
    report = run_experiment(ExperimentConfig(experiment, {}, str(tmp_path)))
    header, data = read_csv(tmp_path / "history.csv")
    t = data[:, 0]
    for k in range(report.details["n_components"]):
        e = data[:, header.index(f"state_err_L1_c{k}")]
        assert e[-1] < np.interp(0.5, t, e) / 5


def test_stability_guards(scalar_case):
    grid, og, traj = scalar_case
    cfg = NudgeConfig(400.0, build(og, grid))
    obs = Observer(traj, og)
    state = init_nudge(cfg, Field(grid, np.zeros((1, grid.n))), obs0=obs.at(0.0))
    with pytest.raises(CFLViolationError, match="2/mu"):
        nudge_step(cfg, state, scalar_system(), obs.at(0.01), 0.01)
    lax = NudgeConfig(1.0, build(og, grid))
    with pytest.raises(CFLViolationError, match="cfl"):
        nudge_step(lax, state, scalar_system(), obs.at(0.1), 0.1)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_relaxation_instability_reported(scalar_case):
    # mu*dt = 4 lies outside the SSPRK3 stability interval on the nudging term
    grid, og, traj = scalar_case
    mu, dt = 400.0, 0.01
    cfg = NudgeConfig(mu, build(og, grid), check_stability=False)
    obs = Observer(traj, og)
    state = init_nudge(cfg, Field(grid, np.zeros((1, grid.n))), obs0=obs.at(0.0))
    with pytest.raises(NonfiniteStateError, match=r"2/mu"):
        for _ in range(140):
            state = nudge_step(cfg, state, scalar_system(), obs.at(state.t + dt), dt)
    assert state.t < 1.4


def test_fitted_decay_rate():
    t = np.linspace(0, 1, 21)
    assert fitted_decay_rate(t, 3 * np.exp(-2 * t), 0.2, 0.8) == pytest.approx(-2.0)
    assert np.isnan(fitted_decay_rate(t, np.exp(-t), 2.0, 3.0))
