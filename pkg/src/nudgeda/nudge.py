"""Nudged evolution of the state V together with on-the-fly reconstruction of
the unknown force G~ from observations."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .core import BoundaryKind, Field, Periodic, SnapshotBuffer, norm
from .errors import CFLViolationError, NonfiniteStateError, ShapeMismatchError
from .interpolant import KernelInterpolant, restrict
from .io import write_csv
from .models import SystemSpec
from .numerics import bdf_time_derivative, ssprk3_step, weno5_derivative
from .reference import Observer, ObservationSeries, Trajectory, stable_dt

log = logging.getLogger(__name__)

STAGE_TIMES = "stage-times"
STEP_START = "step-start"


@dataclass(frozen=True)
class NudgeConfig:
    """Nudging coefficient, interpolant and stepping controls.

    ``interp`` maps observation nodes to the computational grid; the
    restriction back to observation nodes is implied by its two grids.
    """

    mu: float
    interp: KernelInterpolant
    cfl: float = 0.7
    stage_observation_policy: str = STAGE_TIMES
    boundary: BoundaryKind = Periodic()
    check_stability: bool = True

    def __post_init__(self):
        if not self.mu >= 0:
            raise ValueError("mu must be non-negative")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if self.stage_observation_policy not in (STAGE_TIMES, STEP_START):
            raise ValueError(f"unknown stage observation policy {self.stage_observation_policy!r}")

    @property
    def comp_grid(self):
        return self.interp.eval_grid

    @property
    def obs_grid(self):
        return self.interp.obs_grid

    def smooth(self, u: np.ndarray) -> np.ndarray:
        """I_h applied to a computational field: restrict, then regress back."""
        return self.interp(restrict(u, self.obs_grid, self.comp_grid))

    def max_dt(self, spec: SystemSpec, u: np.ndarray) -> float:
        dt = stable_dt(self.cfl, spec.alphas(u), self.comp_grid)
        return min(dt, 1.0 / self.mu) if self.mu > 0 else dt


@dataclass
class NudgeState:
    t: float
    V: Field
    G_tilde: Field
    U_tilde: Field
    obs_interp_buffer: SnapshotBuffer = field(default_factory=lambda: SnapshotBuffer(3))
    step: int = 0


def init_nudge(config: NudgeConfig, V0: Field, G0: Field | None = None, obs0=None) -> NudgeState:
    """Initial nudging state; ``obs0`` (observations at t=0) primes the buffer."""
    grid = config.comp_grid
    if V0.grid != grid:
        raise ShapeMismatchError("V0 must live on the interpolant's evaluation grid")
    if G0 is None:
        G0 = Field(grid, np.zeros_like(V0.values), check=False)
    if G0.grid != grid or G0.values.shape != V0.values.shape:
        raise ShapeMismatchError("G0 must match V0 in grid and component count")
    state = NudgeState(0.0, V0.copy(), G0.copy(), V0.copy(), SnapshotBuffer(3))
    if obs0 is not None:
        obs0 = np.asarray(obs0, dtype=float)
        if obs0.shape != (V0.n_components, *config.obs_grid.shape):
            raise ShapeMismatchError("initial observations do not match the state components")
        state.obs_interp_buffer.push(0.0, config.interp(obs0))
    return state


def flux_divergence(spec: SystemSpec, u: np.ndarray, grid, boundary, alphas=None) -> np.ndarray:
    """WENO5 approximation of div F(u) with the model's (pressure-free) flux."""
    if alphas is None:
        alphas = spec.alphas(u)
    out = np.zeros_like(u)
    for d in range(spec.dim):
        fd = (lambda v, d=d: spec.flux_directions(v)[d])
        out += weno5_derivative(u, fd, max(alphas[d], 1e-12), grid.axes[d].dx, axis=-1 - d,
                                boundary=boundary)
    return out


def _coords(grid):
    return grid.nodes if grid.dim == 1 else grid.meshgrid()


def nudge_step(config: NudgeConfig, state: NudgeState, spec: SystemSpec, obs_now, dt: float) -> NudgeState:
    """Advance (V, G~) from ``state.t`` to ``state.t + dt``.

    ``obs_now`` are the observations at the new time level.  V is advanced by
    SSPRK3 with G~ frozen; G~ is then rebuilt from the BDF2 time derivative of
    the interpolated observations and the smoothed flux residual of U~.
    """
    grid = config.comp_grid
    mu = config.mu
    V = state.V.values
    t = state.t
    if config.check_stability:
        if mu * dt > 2.0:
            raise CFLViolationError(
                f"dt={dt:.4g} violates the explicit relaxation bound dt <= 2/mu = {2.0 / mu:.4g}")
        dt_cfl = stable_dt(config.cfl, spec.alphas(V), grid)
        if dt > dt_cfl * (1 + 1e-9):
            raise CFLViolationError(
                f"dt={dt:.4g} violates the hyperbolic bound dt <= cfl*dx/alpha = {dt_cfl:.4g}")
    obs_now = np.asarray(obs_now, dtype=float)
    if not np.all(np.isfinite(obs_now)):
        raise NonfiniteStateError("observations contain non-finite values")
    ih_next = config.interp(obs_now)
    buf = state.obs_interp_buffer.copy()
    entries = list(buf)
    if entries:
        t_n, ih_n = entries[-1]
    else:
        t_n, ih_n = t, ih_next
    t_new = t + dt

    if config.stage_observation_policy == STEP_START:
        def ih_at(s):
            return ih_n
    else:
        if len(entries) >= 2:
            pts = [entries[-2], (t_n, ih_n), (t_new, ih_next)]
        else:
            pts = [(t_n, ih_n), (t_new, ih_next)]

        def ih_at(s):
            if s <= t_n:
                return ih_n
            if s >= t_new:
                return ih_next
            out = 0.0
            for j, (tj, fj) in enumerate(pts):
                lj = 1.0
                for q, (tq, _) in enumerate(pts):
                    if q != j:
                        lj *= (s - tq) / (tj - tq)
                out = out + lj * fj
            return out

    G = state.G_tilde.values
    x = _coords(grid)
    alphas = spec.alphas(V)

    def rhs(s, v):
        return (-flux_divergence(spec, v, grid, config.boundary, alphas) + G
                + spec.source(v, x, s) + mu * (ih_at(s) - config.smooth(v)))

    try:
        V_new = ssprk3_step(V, rhs, t, dt)
    except NonfiniteStateError as exc:
        raise NonfiniteStateError(
            f"nudged state blew up at t={t:.4g} (mu*dt={mu * dt:.3g}; explicit relaxation needs "
            f"dt <= 2/mu = {2.0 / mu if mu else np.inf:.4g}, hyperbolic dt <= cfl*dx/alpha)") from exc
    U_tilde = ih_next + V_new - config.smooth(V_new)
    buf.push(t_new, ih_next)
    dt_ihu = bdf_time_derivative(buf)
    residual = flux_divergence(spec, U_tilde, grid, config.boundary) - spec.source(U_tilde, x, t_new)
    G_new = dt_ihu + config.smooth(residual)
    if not (np.all(np.isfinite(V_new)) and np.all(np.isfinite(G_new))):
        raise NonfiniteStateError(f"non-finite nudged state after t={t_new:.4g}")
    return NudgeState(t_new, Field(grid, V_new, check=False), Field(grid, G_new, check=False),
                      Field(grid, U_tilde, check=False), buf, state.step + 1)


# --------------------------------------------------------------------------- runs


@dataclass
class ErrorHistory:
    """Per-record diagnostics of a nudged run.

    ``columns`` maps column name to a list of values aligned with ``t``.
    """

    t: list = field(default_factory=list)
    columns: dict = field(default_factory=dict)

    def append(self, t: float, row: dict) -> None:
        self.t.append(float(t))
        for k, v in row.items():
            self.columns.setdefault(k, []).append(float(v))

    def __getitem__(self, key) -> np.ndarray:
        if key == "t":
            return np.array(self.t)
        return np.array(self.columns[key])

    def names(self) -> list[str]:
        return list(self.columns)

    def at(self, t: float) -> dict:
        i = int(np.argmin(np.abs(np.array(self.t) - t)))
        return {k: v[i] for k, v in self.columns.items()}

    def to_csv(self, path) -> Path:
        names = ["t"] + self.names()
        return write_csv(path, names, [self.t] + [self.columns[k] for k in self.names()])


class Truth:
    """Truth state and force on the computational grid at arbitrary times."""

    def __init__(self, state: Callable[[float], np.ndarray],
                 force: Optional[Callable[[float], np.ndarray]] = None,
                 force_components=()):
        self.state = state
        self.force = force
        self.force_components = tuple(force_components)

    @classmethod
    def from_trajectory(cls, traj: Trajectory, comp_grid, components=None, force_components=()):
        comps = list(range(traj.n_components)) if components is None else list(components)

        def state(t):
            return restrict(traj.state_at(t)[comps], comp_grid, traj.grid)

        force = None
        if traj.forces is not None:
            def force(t):
                return restrict(traj.force_at(t)[comps], comp_grid, traj.grid)
        return cls(state, force, force_components)


def _as_source(source, config: NudgeConfig):
    if isinstance(source, Trajectory):
        return Observer(source, config.obs_grid)
    if isinstance(source, (Observer, ObservationSeries)) or hasattr(source, "at"):
        return source
    raise TypeError("observation source must be a Trajectory, Observer or ObservationSeries")


def error_row(state: NudgeState, truth: Truth | None) -> dict:
    grid = state.V.grid
    if truth is None:
        return {"V_norm_L1": norm(state.V, "L1"), "G_norm_L1": norm(state.G_tilde, "L1")}
    U = Field(grid, truth.state(state.t), check=False)
    row = {}
    for k in range(state.V.n_components):
        row[f"state_err_L1_c{k}"] = norm(state.V - U, "L1", component=k)
    for k in range(state.V.n_components):
        row[f"state_err_L2_c{k}"] = norm(state.V - U, "L2", component=k)
    if truth.force is not None:
        G = Field(grid, truth.force(state.t), check=False)
        for k in truth.force_components:
            den = norm(G, "L1", component=k)
            num = norm(state.G_tilde - G, "L1", component=k)
            row[f"force_err_rel_L1_c{k}"] = num / den if den > 0 else np.nan
    return row


def run_nudge(config: NudgeConfig, spec: SystemSpec, source, V0: Field, G0: Field | None = None,
              T: float = 1.0, truth: Truth | None | bool = None, record_every: int = 1,
              stop_times=(), on_step: Callable[[NudgeState], None] | None = None):
    """Run the nudged system to ``T``; returns ``(final_state, ErrorHistory)``.

    ``source`` supplies observations through ``source.at(t)``.  A Trajectory
    source doubles as truth unless ``truth=False``.  ``stop_times`` are hit
    exactly by the step sequence; ``on_step`` sees every state including t=0.
    """
    obs = _as_source(source, config)
    if truth is None:
        traj = source if isinstance(source, Trajectory) else getattr(source, "traj", None)
        truth = (Truth.from_trajectory(traj, config.comp_grid, getattr(obs, "components", None),
                                       spec.force_components) if traj is not None else None)
    elif truth is False:
        truth = None
    state = init_nudge(config, V0, G0, obs.at(0.0))
    history = ErrorHistory()
    history.append(0.0, error_row(state, truth))
    if on_step:
        on_step(state)
    stops = sorted(float(s) for s in stop_times if 0 < s < T) + [float(T)]
    eps = 1e-12 * max(1.0, T)
    while state.t < T - eps:
        dt = config.max_dt(spec, state.V.values)
        nxt = next(s for s in stops if s > state.t + eps)
        # equal steps up to the next stop: no sliver step to upset BDF2
        n_left = max(1, int(np.ceil((nxt - state.t) / dt - 1e-9)))
        t_new = nxt if n_left == 1 else state.t + (nxt - state.t) / n_left
        state = nudge_step(config, state, spec, obs.at(t_new), t_new - state.t)
        if abs(state.t - nxt) <= eps:
            state.t = nxt
        if on_step:
            on_step(state)
        if state.step % record_every == 0 or state.t >= T - eps:
            history.append(state.t, error_row(state, truth))
    log.debug("nudged %s: %d steps to T=%g", spec.name, state.step, T)
    return state, history


def fitted_decay_rate(t, err, t0: float, t1: float) -> float:
    """Least-squares slope of log(err) over [t0, t1]."""
    t = np.asarray(t)
    err = np.asarray(err)
    sel = (t >= t0) & (t <= t1) & (err > 0)
    if sel.sum() < 2:
        return np.nan
    return float(np.polyfit(t[sel], np.log(err[sel]), 1)[0])
