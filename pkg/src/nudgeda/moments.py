"""Recovery of unobserved Legendre moments of the 1D radiative transfer
equation from nudged low-order moments and boundary traces.

Pipeline: nudge m_0..m_n against sparse observations, read the gradient of
m_{n+1} off the reconstructed truncation force, then climb the hierarchy one
moment equation at a time, integrating each gradient between the two
boundary traces.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (ENDPOINT_INCLUSIVE, Field, Grid1D, SnapshotBuffer, make_uniform_grid, norm)
from .errors import (MissingTraceError, ShapeMismatchError, ZeroReferenceError)
from .interpolant import build, restrict
from .io import write_csv, write_json
from .models import moment_system, rte_moment_matrices
from .nudge import ErrorHistory, NudgeConfig, NudgeState, run_nudge
from .numerics import antiderivative_corrected, bdf_time_derivative, central_difference
from .reference import Observer, Trajectory

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RecoveryConfig:
    """Parameters of one moment-recovery run.

    Moments ``0..n_observed`` are observed on ``obs_grid`` and nudged on
    ``comp_grid``; ``n_observed+1 .. N_target+1`` are recovered.
    """

    n_observed: int = 1
    N_target: int = 4
    mu: float = 6.0
    obs_grid: Grid1D = field(default_factory=lambda: make_uniform_grid(0.0, 1.0, 60))
    sigma_a: float = 1.0
    sigma_s: float = 1.0
    comp_grid: Grid1D = field(default_factory=lambda: make_uniform_grid(0.0, 1.0, 300))
    sigma: Optional[float] = None
    cfl: float = 0.7
    initial: tuple = (0.5,)
    noise_eps: float = 0.0
    seed: int = 0
    record_every: int = 10

    def __post_init__(self):
        if not 0 <= self.n_observed <= self.N_target:
            raise ValueError("need 0 <= n_observed <= N_target")
        if self.sigma_a < 0 or self.sigma_s < 0:
            raise ValueError("opacities must be non-negative")
        if not self.comp_grid.periodic:
            raise ValueError("moment recovery runs on a periodic computational grid")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")

    @property
    def order(self) -> int:
        """Index of the highest recovered moment."""
        return self.N_target + 1

    @property
    def sigma_t(self) -> float:
        return self.sigma_a + self.sigma_s

    def nudge_config(self) -> NudgeConfig:
        return NudgeConfig(self.mu, build(self.obs_grid, self.comp_grid, sigma=self.sigma), cfl=self.cfl)

    def initial_low(self) -> np.ndarray:
        """Initial guess for m_0..m_n (missing entries are zero)."""
        vals = np.zeros(self.n_observed + 1)
        k = min(len(self.initial), vals.size)
        vals[:k] = self.initial[:k]
        return vals


@dataclass
class MomentSet:
    """Moments m_0..m_order at one time on the endpoint-inclusive grid.

    ``gradients`` holds the reconstructed x-derivatives for the recovered
    orders; ``boundary_traces[k]`` is ``(m_k(a), m_k(b))``.
    """

    t: float
    grid: Grid1D
    fields: list
    gradients: dict
    boundary_traces: np.ndarray
    snapshots: list = field(default_factory=list)

    def __post_init__(self):
        if self.grid.layout != ENDPOINT_INCLUSIVE:
            raise ValueError("MomentSet lives on an endpoint-inclusive grid")
        if not np.all(np.isfinite(self.boundary_traces)):
            raise ValueError("boundary traces must be finite")

    @property
    def order(self) -> int:
        return len(self.fields) - 1

    def values(self) -> np.ndarray:
        return np.stack([f.values[0] for f in self.fields])


def closed_grid(grid: Grid1D) -> Grid1D:
    """Endpoint-inclusive twin of a periodic grid (one extra node at b)."""
    if not grid.periodic:
        return grid
    return Grid1D(grid.a, grid.b, grid.n + 1, ENDPOINT_INCLUSIVE)


def close_periodic(values: np.ndarray) -> np.ndarray:
    """Append the wrap-around node so values cover both endpoints."""
    values = np.asarray(values, dtype=float)
    return np.concatenate([values, values[..., :1]], axis=-1)


def extract_gradient(g_tilde: Field, n: int) -> Field:
    """Recover d/dx m_{n+1} from the last component of the truncation force."""
    if g_tilde.n_components != n + 1:
        raise ShapeMismatchError(f"expected {n + 1} force components, got {g_tilde.n_components}")
    return Field(g_tilde.grid, -(2 * n + 1) / (n + 1) * g_tilde.values[n], check=False)


def integrate_moment(gradient: Field, left: float, right: float) -> Field:
    """Moment with the given gradient that takes the trace values at both ends."""
    if gradient.grid.periodic:
        gradient = Field(closed_grid(gradient.grid), close_periodic(gradient.values), check=False)
    return antiderivative_corrected(gradient, float(left), float(right))


def _trace(traces: np.ndarray, k: int) -> tuple[float, float]:
    if traces is None or k >= len(traces):
        raise MissingTraceError(f"no boundary trace for moment order {k}")
    left, right = traces[k]
    return float(left), float(right)


class Cascade:
    """Stateful gradient extraction and cascade: turns (t, m_0..m_n, g~) into a full MomentSet.

    Keeps a three-deep ring of each recovered moment for BDF2.
    """

    def __init__(self, cfg: RecoveryConfig, smooth=None):
        self.cfg = cfg
        self.smooth = smooth or cfg.nudge_config().smooth
        self.buffers = {k: SnapshotBuffer(3) for k in range(cfg.n_observed + 1, cfg.order)}

    def __call__(self, t: float, low: np.ndarray, g_tilde: np.ndarray, traces: np.ndarray) -> MomentSet:
        cfg = self.cfg
        n, grid = cfg.n_observed, cfg.comp_grid
        cgrid = closed_grid(grid)
        periodic_vals = [np.asarray(low[k], dtype=float) for k in range(n + 1)]
        gradients = {}

        grad = extract_gradient(Field(grid, g_tilde, check=False), n)
        # trace lookups first so a missing order fails before any work
        for k in range(n + 1, cfg.order + 1):
            _trace(traces, k)
        fields = [Field(cgrid, close_periodic(v), check=False) for v in periodic_vals]
        for k in range(n + 1, cfg.order + 1):
            if k > n + 1:
                j = k - 1
                self.buffers[j].push(t, periodic_vals[j])
                dt_m = bdf_time_derivative(self.buffers[j])
                dx_m = central_difference(periodic_vals[j - 1], grid.dx, periodic=True)
                comb = dt_m + j / (2 * j + 1) * dx_m + cfg.sigma_t * periodic_vals[j]
                grad = Field(grid, -(2 * j + 1) / (j + 1) * self.smooth(comb), check=False)
            m_k = integrate_moment(grad, *_trace(traces, k))
            gradients[k] = Field(cgrid, close_periodic(grad.values), check=False)
            fields.append(m_k)
            periodic_vals.append(m_k.values[0, :-1])
        tr = np.asarray(traces, dtype=float)[: cfg.order + 1].copy()
        return MomentSet(float(t), cgrid, fields, gradients, tr)


def recover_low_moments(cfg: RecoveryConfig, obs, T: float):
    """Nudge the observed moments m_0..m_n.

    Returns ``(Trajectory of the nudged moments, array of g~ per stored time)``
    with one entry per nudge step.
    """
    spec = moment_system(rte_moment_matrices(cfg.n_observed, cfg.sigma_a, cfg.sigma_s))
    ncfg = cfg.nudge_config()
    grid = cfg.comp_grid
    V0 = Field(grid, np.broadcast_to(cfg.initial_low()[:, None], (cfg.n_observed + 1, grid.n)).copy())
    times, states, forces = [], [], []

    def keep(state: NudgeState):
        times.append(state.t)
        states.append(state.V.values.copy())
        forces.append(state.G_tilde.values.copy())

    run_nudge(ncfg, spec, obs, V0, T=T, truth=False, record_every=10 ** 9, on_step=keep)
    low = Trajectory(grid, np.array(times), np.array(states), None,
                     params={"system": spec.name, "mu": cfg.mu, "T": T})
    return low, np.array(forces)


def cascade_recover(cfg: RecoveryConfig, low: Trajectory, g_tilde: np.ndarray, traces, T: float) -> MomentSet:
    """Gradient extraction and cascade over a stored low-moment trajectory.

    Returns the MomentSet at ``T``.

    ``traces`` is a callable ``t -> (n_moments, 2)`` or an array aligned with
    ``low.times``.
    """
    cascade = Cascade(cfg)
    out = None
    for i, t in enumerate(low.times):
        if t > T + 1e-12:
            break
        tr = traces(t) if callable(traces) else traces[i]
        out = cascade(t, low.states[i], g_tilde[i], tr)
    if out is None:
        raise ValueError("low-moment trajectory is empty")
    return out


def _moment_errors(ms: MomentSet, truth: np.ndarray) -> dict:
    row = {}
    for k, f in enumerate(ms.fields):
        ref = Field(ms.grid, truth[k], check=False)
        diff = f - ref
        try:
            row[f"moment_err_rel_L1_m{k}"] = norm(f, "L1", reference=ref)
        except ZeroReferenceError:
            row[f"moment_err_rel_L1_m{k}"] = np.nan
        row[f"moment_err_L1_m{k}"] = norm(diff, "L1")
        row[f"moment_err_Linf_m{k}"] = norm(diff, "Linf")
    return row


def run_rte_recovery(cfg: RecoveryConfig, kinetic_traj: Trajectory, T: float = 1.0,
                     snapshot_times=()) -> tuple[MomentSet, ErrorHistory]:
    """Nudging, extraction and cascade streamed against a kinetic reference.

    Errors against the kinetic moments are recorded every
    ``cfg.record_every`` steps and at ``T``; MomentSets at ``snapshot_times``
    are attached to the returned terminal set.
    """
    if kinetic_traj.boundary_traces is None:
        raise MissingTraceError("kinetic trajectory carries no boundary traces")
    if kinetic_traj.n_components < cfg.order + 1:
        raise MissingTraceError(f"kinetic trajectory has moments up to order "
                                f"{kinetic_traj.n_components - 1}, need {cfg.order}")
    spec = moment_system(rte_moment_matrices(cfg.n_observed, cfg.sigma_a, cfg.sigma_s))
    ncfg = cfg.nudge_config()
    grid = cfg.comp_grid
    obs = Observer(kinetic_traj, cfg.obs_grid, components=range(cfg.n_observed + 1),
                   noise_eps=cfg.noise_eps, seed=cfg.seed)
    V0 = Field(grid, np.broadcast_to(cfg.initial_low()[:, None], (cfg.n_observed + 1, grid.n)).copy())
    cascade = Cascade(cfg, ncfg.smooth)
    history = ErrorHistory()
    snaps = sorted(float(s) for s in snapshot_times)
    kept: list[MomentSet] = []
    last: list[MomentSet] = []

    def truth_at(t):
        m = kinetic_traj.state_at(t)[: cfg.order + 1]
        return close_periodic(restrict(m, grid, kinetic_traj.grid))

    def step(state: NudgeState):
        ms = cascade(state.t, state.V.values, state.G_tilde.values, kinetic_traj.traces_at(state.t))
        last[:] = [ms]
        done = state.t >= T - 1e-12 * max(1.0, T)
        if state.step % cfg.record_every == 0 or done:
            history.append(state.t, _moment_errors(ms, truth_at(state.t)))
        if any(abs(state.t - s) <= 1e-12 * max(1.0, T) for s in snaps):
            kept.append(ms)

    run_nudge(ncfg, spec, obs, V0, T=T, truth=False, record_every=10 ** 9,
              stop_times=[s for s in snaps if 0 < s < T], on_step=step)
    final = last[0]
    final.snapshots = kept
    log.debug("moment recovery to T=%g: %d records", T, len(history.t))
    return final, history


def export_moment_set(ms: MomentSet, out_dir, params: dict | None = None) -> list[Path]:
    """``m{k}.csv`` per moment (x, then one column per snapshot time) plus
    ``manifest.json`` with traces and parameters."""
    out_dir = Path(out_dir)
    sets = ms.snapshots if ms.snapshots else [ms]
    if sets[-1] is not ms and all(s.t != ms.t for s in sets):
        sets = sets + [ms]
    x = ms.grid.nodes
    files = []
    for k in range(ms.order + 1):
        header = ["x"] + [f"t={s.t:.17g}" for s in sets]
        files.append(write_csv(out_dir / f"m{k}.csv", header, [x] + [s.fields[k].values[0] for s in sets]))
    manifest = {
        "order": ms.order,
        "grid": {"a": ms.grid.a, "b": ms.grid.b, "n": ms.grid.n, "layout": ms.grid.layout},
        "times": [s.t for s in sets],
        "boundary_traces": {f"{s.t:.17g}": s.boundary_traces for s in sets},
        "files": [p.name for p in files],
        "params": params or {},
    }
    files.append(write_json(out_dir / "manifest.json", manifest))
    return files
