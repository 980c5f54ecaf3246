"""Truth-data generation: WENO5-SSPRK3 solves of the exact dynamics, a
discrete-ordinates kinetic solver for the 1D RTE, and noisy sampling of
observations."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .core import BoundaryKind, Field, Grid, Grid1D, Periodic
from .errors import CFLViolationError, NonfiniteStateError
from .interpolant import restrict
from .io import write_csv, write_json
from .models import SystemSpec
from .numerics import central_difference, gauss_legendre, legendre_eval, ssprk3_step, weno5_derivative

log = logging.getLogger(__name__)


def time_interpolate(times: np.ndarray, data: np.ndarray, t: float) -> np.ndarray:
    """Cubic Lagrange interpolation in time over the (up to) four stored
    snapshots surrounding ``t``."""
    nt = times.size
    i = int(np.searchsorted(times, t))
    if i < nt and abs(times[i] - t) <= 1e-12 * max(1.0, abs(t)):
        return data[i]
    if i > 0 and abs(times[i - 1] - t) <= 1e-12 * max(1.0, abs(t)):
        return data[i - 1]
    if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
        raise ValueError(f"t={t} outside stored range [{times[0]}, {times[-1]}]")
    k = min(4, nt)
    start = int(np.clip(i - k // 2, 0, nt - k))
    ts = times[start:start + k]
    out = np.zeros_like(data[start])
    for j in range(k):
        lj = 1.0
        for q in range(k):
            if q != j:
                lj *= (t - ts[q]) / (ts[j] - ts[q])
        out += lj * data[start + j]
    return out


@dataclass
class Trajectory:
    """Stored truth run: states (and forces) at increasing times on ``grid``.

    ``states`` has shape ``(n_times, n_components, *grid.shape)``.  For the
    kinetic RTE the states are the moments m_0..m_K and ``boundary_traces``
    holds ``(n_times, K+1, 2)`` values at the left and right ends.
    """

    grid: Grid
    times: np.ndarray
    states: np.ndarray
    forces: Optional[np.ndarray] = None
    boundary_traces: Optional[np.ndarray] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.states.shape[0] != self.times.size:
            raise ValueError("states and times lengths differ")
        if self.forces is not None and self.forces.shape != self.states.shape:
            raise ValueError("forces must match the states' shape")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must increase")

    @property
    def n_components(self) -> int:
        return self.states.shape[1]

    @property
    def moments(self) -> Optional[np.ndarray]:
        return self.states if self.boundary_traces is not None else None

    def state(self, i: int) -> Field:
        return Field(self.grid, self.states[i], check=False)

    def state_at(self, t: float) -> np.ndarray:
        return time_interpolate(self.times, self.states, t)

    def force_at(self, t: float) -> np.ndarray:
        if self.forces is None:
            raise ValueError("trajectory carries no force data")
        return time_interpolate(self.times, self.forces, t)

    def traces_at(self, t: float) -> np.ndarray:
        if self.boundary_traces is None:
            raise ValueError("trajectory carries no boundary traces")
        return time_interpolate(self.times, self.boundary_traces, t)


# --------------------------------------------------------------------------- PDE truth


def _node_coords(grid: Grid):
    if grid.dim == 1:
        return grid.nodes
    return grid.meshgrid()


def _directions(value, dim):
    return value if dim > 1 else (value,)


def true_force(spec: SystemSpec, u: np.ndarray, grid: Grid) -> np.ndarray:
    """-div(true_force_flux(u)) by sixth-order central differences."""
    if spec.true_force_flux is None:
        return np.zeros_like(u)
    out = np.zeros_like(u)
    for d, p in enumerate(_directions(spec.true_force_flux(u), spec.dim)):
        out -= central_difference(p, grid.axes[d].dx, axis=-1 - d, periodic=grid.axes[d].periodic)
    return out


def reference_rhs(spec: SystemSpec, grid: Grid, boundary: BoundaryKind, alphas) -> Callable:
    x = _node_coords(grid)
    flux = spec.reference_flux or spec.flux

    def rhs(t, u):
        out = spec.source(u, x, t)
        for d in range(spec.dim):
            fd = (lambda v, d=d: _directions(flux(v), spec.dim)[d])
            out = out - weno5_derivative(u, fd, alphas[d], grid.axes[d].dx, axis=-1 - d,
                                         boundary=boundary)
        return out

    return rhs


def stable_dt(cfl: float, alphas, grid: Grid) -> float:
    rate = sum(a / ax.dx for a, ax in zip(alphas, grid.axes))
    if rate <= 0:
        return np.inf
    return cfl / rate


def solve_reference(spec: SystemSpec, initial: Field, T: float, cfl: float = 0.7,
                    boundary: BoundaryKind = Periodic(), store_every: int = 1,
                    store_grid: Grid | None = None) -> Trajectory:
    """Solve the exact dynamics with WENO5-SSPRK3, force absorbed into the flux.

    Snapshots are kept every ``store_every`` steps (and at ``T``), sampled onto
    ``store_grid`` when given; the true force there is ``-div`` of the force
    flux.
    """
    if not 0 < cfl <= 1:
        raise ValueError("cfl must lie in (0, 1]")
    grid = initial.grid
    store_grid = store_grid or grid
    u = initial.values.copy()
    t, step = 0.0, 0
    times, states, forces = [], [], []

    def record(t, u):
        times.append(t)
        forces.append(restrict(true_force(spec, u, grid), store_grid, grid))
        states.append(restrict(u, store_grid, grid))

    record(t, u)
    while t < T - 1e-14 * max(1.0, T):
        alphas = [max(a, 1e-12) for a in spec.alphas(u)]
        dt = min(stable_dt(cfl, alphas, grid), T - t)
        rhs = reference_rhs(spec, grid, boundary, alphas)
        try:
            u = ssprk3_step(u, rhs, t, dt)
        except NonfiniteStateError as exc:
            raise NonfiniteStateError(f"reference solve of {spec.name} blew up at t={t:.4g}") from exc
        step += 1
        t = T if T - (t + dt) < 1e-14 * max(1.0, T) else t + dt
        if step % store_every == 0 or t >= T:
            record(t, u)
    log.debug("reference %s: %d steps to T=%g", spec.name, step, T)
    return Trajectory(store_grid, np.array(times), np.array(states), np.array(forces),
                      params={"system": spec.name, "T": T, "cfl": cfl, "steps": step,
                              "solve_nodes": list(grid.shape)})


# --------------------------------------------------------------------------- kinetic RTE


def rte_moment_projector(n_velocity: int, n_moments: int):
    quad = gauss_legendre(n_velocity)
    P = np.stack([legendre_eval(k, quad.nodes) for k in range(n_moments)])
    return quad, 0.5 * P * quad.weights[None, :]


def solve_rte_kinetic(f0: Callable, sigma_a: float, sigma_s: float, grid: Grid1D,
                      n_velocity: int = 15, T: float = 1.0, dt_ratio: float = 0.5,
                      n_moments: int = 7, store_every: int = 1,
                      store_grid: Grid1D | None = None) -> Trajectory:
    """Discrete-ordinates solve of f_t + v f_x = sigma_s (<f> - f) - sigma_a f.

    Returns the Legendre moments m_k = 1/2 sum_i w_i P_k(v_i) f_i for
    ``k < n_moments`` and their boundary traces at both ends.
    """
    if n_velocity < 4:
        raise ValueError("need at least 4 velocity nodes")
    if sigma_a < 0 or sigma_s < 0:
        raise ValueError("opacities must be non-negative")
    boundary = Periodic() if grid.periodic else None
    if boundary is None:
        raise NotImplementedError("the kinetic solver supports periodic grids only")
    quad, projector = rte_moment_projector(n_velocity, n_moments)
    if not 0 < dt_ratio * np.max(np.abs(quad.nodes)) <= 1.0:
        raise CFLViolationError(f"kinetic dt/dx={dt_ratio:g} exceeds the transport bound 1/max|v|")
    v = quad.nodes[:, None]
    speed = np.abs(v)
    w_half = 0.5 * quad.weights[:, None]
    x = grid.nodes
    f = np.array(f0(x[None, :], v), dtype=float) * np.ones((n_velocity, grid.n))
    store_grid = store_grid or grid
    dt = dt_ratio * grid.dx

    def rhs(t, f):
        transport = weno5_derivative(f, lambda g: v * g, speed, grid.dx, axis=-1, boundary=boundary)
        avg = np.sum(w_half * f, axis=0, keepdims=True)
        return -transport + sigma_s * (avg - f) - sigma_a * f

    times, states, traces = [], [], []

    def record(t, f):
        m = projector @ f
        times.append(t)
        states.append(restrict(m, store_grid, grid))
        # periodic: x = b coincides with x = a
        traces.append(np.stack([m[:, 0], m[:, 0]], axis=-1))

    t, step = 0.0, 0
    record(t, f)
    while t < T - 1e-14 * max(1.0, T):
        h = min(dt, T - t)
        f = ssprk3_step(f, rhs, t, h)
        step += 1
        t = T if T - (t + h) < 1e-14 * max(1.0, T) else t + h
        if step % store_every == 0 or t >= T:
            record(t, f)
    return Trajectory(store_grid, np.array(times), np.array(states), None, np.array(traces),
                      params={"system": "rte-kinetic", "sigma_a": sigma_a, "sigma_s": sigma_s,
                              "n_velocity": n_velocity, "dt_ratio": dt_ratio, "T": T,
                              "steps": step, "solve_nodes": grid.n})


def rte_initial_data(x, v=None):
    """0.5 + sum_{k=1..5} k^-2 sin(2 k pi x), isotropic in v."""
    out = 0.5 + sum(np.sin(2 * k * np.pi * x) / k ** 2 for k in range(1, 6))
    return out if v is None else out + 0.0 * v


# --------------------------------------------------------------------------- observations


class Observer:
    """Samples a trajectory at observation nodes at arbitrary times.

    Observations are restricted from the trajectory grid after cubic
    interpolation in time; Gaussian noise of size ``noise_eps`` is drawn fresh
    per call from a Philox stream keyed by ``(seed, call index)``.
    """

    def __init__(self, traj: Trajectory, obs_grid: Grid, components=None,
                 noise_eps: float = 0.0, seed: int = 0):
        self.traj = traj
        self.obs_grid = obs_grid
        self.components = (list(range(traj.n_components)) if components is None
                           else [int(c) for c in components])
        self.noise_eps = float(noise_eps)
        self.seed = int(seed)
        self.calls = 0

    def clean(self, t: float) -> np.ndarray:
        state = self.traj.state_at(t)[self.components]
        return restrict(state, self.obs_grid, self.traj.grid)

    def noise(self, shape, index: int) -> np.ndarray:
        key = np.array([self.seed % 2 ** 64, index], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key)).standard_normal(shape)

    def at(self, t: float) -> np.ndarray:
        values = self.clean(t)
        if self.noise_eps:
            values = values + self.noise_eps * self.noise(values.shape, self.calls)
        self.calls += 1
        return values

    __call__ = at


@dataclass
class ObservationSeries:
    obs_grid: Grid
    times: np.ndarray
    values: np.ndarray  # (n_times, ncomp, *obs_shape)
    noise_eps: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("observations must be finite")
        if self.values.shape[0] != len(self.times):
            raise ValueError("values and times lengths differ")

    def at(self, t: float) -> np.ndarray:
        return time_interpolate(np.asarray(self.times), self.values, t)


def observe(traj: Trajectory, obs_grid: Grid, components=None, noise_eps: float = 0.0,
            seed: int = 0, times=None) -> ObservationSeries:
    """Noisy observations of ``traj`` at ``times`` (default: its stored times)."""
    observer = Observer(traj, obs_grid, components, noise_eps, seed)
    times = traj.times if times is None else np.asarray(times, dtype=float)
    values = np.array([observer.at(t) for t in times])
    return ObservationSeries(obs_grid, np.array(times), values, noise_eps, seed)


# --------------------------------------------------------------------------- export


def export_trajectory(traj: Trajectory, out_dir, names=None) -> list[Path]:
    """One columnar text file per component (coordinates, then one column per
    stored time) plus ``manifest.json``."""
    out_dir = Path(out_dir)
    names = names or [f"c{k}" for k in range(traj.n_components)]
    grid = traj.grid
    if grid.dim == 1:
        coords, coord_names = [grid.nodes], ["x"]
    else:
        X, Y = grid.meshgrid()
        coords, coord_names = [X.ravel(), Y.ravel()], ["x", "y"]
    files = []
    tcols = [f"t={t:.17g}" for t in traj.times]
    for k, name in enumerate(names):
        cols = coords + [traj.states[i, k].ravel() for i in range(traj.times.size)]
        files.append(write_csv(out_dir / f"{name}.csv", coord_names + tcols, cols))
    manifest = {
        "grid": _grid_dict(grid),
        "times": traj.times,
        "components": names,
        "params": traj.params,
        "files": [p.name for p in files],
    }
    if traj.boundary_traces is not None:
        manifest["boundary_traces"] = traj.boundary_traces
    files.append(write_json(out_dir / "manifest.json", manifest))
    return files


def _grid_dict(grid: Grid) -> dict:
    return {"axes": [{"a": ax.a, "b": ax.b, "n": ax.n, "layout": ax.layout} for ax in grid.axes]}
