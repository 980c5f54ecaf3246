"""Discretization kernels: WENO5 flux derivatives, SSPRK3, BDF2 time
differencing, Gauss-Legendre quadrature, Legendre polynomials and
boundary-corrected antidifferentiation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    ENDPOINT_INCLUSIVE,
    BoundaryKind,
    Dirichlet,
    Field,
    Neumann,
    Periodic,
    SnapshotBuffer,
)
from .errors import (
    EmptyBufferError,
    GridTooSmallError,
    NonfiniteStateError,
    UnsupportedNError,
)

WENO_EPS = 1e-6
_LINEAR_WEIGHTS = (0.1, 0.6, 0.3)


@dataclass(frozen=True)
class WenoConfig:
    epsilon: float = WENO_EPS
    alpha: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")


# --------------------------------------------------------------------------- WENO5


def pad_axis(u: np.ndarray, width: int, boundary: BoundaryKind, axis: int = -1) -> np.ndarray:
    """Extend ``u`` by ``width`` ghost values on both ends of ``axis``.

    Mirrored extensions reflect about the boundary node, so the grid is
    expected to include its endpoints for Dirichlet and Neumann data.
    """
    pad = [(0, 0)] * u.ndim
    pad[axis] = (width, width)
    if isinstance(boundary, Periodic):
        return np.pad(u, pad, mode="wrap")
    if isinstance(boundary, Neumann):
        return np.pad(u, pad, mode="reflect")
    if isinstance(boundary, Dirichlet):
        v = np.moveaxis(u, axis, -1)
        left = 2.0 * boundary.left_value - v[..., width:0:-1]
        right = 2.0 * boundary.right_value - v[..., -2:-2 - width:-1]
        return np.moveaxis(np.concatenate([left, v, right], axis=-1), -1, axis)
    raise TypeError(f"unsupported boundary {boundary!r}")


def _weno5_reconstruct(v0, v1, v2, v3, v4, eps):
    """Left-biased fifth-order reconstruction at i+1/2 from values at i-2..i+2."""
    q0 = (2.0 * v0 - 7.0 * v1 + 11.0 * v2) / 6.0
    q1 = (-v1 + 5.0 * v2 + 2.0 * v3) / 6.0
    q2 = (2.0 * v2 + 5.0 * v3 - v4) / 6.0
    b0 = 13.0 / 12.0 * (v0 - 2.0 * v1 + v2) ** 2 + 0.25 * (v0 - 4.0 * v1 + 3.0 * v2) ** 2
    b1 = 13.0 / 12.0 * (v1 - 2.0 * v2 + v3) ** 2 + 0.25 * (v1 - v3) ** 2
    b2 = 13.0 / 12.0 * (v2 - 2.0 * v3 + v4) ** 2 + 0.25 * (3.0 * v2 - 4.0 * v3 + v4) ** 2
    a0 = _LINEAR_WEIGHTS[0] / (eps + b0) ** 2
    a1 = _LINEAR_WEIGHTS[1] / (eps + b1) ** 2
    a2 = _LINEAR_WEIGHTS[2] / (eps + b2) ** 2
    return (a0 * q0 + a1 * q1 + a2 * q2) / (a0 + a1 + a2)


def weno5_derivative(u: np.ndarray, flux: Callable[[np.ndarray], np.ndarray], alpha,
                     dx: float, axis: int = -1, boundary: BoundaryKind = Periodic(),
                     eps: float = WENO_EPS) -> np.ndarray:
    """Approximate ``d/dx flux(u)`` along ``axis`` of ``u``.

    Global Lax-Friedrichs splitting ``f± = (flux(u) ± alpha*u)/2`` followed by
    WENO5 reconstruction of each part and a conservative difference.  ``alpha``
    may be a scalar or an array broadcastable against ``u``.
    """
    u = np.asarray(u, dtype=float)
    n = u.shape[axis]
    if n < 7:
        raise GridTooSmallError(f"WENO5 needs at least 7 nodes along the axis, got {n}")
    up = pad_axis(u, 3, boundary, axis)
    fu = flux(up)
    up = np.moveaxis(up, axis, -1)
    fu = np.moveaxis(fu, axis, -1)
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim:
        alpha = np.moveaxis(np.broadcast_to(alpha, np.broadcast_shapes(alpha.shape, u.shape)),
                            axis, -1)[..., :1]
    fp = 0.5 * (fu + alpha * up)
    fm = 0.5 * (fu - alpha * up)
    m = n + 1

    def s(arr, o):
        return arr[..., 2 + o:2 + o + m]

    plus = _weno5_reconstruct(s(fp, -2), s(fp, -1), s(fp, 0), s(fp, 1), s(fp, 2), eps)
    minus = _weno5_reconstruct(s(fm, 3), s(fm, 2), s(fm, 1), s(fm, 0), s(fm, -1), eps)
    fhat = plus + minus
    out = (fhat[..., 1:] - fhat[..., :-1]) / dx
    return np.moveaxis(out, -1, axis)


def weno5_flux_derivative(values, flux: Callable[[np.ndarray], np.ndarray], alpha: float,
                          boundary: BoundaryKind = Periodic(), direction: int = 0,
                          eps: float = WENO_EPS):
    """Field-level WENO5 derivative along spatial ``direction`` (0 = x, 1 = y)."""
    grid = values.grid
    axis = -1 - direction
    dx = grid.axes[direction].dx
    out = weno5_derivative(values.values, flux, alpha, dx, axis=axis, boundary=boundary, eps=eps)
    return Field(grid, out, check=False)


def central_difference(u: np.ndarray, dx: float, axis: int = -1, periodic: bool = True) -> np.ndarray:
    """Sixth-order central first derivative (periodic) or second-order
    ``numpy.gradient`` on bounded grids."""
    if not periodic:
        return np.gradient(u, dx, axis=axis, edge_order=2)
    r = lambda k: np.roll(u, -k, axis=axis)  # noqa: E731  u_{i+k}
    return (45.0 * (r(1) - r(-1)) - 9.0 * (r(2) - r(-2)) + (r(3) - r(-3))) / (60.0 * dx)


# --------------------------------------------------------------------------- time stepping


def _check_finite(x, stage):
    values = x.values if isinstance(x, Field) else x
    if not np.all(np.isfinite(values)):
        raise NonfiniteStateError(f"non-finite state after SSPRK3 stage {stage} (CFL violated?)")


def ssprk3_step(state, rhs: Callable, t: float, dt: float):
    """One Shu-Osher SSPRK3 step; ``state`` may be an ndarray or a Field."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    u1 = state + dt * rhs(t, state)
    _check_finite(u1, 1)
    u2 = 0.75 * state + 0.25 * (u1 + dt * rhs(t + dt, u1))
    _check_finite(u2, 2)
    u3 = (1.0 / 3.0) * state + (2.0 / 3.0) * (u2 + dt * rhs(t + 0.5 * dt, u2))
    _check_finite(u3, 3)
    return u3


def bdf_weights(times) -> np.ndarray:
    """Weights ``c`` with ``d/dt q(t_last) ≈ sum(c_i q_i)`` for up to three times."""
    times = np.asarray(times, dtype=float)
    if times.size == 1:
        return np.zeros(1)
    if times.size == 2:
        h = times[1] - times[0]
        return np.array([-1.0 / h, 1.0 / h])
    t0, t1, t2 = times[-3:]
    h1, h2 = t1 - t0, t2 - t1
    return np.array([
        h2 / (h1 * (h1 + h2)),
        -(h1 + h2) / (h1 * h2),
        (2.0 * h2 + h1) / (h2 * (h1 + h2)),
    ])


def bdf_time_derivative(buf: SnapshotBuffer, t: float | None = None):
    """BDF2 (nonuniform steps) derivative at the latest buffered time.

    Falls back to a first-order difference with two snapshots and to zero with
    a single one.
    """
    if len(buf) == 0:
        raise EmptyBufferError("cannot differentiate an empty buffer")
    entries = list(buf)[-3:]
    if t is not None and not np.isclose(t, entries[-1][0], rtol=0.0, atol=1e-12):
        raise ValueError(f"t={t} is not the latest buffered time {entries[-1][0]}")
    c = bdf_weights([e[0] for e in entries])
    out = 0.0 * entries[-1][1]
    for ci, (_, f) in zip(c, entries):
        out = out + ci * f
    return out


# --------------------------------------------------------------------------- Legendre


@dataclass(frozen=True)
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values) -> float:
        """Sum of weights times ``values`` (an array at the nodes or a callable)."""
        if callable(values):
            values = values(self.nodes)
        return float(np.dot(self.weights, values))


def legendre_eval(k: int, v):
    """P_k(v) via the three-term (Bonnet) recurrence; ``v`` may be an array."""
    if k < 0:
        raise ValueError("degree must be non-negative")
    v = np.asarray(v, dtype=float)
    p_prev, p = np.ones_like(v), v.copy()
    if k == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    for j in range(1, k):
        p_prev, p = p, ((2 * j + 1) * v * p - j * p_prev) / (j + 1)
    return p if p.ndim else float(p)


def _legendre_and_derivative(n: int, x: np.ndarray):
    p_prev, p = np.ones_like(x), x.copy()
    for j in range(1, n):
        p_prev, p = p, ((2 * j + 1) * x * p - j * p_prev) / (j + 1)
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def gauss_legendre(n: int) -> Quadrature:
    """Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n."""
    if not 2 <= n <= 64:
        raise UnsupportedNError(f"n must lie in [2, 64], got {n}")
    i = np.arange(1, n + 1)
    x = -np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(100):
        p, dp = _legendre_and_derivative(n, x)
        step = p / dp
        x = x - step
        if np.max(np.abs(step)) < 1e-15:
            break
    _, dp = _legendre_and_derivative(n, x)
    # enforce exact antisymmetry of the node set
    x = 0.5 * (x - x[::-1])
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    w = 0.5 * (w + w[::-1])
    return Quadrature(x, w)


# --------------------------------------------------------------------------- integration


def antiderivative_corrected(gradient, left_value: float, right_value: float, dx: float | None = None):
    """Integrate a gradient from ``left_value`` with a constant correction so
    the result also hits ``right_value`` at the far end.

    ``gradient`` is a Field on an endpoint-inclusive 1D grid or a plain array
    along its last axis (``dx`` required then).  Trapezoidal cumulative sums.
    """
    if isinstance(gradient, Field):
        grid = gradient.grid
        if grid.dim != 1 or grid.layout != ENDPOINT_INCLUSIVE:
            raise ValueError("antiderivative_corrected needs an endpoint-inclusive 1D grid")
        g, dx = gradient.values, grid.dx
    else:
        g = np.asarray(gradient, dtype=float)
        if dx is None:
            raise ValueError("dx is required for array input")
    length = dx * (g.shape[-1] - 1)
    cum = np.zeros_like(g)
    cum[..., 1:] = np.cumsum(0.5 * dx * (g[..., 1:] + g[..., :-1]), axis=-1)
    correction = (right_value - left_value - cum[..., -1:]) / length
    x = dx * np.arange(g.shape[-1])
    out = left_value + cum + correction * x
    out[..., 0] = left_value
    out[..., -1] = right_value
    if isinstance(gradient, Field):
        return Field(gradient.grid, out, check=False)
    return out
