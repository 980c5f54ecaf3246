"""The observation interpolant: Gaussian kernel regression over observation
nodes with ghost-node boundary extension, and restriction of computational
fields to observation nodes."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np
import scipy.sparse as sp

from .core import (
    ENDPOINT_INCLUSIVE,
    PERIODIC_CELLS,
    BoundaryKind,
    Dirichlet,
    Field,
    Grid,
    Grid1D,
    Grid2D,
    Neumann,
    Periodic,
)
from .errors import (
    DegenerateRowError,
    InsufficientObservationsError,
    LengthMismatchError,
    OutOfDomainError,
    UnsupportedOrderError,
)

DEFAULT_GHOSTS = 3
TRUNCATION_RADIUS = 6.0  # in units of sigma


def gaussian_kernel(r, sigma: float, d: int = 1):
    """K_sigma(r) = sigma^-d exp(-r^2 / 2 sigma^2)."""
    r = np.asarray(r, dtype=float)
    return sigma ** (-d) * np.exp(-(r * r) / (2.0 * sigma * sigma))


# --------------------------------------------------------------------------- ghost nodes


def extend_ghost(obs_values, boundary: BoundaryKind, m: int, layout: str = PERIODIC_CELLS,
                 axis: int = -1) -> np.ndarray:
    """Append ``m`` ghost values on each side of ``axis``.

    Periodic data wrap around.  Dirichlet and Neumann data are mirrored about
    the boundary node (``2*U_a - U_{1+j}`` and ``U_{1+j}``), so those need an
    endpoint-inclusive observation layout.
    """
    v = np.moveaxis(np.asarray(obs_values, dtype=float), axis, -1)
    n = v.shape[-1]
    if m == 0:
        return np.moveaxis(v.copy(), -1, axis)
    if n <= m:
        raise InsufficientObservationsError(f"{n} observations cannot supply {m} ghost nodes")
    if isinstance(boundary, Periodic):
        if layout == ENDPOINT_INCLUSIVE:
            # last node duplicates the first one
            left, right = v[..., n - 1 - m:n - 1], v[..., 1:m + 1]
        else:
            left, right = v[..., n - m:], v[..., :m]
    elif isinstance(boundary, Neumann):
        left, right = v[..., m:0:-1], v[..., n - 2:n - 2 - m:-1]
    elif isinstance(boundary, Dirichlet):
        left = 2.0 * boundary.left_value - v[..., m:0:-1]
        right = 2.0 * boundary.right_value - v[..., n - 2:n - 2 - m:-1]
    else:
        raise TypeError(f"unsupported boundary {boundary!r}")
    return np.moveaxis(np.concatenate([left, v, right], axis=-1), -1, axis)


# --------------------------------------------------------------------------- kernel regression


@dataclass(frozen=True, eq=False)
class KernelInterpolant:
    """Row-stochastic map from observation values to evaluation-grid values.

    ``weights`` acts on the ghost-extended observation vector (flattened
    row-major in 2D); ``ghosts`` holds the number of ghost nodes actually
    added per side and axis.
    """

    obs_grid: Grid
    eval_grid: Grid
    sigma: float
    m_ghost: int
    boundary: BoundaryKind
    weights: sp.csr_matrix
    ghosts: tuple[int, ...]
    cutoff: float
    _raw: dict = field(repr=False, default_factory=dict)

    @property
    def ext_shape(self) -> tuple[int, ...]:
        if self.obs_grid.dim == 1:
            return (self.obs_grid.n + 2 * self.ghosts[0],)
        return (self.obs_grid.y_axis.n + 2 * self.ghosts[1],
                self.obs_grid.x_axis.n + 2 * self.ghosts[0])

    def extend(self, obs_values: np.ndarray) -> np.ndarray:
        """Ghost-extend an array of shape ``(ncomp, *obs_grid.shape)``."""
        axes = self.obs_grid.axes
        out = extend_ghost(obs_values, self.boundary, self.ghosts[0], axes[0].layout, axis=-1)
        if self.obs_grid.dim == 2:
            out = extend_ghost(out, self.boundary, self.ghosts[1], axes[1].layout, axis=-2)
        return out

    def __call__(self, obs_values: np.ndarray) -> np.ndarray:
        """Array-level application; input ``(ncomp, *obs_shape)`` or ``obs_shape``."""
        obs_values = np.asarray(obs_values, dtype=float)
        squeeze = obs_values.shape == self.obs_grid.shape
        if squeeze:
            obs_values = obs_values[np.newaxis]
        if obs_values.shape[1:] != self.obs_grid.shape:
            raise LengthMismatchError(
                f"expected observations of shape {self.obs_grid.shape}, got {obs_values.shape[1:]}")
        ext = self.extend(obs_values).reshape(obs_values.shape[0], -1)
        out = (self.weights @ ext.T).T.reshape(obs_values.shape[0], *self.eval_grid.shape)
        return out[0] if squeeze else out


def _axis_window(xe: np.ndarray, obs_axis: Grid1D, ghosts: int, radius: float):
    h = obs_axis.dx
    x0 = obs_axis.a - ghosts * h
    n_ext = obs_axis.n + 2 * ghosts
    width = int(np.floor(2.0 * radius / h)) + 2
    lo = np.ceil((xe - radius - x0) / h - 1e-12).astype(int)
    idx = lo[:, None] + np.arange(width)[None, :]
    d = xe[:, None] - (x0 + idx * h)
    valid = (idx >= 0) & (idx < n_ext) & (np.abs(d) <= radius * (1 + 1e-12))
    return np.clip(idx, 0, n_ext - 1), d, valid


def _ghost_count(obs_axis: Grid1D, boundary: BoundaryKind, m: int, radius: float) -> int:
    if isinstance(boundary, Periodic):
        # a full periodic neighbourhood within the truncation radius
        return max(m, int(np.ceil(radius / obs_axis.dx)))
    return m


@lru_cache(maxsize=64)
def _build_cached(obs_grid, eval_grid, sigma, boundary, m, cutoff):
    if obs_grid.dim != eval_grid.dim:
        raise ValueError("observation and evaluation grids must have the same dimension")
    if obs_grid.dim == 2 and isinstance(boundary, Dirichlet):
        raise ValueError("2D kernel regression supports periodic or Neumann boundaries only")
    radius = cutoff * sigma
    d = obs_grid.dim
    ghosts = tuple(_ghost_count(ax, boundary, m, radius) for ax in obs_grid.axes)
    for ax, g in zip(obs_grid.axes, ghosts):
        if ax.n <= g:
            raise InsufficientObservationsError(f"{ax.n} observations cannot supply {g} ghost nodes")

    if d == 1:
        idx, dx, valid = _axis_window(eval_grid.nodes, obs_grid, ghosts[0], radius)
        rows = np.broadcast_to(np.arange(eval_grid.n)[:, None], idx.shape)
        sel = valid
        r2 = dx * dx
        rows, cols, disp = rows[sel], idx[sel], (dx[sel],)
        r2 = r2[sel]
        n_ext = obs_grid.n + 2 * ghosts[0]
    else:
        ix, dx, vx = _axis_window(eval_grid.x_axis.nodes, obs_grid.x_axis, ghosts[0], radius)
        iy, dy, vy = _axis_window(eval_grid.y_axis.nodes, obs_grid.y_axis, ghosts[1], radius)
        nx_ext = obs_grid.x_axis.n + 2 * ghosts[0]
        nx_e = eval_grid.x_axis.n
        # shape (ny_e, nx_e, wy, wx)
        DX = dx[None, :, None, :]
        DY = dy[:, None, :, None]
        r2 = DX * DX + DY * DY
        sel = vx[None, :, None, :] & vy[:, None, :, None] & (r2 <= (radius * (1 + 1e-12)) ** 2)
        rows = (np.arange(eval_grid.y_axis.n)[:, None, None, None] * nx_e
                + np.arange(nx_e)[None, :, None, None])
        cols = iy[:, None, :, None] * nx_ext + ix[None, :, None, :]
        shape = sel.shape
        rows = np.broadcast_to(rows, shape)[sel]
        cols = np.broadcast_to(cols, shape)[sel]
        disp = (np.broadcast_to(DX, shape)[sel], np.broadcast_to(DY, shape)[sel])
        r2 = r2[sel]
        n_ext = nx_ext * (obs_grid.y_axis.n + 2 * ghosts[1])

    k = sigma ** (-d) * np.exp(-r2 / (2.0 * sigma * sigma))
    n_eval = eval_grid.size
    row_sum = np.bincount(rows, weights=k, minlength=n_eval)
    if np.any(row_sum <= 0.0) or not np.all(np.isfinite(row_sum)):
        bad = int(np.argmax(row_sum <= 0.0))
        raise DegenerateRowError(
            f"kernel weights vanish at evaluation node {bad}; sigma={sigma} is too small "
            f"for the observation spacing")
    weights = sp.csr_matrix((k / row_sum[rows], (rows, cols)), shape=(n_eval, n_ext))
    raw = {"rows": rows, "cols": cols, "disp": disp, "k": k, "shape": (n_eval, n_ext)}
    return KernelInterpolant(obs_grid, eval_grid, float(sigma), int(m), boundary, weights,
                             ghosts, float(cutoff), raw)


def build(obs_grid: Grid, eval_grid: Grid, sigma: float | None = None,
          boundary: BoundaryKind = Periodic(), m: int = DEFAULT_GHOSTS,
          cutoff: float = TRUNCATION_RADIUS) -> KernelInterpolant:
    """Kernel-regression interpolant from ``obs_grid`` to ``eval_grid``.

    ``sigma`` defaults to the largest observation spacing.  Built interpolants
    are cached per argument tuple.
    """
    if sigma is None:
        sigma = max(ax.dx for ax in obs_grid.axes)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if m < 0:
        raise ValueError("ghost count must be non-negative")
    return _build_cached(obs_grid, eval_grid, float(sigma), boundary, int(m), float(cutoff))


def apply(interp: KernelInterpolant, obs_values) -> Field:
    values = np.asarray(obs_values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("observations must be finite")
    return Field(interp.eval_grid, interp(values), check=False)


def _kernel_factor(disp: np.ndarray, order: int, sigma: float) -> np.ndarray:
    # derivative of exp(-d^2 / 2 sigma^2) w.r.t. the evaluation coordinate, divided by itself
    s2 = sigma * sigma
    if order == 0:
        return np.ones_like(disp)
    if order == 1:
        return -disp / s2
    return disp * disp / (s2 * s2) - 1.0 / s2


def apply_derivative(interp: KernelInterpolant, obs_values, order) -> Field:
    """Analytic derivative of the kernel-regression fit (quotient rule).

    ``order`` is an int (1D) or a multi-index ``(ox, oy)`` with total <= 2.
    """
    if np.isscalar(order):
        order = (int(order),)
    order = tuple(int(o) for o in order)
    d = interp.obs_grid.dim
    if len(order) != d:
        raise UnsupportedOrderError(f"multi-index {order} does not match dimension {d}")
    if any(o < 0 for o in order) or sum(order) > 2:
        raise UnsupportedOrderError(f"derivative order {order} not supported (total <= 2)")
    values = np.asarray(obs_values, dtype=float)
    squeeze = values.shape == interp.obs_grid.shape
    if squeeze:
        values = values[np.newaxis]
    if values.shape[1:] != interp.obs_grid.shape:
        raise LengthMismatchError("observation shape does not match the interpolant")
    ext = interp.extend(values).reshape(values.shape[0], -1)
    raw = interp._raw

    def kernel_matrix(alpha):
        fac = np.ones_like(raw["k"])
        for a, disp in zip(alpha, raw["disp"]):
            fac = fac * _kernel_factor(disp, a, interp.sigma)
        return sp.csr_matrix((raw["k"] * fac, (raw["rows"], raw["cols"])), shape=raw["shape"])

    def sub_indices(alpha):
        grids = np.meshgrid(*[np.arange(a + 1) for a in alpha], indexing="ij")
        return [tuple(int(g) for g in b) for b in zip(*(g.ravel() for g in grids))]

    n_cache, d_cache, i_cache = {}, {}, {}

    def N(alpha):
        if alpha not in n_cache:
            n_cache[alpha] = (kernel_matrix(alpha) @ ext.T).T
        return n_cache[alpha]

    def D(alpha):
        if alpha not in d_cache:
            d_cache[alpha] = np.asarray(kernel_matrix(alpha).sum(axis=1)).ravel()
        return d_cache[alpha]

    def I(alpha):
        if alpha not in i_cache:
            acc = N(alpha).copy()
            for beta in sub_indices(alpha):
                if beta == alpha:
                    continue
                c = 1
                for a, b in zip(alpha, beta):
                    c *= comb(a, b)
                rest = tuple(a - b for a, b in zip(alpha, beta))
                acc -= c * I(beta) * D(rest)
            i_cache[alpha] = acc / D(tuple(0 for _ in alpha))
        return i_cache[alpha]

    out = I(order).reshape(values.shape[0], *interp.eval_grid.shape)
    return Field(interp.eval_grid, out[0] if squeeze else out, check=False)


# --------------------------------------------------------------------------- restriction


def _lagrange4(t: np.ndarray) -> np.ndarray:
    """Cubic Lagrange weights for nodes at offsets -1, 0, 1, 2."""
    return np.stack([
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ], axis=-1)


@lru_cache(maxsize=128)
def restriction_matrix(source: Grid1D, target_points: tuple | Grid1D) -> np.ndarray:
    """Dense matrix sampling a field on ``source`` at the target nodes by
    4-point Lagrange interpolation (exact injection on coinciding nodes)."""
    x = target_points.nodes if isinstance(target_points, Grid1D) else np.asarray(target_points)
    tol = 1e-10 * source.dx
    if source.periodic:
        if np.any(x < source.a - tol) or np.any(x > source.b + tol):
            raise OutOfDomainError("target node outside the periodic domain")
    elif np.any(x < source.a - tol) or np.any(x > source.b + tol):
        raise OutOfDomainError("target node outside the computational domain")
    s = (x - source.a) / source.dx
    n = source.n
    near = np.rint(s)
    exact = np.abs(s - near) < 1e-9
    i = np.floor(s).astype(int)
    if source.periodic:
        start = i - 1
    else:
        start = np.clip(i - 1, 0, n - 4)
    t = s - start - 1.0
    w = _lagrange4(t)
    cols = start[:, None] + np.arange(4)[None, :]
    if source.periodic:
        cols = np.mod(cols, n)
    mat = np.zeros((x.size, n))
    np.add.at(mat, (np.repeat(np.arange(x.size), 4), cols.ravel()), w.ravel())
    ex = np.nonzero(exact)[0]
    mat[ex] = 0.0
    near_idx = near[ex].astype(int)
    mat[ex, np.mod(near_idx, n) if source.periodic else np.clip(near_idx, 0, n - 1)] = 1.0
    mat.flags.writeable = False
    return mat


def restrict(f, obs_grid: Grid, comp_grid: Grid | None = None) -> np.ndarray:
    """Sample a computational field at the nodes of ``obs_grid``.

    ``f`` is a Field, or an array of shape ``(ncomp, *comp_grid.shape)``.
    Returns an array of shape ``(ncomp, *obs_grid.shape)``.
    """
    if isinstance(f, Field):
        values, comp_grid = f.values, f.grid
    else:
        values = np.asarray(f, dtype=float)
        if comp_grid is None:
            raise ValueError("comp_grid is required for array input")
    if comp_grid.dim != obs_grid.dim:
        raise ValueError("grid dimensions differ")
    if comp_grid == obs_grid:
        return values.copy()
    if comp_grid.dim == 1:
        R = restriction_matrix(comp_grid, obs_grid)
        return values @ R.T
    Rx = restriction_matrix(comp_grid.x_axis, obs_grid.x_axis)
    Ry = restriction_matrix(comp_grid.y_axis, obs_grid.y_axis)
    return Ry @ (values @ Rx.T)
