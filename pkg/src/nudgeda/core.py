"""Uniform grids, multi-component fields, discrete norms and snapshot buffers."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np

from .errors import (
    EmptyBufferError,
    GridMismatchError,
    InvalidRangeError,
    NonMonotoneTimeError,
    TooCoarseError,
    ZeroReferenceError,
)

PERIODIC_CELLS = "periodic-cells"
ENDPOINT_INCLUSIVE = "endpoint-inclusive"
LAYOUTS = (PERIODIC_CELLS, ENDPOINT_INCLUSIVE)

MIN_NODES = 8


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1D grid.

    A ``periodic-cells`` grid stores ``n`` nodes ``a + j*dx`` with
    ``dx = (b - a)/n`` and no duplicated endpoint.  An ``endpoint-inclusive``
    grid stores ``n`` nodes covering both ends, ``dx = (b - a)/(n - 1)``.
    """

    a: float
    b: float
    n: int
    layout: str = PERIODIC_CELLS

    @property
    def dx(self) -> float:
        if self.layout == PERIODIC_CELLS:
            return (self.b - self.a) / self.n
        return (self.b - self.a) / (self.n - 1)

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def periodic(self) -> bool:
        return self.layout == PERIODIC_CELLS

    @property
    def nodes(self) -> np.ndarray:
        return self.a + self.dx * np.arange(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,)

    @property
    def dim(self) -> int:
        return 1

    @property
    def size(self) -> int:
        return self.n

    @property
    def axes(self) -> tuple["Grid1D", ...]:
        return (self,)

    def quadrature_weights(self) -> np.ndarray:
        w = np.full(self.n, self.dx)
        if self.layout == ENDPOINT_INCLUSIVE:
            w[0] *= 0.5
            w[-1] *= 0.5
        return w


@dataclass(frozen=True)
class Grid2D:
    """Tensor grid; arrays are indexed ``[iy, ix]`` (y outer, x inner)."""

    x_axis: Grid1D
    y_axis: Grid1D

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.y_axis.n, self.x_axis.n)

    @property
    def dim(self) -> int:
        return 2

    @property
    def size(self) -> int:
        return self.x_axis.n * self.y_axis.n

    @property
    def axes(self) -> tuple[Grid1D, ...]:
        return (self.x_axis, self.y_axis)

    @property
    def periodic(self) -> bool:
        return self.x_axis.periodic and self.y_axis.periodic

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` arrays of shape ``self.shape``."""
        return np.meshgrid(self.x_axis.nodes, self.y_axis.nodes, indexing="xy")

    def quadrature_weights(self) -> np.ndarray:
        return np.outer(self.y_axis.quadrature_weights(), self.x_axis.quadrature_weights())


Grid = Union[Grid1D, Grid2D]


def make_uniform_grid(a: float, b: float, n: int, layout: str = PERIODIC_CELLS,
                      min_nodes: int = MIN_NODES) -> Grid1D:
    if layout not in LAYOUTS:
        raise ValueError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")
    if not b > a:
        raise InvalidRangeError(f"need b > a, got a={a}, b={b}")
    if n < min_nodes:
        raise TooCoarseError(f"grid needs at least {min_nodes} nodes, got {n}")
    return Grid1D(float(a), float(b), int(n), layout)


def make_grid2d(ax: float, bx: float, nx: int, ay: float, by: float, ny: int,
                layout: str = PERIODIC_CELLS) -> Grid2D:
    return Grid2D(make_uniform_grid(ax, bx, nx, layout), make_uniform_grid(ay, by, ny, layout))


# --------------------------------------------------------------------------- boundaries


@dataclass(frozen=True)
class Periodic:
    pass


@dataclass(frozen=True)
class Dirichlet:
    left_value: float
    right_value: float

    def __post_init__(self):
        if not (np.isfinite(self.left_value) and np.isfinite(self.right_value)):
            raise ValueError("Dirichlet values must be finite")


@dataclass(frozen=True)
class Neumann:
    pass


BoundaryKind = Union[Periodic, Dirichlet, Neumann]


# --------------------------------------------------------------------------- fields


class Field:
    """Component-valued nodal data on a grid.

    ``values`` has shape ``(n_components, *grid.shape)``.  Arithmetic with
    scalars, arrays or other fields on the same grid returns a new Field, which
    lets time integrators treat fields like arrays.
    """

    __array_priority__ = 100

    def __init__(self, grid: Grid, values, check: bool = True):
        values = np.asarray(values, dtype=float)
        if values.shape == grid.shape:
            values = values[np.newaxis]
        if values.shape[1:] != grid.shape:
            raise GridMismatchError(
                f"values of shape {values.shape} do not fit grid of shape {grid.shape}")
        if check and not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        self.grid = grid
        self.values = values

    @property
    def n_components(self) -> int:
        return self.values.shape[0]

    def component(self, k: int) -> "Field":
        return Field(self.grid, self.values[k:k + 1], check=False)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), check=False)

    def _other(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise GridMismatchError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._other(other), check=False)

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._other(other), check=False)

    def __rsub__(self, other):
        return Field(self.grid, self._other(other) - self.values, check=False)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._other(other), check=False)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.values / self._other(other), check=False)

    def __neg__(self):
        return Field(self.grid, -self.values, check=False)

    def __repr__(self):
        return f"Field(n_components={self.n_components}, shape={self.grid.shape})"


def zeros_field(grid: Grid, n_components: int) -> Field:
    return Field(grid, np.zeros((n_components, *grid.shape)))


def norm(f: Field, kind: str = "L1", reference: Field | None = None,
         component: int | None = None) -> float:
    """Discrete L1/L2/Linf norm with nodal quadrature weights.

    With ``reference`` the relative error ``||f - reference|| / ||reference||``
    is returned.  ``component`` restricts the norm to a single component.
    """
    values = f.values
    if reference is not None:
        if reference.grid != f.grid or reference.n_components != f.n_components:
            raise GridMismatchError("reference must share grid and component count")
    if component is not None:
        values = values[component:component + 1]
    w = f.grid.quadrature_weights()
    diff = values if reference is None else values - (
        reference.values if component is None else reference.values[component:component + 1])
    num = _weighted_norm(diff, w, kind)
    if reference is None:
        return num
    ref_values = reference.values if component is None else reference.values[component:component + 1]
    den = _weighted_norm(ref_values, w, kind)
    if den == 0.0:
        raise ZeroReferenceError("reference norm is zero; relative error undefined")
    return num / den


def _weighted_norm(values: np.ndarray, w: np.ndarray, kind: str) -> float:
    if kind == "L1":
        return float(np.sum(np.abs(values) * w))
    if kind == "L2":
        return float(np.sqrt(np.sum(values * values * w)))
    if kind == "Linf":
        return float(np.max(np.abs(values))) if values.size else 0.0
    raise ValueError(f"unknown norm kind {kind!r}")


# --------------------------------------------------------------------------- snapshots


class SnapshotBuffer:
    """Ring of ``(t, field)`` entries with strictly increasing times."""

    def __init__(self, capacity: int = 3):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.capacity = capacity
        self._entries: deque = deque(maxlen=capacity)

    def push(self, t: float, f) -> "SnapshotBuffer":
        if self._entries and not t > self._entries[-1][0]:
            raise NonMonotoneTimeError(
                f"snapshot time {t} does not exceed latest stored time {self._entries[-1][0]}")
        self._entries.append((float(t), f))
        return self

    def copy(self) -> "SnapshotBuffer":
        new = SnapshotBuffer(self.capacity)
        new._entries.extend(self._entries)
        return new

    @property
    def times(self) -> list[float]:
        return [t for t, _ in self._entries]

    @property
    def latest(self):
        if not self._entries:
            raise EmptyBufferError("snapshot buffer is empty")
        return self._entries[-1]

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator:
        return iter(self._entries)

    def __getitem__(self, i):
        return self._entries[i]


def push_snapshot(buf: SnapshotBuffer, t: float, f) -> SnapshotBuffer:
    return buf.push(t, f)
