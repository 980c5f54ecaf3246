"""Hydrodynamic model definitions: the scalar test, isentropic Euler in 1D and
2D, and the Legendre moment hierarchy of the 1D radiative transfer equation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NonphysicalStateError


@dataclass(frozen=True)
class SystemSpec:
    """Flux, source and force decomposition of one conservation-law model.

    ``flux`` is the part kept on the left-hand side of the nudged system (a
    tuple of per-direction fluxes in 2D).  ``reference_flux`` additionally
    carries the force flux and is what the truth solver differences.  The true
    force is ``-div(true_force_flux(U))``; ``force_components`` lists the
    components where it is nonzero.
    """

    name: str
    n_components: int
    dim: int
    flux: Callable
    source: Callable
    wavespeed_bound: Callable
    reference_flux: Optional[Callable] = None
    true_force_flux: Optional[Callable] = None
    force_components: tuple[int, ...] = ()

    def flux_directions(self, u) -> tuple[np.ndarray, ...]:
        f = self.flux(u)
        return f if self.dim > 1 else (f,)

    def alphas(self, u) -> tuple[float, ...]:
        a = self.wavespeed_bound(u)
        return tuple(a) if self.dim > 1 else (a,)


def _zero_source(u, x=None, t=None):
    return np.zeros_like(u)


# --------------------------------------------------------------------------- scalar


def scalar_system() -> SystemSpec:
    """u_t + u_x = -(u^2/6)_x + 0.2 sqrt(1 + u^2)."""

    def flux(u):
        return u

    def source(u, x=None, t=None):
        return 0.2 * np.sqrt(1.0 + u * u)

    def force_flux(u):
        return u * u / 6.0

    def reference_flux(u):
        return u + u * u / 6.0

    def wavespeed(u):
        return float(np.max(np.abs(1.0 + np.asarray(u) / 3.0)))

    return SystemSpec("scalar", 1, 1, flux, source, wavespeed, reference_flux, force_flux, (0,))


# --------------------------------------------------------------------------- isentropic Euler


def _check_density(rho):
    if np.any(~(rho > 0.0)):
        raise NonphysicalStateError("non-positive density encountered")


def pressure(rho, kappa: float, gamma: float):
    return kappa * np.power(rho, gamma)


def sound_speed(rho, kappa: float, gamma: float):
    return np.sqrt(kappa * gamma * np.power(rho, gamma - 1.0))


def euler1d_system(kappa: float = 1.0, gamma: float = 1.4) -> SystemSpec:
    """State (rho, rho*u); pressure kappa*rho^gamma is the unknown force."""
    if not kappa > 0 or not gamma > 1:
        raise ValueError("need kappa > 0 and gamma > 1")

    def flux(U):
        rho, m = U[0], U[1]
        return np.stack([m, m * m / rho])

    def force_flux(U):
        return np.stack([np.zeros_like(U[0]), pressure(U[0], kappa, gamma)])

    def reference_flux(U):
        rho, m = U[0], U[1]
        return np.stack([m, m * m / rho + pressure(rho, kappa, gamma)])

    def wavespeed(U):
        rho = U[0]
        _check_density(rho)
        return float(np.max(np.abs(U[1] / rho) + sound_speed(rho, kappa, gamma)))

    return SystemSpec("euler1d", 2, 1, flux, _zero_source, wavespeed, reference_flux,
                      force_flux, (1,))


def euler2d_system(kappa: float = 0.5, gamma: float = 1.2) -> SystemSpec:
    """State (rho, rho*u, rho*v) on a 2D periodic domain."""
    if not kappa > 0 or not gamma > 1:
        raise ValueError("need kappa > 0 and gamma > 1")

    def flux(U):
        rho, mx, my = U[0], U[1], U[2]
        u, v = mx / rho, my / rho
        return np.stack([mx, mx * u, mx * v]), np.stack([my, my * u, my * v])

    def force_flux(U):
        p = pressure(U[0], kappa, gamma)
        z = np.zeros_like(p)
        return np.stack([z, p, z]), np.stack([z, z, p])

    def reference_flux(U):
        fx, fy = flux(U)
        px, py = force_flux(U)
        return fx + px, fy + py

    def wavespeed(U):
        rho = U[0]
        _check_density(rho)
        c = sound_speed(rho, kappa, gamma)
        return (float(np.max(np.abs(U[1] / rho) + c)), float(np.max(np.abs(U[2] / rho) + c)))

    return SystemSpec("euler2d", 3, 2, flux, _zero_source, wavespeed, reference_flux,
                      force_flux, (1, 2))


# --------------------------------------------------------------------------- RTE moments


@dataclass(frozen=True)
class MomentMatrices:
    N: int
    A: np.ndarray
    S_diag: np.ndarray
    sigma_a: float
    sigma_s: float

    @property
    def truncation_coefficient(self) -> float:
        """Coefficient (N+1)/(2N+1) of d/dx m_{N+1} in the last row."""
        return (self.N + 1) / (2 * self.N + 1)


def rte_moment_matrices(N: int, sigma_a: float, sigma_s: float) -> MomentMatrices:
    if N < 1:
        raise ValueError("N must be at least 1")
    if sigma_a < 0 or sigma_s < 0:
        raise ValueError("opacities must be non-negative")
    A = np.zeros((N + 1, N + 1))
    for k in range(N + 1):
        if k > 0:
            A[k, k - 1] = k / (2 * k + 1)
        if k < N:
            A[k, k + 1] = (k + 1) / (2 * k + 1)
    S = np.full(N + 1, -(sigma_s + sigma_a))
    S[0] = -sigma_a
    return MomentMatrices(N, A, S, float(sigma_a), float(sigma_s))


def wavespeed_bound_moment(matrices: MomentMatrices) -> float:
    # Gershgorin: every row of A_N sums to at most 1.
    return 1.0


def moment_system(matrices: MomentMatrices) -> SystemSpec:
    """Linear system dm/dt + A dm/dx = g + S m for the low-order moments."""
    A, S = matrices.A, matrices.S_diag

    def flux(m):
        return np.tensordot(A, m, axes=(1, 0))

    def source(m, x=None, t=None):
        return S.reshape((-1,) + (1,) * (m.ndim - 1)) * m

    def wavespeed(m):
        return wavespeed_bound_moment(matrices)

    return SystemSpec(f"rte-moments-N{matrices.N}", matrices.N + 1, 1, flux, source, wavespeed,
                      force_components=(matrices.N,))
