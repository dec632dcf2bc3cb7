"""Radial Biot-Savart kernel for an angular Fourier mode.

For a vorticity ``w_n(r) exp(i n theta)`` the radial velocity is
``i exp(i n theta) * int_0^inf K_n(r/s) w_n(s) ds`` with

    K_n(rho) = rho**(n-1) / 2   for rho < 1
    K_n(rho) = rho**(-n-1) / 2  for rho > 1

The closed form is checked against direct quadrature of the angular integral
``(1/2pi) int_0^{2pi} sin(t) sin(n t) / |rho - e^{it}|^2 dt``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericalError

__all__ = [
    "KernelQuery",
    "RadialField",
    "kn",
    "kn_closed",
    "kn_quadrature",
    "trapezoid_weights",
    "velocity_matrix",
    "apply_radial_velocity",
]


@dataclass(frozen=True)
class KernelQuery:
    n: int
    rho: float

    def __post_init__(self):
        _check_query(self.n, self.rho)


def _check_query(n, rho):
    if int(n) != n or n < 1:
        raise DomainError(f"angular frequency must be a positive integer, got {n!r}")
    if not np.all(np.asarray(rho) > 0):
        raise DomainError("radius ratio must be positive")


def kn(n, rho):
    """Vectorized closed-form kernel, ``1/2`` on the diagonal ``rho == 1``."""
    rho = np.asarray(rho, dtype=float)
    inner = rho <= 1.0
    # Clip the exponent base so the unused branch never overflows.
    out = np.where(
        inner,
        0.5 * np.power(np.minimum(rho, 1.0), n - 1),
        0.5 * np.power(np.maximum(rho, 1.0), -n - 1),
    )
    return out if out.ndim else float(out)


def kn_closed(n, rho=None):
    """Closed-form ``K_n(rho)``.

    Accepts either ``(n, rho)`` or a single :class:`KernelQuery`.
    """
    if isinstance(n, KernelQuery):
        n, rho = n.n, n.rho
    _check_query(n, rho)
    return kn(n, rho)


def kn_quadrature(n, rho=None, tol=1e-10, exclusion=0.05):
    """Evaluate ``K_n(rho)`` by adaptive quadrature of the angular integral.

    The integrand peaks at ``t = 0`` where ``|rho - e^{it}|`` is smallest, so
    the integral is taken over ``(-pi, pi)`` with a breakpoint there.  Radius
    ratios within ``exclusion`` (relative) of 1 are rejected.
    """
    if isinstance(n, KernelQuery):
        n, rho = n.n, n.rho
    _check_query(n, rho)
    if tol <= 0:
        raise DomainError("tolerance must be positive")
    if abs(rho - 1.0) < exclusion:
        raise DomainError(f"rho={rho} lies in the exclusion band around 1")

    def integrand(t):
        return np.sin(t) * np.sin(n * t) / (1.0 + rho * rho - 2.0 * rho * np.cos(t))

    value, abserr, info = integrate.quad(
        integrand, -np.pi, np.pi, points=[0.0], epsabs=2 * np.pi * tol,
        epsrel=0.0, limit=400, full_output=True,
    )[:3]
    value /= 2 * np.pi
    abserr /= 2 * np.pi
    if abserr > tol:
        raise NumericalError(
            f"quadrature for K_{n}({rho}) stalled at error {abserr:.3e}", estimate=value
        )
    return value


def trapezoid_weights(grid):
    grid = np.asarray(grid, dtype=float)
    w = np.zeros_like(grid)
    if grid.size < 2:
        return w
    dh = np.diff(grid)
    w[:-1] += 0.5 * dh
    w[1:] += 0.5 * dh
    return w


def velocity_matrix(grid, n):
    """Matrix ``V`` with ``(V @ w)[i] ~ int K_n(r_i/s) w(s) ds`` on ``grid``.

    The trapezoid rule on the grid itself puts the kernel kink ``s = r_i`` on a
    node, so every panel integrand is smooth.
    """
    grid = np.asarray(grid, dtype=float)
    return kn(n, grid[:, None] / grid[None, :]) * trapezoid_weights(grid)[None, :]


@dataclass
class RadialField:
    """Samples of a mode-``n`` radial vorticity amplitude ``w_n``."""

    grid: np.ndarray
    values: np.ndarray
    n: int
    support_radius: float | None = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.grid.shape != self.values.shape or self.grid.ndim != 1:
            raise DomainError("grid and values must be 1-D arrays of equal length")
        if self.grid.size and (self.grid[0] <= 0 or np.any(np.diff(self.grid) <= 0)):
            raise DomainError("grid must be positive and strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("field values must be finite")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError("angular frequency must be a positive integer")
        if self.support_radius is not None:
            outside = self.grid > self.support_radius
            if np.any(self.values[outside] != 0):
                raise DomainError("field does not vanish beyond its support radius")

    def l2_norm(self):
        """Norm ``sqrt(2 pi int |w_n|^2 r dr)`` by the trapezoid rule."""
        w = trapezoid_weights(self.grid)
        return float(np.sqrt(2 * np.pi * np.sum(w * self.grid * np.abs(self.values) ** 2)))

    def scaled(self, factor):
        return RadialField(self.grid, factor * self.values, self.n, self.support_radius)


def apply_radial_velocity(field, r):
    """Return ``int_0^inf K_n(r/s) w_n(s) ds`` for a sampled field.

    The physical radial velocity is ``i exp(i n theta)`` times this value.
    Trapezoid rule on the field grid; if ``r`` falls strictly inside a panel
    the panel is split there (value linearly interpolated).
    """
    if r <= 0:
        raise DomainError("evaluation radius must be positive")
    s, w = field.grid, field.values
    if s.size < 2 or not np.any(w):
        return 0j
    if s[0] < r < s[-1] and not np.any(s == r):
        k = np.searchsorted(s, r)
        w = np.insert(w, k, np.interp(r, s, w.real) + 1j * np.interp(r, s, w.imag))
        s = np.insert(s, k, r)
    return complex(np.sum(trapezoid_weights(s) * kn(field.n, r / s) * w))
