"""Self-similar linearized operator and continuation of its unstable eigenvalue.

On the mode ``n`` the self-similar linearization acts as

    L_b W = a b W + b R dW/dR - i n (v/R) W - i dw_bar/dR int K_n(R/S) W(S) dS,

i.e. the Eulerian operator plus ``b (a + R d/dR)``.  The drift ``-b R`` of
the transport part points inward, so ``R d/dR`` is discretized by the
one-sided difference towards larger ``R`` with a zero inflow value beyond
``R_max``.  The spectrum is computed densely and the branch emanating from
the Eulerian eigenvalue is followed as ``b`` increases.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .errors import BranchLost, DomainError, NumericalError
from .verifier import linear_operator

log = logging.getLogger(__name__)

__all__ = [
    "SelfSimilarParams",
    "OperatorMatrix",
    "ContinuationRow",
    "radial_grid",
    "upwind_radial_derivative",
    "assemble_Lb",
    "spectrum_near",
    "continue_in_b",
    "sweep_threads",
]

MIN_COLLAR_NODES = 24


@dataclass(frozen=True)
class SelfSimilarParams:
    a: float = 0.5
    b: float = 0.0
    p: float = 3.0

    def __post_init__(self):
        if not 0.0 < self.a <= 1.0:
            raise DomainError(f"a must lie in (0, 1], got {self.a}")
        if self.b < 0:
            raise DomainError(f"b must be nonnegative, got {self.b}")
        if not self.p > 2:
            raise DomainError(f"p must exceed 2, got {self.p}")
        if not self.a * self.p < 2:
            raise DomainError(f"a*p = {self.a * self.p} must be below 2")


@dataclass
class OperatorMatrix:
    grid: np.ndarray
    entries: np.ndarray
    a: float
    b: float
    n: int


def radial_grid(p, eps, M=512, R_max=None, b=0.0):
    """Graded grid on ``(0, R_max]`` concentrated on the collars and their wakes.

    The node density mixes a uniform part, a plateau over ``|R - r_j| < 2 eps``
    and a band reaching a wake length ``max(2 eps, 40 b r2)`` inward of each
    collar.  The inward drift ``-b R`` smears the collar forcing into a wake
    decaying on the scale ``b R / Re(lam)``, so the band grows with ``b``.
    """
    if R_max is None:
        R_max = p.r2 + 4 * eps
    if R_max < p.r2 + 2 * eps:
        raise DomainError(f"R_max={R_max} must be at least r2 + 2 eps = {p.r2 + 2 * eps}")
    fine = np.linspace(0.0, R_max, 200001)
    dens = np.full(fine.shape, 0.15 / R_max)
    wake = max(2 * eps, 40.0 * b * p.r2)
    for rj in p.radii:
        plateau = np.exp(-(((fine - rj) / (2 * eps)) ** 8))
        mid, half = rj - 0.5 * wake, 2 * eps + 0.5 * wake
        band = np.exp(-(((fine - mid) / half) ** 8))
        dens += 0.2 * plateau / trapezoid(plateau, fine) + 0.225 * band / trapezoid(band, fine)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(fine))])
    cdf /= cdf[-1]
    grid = np.interp(np.arange(1, M + 1) / M, cdf, fine)
    for rj in p.radii:
        count = int(np.sum(np.abs(grid - rj) < eps))
        if count < MIN_COLLAR_NODES:
            raise DomainError(
                f"grid of {M} nodes puts only {count} nodes in the collar at r={rj:.4g}; "
                f"need {MIN_COLLAR_NODES}"
            )
    return grid


def upwind_radial_derivative(grid, order=2):
    """Matrix of ``R dW/dR`` by one-sided differences towards larger ``R``.

    ``order=2`` uses the three-point stencil ``(i, i+1, i+2)`` and drops to
    two points next to the boundary; past the last node the inflow value is
    zero.
    """
    if order not in (1, 2):
        raise DomainError(f"upwind order must be 1 or 2, got {order}")
    grid = np.asarray(grid, dtype=float)
    m = grid.size
    h = np.diff(grid)
    D = np.zeros((m, m))
    idx = np.arange(m - 1)
    D[idx, idx] = -1.0 / h
    D[idx, idx + 1] = 1.0 / h
    D[m - 1, m - 1] = -1.0 / h[-1]
    if order == 2 and m > 2:
        i = np.arange(m - 2)
        h1, h2 = h[:-1], h[:-1] + h[1:]
        D[i, i] = -(h1 + h2) / (h1 * h2)
        D[i, i + 1] = h2 / (h1 * (h2 - h1))
        D[i, i + 2] = -h1 / (h2 * (h2 - h1))
    return grid[:, None] * D


def assemble_Lb(params, prof, grid=None, grid_M=512, R_max=None, n=None,
                nonlocal_term=True, order=2):
    """Dense matrix of ``L_b`` on the nodal values of a radial grid.

    The default grid is :func:`radial_grid` adapted to ``params.b``.  ``n``
    defaults to the vortex frequency; a negative ``n`` gives the operator on
    the conjugate mode, i.e. the complex-conjugate matrix.
    """
    vp = prof.params
    if n is None:
        n = vp.n
    if grid is None:
        grid = radial_grid(vp, prof.eps, grid_M, R_max, b=params.b)
    grid = np.asarray(grid, dtype=float)
    if grid[-1] < vp.r2 + 2 * prof.eps:
        raise DomainError("grid must reach r2 + 2 eps")
    m = abs(int(n))
    if m == 0:
        raise DomainError("angular frequency must be nonzero")
    if nonlocal_term:
        L = linear_operator(grid, m, prof)
    else:
        L = np.diag(-1j * m * prof.angular_velocity(grid))
    if params.b:
        L = L + params.b * (params.a * np.eye(grid.size) + upwind_radial_derivative(grid, order))
    if n < 0:
        L = np.conj(L)
    return OperatorMatrix(grid, L, params.a, params.b, int(n))


def spectrum_near(op, center, radius):
    """Eigenvalues of ``op`` inside the disk ``|lam - center| < radius``, nearest first."""
    if radius <= 0:
        return []
    try:
        ev = np.linalg.eigvals(op.entries)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"dense eigen-solve failed: {exc}") from exc
    dist = np.abs(ev - center)
    sel = np.argsort(dist)
    return [complex(ev[i]) for i in sel if dist[i] < radius]


@dataclass
class ContinuationRow:
    b: float
    lam: complex
    margin: float  # Re lam - 3 b
    distance: float  # |lam - lam_anchor|

    @property
    def flag(self):
        return self.margin > 0


def sweep_threads():
    env = os.environ.get("UNSTABLE_VORTEX_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise DomainError(f"UNSTABLE_VORTEX_THREADS={env!r} is not an integer")
    return 1


def _nearest(ev, target):
    return complex(ev[np.argmin(np.abs(ev - target))])


def continue_in_b(b_list, prof, lam_guess, a=0.5, p=3.0, grid_M=512, R_max=None,
                  match_radius=None, threads=None):
    """Follow the eigenvalue branch from ``b = 0`` by nearest matching.

    At ``b = 0`` the anchor is the eigenvalue closest to ``lam_guess``.  Each
    subsequent ``b`` takes the eigenvalue nearest the previous one on a grid
    adapted to ``b``.  The match must lie within ``10 x`` the local
    discretization-error estimate (distance to the nearest eigenvalue on the
    half grid) plus ``10 x`` the step in ``b``, or the explicit
    ``match_radius``.  Raises :class:`BranchLost` carrying the rows computed
    so far otherwise.
    """
    b_list = [float(b) for b in b_list]
    if not b_list or b_list[0] != 0.0:
        raise DomainError("b values must start at 0")
    if any(b1 <= b0 for b0, b1 in zip(b_list, b_list[1:])):
        raise DomainError("b values must be strictly increasing")
    params = [SelfSimilarParams(a, b, p) for b in b_list]
    # fail early on an unresolvable grid
    radial_grid(prof.params, prof.eps, grid_M, R_max)
    radial_grid(prof.params, prof.eps, grid_M // 2, R_max)

    def spectra(sp):
        full = assemble_Lb(sp, prof, grid_M=grid_M, R_max=R_max)
        half = assemble_Lb(sp, prof, grid_M=grid_M // 2, R_max=R_max)
        try:
            return np.linalg.eigvals(full.entries), np.linalg.eigvals(half.entries)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"dense eigen-solve failed at b={sp.b}: {exc}") from exc

    workers = threads or sweep_threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(spectra, params))
    else:
        results = [spectra(sp) for sp in params]

    lam0 = _nearest(results[0][0], lam_guess)
    rows = [ContinuationRow(0.0, lam0, lam0.real, 0.0)]
    prev, prev_b = lam0, 0.0
    for b, (ev, ev_half) in zip(b_list[1:], results[1:]):
        lam = _nearest(ev, prev)
        if match_radius is None:
            err = abs(_nearest(ev_half, lam) - lam)
            radius = 10.0 * err + 10.0 * (b - prev_b)
        else:
            radius = match_radius
        if abs(lam - prev) > radius:
            raise BranchLost(
                f"no eigenvalue within {radius:.3e} of {prev:.6g} at b={b}", b=b, table=rows
            )
        rows.append(ContinuationRow(b, lam, lam.real - 3 * b, abs(lam - lam0)))
        log.debug("b=%g lam=%s radius=%.3e", b, lam, radius)
        prev, prev_b = lam, b
    return rows
