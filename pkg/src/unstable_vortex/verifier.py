"""Independent checks of a regularized unstable vortex.

Three certificates are provided:

* the residual of the unscaled Rayleigh equation on fine collar grids, using
  the closed-form regularized profiles rather than the rescaled operators;
* the eigenfunction ``w_n = h_eps * dw_bar_eps`` as a :class:`RadialField`;
* the exponential growth rate of that field under time stepping of the
  linearized Euler operator restricted to the mode ``n``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalError
from .kernel import RadialField, kn, trapezoid_weights, velocity_matrix
from .regularization import RegularizedProfiles, interpolation_matrix

log = logging.getLogger(__name__)

__all__ = [
    "ResidualReport",
    "GrowthFit",
    "piecewise_residual",
    "rayleigh_residual",
    "collar_grid",
    "assemble_eigen_field",
    "linear_operator",
    "rk4_propagator",
    "propagate",
    "evolve_linear",
    "default_dt",
]


@dataclass
class ResidualReport:
    grid: np.ndarray
    residual: np.ndarray
    sup_norm: float
    l2_norm: float


def piecewise_residual(p, ep):
    """Rayleigh residual of the jump vortex at ``r1, r2`` with point-mass integrals."""
    from .vortex import kernel_matrix

    D = np.array([0.5 * p.c, 0.0])
    coupling = kernel_matrix(p) @ (p.jumps * ep.h) / p.n
    return (D - ep.z) * ep.h + coupling


def rayleigh_residual(sol, prof=None, fine_M=None):
    """Residual of the regularized Rayleigh equation on ``fine_M`` points per collar.

    Evaluates ``(v_eps/r - z_eps) h_eps(r) + (1/n) int K_n(r/s) h_eps dw_bar_eps ds``
    with the s-integral over both collars by Gauss-Legendre panels of
    ``fine_M`` nodes, split at ``s = r`` inside the collar containing ``r``.
    """
    if not getattr(sol, "converged", True):
        raise DomainError("residual requested for a non-converged solution")
    p, eps = sol.params, sol.eps
    if prof is None:
        prof = RegularizedProfiles(p, eps, sol.moll)
    if prof.eps != eps or prof.params != p:
        raise DomainError("profiles and solution use different parameters")
    if fine_M is None:
        fine_M = 4 * sol.moll.M
    if fine_M < 4 * sol.moll.M:
        raise DomainError(f"fine_M={fine_M} must be at least 4x the construction grid")

    t, _ = np.polynomial.legendre.leggauss(fine_M)
    x, w = np.polynomial.legendre.leggauss(fine_M)
    n = p.n
    radii = []
    values = []
    for j in (0, 1):
        r = p.radii[j] + eps * t
        first = (prof.angular_velocity(r) - sol.z_eps) * sol.h_eps_at(r)
        integral = np.zeros(r.shape, dtype=complex)
        for k in (0, 1):
            rk, ck = p.radii[k], p.jumps[k]
            if k != j:
                beta, wts = x, w
                dens = _collar_integrand(sol, prof, k, beta) * wts
                integral += kn(n, r[:, None] / (rk + eps * beta)[None, :]) @ dens
                continue
            for i, ti in enumerate(t):
                lh, rh = 0.5 * (ti + 1.0), 0.5 * (1.0 - ti)
                beta = np.concatenate([-1.0 + lh * (x + 1.0), ti + rh * (x + 1.0)])
                wts = np.concatenate([lh * w, rh * w])
                dens = _collar_integrand(sol, prof, k, beta) * wts
                integral[i] += kn(n, r[i] / (rk + eps * beta)) @ dens
        radii.append(r)
        values.append(first + integral / n)
    grid = np.concatenate(radii)
    res = np.concatenate(values)
    weights = eps * np.concatenate([w, w])
    return ResidualReport(
        grid=grid,
        residual=res,
        sup_norm=float(np.max(np.abs(res))),
        l2_norm=float(np.sqrt(np.sum(weights * np.abs(res) ** 2))),
    )


def _collar_integrand(sol, prof, k, beta):
    """``h_eps * (eps dw_bar)`` in collar ``k`` at rescaled points ``beta``."""
    g = interpolation_matrix(sol.moll.nodes, beta) @ sol.g[k]
    h = sol.eigen.h[k] + sol.eps * g
    return sol.params.jumps[k] * prof.collar_density(k, beta) * h


def collar_grid(p, eps, points_per_collar=201):
    """Uniform grids spanning both closed collars ``[r_j - eps, r_j + eps]``."""
    if points_per_collar < 3:
        raise DomainError("need at least 3 points per collar")
    a = np.linspace(-1.0, 1.0, points_per_collar)
    return np.concatenate([p.r1 + eps * a, p.r2 + eps * a])


def assemble_eigen_field(sol, prof=None, grid=None, points_per_collar=201):
    """Sample ``w_n = h_eps * dw_bar_eps`` on ``grid`` (default: the collar grid)."""
    p, eps = sol.params, sol.eps
    if prof is None:
        prof = RegularizedProfiles(p, eps, sol.moll)
    if grid is None:
        grid = collar_grid(p, eps, points_per_collar)
    grid = np.asarray(grid, dtype=float)
    values = sol.h_eps_at(grid) * prof.dw_bar(grid)
    return RadialField(grid, values, p.n, support_radius=p.r2 + eps)


def linear_operator(grid, n, prof):
    """Dense matrix of the mode-``n`` linearized Euler operator on nodal values.

    ``(L w)(r) = -i n (v/r) w(r) - i dw_bar(r) int K_n(r/s) w(s) ds``; the
    integral uses the trapezoid rule on ``grid`` with the kink ``s = r`` on a
    node.
    """
    grid = np.asarray(grid, dtype=float)
    transport = -1j * n * prof.angular_velocity(grid)
    nonlocal_ = -1j * prof.dw_bar(grid)[:, None] * velocity_matrix(grid, n)
    return np.diag(transport) + nonlocal_


def default_dt(L):
    """``0.1 / (transport bound + nonlocal bound)`` from the operator's rows."""
    diag = np.abs(np.diag(L))
    off = L - np.diag(np.diag(L))
    bound = diag.max() + np.abs(off).sum(axis=1).max()
    return 0.1 / bound if bound > 0 else 0.1


def rk4_propagator(L, dt):
    """One classical Runge-Kutta step of ``w' = L w`` as a matrix."""
    Z = dt * L
    eye = np.eye(L.shape[0], dtype=complex)
    P = eye.copy()
    term = eye
    for k in range(1, 5):
        term = term @ Z / k
        P = P + term
    return P


def propagate(values, L, t_final, dt):
    """Integrate ``w' = L w`` from ``values`` to ``t_final`` (no rescaling)."""
    steps = max(1, int(round(t_final / dt)))
    P = rk4_propagator(L, t_final / steps)
    w = np.asarray(values, dtype=complex)
    for _ in range(steps):
        w = P @ w
    return w


@dataclass
class GrowthFit:
    times: np.ndarray
    log_norms: np.ndarray
    fitted_rate: float
    expected_rate: float
    relative_error: float
    window: tuple
    degenerate: bool = False
    reason: str = ""
    dt: float = field(default=float("nan"))


def evolve_linear(field0, prof, t_final, dt=None, expected_rate=None, L=None):
    """Time-step the linearized operator from ``field0`` and fit the growth rate.

    The log of the ``L2(r dr)`` norm is recorded at every step; the field is
    renormalized whenever its norm exceeds ``1e100`` and the offset is
    carried in the log.  The rate is the least-squares slope on
    ``[t_final/2, t_final]``.  The fit is reported degenerate for a zero
    field or when the window covers less than one e-fold of the expected
    rate (or fewer than 10 samples).
    """
    if t_final <= 0:
        raise DomainError("t_final must be positive")
    grid = field0.grid
    if L is None:
        L = linear_operator(grid, field0.n, prof)
    if dt is None:
        dt = default_dt(L)
    steps = max(1, int(math.ceil(t_final / dt - 1e-9)))
    dt = t_final / steps
    # RK4 is stable on the imaginary axis up to |dt * lambda| ~ 2.8
    if dt * np.abs(L).sum(axis=1).max() > 2.5:
        raise NumericalError(f"time step dt={dt:.3e} is outside the integrator's stability range")
    P = rk4_propagator(L, dt)
    weights = 2 * np.pi * trapezoid_weights(grid) * grid
    expected = float(expected_rate) if expected_rate is not None else float("nan")

    def lognorm(w):
        # factor out the largest entry so huge fields do not overflow when squared
        big = float(np.max(np.abs(w))) if w.size else 0.0
        if not big > 0 or not math.isfinite(big):
            return -math.inf if big == 0 else math.inf
        nrm = math.sqrt(float(np.sum(weights * np.abs(w / big) ** 2)))
        return math.log(big) + math.log(nrm) if nrm > 0 else -math.inf

    w = field0.values.astype(complex)
    if not np.all(np.isfinite(w)):
        raise DomainError("initial field must be finite")
    times = np.arange(steps + 1) * dt
    logs = np.empty(steps + 1)
    offset = 0.0
    logs[0] = lognorm(w)
    if logs[0] == -math.inf:
        warnings.warn("degenerate growth fit: zero initial field", RuntimeWarning, stacklevel=2)
        return GrowthFit(times, np.full(steps + 1, -np.inf), float("nan"), expected,
                         float("nan"), (t_final / 2, t_final), True, "zero initial field", dt)
    for k in range(1, steps + 1):
        w = P @ w
        ln = lognorm(w)
        if not np.isfinite(ln):
            raise NumericalError("field norm overflowed or vanished during evolution")
        if ln > 230.0:
            offset += ln
            w = w / math.exp(ln)
            ln = 0.0
        logs[k] = ln + offset

    window = (t_final / 2, t_final)
    sel = times >= window[0] - 1e-12
    slope = float(np.polyfit(times[sel], logs[sel], 1)[0])
    rel = abs(slope - expected) / abs(expected) if expected_rate is not None else float("nan")
    degenerate, reason = False, ""
    if sel.sum() < 10:
        degenerate, reason = True, f"fit window holds only {sel.sum()} samples"
    elif expected_rate is not None and (window[1] - window[0]) * abs(expected) < 1.0:
        degenerate, reason = True, "fit window shorter than one e-folding time"
    if degenerate:
        warnings.warn(f"degenerate growth fit: {reason}", RuntimeWarning, stacklevel=2)
    return GrowthFit(times, logs, slope, expected, rel, window, degenerate, reason, dt)
