"""Piecewise-constant two-jump vortex and its 2x2 Rayleigh eigenproblem.

The vorticity is ``c`` on ``[0, r1)``, ``-1`` on ``[r1, r2)`` and zero beyond,
with ``c = 1/xi - 1`` and ``xi = (r1/r2)**2`` so the total circulation
vanishes.  Its radial derivative is the pair of point masses
``c1 delta_{r1} + c2 delta_{r2}`` with ``c1 = -(1 + c)`` and ``c2 = 1``, which
reduces the Rayleigh equation to ``A h = z h`` on the jump radii.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import DomainError, InstabilityNotFound
from .kernel import kn

__all__ = [
    "DEFAULT_R2",
    "VortexParams",
    "PiecewiseProfiles",
    "RayleighMatrix",
    "EigenPair",
    "UnstableWindow",
    "build_vortex",
    "matrix_a",
    "char_poly",
    "discriminant_p",
    "find_unstable_xi",
    "eigenpair",
]

DEFAULT_R2 = math.sqrt(2.0)


def _check_n_xi(n, xi, n_min=1):
    if int(n) != n or n < n_min:
        raise DomainError(f"n must be an integer >= {n_min}, got {n!r}")
    if not 0.0 < xi < 1.0:
        raise DomainError(f"xi must lie in (0, 1), got {xi!r}")


@dataclass(frozen=True)
class VortexParams:
    n: int
    xi: float
    r2: float = DEFAULT_R2
    r1: float = field(init=False)
    c: float = field(init=False)

    def __post_init__(self):
        _check_n_xi(self.n, self.xi, n_min=2)
        if not self.r2 > 0:
            raise DomainError(f"r2 must be positive, got {self.r2!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "r1", self.r2 * math.sqrt(self.xi))
        object.__setattr__(self, "c", 1.0 / self.xi - 1.0)

    @property
    def c1(self):
        return -(1.0 + self.c)

    @property
    def c2(self):
        return 1.0

    @property
    def radii(self):
        return np.array([self.r1, self.r2])

    @property
    def jumps(self):
        """Point-mass weights ``(c1, c2)`` of the vorticity derivative."""
        return np.array([self.c1, self.c2])

    @property
    def eps_max(self):
        """Upper bound (exclusive) on admissible mollification widths."""
        return min(self.r1, self.r2 - self.r1) / 3.0

    def mean_vorticity(self):
        """``2 pi int w r dr`` in closed form; zero by construction."""
        return math.pi * (self.c * self.r1**2 - (self.r2**2 - self.r1**2))


@dataclass(frozen=True)
class PiecewiseProfiles:
    params: VortexParams

    def w_bar(self, r):
        p = self.params
        r = np.asarray(r, dtype=float)
        out = np.where(r < p.r1, p.c, np.where(r < p.r2, -1.0, 0.0))
        return out if out.ndim else float(out)

    def v_theta(self, r):
        p = self.params
        r = np.asarray(r, dtype=float)
        safe = np.where(r > 0, r, 1.0)
        out = np.where(
            r <= p.r1,
            0.5 * p.c * r,
            np.where(r <= p.r2, 0.5 * safe * ((p.r2 / safe) ** 2 - 1.0), 0.0),
        )
        return out if out.ndim else float(out)

    def angular_velocity(self, r):
        """``v_theta(r) / r`` with its finite limit ``c/2`` at the origin."""
        p = self.params
        r = np.asarray(r, dtype=float)
        safe = np.where(r > 0, r, 1.0)
        out = np.where(
            r <= p.r1,
            0.5 * p.c,
            np.where(r <= p.r2, 0.5 * ((p.r2 / safe) ** 2 - 1.0), 0.0),
        )
        return out if out.ndim else float(out)


def build_vortex(n, xi, r2=DEFAULT_R2):
    params = VortexParams(n, xi, r2)
    return params, PiecewiseProfiles(params)


@dataclass(frozen=True)
class RayleighMatrix:
    """``A = D + C``: transport (diagonal) plus Biot-Savart coupling."""

    D: np.ndarray
    C: np.ndarray

    @property
    def A(self):
        return self.D + self.C


def matrix_a(p):
    prof = PiecewiseProfiles(p)
    D = np.diag(prof.angular_velocity(p.radii)).astype(complex)
    K0 = kernel_matrix(p)
    C = (K0 * p.jumps[None, :] / p.n).astype(complex)
    return RayleighMatrix(D, C)


def kernel_matrix(p):
    """``K0[j, k] = K_n(r_j / r_k)``."""
    r = p.radii
    return kn(p.n, r[:, None] / r[None, :])


def char_poly(n, xi):
    """Coefficients ``(b1, b0)`` of ``det(A - z) = z**2 + b1 z + b0``."""
    _check_n_xi(n, xi)
    b1 = -((n - 1) / n) * (1 - xi) / (2 * xi)
    b0 = (1 - xi) / (4 * n * xi) - (1 - xi**n) / (4 * n * n * xi)
    return b1, b0


def discriminant_p(n, xi):
    """``p_n(xi) = xi**2 * discriminant``; negative exactly when unstable."""
    _check_n_xi(n, xi)
    return (
        ((n - 1) / n) ** 2 * (1 - xi) ** 2 / 4
        - xi * (1 - xi) / n
        + xi * (1 - xi**n) / n**2
    )


@dataclass
class UnstableWindow:
    lo: float
    hi: float
    xi_star: float
    scan_xi: np.ndarray
    scan_p: np.ndarray

    def __contains__(self, xi):
        return self.lo < xi < self.hi


def find_unstable_xi(n, resolution=4000, xtol=1e-10):
    """Locate the longest sub-interval of ``(0, 1)`` where ``p_n < 0``.

    Sign changes on a uniform scan are refined with Brent's method.  An
    interval reaching the end of the scan is extended to the endpoint (``p_n``
    vanishes to second order at ``xi = 1``).
    """
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    xs = np.linspace(0.0, 1.0, resolution + 1)[1:-1]
    ps = np.array([discriminant_p(n, x) for x in xs])
    # p_1 vanishes identically; rounding noise must not count as instability
    neg = ps < -1e-14
    if not np.any(neg):
        raise InstabilityNotFound(
            f"p_{n} has no negative value on a {resolution}-point scan "
            f"(min {ps.min():.3e} at xi={xs[np.argmin(ps)]:.4f})"
        )

    def root(a, b):
        return optimize.brentq(lambda x: discriminant_p(n, x), a, b, xtol=xtol)

    runs = []
    k = 0
    while k < len(xs):
        if not neg[k]:
            k += 1
            continue
        start = k
        while k < len(xs) and neg[k]:
            k += 1
        lo = root(xs[start - 1], xs[start]) if start > 0 else 0.0
        hi = root(xs[k - 1], xs[k]) if k < len(xs) else 1.0
        runs.append((lo, hi))
    lo, hi = max(runs, key=lambda ab: ab[1] - ab[0])
    xi_star = 0.5 * (lo + hi)
    if not discriminant_p(n, xi_star) < 0:
        raise InstabilityNotFound(f"midpoint xi={xi_star} of ({lo}, {hi}) is not unstable")
    return UnstableWindow(lo, hi, xi_star, xs, ps)


@dataclass(frozen=True)
class EigenPair:
    """Unstable root ``z`` (``Im z > 0``) and eigenvector ``h`` with ``h[0] = 1``."""

    z: complex
    h: np.ndarray
    n: int

    @property
    def lam(self):
        return -1j * self.n * self.z

    @property
    def z2(self):
        return self.z.imag


def eigenpair(p):
    """Quadratic-formula root with ``Im z > 0`` and its eigenvector."""
    pn = discriminant_p(p.n, p.xi)
    if not pn < 0:
        raise InstabilityNotFound(f"p_{p.n}({p.xi}) = {pn:.6g} >= 0; both roots are real")
    b1, b0 = char_poly(p.n, p.xi)
    z = complex(-0.5 * b1, 0.5 * math.sqrt(-pn) / p.xi)
    A = matrix_a(p).A
    h = np.array([1.0, (z - A[0, 0]) / A[0, 1]], dtype=complex)
    return EigenPair(z, h, p.n)
