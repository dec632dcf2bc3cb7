"""Smooth unstable vortex obtained by mollifying the jump radii.

The angular velocity of the piecewise vortex is regularized inside the
collars ``|r - r_j| < eps`` by mollifying the indicator of ``[r1, r2)``.  In
the rescaled variable ``r = r_j + eps * alpha`` (``alpha`` in ``I = (-1, 1)``)
the Rayleigh equation for ``h_eps = h_j + eps * g_j(alpha)`` and
``z_eps = z + eps * y`` becomes

    (A - z) g + (B - y) h + eps (B - y) g = 0,

which is solved by a Banach iteration.  Profiles on ``I`` are sampled at
Gauss-Legendre nodes and carried as arrays of shape ``(2, M)``, one row per
collar.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ContractionFailure, DomainError, InstabilityLost
from .kernel import kn
from .vortex import EigenPair, PiecewiseProfiles, VortexParams, kernel_matrix

log = logging.getLogger(__name__)

__all__ = [
    "DEFAULT_M",
    "MollifierProfile",
    "RegularizedProfiles",
    "RescaledOperators",
    "RescaledSolution",
    "build_mollifier",
    "regularized_profiles",
    "build_operators",
    "apply_A",
    "apply_B",
    "apply_C",
    "solve_linearized",
    "fixed_point",
    "explicit_solution",
    "defect",
    "interpolation_matrix",
]

DEFAULT_M = 64
_SIGMA_NODES = 256


def _bump(alpha):
    alpha = np.asarray(alpha, dtype=float)
    inside = np.abs(alpha) < 1.0
    a2 = np.where(inside, alpha * alpha, 0.0)
    return np.where(inside, np.exp(-1.0 / (1.0 - a2)), 0.0)


def _bump_log_derivative(alpha):
    alpha = np.asarray(alpha, dtype=float)
    inside = np.abs(alpha) < 1.0
    a2 = np.where(inside, alpha * alpha, 0.0)
    return np.where(inside, -2.0 * alpha / (1.0 - a2) ** 2, 0.0)


def interpolation_matrix(nodes, points):
    """Barycentric Lagrange matrix mapping values on Legendre ``nodes`` to ``points``."""
    nodes = np.asarray(nodes, dtype=float)
    points = np.atleast_1d(np.asarray(points, dtype=float))
    _, w = np.polynomial.legendre.leggauss(nodes.size)
    bw = (-1.0) ** np.arange(nodes.size) * np.sqrt((1.0 - nodes**2) * w)
    diff = points[:, None] - nodes[None, :]
    exact = diff == 0.0
    diff[exact] = 1.0
    L = bw[None, :] / diff
    L /= L.sum(axis=1, keepdims=True)
    rows = np.any(exact, axis=1)
    L[rows] = exact[rows].astype(float)
    return L


@dataclass(frozen=True, eq=False)
class MollifierProfile:
    """Exponential bump ``eta = N exp(-1/(1 - alpha**2))`` on Gauss-Legendre nodes."""

    nodes: np.ndarray
    weights: np.ndarray
    norm: float

    @property
    def M(self):
        return self.nodes.size

    def eta(self, alpha):
        return self.norm * _bump(alpha)

    def deta(self, alpha):
        return self.eta(alpha) * _bump_log_derivative(alpha)

    def eta_bar(self, alpha):
        """``eta + d(alpha eta)/dalpha = 2 eta + alpha eta'``."""
        alpha = np.asarray(alpha, dtype=float)
        return 2.0 * self.eta(alpha) + alpha * self.deta(alpha)

    def zeta(self, alpha, rj, eps):
        """``-1/2 d/dalpha [alpha**2 eta / (rj + eps alpha)]``."""
        alpha = np.asarray(alpha, dtype=float)
        r = rj + eps * alpha
        e = self.eta(alpha)
        num = 2.0 * alpha * e + alpha * alpha * self.deta(alpha)
        return -0.5 * (num / r - eps * alpha * alpha * e / (r * r))

    def sigma(self, alpha):
        """Primitive ``int_{-1}^alpha eta``, by a fixed high-order Gauss rule."""
        alpha = np.clip(np.asarray(alpha, dtype=float), -1.0, 1.0)
        x, w = _sigma_rule()
        half = 0.5 * (alpha + 1.0)
        beta = -1.0 + half[..., None] * (x + 1.0)
        return self.norm * half * (_bump(beta) @ w)

    # node samples
    @cached_property
    def eta_nodes(self):
        return self.eta(self.nodes)

    @cached_property
    def sigma_nodes(self):
        return self.sigma(self.nodes)

    @cached_property
    def eta_bar_nodes(self):
        return self.eta_bar(self.nodes)

    def zeta_nodes(self, p, eps):
        return np.stack([self.zeta(self.nodes, rj, eps) for rj in p.radii])

    def integrate(self, values):
        """Gauss-Legendre integral over ``I`` along the last axis."""
        return np.asarray(values) @ self.weights

    def inner_norm(self, g):
        """``L2(I)`` norm of a profile pair (or single profile)."""
        return float(np.sqrt(np.sum(np.abs(np.asarray(g)) ** 2 @ self.weights)))


_RULE_CACHE = {}


def _sigma_rule():
    if "sigma" not in _RULE_CACHE:
        _RULE_CACHE["sigma"] = np.polynomial.legendre.leggauss(_SIGMA_NODES)
    return _RULE_CACHE["sigma"]


def build_mollifier(M=DEFAULT_M):
    if int(M) != M or M < 16:
        raise DomainError(f"mollifier needs at least 16 nodes, got {M!r}")
    x, w = np.polynomial.legendre.leggauss(int(M))
    # normalize on the fixed reference rule so sigma(1) = 1 for every M
    xr, wr = _sigma_rule()
    norm = 1.0 / float(wr @ _bump(xr))
    return MollifierProfile(x, w, norm)


def _check_eps(p, eps):
    if not 0.0 < eps < p.eps_max:
        raise DomainError(
            f"eps={eps} must lie in (0, min(r1, r2 - r1)/3) = (0, {p.eps_max:.6g})"
        )


@dataclass(frozen=True, eq=False)
class RegularizedProfiles:
    """Closed-form smooth profiles of the mollified vortex."""

    params: VortexParams
    eps: float
    moll: MollifierProfile

    def _collars(self, r):
        p, eps = self.params, self.eps
        r = np.asarray(r, dtype=float)
        in1 = np.abs(r - p.r1) < eps
        in2 = np.abs(r - p.r2) < eps
        return r, in1, in2

    def angular_velocity(self, r):
        """``v_theta_eps(r) / r`` (finite at the origin)."""
        p = self.params
        r, in1, in2 = self._collars(r)
        out = np.array(PiecewiseProfiles(p).angular_velocity(r), dtype=float)
        for j, mask in enumerate((in1, in2)):
            if np.any(mask):
                rr = r[mask]
                alpha = (rr - p.radii[j]) / self.eps
                d0 = 0.5 * p.c if j == 0 else 0.0
                out[mask] = d0 + self.eps * self._u(j, alpha) / rr**2
        return out if out.ndim else float(out)

    def v_theta(self, r):
        r = np.asarray(r, dtype=float)
        return r * self.angular_velocity(r)

    def _u(self, j, alpha):
        p, eps = self.params, self.eps
        rj, cj = p.radii[j], p.jumps[j]
        return 0.5 * cj * alpha * (2 * rj + eps * alpha) * (self.moll.sigma(alpha) - j)

    def w_bar(self, r):
        p = self.params
        r, in1, in2 = self._collars(r)
        out = np.array(PiecewiseProfiles(p).w_bar(r), dtype=float)
        for j, mask in enumerate((in1, in2)):
            if np.any(mask):
                rr = r[mask]
                alpha = (rr - p.radii[j]) / self.eps
                d0 = 0.5 * p.c if j == 0 else 0.0
                sig = self.moll.sigma(alpha)
                out[mask] = 2 * d0 + p.jumps[j] * (
                    sig - j + alpha * (rr + p.radii[j]) * self.moll.eta(alpha) / (2 * rr)
                )
        return out if out.ndim else float(out)

    def dw_bar(self, r):
        """``d w_bar_eps / dr``; zero outside the collars."""
        p = self.params
        r, in1, in2 = self._collars(r)
        out = np.zeros(r.shape)
        for j, mask in enumerate((in1, in2)):
            if np.any(mask):
                alpha = (r[mask] - p.radii[j]) / self.eps
                out[mask] = p.jumps[j] * self.collar_density(j, alpha) / self.eps
        return out if out.ndim else float(out)

    def collar_density(self, j, alpha):
        """``eta_bar + eps zeta_j`` so that ``eps dw/dr = c_j * collar_density``."""
        return self.moll.eta_bar(alpha) + self.eps * self.moll.zeta(
            alpha, self.params.radii[j], self.eps
        )

    def support(self):
        p, eps = self.params, self.eps
        return [(p.r1 - eps, p.r1 + eps), (p.r2 - eps, p.r2 + eps)]


def regularized_profiles(p, eps, moll=None):
    _check_eps(p, eps)
    return RegularizedProfiles(p, float(eps), moll if moll is not None else build_mollifier())


def _collar_quadrature(moll, alpha_i, sub_nodes):
    """Nodes and weights of the two Gauss panels ``[-1, a]`` and ``[a, 1]``."""
    x, w = np.polynomial.legendre.leggauss(sub_nodes)
    left_half = 0.5 * (alpha_i + 1.0)
    right_half = 0.5 * (1.0 - alpha_i)
    pts = np.concatenate([-1.0 + left_half * (x + 1.0), alpha_i + right_half * (x + 1.0)])
    wts = np.concatenate([left_half * w, right_half * w])
    return pts, wts


@dataclass(frozen=True, eq=False)
class RescaledOperators:
    """Discretized zoomed operators at a fixed ``eps``.

    ``B`` is a ``(2M, 2M)`` matrix acting on stacked profile pairs.  Kernel
    integrals with ``j == k`` are split at ``beta == alpha`` where the kernel
    has a kink; off-node values of ``g`` come from Lagrange interpolation.
    """

    params: VortexParams
    eps: float
    moll: MollifierProfile
    split: bool = True
    sub_nodes: int | None = None
    B: np.ndarray = field(init=False, repr=False)
    C: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        _check_eps(self.params, self.eps)
        object.__setattr__(self, "B", self._assemble_B())
        object.__setattr__(self, "C", _assemble_C(self.params, self.moll))

    @property
    def M(self):
        return self.moll.M

    @cached_property
    def K0(self):
        return kernel_matrix(self.params)

    @cached_property
    def D(self):
        return np.array([0.5 * self.params.c, 0.0])

    def r_nodes(self, j):
        return self.params.radii[j] + self.eps * self.moll.nodes

    @cached_property
    def u_over_r2(self):
        p = self.params
        prof = RegularizedProfiles(p, self.eps, self.moll)
        return np.stack([prof._u(j, self.moll.nodes) / self.r_nodes(j) ** 2 for j in (0, 1)])

    def keps(self, j, k, alpha, beta):
        p, eps = self.params, self.eps
        ra = p.radii[j] + eps * np.asarray(alpha)[..., None]
        rb = p.radii[k] + eps * np.asarray(beta)
        return kn(p.n, ra / rb)

    def jnjk(self, j, k, alpha, beta):
        return (self.keps(j, k, alpha, beta) - self.K0[j, k]) / self.eps

    def _block(self, j, k):
        """Matrix of ``g_k -> int (J eta_bar + K_eps zeta_k) g_k dbeta`` at row nodes ``j``."""
        moll, eps = self.moll, self.eps
        rk = self.params.radii[k]
        a, w = moll.nodes, moll.weights
        if j != k or not self.split:
            dens_J = moll.eta_bar(a) * w
            dens_K = moll.zeta(a, rk, eps) * w
            return self.jnjk(j, k, a, a) * dens_J + self.keps(j, k, a, a) * dens_K
        q = self.sub_nodes or self.M
        out = np.empty((self.M, self.M))
        for i, ai in enumerate(a):
            pts, wts = _collar_quadrature(moll, ai, q)
            row = (
                self.jnjk(j, k, ai, pts) * moll.eta_bar(pts)
                + self.keps(j, k, ai, pts) * moll.zeta(pts, rk, eps)
            ) * wts
            out[i] = row @ interpolation_matrix(a, pts)
        return out

    def _assemble_B(self):
        M, n = self.M, self.params.n
        B = np.zeros((2 * M, 2 * M))
        for j in (0, 1):
            for k in (0, 1):
                blk = self.params.jumps[k] / n * self._block(j, k)
                if j == k:
                    blk = blk + np.diag(self.u_over_r2[j])
                B[j * M:(j + 1) * M, k * M:(k + 1) * M] = blk
        return B

    def apply_B(self, g):
        g = _check_pair(g, self.M)
        return (self.B @ g.reshape(-1)).reshape(2, self.M)

    def apply_C(self, g):
        g = _check_pair(g, self.M)
        return self.C @ g.reshape(-1)

    def bounds(self, samples=401):
        """Sup norms entering the operator bounds for ``B``, sampled on a fine grid."""
        p, eps = self.params, self.eps
        a = np.linspace(-1, 1, samples)
        prof = RegularizedProfiles(p, eps, self.moll)
        out = {
            "u_over_r2": [
                float(np.max(np.abs(prof._u(j, a) / (p.radii[j] + eps * a) ** 2))) for j in (0, 1)
            ],
            "zeta": [float(np.max(np.abs(self.moll.zeta(a, rk, eps)))) for rk in p.radii],
            "eta_bar": float(np.max(np.abs(self.moll.eta_bar(a)))),
            "keps": np.zeros((2, 2)),
            "J": np.zeros((2, 2)),
            "J_bound": np.zeros((2, 2)),
        }
        for j in (0, 1):
            for k in (0, 1):
                out["keps"][j, k] = np.max(np.abs(self.keps(j, k, a, a)))
                out["J"][j, k] = np.max(np.abs(self.jnjk(j, k, a, a)))
                rj, rk = p.radii[j], p.radii[k]
                out["J_bound"][j, k] = 0.5 * (p.n + 1) * (rj + rk) / (rk - eps) ** 2
        return out

    def b_norm_bound(self):
        """Constant ``C_B`` with ``||B g|| <= C_B ||g||`` in ``L2(I)^2``."""
        bd = self.bounds()
        p = self.params
        size_I = 2.0
        total = 0.0
        for j in (0, 1):
            total += bd["u_over_r2"][j]
            for k in (0, 1):
                total += size_I / p.n * abs(p.jumps[k]) * (
                    bd["J"][j, k] * bd["eta_bar"] + bd["keps"][j, k] * bd["zeta"][k]
                )
        return total


def _assemble_C(p, moll):
    """``(2, 2M)`` matrix of ``(Cg)_j = (1/n) sum_k c_k K0_jk int g_k eta_bar``."""
    K0 = kernel_matrix(p)
    row = moll.eta_bar_nodes * moll.weights
    C = np.zeros((2, 2 * moll.M))
    for j in (0, 1):
        for k in (0, 1):
            C[j, k * moll.M:(k + 1) * moll.M] = p.jumps[k] * K0[j, k] / p.n * row
    return C


def _check_pair(g, M):
    g = np.asarray(g)
    if g.ndim == 1 and g.shape == (2,):
        g = np.repeat(g[:, None], M, axis=1)
    if g.shape != (2, M):
        raise DomainError(f"profile pair has shape {g.shape}, expected (2, {M})")
    return g


def build_operators(p, eps, moll=None, split=True, sub_nodes=None):
    return RescaledOperators(p, float(eps), moll if moll is not None else build_mollifier(),
                             split, sub_nodes)


def apply_C(g, p, moll):
    g = _check_pair(g, moll.M)
    return _assemble_C(p, moll) @ g.reshape(-1)


def apply_A(g, p, moll):
    g = _check_pair(g, moll.M)
    D = np.array([0.5 * p.c, 0.0])
    return D[:, None] * g + apply_C(g, p, moll)[:, None]


def apply_B(g, ops, moll):
    if moll.M != ops.M or not np.array_equal(moll.nodes, ops.moll.nodes):
        raise DomainError("operators were built on a different node set")
    return ops.apply_B(g)


def _split_in_basis(v, h, z2):
    """Coefficients ``(y, gamma)`` with ``v = y h - (-2i z2 gamma) h*``."""
    if not z2 > 0:
        raise DomainError("eigenvalue must have positive imaginary part")
    basis = np.column_stack([h, np.conj(h)])
    coef = np.linalg.solve(basis, v)
    return coef[0], coef[1] / (2j * z2)


def solve_linearized(f, ep, p, moll):
    """Solve ``(A - z) mu = y h - C f`` for ``mu = gamma h*``; return ``(f + mu, y)``.

    ``C f`` is split in the basis ``{h, h*}``: its ``h`` component is ``y`` and
    its ``h*`` component equals ``2i z2 gamma`` since ``(A - z) h* = -2i z2 h*``.
    """
    f = _check_pair(f, moll.M).astype(complex)
    y, gamma = _split_in_basis(apply_C(f, p, moll), ep.h, ep.z2)
    return f + gamma * np.conj(ep.h)[:, None], y


@dataclass
class RescaledSolution:
    params: VortexParams
    eigen: EigenPair
    eps: float
    moll: MollifierProfile
    g: np.ndarray
    y: complex
    iterations: int
    update_norms: list
    ball: float

    @property
    def z_eps(self):
        return self.eigen.z + self.eps * self.y

    @property
    def lam_eps(self):
        return -1j * self.params.n * self.z_eps

    @property
    def h_eps(self):
        """``h_j + eps g_j`` on the nodes of each collar."""
        return self.eigen.h[:, None] + self.eps * self.g

    @property
    def final_update_norm(self):
        return self.update_norms[-1] if self.update_norms else 0.0

    def norm(self):
        return math.hypot(self.moll.inner_norm(self.g), abs(self.y))

    def contraction_factors(self):
        u = np.asarray(self.update_norms, dtype=float)
        u = u[u > 0]
        return u[1:] / u[:-1]

    def g_at(self, alpha):
        """Interpolate both profiles to arbitrary points of ``I``; shape ``(2, len)``."""
        L = interpolation_matrix(self.moll.nodes, alpha)
        return self.g @ L.T

    def h_eps_at(self, r):
        """``h_eps`` at radii inside the collars (zero elsewhere)."""
        p = self.params
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros(r.shape, dtype=complex)
        for j in (0, 1):
            mask = np.abs(r - p.radii[j]) < self.eps
            if np.any(mask):
                alpha = (r[mask] - p.radii[j]) / self.eps
                out[mask] = self.eigen.h[j] + self.eps * self.g_at(alpha)[j]
        return out


def _step(ops, ep, Bh, g, y, feedback):
    dz = ops.D - ep.z
    rhs = -Bh
    if feedback:
        rhs = rhs + ops.eps * (y * g - ops.apply_B(g))
    f = rhs / dz[:, None]
    y_new, gamma = _split_in_basis(ops.apply_C(f), ep.h, ep.z2)
    return f + gamma * np.conj(ep.h)[:, None], y_new


def fixed_point(p, ep, eps, tol=1e-12, max_iter=200, moll=None, ops=None, ball=None,
                feedback=True, stall_limit=5):
    """Banach iteration for the regularized eigenpair, started from ``(0, 0)``.

    With ``feedback=False`` the ``eps (y - B) g`` term is dropped; the map is
    then constant and one application yields the explicit solution.

    Raises :class:`ContractionFailure` if the iterate leaves the ball of
    radius ``ball`` (default: twice the explicit solution's norm), if
    ``max_iter`` is reached, or if the update norm fails to decrease
    ``stall_limit`` times in a row.  Raises :class:`InstabilityLost` if
    ``Im z_eps <= 0``.
    """
    if tol <= 0:
        raise DomainError("tolerance must be positive")
    if ops is None:
        ops = build_operators(p, eps, moll)
    elif ops.eps != eps or ops.params != p:
        raise DomainError("operators were built for different parameters")
    moll = ops.moll
    M = ops.M
    h_pair = np.repeat(ep.h[:, None], M, axis=1)
    Bh = ops.apply_B(h_pair)
    zero = np.zeros((2, M), dtype=complex)

    g0, y0 = _step(ops, ep, Bh, zero, 0j, feedback=False)
    if not feedback:
        sol = RescaledSolution(p, ep, eps, moll, g0, complex(y0), 1, [0.0],
                               ball if ball is not None else math.inf)
        return _finish(sol)

    norm0 = math.hypot(moll.inner_norm(g0), abs(y0))
    if ball is None:
        ball = 2.0 * norm0
    if not ball > norm0:
        raise DomainError(f"ball radius {ball} must exceed the explicit solution norm {norm0}")

    g, y = zero, 0j
    norms = []
    stalls = 0
    for it in range(1, max_iter + 1):
        g_new, y_new = _step(ops, ep, Bh, g, y, feedback=True)
        upd = math.hypot(moll.inner_norm(g_new - g), abs(y_new - y))
        if norms and upd >= norms[-1]:
            stalls += 1
        else:
            stalls = 0
        norms.append(upd)
        g, y = g_new, y_new
        size = math.hypot(moll.inner_norm(g), abs(y))
        if size > ball:
            raise ContractionFailure(
                f"iterate left the ball of radius {ball:.4g} (norm {size:.4g}) at eps={eps}", norms
            )
        if stalls >= stall_limit:
            raise ContractionFailure(
                f"update norm did not decrease for {stall_limit} iterations at eps={eps}", norms
            )
        log.debug("fixed point it=%d update=%.3e", it, upd)
        if upd <= tol:
            sol = RescaledSolution(p, ep, eps, moll, g, complex(y), it, norms, ball)
            return _finish(sol)
    raise ContractionFailure(
        f"no convergence to tol={tol} in {max_iter} iterations (last update {norms[-1]:.3e})",
        norms,
    )


def _finish(sol):
    if not sol.z_eps.imag > 0:
        raise InstabilityLost(f"Im z_eps = {sol.z_eps.imag:.6g} <= 0 at eps={sol.eps}")
    return sol


def explicit_solution(p, ep, eps, moll=None, ops=None):
    """Solution of the map with the ``eps`` feedback removed (the ``eps -> 0`` profile)."""
    return fixed_point(p, ep, eps, moll=moll, ops=ops, feedback=False)


def defect(sol, ops):
    """Rescaled defect ``(A - z) g + (B - y) h + eps (B - y) g`` on the nodes."""
    p, ep, moll = sol.params, sol.eigen, sol.moll
    h_pair = np.repeat(ep.h[:, None], moll.M, axis=1).astype(complex)
    g = sol.g
    return (
        apply_A(g, p, moll) - ep.z * g
        + ops.apply_B(h_pair) - sol.y * h_pair
        + sol.eps * (ops.apply_B(g) - sol.y * g)
    )
