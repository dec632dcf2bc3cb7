import math

import mpmath
import numpy as np
import pytest
from scipy import integrate

from unstable_vortex.errors import ContractionFailure, DomainError
from unstable_vortex.regularization import (
    RegularizedProfiles,
    apply_A,
    apply_B,
    apply_C,
    build_mollifier,
    build_operators,
    defect,
    explicit_solution,
    fixed_point,
    regularized_profiles,
    solve_linearized,
)
from unstable_vortex.vortex import build_vortex, eigenpair, matrix_a

from conftest import EPS


def rand_pair(rng, M):
    return rng.normal(size=(2, M)) + 1j * rng.normal(size=(2, M))


# ---------------------------------------------------------------- mollifier

@pytest.mark.parametrize("M", [16, 32, 64, 128])
def test_mollifier_continuum_identities(M, params):
    m = build_mollifier(M)
    quad = lambda f: integrate.quad(f, -1, 1, points=[0.0], epsabs=1e-14, limit=200)[0]
    assert abs(quad(lambda a: float(m.eta(a))) - 1) <= 1e-12
    assert abs(quad(lambda a: float(m.eta_bar(a))) - 1) <= 1e-12
    for rj in params.radii:
        assert abs(quad(lambda a: float(m.zeta(a, rj, EPS)))) <= 1e-12
    assert float(m.sigma(1.0)) == pytest.approx(1.0, abs=1e-14)


def test_mollifier_node_sums_converge(params):
    # Gauss-Legendre sums converge super-algebraically for the C-infinity bump
    errs = []
    for M in (32, 64, 128):
        m = build_mollifier(M)
        errs.append(abs(m.integrate(m.eta_bar_nodes) - 1))
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] <= 1e-9
    m = build_mollifier(128)
    assert abs(m.integrate(m.eta_nodes) - 1) <= 1e-12
    assert abs(m.integrate(m.eta_bar_nodes) - 1) <= 1e-12
    for z in m.zeta_nodes(params, EPS):
        assert abs(m.integrate(z)) <= 1e-12


def test_mollifier_shape(moll):
    e = moll.eta_nodes
    assert np.all(e >= 0)
    assert np.allclose(e, e[::-1], rtol=0, atol=1e-15)
    assert moll.eta(1.0) == 0 and moll.eta(-1.0) == 0
    assert np.all(np.diff(moll.sigma_nodes) >= -1e-15)


def test_mollifier_too_few_nodes():
    with pytest.raises(DomainError):
        build_mollifier(15)


# ---------------------------------------------------------------- profiles

def test_profile_outside_collar(params, prof):
    assert prof.w_bar(params.r1 + 2 * EPS) == -1.0
    assert prof.w_bar(params.r1 - 2 * EPS) == params.c
    assert prof.w_bar(params.r2 + 2 * EPS) == 0.0
    assert prof.dw_bar(params.r1 + 2 * EPS) == 0.0
    # the mollified velocity joins the piecewise one at the collar edges
    piecewise = build_vortex(2, 0.5)[1]
    for rj in params.radii:
        for side in (-1, 1):
            r = rj + side * EPS * (1 - 1e-9)
            assert prof.angular_velocity(r) == pytest.approx(piecewise.angular_velocity(r), abs=1e-9)


def test_collar_density_matches_numerical_derivative(params, moll, prof):
    """eps d(w_bar)/dr against extended-precision differentiation of r * v_theta."""
    mpmath.mp.dps = 30
    bump = lambda a: mpmath.exp(-1 / (1 - a * a)) if abs(a) < 1 else mpmath.mpf(0)
    norm = 1 / mpmath.quad(bump, [-1, 0, 1])
    sigma = lambda a: norm * mpmath.quad(bump, [-1, a])

    def r_v(r, j):
        rj = mpmath.mpf(params.radii[j])
        d0 = mpmath.mpf(params.c) / 2 if j == 0 else 0
        return r * r * d0 + params.jumps[j] / 2 * (r * r - rj * rj) * (sigma((r - rj) / EPS) - j)

    worst = 0.0
    for j in (0, 1):
        for a in moll.nodes[::8]:
            r = mpmath.mpf(params.radii[j]) + EPS * mpmath.mpf(a)
            d1 = mpmath.diff(lambda x: r_v(x, j), r, 1)
            d2 = mpmath.diff(lambda x: r_v(x, j), r, 2)
            dw = float(EPS * (d2 / r - d1 / r**2))
            worst = max(worst, abs(dw - params.jumps[j] * float(prof.collar_density(j, a))))
            worst = max(worst, abs(float(d1 / r) - prof.w_bar(float(r))))
    assert worst <= 1e-10


def test_profile_total_mean_zero(params, prof):
    total = 0.0
    edges = [0.0, params.r1 - EPS, params.r1 + EPS, params.r2 - EPS, params.r2 + EPS]
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += integrate.quad(lambda r: prof.w_bar(r) * r, lo, hi, epsabs=1e-14)[0]
    assert abs(2 * math.pi * total) <= 1e-12


def test_profile_eps_bound(params, moll):
    with pytest.raises(DomainError, match="min"):
        regularized_profiles(params, params.eps_max * 1.01, moll)
    with pytest.raises(DomainError):
        regularized_profiles(params, 0.0, moll)


# ---------------------------------------------------------------- A, B, C

def test_apply_A_constants(params, ep, moll):
    A = matrix_a(params).A
    m = build_mollifier(128)
    col = apply_A(np.array([1.0, 0.0]), params, m)
    assert np.allclose(col, A[:, :1], atol=1e-12)
    Ah = apply_A(ep.h, params, m)
    assert np.abs(Ah - ep.z * ep.h[:, None]).max() <= 1e-12
    # at the default node count the identity holds to the quadrature error of eta_bar
    assert np.abs(apply_A(ep.h, params, moll) - ep.z * ep.h[:, None]).max() <= 1e-9


def test_apply_A_nonlocal_vanishes(params, moll):
    g = np.stack([moll.nodes, moll.nodes**3]).astype(complex)  # odd against even eta_bar
    out = apply_A(g, params, moll)
    assert np.allclose(out, np.array([0.5 * params.c, 0.0])[:, None] * g, atol=1e-14)


def test_apply_C_constants(params, moll):
    m = build_mollifier(128)
    C = matrix_a(params).C
    g = np.array([0.3 - 1j, 2.0 + 0.5j])
    assert np.allclose(apply_C(g, params, m), C @ g, atol=1e-12)
    assert np.allclose(apply_C(np.zeros((2, 128)), params, m), 0)
    D = matrix_a(params).D
    assert np.allclose(apply_A(g, params, m) - apply_C(g, params, m)[:, None],
                       np.diag(D)[:, None] * g[:, None], atol=1e-15)


def test_node_mismatch(params, moll, ops):
    with pytest.raises(DomainError):
        apply_A(np.zeros((2, 10)), params, moll)
    with pytest.raises(DomainError):
        apply_B(np.zeros((2, 32)), ops, build_mollifier(32))


def test_apply_B_zero(ops, moll):
    assert np.all(apply_B(np.zeros((2, moll.M)), ops, moll) == 0)


def test_apply_B_norm_bound(ops, moll, rng):
    CB = ops.b_norm_bound()
    for _ in range(100):
        g = rand_pair(rng, moll.M)
        assert moll.inner_norm(ops.apply_B(g)) <= CB * moll.inner_norm(g)


def test_operator_bounds(ops):
    bd = ops.bounds()
    assert bd["keps"].max() <= 0.5
    assert np.all(bd["J"] <= bd["J_bound"])


def test_split_quadrature_matters(params):
    coarse = build_mollifier(16)
    g = np.ones((2, 16))
    split = build_operators(params, EPS, coarse).apply_B(g)
    plain = build_operators(params, EPS, coarse, split=False).apply_B(g)
    assert np.abs(split - plain).max() > 1e-6
    fine = build_mollifier(128)
    g = np.ones((2, 128))
    a = build_operators(params, EPS, fine).apply_B(g)
    b = build_operators(params, EPS, fine, sub_nodes=256).apply_B(g)
    assert np.abs(a - b).max() < 1e-10


def test_linearity(params, ops, moll, rng):
    worst = 0.0
    for _ in range(100):
        u, v = rand_pair(rng, moll.M), rand_pair(rng, moll.M)
        a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
        for op in (lambda g: ops.apply_B(g), lambda g: apply_A(g, params, moll),
                   lambda g: apply_C(g, params, moll)):
            lhs = op(a * u + b * v)
            rhs = a * op(u) + b * op(v)
            worst = max(worst, np.abs(lhs - rhs).max() / (1 + np.abs(lhs).max()))
    assert worst <= 1e-12


# ---------------------------------------------------------------- linear solve

def test_solve_linearized_zero(params, ep, moll):
    g, y = solve_linearized(np.zeros((2, moll.M)), ep, params, moll)
    assert np.all(g == 0) and y == 0


def _mu_residual(f, g, y, ep, params, moll):
    mu = (g - f)[:, 0]
    A = matrix_a(params).A
    return np.abs((A - ep.z * np.eye(2)) @ mu - (y * ep.h - apply_C(f, params, moll))).max()


def test_solve_linearized_constant_h(params, ep, moll):
    f = np.repeat(ep.h[:, None], moll.M, axis=1)
    g, y = solve_linearized(f, ep, params, moll)
    assert np.ptp(np.abs(g - f), axis=1).max() == 0  # mu is a constant pair
    assert _mu_residual(f, g, y, ep, params, moll) <= 1e-12


def test_solve_linearized_random(params, ep, moll, rng):
    for _ in range(20):
        f = rand_pair(rng, moll.M)
        g, y = solve_linearized(f, ep, params, moll)
        assert _mu_residual(f, g, y, ep, params, moll) <= 1e-12


# ---------------------------------------------------------------- fixed point

def test_explicit_mode_one_step(params, ep, ops):
    s = explicit_solution(params, ep, EPS, ops=ops)
    assert s.iterations == 1


def test_fixed_point_default(sol, ep):
    assert sol.z_eps.imag > 0
    assert abs(sol.z_eps.imag - 0.125) <= EPS * sol.ball
    assert sol.final_update_norm <= 1e-12
    rho = sol.contraction_factors()
    assert np.all(rho < 1)
    assert sol.norm() <= sol.ball
    assert sol.h_eps.shape == (2, sol.moll.M)


def test_fixed_point_defect(sol, ops, moll):
    assert moll.inner_norm(defect(sol, ops)) <= 10 * 1e-12


def test_contraction_rate_shrinks_with_eps(params, ep, moll):
    rates = []
    for eps in (0.02, 0.01, 0.005):
        s = fixed_point(params, ep, eps, moll=moll)
        rates.append(np.median(s.contraction_factors()))
    assert rates[0] > rates[1] > rates[2]
    assert 0.3 <= rates[1] / rates[0] <= 0.7
    assert 0.3 <= rates[2] / rates[1] <= 0.7


def test_contraction_failure_reports_norms(params, ep, ops):
    with pytest.raises(ContractionFailure) as info:
        fixed_point(params, ep, EPS, ops=ops, max_iter=2)
    assert len(info.value.update_norms) == 2


def test_ball_must_contain_explicit_solution(params, ep, ops):
    with pytest.raises(DomainError):
        fixed_point(params, ep, EPS, ops=ops, ball=1e-6)


def test_bad_tolerance(params, ep, ops):
    with pytest.raises(DomainError):
        fixed_point(params, ep, EPS, ops=ops, tol=0)


def test_operators_checked_against_eps(params, ep, ops):
    with pytest.raises(DomainError):
        fixed_point(params, ep, 0.02, ops=ops)


def _distance(a, b):
    return math.hypot(a.moll.inner_norm(a.g - b.g), abs(a.y - b.y))


def test_eps_scaling(params, ep, moll):
    sols = {e: fixed_point(params, ep, e, moll=moll) for e in (0.02, 0.01, 0.005)}
    zero = {e: explicit_solution(params, ep, e, moll=moll) for e in sols}
    ratios = [_distance(sols[e / 2], zero[e / 2]) / _distance(sols[e], zero[e]) for e in (0.02, 0.01)]
    for r in ratios:
        assert 0.3 <= r <= 0.7


def test_refinement_moves_z_eps_little(params, ep, sol):
    fine = fixed_point(params, ep, EPS, moll=build_mollifier(128))
    assert abs(fine.z_eps - sol.z_eps) <= 1e-8


def test_other_modes_converge():
    p, _ = build_vortex(3, 0.8)
    e = eigenpair(p)
    s = fixed_point(p, e, 0.005)
    assert s.z_eps.imag > 0 and abs(s.z_eps - e.z) < 0.01


def test_h_eps_at_interpolates_nodes(sol, params):
    r = params.r1 + EPS * sol.moll.nodes
    assert np.allclose(sol.h_eps_at(r), sol.h_eps[0], atol=1e-13)
    assert sol.h_eps_at(params.r1 + 2 * EPS)[0] == 0
