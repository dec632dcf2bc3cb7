"""End-to-end acceptance checks, one test per criterion.

Every test records a single PASS/FAIL line (value, tolerance, runtime and
limit); the lines are printed in the terminal summary of the run.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate

from unstable_vortex import cli
from unstable_vortex.bundle import array_digest
from unstable_vortex.kernel import kn_closed, kn_quadrature
from unstable_vortex.regularization import (
    RegularizedProfiles,
    apply_A,
    apply_C,
    build_mollifier,
    build_operators,
    fixed_point,
)
from unstable_vortex.selfsimilar import SelfSimilarParams, assemble_Lb, continue_in_b, radial_grid
from unstable_vortex.verifier import assemble_eigen_field, evolve_linear, linear_operator, rayleigh_residual
from unstable_vortex.vortex import VortexParams, build_vortex, discriminant_p, eigenpair, matrix_a

RESULTS = []
S2 = math.sqrt(2.0)


def record(number, name, ok, detail, elapsed, limit):
    ok = bool(ok) and elapsed < limit
    RESULTS.append(
        f"criterion {number} {name}: {'PASS' if ok else 'FAIL'}  {detail}  "
        f"[{elapsed:.3g} s, limit {limit:g} s]"
    )
    assert ok, RESULTS[-1]


def best_time(fn, repeat=20):
    best = math.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return out, best


def test_criterion_1_discriminant():
    value, elapsed = best_time(lambda: discriminant_p(2, 0.5))
    err = abs(value - (-1.0 / 64.0))
    record(1, "discriminant p_2(1/2) = -1/64", err <= 1e-14,
           f"p_2(0.5)={value!r} err={err:.1e} tol=1e-14", elapsed, 1e-3)


def test_criterion_2_eigenvalue():
    p = VortexParams(2, 0.5, S2)
    target = 0.125 + 0.125j
    ep, t_quad = best_time(lambda: eigenpair(p))
    ev, t_eig = best_time(lambda: np.linalg.eigvals(matrix_a(p).A))
    dense = ev[np.argmax(ev.imag)]
    e1, e2 = abs(ep.z - target), abs(dense - target)
    record(2, "eigenvalue z = 0.125+0.125i", e1 <= 1e-12 and e2 <= 1e-12,
           f"quadratic err={e1:.1e} dense err={e2:.1e} tol=1e-12", max(t_quad, t_eig), 1e-3)


def test_criterion_3_kernel_oracle():
    t = time.perf_counter()
    rhos = np.geomspace(0.05, 20.0, 200)
    rhos = rhos[np.abs(rhos - 1.0) >= 0.05]
    worst = max(abs(kn_closed(n, r) - kn_quadrature(n, r)) for n in range(1, 9) for r in rhos)
    elapsed = time.perf_counter() - t
    record(3, "kernel closed form vs quadrature", worst <= 1e-8,
           f"max err={worst:.1e} over {8 * rhos.size} points tol=1e-8", elapsed, 10.0)


def test_criterion_4_fixed_point():
    t = time.perf_counter()
    p = VortexParams(2, 0.5, S2)
    ep = eigenpair(p)
    moll = build_mollifier(64)
    sol = fixed_point(p, ep, 0.01, moll=moll)
    rho = sol.contraction_factors()
    res = rayleigh_residual(sol, RegularizedProfiles(p, 0.01, moll), fine_M=4 * 64)
    fine = fixed_point(p, ep, 0.01, moll=build_mollifier(128))
    move = abs(fine.z_eps - sol.z_eps)
    elapsed = time.perf_counter() - t
    geometric = rho.size >= 3 and np.all(rho < 1)
    ok = geometric and sol.z_eps.imag > 0 and res.sup_norm <= 1e-6 and move <= 1e-8
    record(4, "fixed-point regularization", ok,
           f"iters={sol.iterations} max ratio={rho.max():.3f} Im z_eps={sol.z_eps.imag:.6g} "
           f"residual sup={res.sup_norm:.1e} (tol 1e-6) M=128 move={move:.1e} (tol 1e-8)",
           elapsed, 30.0)


def test_criterion_5_eps_scaling():
    t = time.perf_counter()
    p = VortexParams(2, 0.5, S2)
    ep = eigenpair(p)
    moll = build_mollifier(64)
    sols = [fixed_point(p, ep, e, moll=moll) for e in (0.02, 0.01, 0.005)]

    def dist(a, b):
        return math.hypot(moll.inner_norm(a.g - b.g), abs(a.y - b.y))

    d = [dist(sols[0], sols[1]), dist(sols[1], sols[2])]
    ratio = d[1] / d[0]
    elapsed = time.perf_counter() - t
    record(5, "eps-scaling per halving", 0.3 <= ratio <= 0.7,
           f"|s(.02)-s(.01)|={d[0]:.3e} |s(.01)-s(.005)|={d[1]:.3e} ratio={ratio:.3f} "
           f"window [0.3, 0.7]", elapsed, 120.0)


def test_criterion_6_growth_law():
    t = time.perf_counter()
    p = VortexParams(2, 0.5, S2)
    moll = build_mollifier(64)
    sol = fixed_point(p, eigenpair(p), 0.01, moll=moll)
    prof = RegularizedProfiles(p, 0.01, moll)
    field = assemble_eigen_field(sol, prof)
    fit = evolve_linear(field, prof, 20.0, expected_rate=sol.lam_eps.real)
    elapsed = time.perf_counter() - t
    record(6, "linear growth law", not fit.degenerate and fit.relative_error <= 0.02,
           f"fitted={fit.fitted_rate:.6f} expected Re lam_eps={fit.expected_rate:.6f} "
           f"rel err={fit.relative_error:.1e} tol=0.02", elapsed, 120.0)


def test_criterion_7_selfsimilar_continuation():
    t = time.perf_counter()
    p = VortexParams(2, 0.5, S2)
    ep = eigenpair(p)
    prof = RegularizedProfiles(p, 0.01, build_mollifier(64))
    b_list = [0.0, 0.0025, 0.005, 0.0075, 0.01]
    rows = continue_in_b(b_list, prof, ep.lam, a=0.5, grid_M=512)
    elapsed = time.perf_counter() - t
    worst = max(abs(r.lam - ep.lam) / r.b for r in rows[1:])
    margin = min(r.margin for r in rows[1:])
    ok = worst <= 10.0 and margin > 0
    record(7, "self-similar continuation a=0.5 M=512", ok,
           f"max |lam_b-lam0|/b={worst:.2f} (tol 10) min Re lam_b-3b={margin:.3f} (> 0) "
           f"lam_0.01={rows[-1].lam:.6g}", elapsed, 300.0)


def _linearity(op, shape, rng, pairs=100):
    worst = 0.0
    for _ in range(pairs):
        u = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        v = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
        lhs = op(a * u + b * v)
        rhs = a * op(u) + b * op(v)
        worst = max(worst, float(np.abs(lhs - rhs).max() / (1 + np.abs(lhs).max())))
    return worst


def _build_numerics(path):
    assert cli.main(["build", "--out", str(path)]) == 0
    data = cli.bundle_io.load_bundle(path).to_dict()
    data["provenance"].pop("created")
    return data


def test_criterion_8_property_suites(tmp_path, capsys):
    t = time.perf_counter()
    rng = np.random.default_rng(20240601)
    eps = 0.01
    p, pw = build_vortex(2, 0.5, S2)
    moll = build_mollifier(128)
    ops = build_operators(p, eps, moll)
    prof = RegularizedProfiles(p, eps, moll)
    grid = radial_grid(p, eps, 256, b=0.005)
    Lb = assemble_Lb(SelfSimilarParams(0.5, 0.005), prof, grid=grid)
    L0 = linear_operator(grid, 2, prof)
    lin = max(
        _linearity(ops.apply_B, (2, moll.M), rng),
        _linearity(lambda g: apply_A(g, p, moll), (2, moll.M), rng),
        _linearity(lambda g: apply_C(g, p, moll), (2, moll.M), rng),
        _linearity(lambda w: L0 @ w, grid.size, rng),
        _linearity(lambda w: Lb.entries @ w, grid.size, rng),
    )

    mean_pw = abs(p.mean_vorticity())
    edges = [0.0, p.r1 - eps, p.r1 + eps, p.r2 - eps, p.r2 + eps]
    mean_reg = abs(2 * math.pi * sum(
        integrate.quad(lambda r: prof.w_bar(r) * r, lo, hi, epsabs=1e-14)[0]
        for lo, hi in zip(edges[:-1], edges[1:])
    ))

    minus = assemble_Lb(SelfSimilarParams(0.5, 0.005), prof, grid=grid, n=-2)
    ev_p = np.sort_complex(np.conj(np.linalg.eigvals(Lb.entries)))
    ev_m = np.linalg.eigvals(minus.entries)
    conj_err = max(float(np.min(np.abs(ev_m - z))) for z in ev_p)
    conj_exact = np.array_equal(minus.entries, np.conj(Lb.entries))

    quad = lambda f: integrate.quad(f, -1, 1, points=[0.0], epsabs=1e-14, limit=200)[0]
    mass = max(
        abs(moll.integrate(moll.eta_bar_nodes) - 1),
        abs(quad(lambda a: float(moll.eta_bar(a))) - 1),
        *(abs(moll.integrate(z)) for z in moll.zeta_nodes(p, eps)),
        *(abs(quad(lambda a: float(moll.zeta(a, rj, eps)))) for rj in p.radii),
    )

    first = _build_numerics(tmp_path / "one.json")
    second = _build_numerics(tmp_path / "two.json")
    capsys.readouterr()
    same = first == second and first["solution"]["digest"] == second["solution"]["digest"]
    elapsed = time.perf_counter() - t
    ok = (lin <= 1e-12 and mean_pw <= 1e-12 and mean_reg <= 1e-12 and conj_exact
          and conj_err <= 1e-9 and mass <= 1e-12 and same)
    record(8, "property suites", ok,
           f"linearity={lin:.1e} (tol 1e-12) mean={max(mean_pw, mean_reg):.1e} "
           f"conjugate spectra={conj_err:.1e} mollifier mass={mass:.1e} (tol 1e-12) "
           f"build deterministic={same}", elapsed, 600.0)
