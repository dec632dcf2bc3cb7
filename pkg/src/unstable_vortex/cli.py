"""Command-line interface: ``scan``, ``build``, ``verify`` and ``selfsim``.

Exit codes: 0 success, 2 not found or criterion unsatisfied, 3 contraction
failure, 4 degenerate growth fit, 5 branch loss, 64 usage error, 65 corrupt
bundle.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import bundle as bundle_io
from .errors import (
    BranchLost,
    BundleError,
    ContractionFailure,
    DomainError,
    InstabilityLost,
    InstabilityNotFound,
    NumericalError,
)
from .regularization import RegularizedProfiles, build_mollifier, fixed_point, regularized_profiles
from .selfsimilar import SelfSimilarParams, continue_in_b
from .verifier import assemble_eigen_field, evolve_linear, rayleigh_residual
from .vortex import DEFAULT_R2, VortexParams, discriminant_p, eigenpair, find_unstable_xi

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNSATISFIED = 2
EXIT_CONTRACTION = 3
EXIT_DEGENERATE = 4
EXIT_BRANCH = 5
EXIT_USAGE = 64
EXIT_DATA = 65

BUILD_GRID_M = 64
SELFSIM_GRID_M = 512


@dataclass
class RunConfig:
    n: int = 2
    xi: float = 0.5
    r2: float = DEFAULT_R2
    eps: float = 0.01
    grid_m: int | None = None
    tol: float = 1e-12
    max_iter: int = 200
    b_list: tuple = (0.0, 0.005, 0.01)
    a: float = 0.5
    p: float = 3.0
    rmax: float | None = None
    dt: float | None = None
    t_final: float = 20.0
    out_path: str | None = None
    format: str = "text"

    def validate(self):
        if self.format not in ("text", "json", "csv"):
            raise DomainError(f"unknown format {self.format!r}")
        if self.grid_m is not None and self.grid_m < 16:
            raise DomainError("grid_m must be at least 16")
        if self.tol <= 0 or self.max_iter < 1:
            raise DomainError("tol must be positive and max_iter at least 1")
        if self.t_final <= 0 or (self.dt is not None and self.dt <= 0):
            raise DomainError("t_final and dt must be positive")
        SelfSimilarParams(self.a, 0.0, self.p)
        return self

    def numerics(self):
        """Fields that determine the numerical result (hashed into provenance)."""
        d = asdict(self)
        d.pop("out_path")
        d.pop("format")
        d["b_list"] = list(d["b_list"])
        return d


_CASTS = {
    "n": int, "xi": float, "r2": float, "eps": float, "grid_m": int, "tol": float,
    "max_iter": int, "a": float, "p": float, "rmax": float, "dt": float,
    "t_final": float, "out_path": str, "format": str,
}


def parse_b_list(text):
    try:
        return tuple(float(v) for v in str(text).replace(" ", "").split(",") if v)
    except ValueError as exc:
        raise DomainError(f"cannot parse b list {text!r}") from exc


def read_config_file(path):
    """Flat ``key = value`` file; ``#`` starts a comment, keys may use dashes."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path) as fh:
            parser.read_string("[run]\n" + fh.read())
    except (OSError, configparser.Error) as exc:
        raise DomainError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for key, raw in parser["run"].items():
        key = key.replace("-", "_")
        if key == "out":
            key = "out_path"
        if key == "b_list":
            out[key] = parse_b_list(raw)
        elif key in _CASTS:
            try:
                out[key] = _CASTS[key](raw)
            except ValueError as exc:
                raise DomainError(f"bad value for {key}: {raw!r}") from exc
        else:
            raise DomainError(f"unknown config key {key!r}")
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="unstable-vortex", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    for flag, kind, text in [
        ("--n", int, "angular mode (default 2)"),
        ("--xi", float, "radius ratio (r1/r2)**2 (default 0.5)"),
        ("--r2", float, "outer radius (default sqrt 2)"),
        ("--eps", float, "collar half-width (default 0.01)"),
        ("--grid-m", int, "mollifier nodes for build (64), radial nodes for selfsim (512)"),
        ("--tol", float, "fixed-point update tolerance (default 1e-12)"),
        ("--max-iter", int, "fixed-point iteration cap (default 200)"),
        ("--b-list", str, "comma-separated b values starting at 0 (default 0,0.005,0.01)"),
        ("--a", float, "self-similar exponent (default 0.5)"),
        ("--p", float, "integrability exponent, a*p < 2 (default 3)"),
        ("--rmax", float, "outer edge of the radial grid (default r2 + 4 eps)"),
        ("--dt", float, "time step for verify (default from the operator bound)"),
        ("--t-final", float, "evolution time for verify (default 20)"),
        ("--out", str, "output file (build default vortex_bundle.json)"),
    ]:
        common.add_argument(flag, type=kind, default=None, help=text)
    common.add_argument("--format", choices=("text", "json", "csv"), default=None)
    common.add_argument("--config", default=None, help="flat key=value file; flags override")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    scan = sub.add_parser("scan", parents=[common], help="locate the unstable xi-interval")
    scan.add_argument("--resolution", type=int, default=4000, help="scan points on (0, 1)")
    sub.add_parser("build", parents=[common], help="regularize and write a bundle")
    verify = sub.add_parser("verify", parents=[common], help="fit the linear growth rate")
    verify.add_argument("bundle")
    verify.add_argument("--zero-field", action="store_true", help=argparse.SUPPRESS)
    selfsim = sub.add_parser("selfsim", parents=[common], help="continue lam_b in b")
    selfsim.add_argument("bundle")
    return parser


def make_config(args):
    values = read_config_file(args.config) if args.config else {}
    for f in fields(RunConfig):
        flag = "out" if f.name == "out_path" else f.name
        v = getattr(args, flag, None)
        if v is None:
            continue
        values[f.name] = parse_b_list(v) if f.name == "b_list" else v
    return RunConfig(**values).validate()


def _fmt(x):
    return f"{x:.17g}"


def _emit(cfg, text, payload, rows=None, header=None):
    """Write text, JSON (``payload``) or CSV (``rows``) to stdout or ``out_path``."""
    if cfg.format == "json":
        out = json.dumps(payload, indent=1) + "\n"
    elif cfg.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
        out = buf.getvalue()
    else:
        out = text
    if cfg.out_path:
        with open(cfg.out_path, "w") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)


def _cz(z):
    return {"re": z.real, "im": z.imag}


def cmd_scan(cfg, resolution=4000):
    n = cfg.n
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    try:
        win = find_unstable_xi(n, resolution=resolution)
        xs, ps, interval = win.scan_xi, win.scan_p, (win.lo, win.hi)
    except InstabilityNotFound:
        xs = np.linspace(0.0, 1.0, resolution + 1)[1:-1]
        ps = np.array([discriminant_p(n, x) for x in xs])
        interval = None
    rows = [(float(x), float(v)) for x, v in zip(xs, ps)]
    lines = [f"n = {n}: p_n(xi) on {len(rows)} points"]
    step = max(1, len(rows) // 20)
    lines += [f"  xi={x:.6f}  p={v: .6e}" for x, v in rows[::step]]
    lines.append(
        f"unstable interval: ({interval[0]:.10f}, {interval[1]:.10f})"
        if interval else "unstable interval: none"
    )
    payload = {
        "n": n,
        "interval": list(interval) if interval else None,
        "table": [{"xi": x, "p": v} for x, v in rows],
    }
    _emit(cfg, "\n".join(lines) + "\n", payload, rows, ("xi", "p_n"))
    return EXIT_OK if interval else EXIT_UNSATISFIED


def build_bundle(cfg):
    """Run eigenpair, fixed point and residual check for ``cfg``."""
    params = VortexParams(cfg.n, cfg.xi, cfg.r2)
    ep = eigenpair(params)
    M = cfg.grid_m or BUILD_GRID_M
    moll = build_mollifier(M)
    prof = regularized_profiles(params, cfg.eps, moll)
    sol = fixed_point(params, ep, cfg.eps, tol=cfg.tol, max_iter=cfg.max_iter, moll=moll)
    res = rayleigh_residual(sol, prof)
    return bundle_io.VortexBundle(sol, res.sup_norm, res.l2_norm, cfg.numerics())


def cmd_build(cfg):
    b = build_bundle(cfg)
    path = cfg.out_path or "vortex_bundle.json"
    bundle_io.save_bundle(b, path)
    sol = b.solution
    text = (
        f"z        = {sol.eigen.z:.12g}\n"
        f"z_eps    = {sol.z_eps:.12g}\n"
        f"lam_eps  = {sol.lam_eps:.12g}\n"
        f"iterations = {sol.iterations}\n"
        f"residual sup = {b.residual_sup:.3e}  l2 = {b.residual_l2:.3e}\n"
        f"bundle written to {path}\n"
    )
    if cfg.format == "text":
        sys.stdout.write(text)
    else:
        sys.stdout.write(json.dumps({
            "z": _cz(sol.eigen.z), "z_eps": _cz(sol.z_eps), "lam_eps": _cz(sol.lam_eps),
            "iterations": sol.iterations, "residual_sup": b.residual_sup,
            "residual_l2": b.residual_l2, "bundle": str(path),
        }, indent=1) + "\n")
    return EXIT_OK


def cmd_verify(cfg, bundle_path, zero_field=False):
    b = bundle_io.load_bundle(bundle_path)
    sol = b.solution
    prof = RegularizedProfiles(sol.params, sol.eps, sol.moll)
    field0 = assemble_eigen_field(sol, prof)
    if zero_field:
        field0 = field0.scaled(0.0)
    fit = evolve_linear(field0, prof, cfg.t_final, dt=cfg.dt, expected_rate=sol.lam_eps.real)
    payload = {
        "fitted_rate": fit.fitted_rate, "expected_rate": fit.expected_rate,
        "relative_error": fit.relative_error, "window": list(fit.window),
        "degenerate": fit.degenerate, "reason": fit.reason, "dt": fit.dt,
    }
    text = (
        f"fitted rate   = {fit.fitted_rate:.10g}\n"
        f"expected rate = {fit.expected_rate:.10g}\n"
        f"relative error = {fit.relative_error:.3e}\n"
        + (f"DEGENERATE FIT: {fit.reason}\n" if fit.degenerate else "")
    )
    rows = [(float(t), float(v)) for t, v in zip(fit.times, fit.log_norms)]
    _emit(cfg, text, payload, rows, ("t", "log_norm"))
    if fit.degenerate:
        return EXIT_DEGENERATE
    return EXIT_OK if fit.relative_error <= 0.05 else EXIT_UNSATISFIED


def _selfsim_output(cfg, rows):
    table = [(r.b, r.lam.real, r.lam.imag, r.margin, r.flag) for r in rows]
    lines = ["b            Re lam_b        Im lam_b        Re lam_b - 3b   flag"]
    lines += [f"{b:<12.6g} {re: .8e} {im: .8e} {m: .8e} {fl}" for b, re, im, m, fl in table]
    payload = [
        {"b": b, "lam": {"re": re, "im": im}, "margin": m, "flag": fl}
        for b, re, im, m, fl in table
    ]
    _emit(cfg, "\n".join(lines) + "\n", payload, table, ("b", "re_lam", "im_lam", "margin", "flag"))


def cmd_selfsim(cfg, bundle_path):
    b = bundle_io.load_bundle(bundle_path)
    sol = b.solution
    prof = RegularizedProfiles(sol.params, sol.eps, sol.moll)
    try:
        rows = continue_in_b(
            cfg.b_list, prof, sol.eigen.lam, a=cfg.a, p=cfg.p,
            grid_M=cfg.grid_m or SELFSIM_GRID_M, R_max=cfg.rmax,
        )
    except BranchLost as exc:
        _selfsim_output(cfg, exc.table)
        raise
    _selfsim_output(cfg, rows)
    return EXIT_OK if any(r.flag for r in rows if r.b > 0) else EXIT_UNSATISFIED


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        cfg = make_config(args)
        if args.command == "scan":
            return cmd_scan(cfg, args.resolution)
        if args.command == "build":
            return cmd_build(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.bundle, args.zero_field)
        return cmd_selfsim(cfg, args.bundle)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BundleError as exc:
        print(f"corrupt bundle: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InstabilityNotFound, InstabilityLost) as exc:
        print(f"no instability: {exc}", file=sys.stderr)
        return EXIT_UNSATISFIED
    except ContractionFailure as exc:
        norms = ", ".join(f"{u:.3e}" for u in exc.update_norms[-8:])
        print(f"contraction failure: {exc}\nlast update norms: {norms}", file=sys.stderr)
        return EXIT_CONTRACTION
    except BranchLost as exc:
        print(f"branch lost at b={exc.b}: {exc}", file=sys.stderr)
        return EXIT_BRANCH
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
