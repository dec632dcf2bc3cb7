"""JSON persistence of a regularized vortex (``VortexBundle``).

A bundle stores the parameters, the piecewise eigenpair, the rescaled
correction ``(g, y)`` on the Gauss-Legendre nodes and the residual obtained
when it was built.  Floats are written in their shortest round-trip form,
so reloading reproduces every array bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import BundleError, DomainError, InstabilityNotFound
from .regularization import RescaledSolution, build_mollifier
from .vortex import VortexParams, eigenpair

SCHEMA_VERSION = 1
TOOL_VERSION = "0.1.0"

__all__ = [
    "SCHEMA_VERSION",
    "VortexBundle",
    "array_digest",
    "config_hash",
    "save_bundle",
    "load_bundle",
]


def _c(z):
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def _uc(d):
    return complex(float(d["re"]), float(d["im"]))


def array_digest(g):
    g = np.ascontiguousarray(np.asarray(g, dtype=np.complex128))
    return hashlib.sha256(g.tobytes()).hexdigest()


def config_hash(config):
    text = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class VortexBundle:
    solution: RescaledSolution
    residual_sup: float
    residual_l2: float
    config: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def params(self):
        return self.solution.params

    @property
    def eigen(self):
        return self.solution.eigen

    @property
    def eps(self):
        return self.solution.eps

    def to_dict(self):
        sol = self.solution
        p = sol.params
        prov = dict(self.provenance)
        prov.setdefault("tool_version", TOOL_VERSION)
        prov.setdefault("config_hash", config_hash(self.config))
        prov.setdefault("created", datetime.now(timezone.utc).isoformat(timespec="seconds"))
        self.provenance = prov
        return {
            "schema_version": SCHEMA_VERSION,
            "params": {"n": p.n, "xi": p.xi, "r2": p.r2, "r1": p.r1, "c": p.c},
            "eigen": {
                "z": _c(sol.eigen.z),
                "lam": _c(sol.eigen.lam),
                "h": [_c(v) for v in sol.eigen.h],
            },
            "eps": sol.eps,
            "solution": {
                "grid_m": sol.moll.M,
                "z_eps": _c(sol.z_eps),
                "lam_eps": _c(sol.lam_eps),
                "y": _c(sol.y),
                "g_re": sol.g.real.tolist(),
                "g_im": sol.g.imag.tolist(),
                "digest": array_digest(sol.g),
                "iterations": sol.iterations,
                "update_norms": [float(u) for u in sol.update_norms],
                "ball": sol.ball if math.isfinite(sol.ball) else None,
            },
            "residual": {"sup_norm": self.residual_sup, "l2_norm": self.residual_l2},
            "config": self.config,
            "provenance": prov,
        }


def save_bundle(bundle, path):
    text = json.dumps(bundle.to_dict(), indent=1, sort_keys=True)
    Path(path).write_text(text + "\n")
    return path


def load_bundle(path):
    """Read and validate a bundle; any inconsistency raises :class:`BundleError`."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BundleError(f"cannot read bundle {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise BundleError("bundle is not a JSON object")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise BundleError(f"unsupported schema_version {data.get('schema_version')!r}")
    try:
        pd, sd = data["params"], data["solution"]
        params = VortexParams(int(pd["n"]), float(pd["xi"]), float(pd["r2"]))
        ep = eigenpair(params)
        if abs(ep.z - _uc(data["eigen"]["z"])) > 1e-12:
            raise BundleError("stored eigenvalue disagrees with the parameters")
        eps = float(data["eps"])
        M = int(sd["grid_m"])
        g = np.array(sd["g_re"], dtype=float) + 1j * np.array(sd["g_im"], dtype=float)
        if g.shape != (2, M):
            raise BundleError(f"correction has shape {g.shape}, expected (2, {M})")
        if array_digest(g) != sd["digest"]:
            raise BundleError("correction data do not match the stored digest")
        y = _uc(sd["y"])
        ball = sd.get("ball")
        sol = RescaledSolution(
            params, ep, eps, build_mollifier(M), g, y, int(sd["iterations"]),
            [float(u) for u in sd["update_norms"]], math.inf if ball is None else float(ball),
        )
        if abs(sol.z_eps - _uc(sd["z_eps"])) > 1e-14:
            raise BundleError("stored z_eps disagrees with the correction data")
        res = data["residual"]
        bundle = VortexBundle(
            sol, float(res["sup_norm"]), float(res["l2_norm"]),
            dict(data.get("config", {})), dict(data.get("provenance", {})),
        )
    except BundleError:
        raise
    except (KeyError, TypeError, ValueError, DomainError, InstabilityNotFound) as exc:
        raise BundleError(f"malformed bundle {path}: {exc!r}") from exc
    if not 0 < eps < params.eps_max:
        raise BundleError(f"stored eps={eps} is outside (0, {params.eps_max})")
    return bundle
