"""Batch runs over fixture families from a TOML or JSON config.

Example (TOML)::

    p = [2.0]
    balls = "auto"
    restarts = 8

    [[families]]
    family = "path"
    levels = [8, 16]

    [[families]]
    family = "gasket"
    levels = [3]
    beta = 2.3219

One report file is written per (family, level).  The exit code is 0 iff every
hard assertion passed.
"""

from __future__ import annotations

import json
import logging
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .certify import SCHEMA, certify_graph
from .fixtures import FAMILIES, FamilySpec, generate
from .graph import Ball
from .partition import partition_energy_audit, sobolev_partition
from .scale import default_scale
from .solver import condenser_potential
from .whitney import neighbor_geometry_check, whitney_cover

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

log = logging.getLogger(__name__)

TOP_KEYS = {"families", "p", "beta", "balls", "lambda_pi", "lambda_whitney", "eta", "restarts",
            "seed", "method", "threads", "blend", "out"}
FAMILY_KEYS = {"family", "levels", "dim", "multiplier", "bridge", "p", "beta", "balls"}


class ConfigError(ValueError):
    pass


@dataclass
class SuiteConfig:
    families: list[dict]
    p: list[float] = field(default_factory=lambda: [2.0])
    beta: float | None = None
    balls: object = "auto"
    lambda_pi: float = 8.0
    lambda_whitney: float = 8.0
    eta: float = 0.5
    restarts: int = 32
    seed: int = 0
    method: str = "auto"
    threads: int | None = None
    blend: bool = True
    out: str | None = None


def _line_of(text: str, key: str) -> int | None:
    pat = re.compile(r'^\s*"?' + re.escape(key) + r'"?\s*[=:]')
    for i, line in enumerate(text.splitlines(), 1):
        if pat.search(line):
            return i
    return None


def _fail(path, text, key, msg):
    line = _line_of(text, key) if key else None
    where = f"{path}:{line}" if line else str(path)
    raise ConfigError(f"{where}: {msg}")


def _as_p_list(val, path, text):
    vals = val if isinstance(val, list) else [val]
    out = []
    for v in vals:
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            _fail(path, text, "p", f"p must be a number, got {v!r}")
        if v <= 1:
            _fail(path, text, "p", f"p must be > 1, got {v}")
        out.append(float(v))
    return out


def parse_config(text: str, path="config") -> SuiteConfig:
    path = str(path)
    try:
        if path.endswith(".json") or text.lstrip().startswith("{"):
            raw = json.loads(text)
        else:
            raw = tomllib.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a table/object")
    for k in raw:
        if k not in TOP_KEYS:
            _fail(path, text, k, f"unknown key {k!r}")
    fams = raw.get("families", [])
    if not isinstance(fams, list):
        _fail(path, text, "families", "families must be a list of tables")
    cfg = SuiteConfig(families=[])
    if "p" in raw:
        cfg.p = _as_p_list(raw["p"], path, text)
    for key in ("beta", "lambda_pi", "lambda_whitney", "eta"):
        if key in raw:
            v = raw[key]
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                _fail(path, text, key, f"{key} must be a positive number, got {v!r}")
            setattr(cfg, key, float(v))
    if not 0 < cfg.eta < 1:
        _fail(path, text, "eta", f"eta must lie in (0, 1), got {cfg.eta}")
    if cfg.lambda_whitney < 8:
        _fail(path, text, "lambda_whitney", f"lambda_whitney must be >= 8, got {cfg.lambda_whitney}")
    for key in ("restarts", "seed", "threads"):
        if key in raw:
            v = raw[key]
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                _fail(path, text, key, f"{key} must be a nonnegative integer, got {v!r}")
            setattr(cfg, key, v)
    if "method" in raw:
        if raw["method"] not in ("auto", "exact-eigen", "iterative-lower-bound"):
            _fail(path, text, "method", f"unknown method {raw['method']!r}")
        cfg.method = raw["method"]
    if "balls" in raw:
        cfg.balls = _check_balls(raw["balls"], path, text)
    cfg.blend = bool(raw.get("blend", True))
    cfg.out = raw.get("out")
    for fam in fams:
        if not isinstance(fam, dict):
            _fail(path, text, "families", "each family entry must be a table")
        for k in fam:
            if k not in FAMILY_KEYS:
                _fail(path, text, k, f"unknown family key {k!r}")
        name = fam.get("family")
        if name not in FAMILIES:
            _fail(path, text, "family", f"unknown family {name!r}; expected one of {', '.join(FAMILIES)}")
        levels = fam.get("levels")
        if not isinstance(levels, list) or not levels or not all(
                isinstance(v, int) and not isinstance(v, bool) for v in levels):
            _fail(path, text, "levels", f"family {name!r} needs a nonempty integer list 'levels'")
        entry = dict(fam)
        if "p" in fam:
            entry["p"] = _as_p_list(fam["p"], path, text)
        if "balls" in fam:
            entry["balls"] = _check_balls(fam["balls"], path, text)
        cfg.families.append(entry)
    return cfg


def _check_balls(val, path, text):
    if val == "auto":
        return val
    if isinstance(val, list) and all(isinstance(b, list) and len(b) == 2 for b in val):
        try:
            return [Ball(int(c), float(r)) for c, r in val]
        except (TypeError, ValueError) as exc:
            _fail(path, text, "balls", f"bad ball entry: {exc}")
    _fail(path, text, "balls", "balls must be 'auto' or a list of [center, radius] pairs")


def load_config(path) -> SuiteConfig:
    path = Path(path)
    return parse_config(path.read_text(), path)


# --------------------------------------------------------------------------

def _annulus(graph):
    d = graph.distances
    ctr = int(np.argmin(d.max(axis=1)))
    R = float(d[ctr].max())
    return (d[ctr] >= R / 8) & (d[ctr] < R / 2)


def hard_assertions(graph, family: str, level: int, p: float, scale, report, cfg: SuiteConfig) -> dict:
    """Checks that must hold exactly on every fixture."""
    out = {}
    vals = [v for r in report.records for v in (r.c_cap, r.c_pi, r.c_cs, r.c_cs_classical)]
    out["constants_nonnegative"] = bool(all(v >= 0 for v in vals))
    out["blend_boundary_exact"] = bool(all(
        r.certificates["C_WB"] is None or r.certificates["C_WB"]["boundary_exact"] for r in report.records))
    out["C_WB_finite"] = bool(all(r.c_wb is None or math.isfinite(r.c_wb) for r in report.records))
    omega = _annulus(graph)
    if omega.any() and not omega.all():
        cover = whitney_cover(graph, omega, cfg.lambda_whitney)
        out["cover_certified"] = cover.certified
        out["neighbor_geometry"] = neighbor_geometry_check(graph, cover).passed
        part = sobolev_partition(graph, cover.balls, scale, p)
        out["partition_certified"] = part.certified
        out["partition_audit"] = partition_energy_audit(graph, part).holds
    if family == "path":
        # endpoint condenser against the linear oracle n^(1-p)
        n = graph.n - 1
        one, zero = np.zeros(graph.n, bool), np.zeros(graph.n, bool)
        one[0], zero[n] = True, True
        cap = condenser_potential(graph, one, zero, p).energy
        out["capacity_oracle"] = bool(abs(cap - n ** (1 - p)) <= 1e-8 * n ** (1 - p))
    return out


def run_suite(cfg: SuiteConfig, out_dir) -> int:
    out_dir = Path(out_dir or cfg.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    all_ok = True
    for fam in cfg.families:
        for level in fam["levels"]:
            spec = FamilySpec(fam["family"], int(level), int(fam.get("dim", 2)), fam.get("multiplier"),
                              {"bridge": fam.get("bridge", 1)})
            graph = generate(spec)
            runs, asserts = [], {}
            for p in fam.get("p", cfg.p):
                beta = fam.get("beta", cfg.beta)
                scale = default_scale(spec.family, beta)
                rep = certify_graph(graph, p, scale, fam.get("balls", cfg.balls), cfg.lambda_pi,
                                    cfg.lambda_whitney, cfg.eta, cfg.method, cfg.restarts, cfg.seed,
                                    cfg.threads, cfg.blend)
                if spec.family in ("gasket", "carpet") and p != 2:
                    rep.warnings.append("fractal conductance renormalization is the p = 2 value")
                if beta is None:
                    rep.warnings.append(f"beta is the family default {scale.beta_minus:g} (a convention)")
                rep.meta = {"family": spec.family, "level": int(level)}
                checks = hard_assertions(graph, spec.family, int(level), p, scale, rep, cfg)
                asserts[f"p={p:g}"] = checks
                runs.append(rep.to_dict())
                log.info("%s p=%g: %s", spec.label, p, checks)
            ok = all(all(c.values()) for c in asserts.values())
            all_ok &= ok
            doc = {"schema": SCHEMA, "kind": "suite", "family": spec.family, "level": int(level),
                   "runs": runs, "assertions": asserts, "passed": ok}
            (out_dir / f"{spec.label}.json").write_text(json.dumps(doc, indent=1, default=float))
    return 0 if all_ok else 1
