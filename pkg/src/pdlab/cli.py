"""Command-line front door: ``pdlab <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .blending import blend_energy_report, whitney_blend
from .certify import SCHEMA, CertReport, certify_graph, report_from_dict, to_csv
from .energy import axioms_report
from .fixtures import FAMILIES, FamilySpec, generate
from .graph import Ball, GraphError, load_graph, save_graph
from .scale import load_scale, power_scale
from .suite import ConfigError, load_config, run_suite
from .whitney import CoverError, neighbor_geometry_check, whitney_cover


def _emit(doc, out):
    text = json.dumps(doc, indent=1, default=float)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _ball(text: str) -> Ball:
    try:
        c, r = text.split(",")
        return Ball(int(c), float(r))
    except ValueError:
        raise argparse.ArgumentTypeError(f"ball must be 'center,radius', got {text!r}") from None


def _vector(path, n: int) -> np.ndarray:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("values")
    v = np.asarray(data, dtype=float)
    if v.shape != (n,):
        raise ValueError(f"{path}: expected {n} vertex values, got shape {v.shape}")
    return v


def _scale(args):
    if getattr(args, "psi", None):
        return load_scale(args.psi)
    return power_scale(args.beta)


def cmd_gen(args):
    spec = FamilySpec(args.family, args.size, args.dim, args.multiplier, {"bridge": args.bridge})
    g = generate(spec)
    if args.out:
        save_graph(g, args.out)
    else:
        print(g.to_json())
    return 0


def cmd_axioms(args):
    g = load_graph(args.graph)
    rep = axioms_report(g, args.p, args.trials, args.seed)
    _emit(rep.to_dict(), args.out)
    return 0 if rep.passed else 1


def cmd_cover(args):
    g = load_graph(args.graph)
    if args.omega:
        omega = np.zeros(g.n, bool)
        omega[np.asarray(json.loads(Path(args.omega).read_text()), dtype=int)] = True
    else:
        x, r1, r2 = args.annulus.split(",")
        d = g.distances[int(x)]
        omega = (d >= float(r1)) & (d < float(r2))
    cover = whitney_cover(g, omega, args.lam)
    nb = neighbor_geometry_check(g, cover)
    _emit({"summary": cover.summary(), "certified": cover.certified, "violations": cover.violations,
           "neighbor_check": {"passed": nb.passed, "pairs": nb.pairs_checked,
                              "max_radius_ratio": nb.max_radius_ratio, "max_scale_gap": nb.max_scale_gap},
           "balls": cover.to_list()}, args.out)
    return 0 if cover.certified and nb.passed else 1


def cmd_blend(args):
    g = load_graph(args.graph)
    f = _vector(args.f, g.n)
    h0 = _vector(args.g, g.n) if args.g else np.zeros(g.n)
    scale = _scale(args)
    res = whitney_blend(g, f, h0, args.ball, args.eta, args.p, args.lam, scale)
    rep = blend_energy_report(g, res, scale)
    _emit({"ball": [args.ball.center, args.ball.radius], "eta": args.eta, "p": args.p,
           "lambda": args.lam, "boundary_exact": res.boundary_exact(), "degenerate": res.degenerate,
           "notes": res.notes, "report": rep.to_dict(), "h": res.h.tolist()}, args.report)
    return 0 if res.boundary_exact() and rep.finite else 1


def cmd_certify(args):
    g = load_graph(args.graph)
    if args.balls == "auto":
        balls = "auto"
    else:
        balls = [Ball(int(c), float(r)) for c, r in json.loads(Path(args.balls).read_text())]
    rep = certify_graph(g, args.p, _scale(args), balls, args.lambda_pi, args.lambda_whitney, args.eta,
                        args.method, args.restarts, args.seed, args.threads, not args.no_blend)
    _emit(rep.to_dict(), args.out)
    if args.csv:
        Path(args.csv).write_text(to_csv([rep]))
    return 0


def _reports(path) -> list[CertReport]:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema") != SCHEMA:
        raise ValueError(f"{path}: not a {SCHEMA} file")
    if doc.get("kind") == "suite":
        return [report_from_dict(r) for r in doc["runs"]]
    return [report_from_dict(doc)]


def cmd_report(args):
    reps = [r for p in args.inputs for r in _reports(p)]
    text = to_csv(reps)
    if args.csv:
        Path(args.csv).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_suite(args):
    cfg = load_config(args.config)
    return run_suite(cfg, args.out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pdlab", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen", help="generate a fixture graph")
    s.add_argument("--family", required=True, choices=FAMILIES)
    s.add_argument("--size", type=int, required=True, help="edges/vertices/side/level")
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--multiplier", type=float, default=None)
    s.add_argument("--bridge", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_gen)

    s = sub.add_parser("axioms", help="randomized energy-measure axiom checks")
    s.add_argument("--graph", required=True)
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--trials", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_axioms)

    s = sub.add_parser("cover", help="Whitney cover of a vertex set")
    s.add_argument("--graph", required=True)
    grp = s.add_mutually_exclusive_group(required=True)
    grp.add_argument("--omega", help="JSON list of vertex ids")
    grp.add_argument("--annulus", help="x,r1,r2: vertices with r1 <= d(x, .) < r2")
    s.add_argument("--lambda", dest="lam", type=float, default=8.0)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_cover)

    s = sub.add_parser("blend", help="Whitney blend of f and g across a ball")
    s.add_argument("--graph", required=True)
    s.add_argument("--ball", type=_ball, required=True)
    s.add_argument("--eta", type=float, default=0.5)
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--lambda", dest="lam", type=float, default=8.0)
    s.add_argument("--f", required=True)
    s.add_argument("--g")
    s.add_argument("--beta", type=float, default=2.0)
    s.add_argument("--psi")
    s.add_argument("--report")
    s.set_defaults(fn=cmd_blend)

    s = sub.add_parser("certify", help="per-ball constants")
    s.add_argument("--graph", required=True)
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--beta", type=float, default=2.0)
    s.add_argument("--psi")
    s.add_argument("--lambda-pi", type=float, default=8.0)
    s.add_argument("--lambda-whitney", type=float, default=8.0)
    s.add_argument("--eta", type=float, default=0.5)
    s.add_argument("--balls", default="auto")
    s.add_argument("--method", default="auto", choices=["auto", "exact-eigen", "iterative-lower-bound"])
    s.add_argument("--restarts", type=int, default=32)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--no-blend", action="store_true")
    s.add_argument("--out")
    s.add_argument("--csv")
    s.set_defaults(fn=cmd_certify)

    s = sub.add_parser("report", help="CSV summary of report files")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--csv")
    s.set_defaults(fn=cmd_report)

    s = sub.add_parser("suite", help="run a TOML/JSON suite config")
    s.add_argument("config")
    s.add_argument("--out", default=None)
    s.set_defaults(fn=cmd_suite)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (ConfigError, GraphError, CoverError, ValueError, OSError) as exc:
        print(f"pdlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
