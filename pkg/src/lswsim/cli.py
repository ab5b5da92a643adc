"""Command-line entry point.

    lswsim simulate --config run.json --out DIR
    lswsim distance A.json B.json --p inf
    lswsim quantize INPUT.json --eps 0.1 --out OUT.json
    lswsim study --config study.json --out DIR

Exit codes: 0 success, 1 bad input, 2 invariant or study criterion failed.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import diagnostics, io
from .dynamics import IntegrationError, InvalidStateError, integrate
from .measures import wasserstein
from .ordering import quantize, sup_distance

logger = logging.getLogger("lswsim")

EXIT_OK, EXIT_INPUT, EXIT_FAILED = 0, 1, 2


def _parse_p(text: str):
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid p {text!r}")
    if not p >= 1:
        raise argparse.ArgumentTypeError("p must be >= 1 or inf")
    return p


def cmd_simulate(args) -> int:
    config = io.parse_sim_config(io.load_json(args.config))
    try:
        traj = integrate(config)
    except (IntegrationError, InvalidStateError) as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    out = Path(args.out)
    io.write_trajectory(traj, out)
    report = diagnostics.check_invariants(traj)
    (out / "report.json").write_text(report.to_json() + "\n")
    (out / "report.txt").write_text(report.to_text() + "\n")
    print(report.to_text())
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_distance(args) -> int:
    a, b = io.load_measure(args.a), io.load_measure(args.b)
    print(f"{wasserstein(a, b, args.p):.15g}")
    return EXIT_OK


def cmd_quantize(args) -> int:
    if not args.eps > 0:
        print("error: --eps must be positive", file=sys.stderr)
        return EXIT_INPUT
    v0 = io.load_ordering(args.input)
    v = quantize(v0, args.eps)
    io.save_ordering(args.out, v)
    print(f"{sup_distance(v, v0):.15g}")
    return EXIT_OK


STUDY_COMMON = {"schema_version", "study", "law", "horizon", *io.INTEGRATOR_FIELDS}
STUDY_FIELDS = {
    "lipschitz": STUDY_COMMON | {"initial", "family", "deltas"},
    "convergence": STUDY_COMMON | {"initial", "eps"},
}


def _write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        names = list(asdict(rows[0])) if rows else []
        wr.writerow(names)
        for r in rows:
            wr.writerow([repr(float(x)) for x in asdict(r).values()])


def cmd_study(args) -> int:
    d = io.load_json(args.config)
    kind = d.get("study") if isinstance(d, dict) else None
    if kind not in STUDY_FIELDS:
        raise io.ConfigError(f"study: expected one of {sorted(STUDY_FIELDS)}, got {kind!r}")
    io.check_schema(d, STUDY_FIELDS[kind], ("initial", "horizon"))
    law = io.parse_law(d.get("law"))
    initial = io.ordering_from_dict(d["initial"])
    kwargs = io.integrator_kwargs(d)
    horizon = d["horizon"]
    if isinstance(horizon, bool) or not isinstance(horizon, (int, float)) or horizon < 0:
        raise io.ConfigError(f"horizon: must be a nonnegative number, got {horizon!r}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if kind == "lipschitz":
        family = d.get("family", "shift")
        if family not in ("shift", "smallest", "smallest_down"):
            raise io.ConfigError(f"family: unknown perturbation family {family!r}")
        deltas = [float(x) for x in d.get("deltas", [1e-2, 1e-3, 1e-4])]
        if horizon <= 0:
            raise io.ConfigError("horizon: must be positive for a lipschitz study")
        try:
            rows = diagnostics.lipschitz_study(initial, law, horizon, family, deltas, **kwargs)
        except (IntegrationError, InvalidStateError) as exc:
            print(f"integration failed: {exc}", file=sys.stderr)
            return EXIT_FAILED
        except ValueError as exc:
            raise io.ConfigError(f"deltas: {exc}") from exc
        ratios = [r.ratio for r in rows]
        passed = all(math.isfinite(x) for x in ratios)
        summary = {"study": kind, "passed": passed, "max_ratio": max(ratios, default=0.0)}
    else:
        eps = [float(x) for x in d.get("eps", [0.1, 0.05, 0.025, 0.0125])]
        if len(eps) < 2 or any(not e > 0 for e in eps):
            raise io.ConfigError("eps: need at least two positive values")
        rows = diagnostics.convergence_study(initial, law, horizon, eps, **kwargs)
        dist = [r.distance for r in rows]
        monotone = all(b <= a for a, b in zip(dist, dist[1:]))
        bounded = all(r.distance <= 10 * r.eps for r in rows)
        passed = monotone and bounded
        summary = {
            "study": kind,
            "passed": passed,
            "distances": dist,
            "monotone": monotone,
            "bounded_by_10_eps": bounded,
        }
    _write_rows(out / f"{kind}.csv", rows)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(diagnostics.render_table(
        list(asdict(rows[0])) if rows else [],
        [[f"{x:.6g}" for x in asdict(r).values()] for r in rows],
    ))
    print("PASS" if passed else "FAIL")
    return EXIT_OK if passed else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lswsim", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a run config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("distance", help="Wasserstein distance between two measure files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--p", type=_parse_p, default=math.inf)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("quantize", help="quantize an ordering or sampled function")
    p.add_argument("input")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("study", help="run a lipschitz or convergence study")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_study)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except io.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
