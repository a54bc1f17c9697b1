"""Command-line front end.

::

    stefanbake run CONFIG [-o DIR]
    stefanbake verify ARTIFACT --mode certify|oracle|converge [--ladder N:DT ...] [--tol KEY=VALUE ...]
    stefanbake sweep TEMPLATE --axis PATH=SPEC [--axis ...] [-j JOBS] [-o DIR]

Output directories default to ``$STEFANBAKE_OUTPUT_ROOT`` (else ``./runs``).

Exit codes: 0 success (for ``run``: the front stayed inside, or reached one of
the ends); 1 the run ended in StepFailure or MoistureFloorViolated, or a
verification failed; 2 unusable input (missing or invalid config, failed
assumptions, malformed artifact).
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from itertools import product
from pathlib import Path

import numpy as np

from . import artifacts
from . import config as cfgmod
from .errors import ConfigurationError, StefanBakeError
from .front import FRONT_HIT_ONE, FRONT_HIT_ZERO, REACHED_HORIZON, run
from .kernels import BACKEND
from .problem import validate_setup
from .verify import (
    Tolerances,
    certify_run,
    compare_with_neumann,
    neumann_oracle_for,
    self_convergence,
)

log = logging.getLogger("stefanbake")

OUTPUT_ROOT_ENV = "STEFANBAKE_OUTPUT_ROOT"
SUCCESS = (REACHED_HORIZON, FRONT_HIT_ZERO, FRONT_HIT_ONE)
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


# ---------------------------------------------------------------------------
# run


def execute(data: dict, out_dir) -> tuple[Path, dict]:
    """Build, validate, run, certify and write one artifact.  Returns ``(dir, summary)``."""
    rc = cfgmod.build(data)
    report = validate_setup(rc.setup)
    if not report.runnable:
        raise ConfigurationError("setup violates standing assumptions:\n" + report.summary())
    t0 = time.perf_counter()
    result = run(rc.setup, rc.coupling, validate=False)
    wall = time.perf_counter() - t0
    cert = certify_run(result.series, result.ledger.hypotheses, result.ledger.dy,
                       result.report.classification, rc.tolerances, latent=rc.setup.params.latent)
    cert_dict = cert.as_dict()
    summary = {
        "report": result.report.as_dict(),
        "wall_time_s": wall,
        "steps": result.report.steps,
        "rejected_steps": result.report.rejected_steps,
        "hypotheses": result.ledger.hypotheses,
        "dy": result.ledger.dy,
        "latent": rc.setup.params.latent,
        "backend": BACKEND,
        "certificate": cert_dict,
        "certificate_digest": artifacts.digest(cert_dict),
    }
    path = artifacts.write_artifact(out_dir, rc.data, result.series, summary)
    return path, summary


def cmd_run(args) -> int:
    data = cfgmod.load(args.config)
    out = Path(args.output) if args.output else output_root() / Path(args.config).stem
    path, summary = execute(data, out)
    rep = summary["report"]
    print(f"{rep['classification']} at t={rep['stop_time']:.6g} after {rep['steps']} steps "
          f"(e={rep['final_state']['e']:.6g}); artifact: {path}")
    if not summary["certificate"]["passed"]:
        print("warning: certification failed, see summary.json", file=sys.stderr)
    return EXIT_OK if rep["classification"] in SUCCESS else EXIT_FAIL


# ---------------------------------------------------------------------------
# verify


def _parse_ladder(items) -> list:
    ladder = []
    for item in items or []:
        try:
            n, dt = item.split(":")
            ladder.append((int(n), float(dt)))
        except ValueError:
            raise ConfigurationError(f"ladder level {item!r} is not N:DT") from None
    return ladder


def _parse_overrides(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationError(f"tolerance override {item!r} is not KEY=VALUE")
        out[key.strip()] = float(value)
    return out


def cmd_verify(args) -> int:
    art = artifacts.read_artifact(args.artifact)
    report_path = Path(args.report) if args.report else art.path / f"{args.mode}.json"
    if args.mode == "certify":
        tol_data = dict(art.config.get("tolerances", {}))
        tol_data.update(_parse_overrides(args.tol))
        cert = certify_run(art.series, art.summary["hypotheses"], float(art.summary["dy"]),
                           art.classification, Tolerances.from_dict(tol_data), latent=art.summary.get("latent"))
        body = cert.as_dict()
        passed = cert.passed
        for c in cert.certificates:
            print(f"{c.name:18s} {c.status:15s} residual={c.residual:.3e} tol={c.tolerance:.3e}")
    elif args.mode == "oracle":
        rc = cfgmod.build(art.config)
        oracle = neumann_oracle_for(rc.setup)
        cmp = compare_with_neumann(art.series, oracle, e_min=args.e_min, tolerance=args.rel_tol)
        body = {
            "passed": cmp.passed,
            "stefan_number": oracle.stefan_number,
            "lambda": oracle.lam,
            "t_shift": oracle.t_shift,
            "max_rel_error": cmp.max_rel_error,
            "max_rel_thickness_error": cmp.max_rel_thickness_error,
            "tolerance": cmp.tolerance,
            "table": cmp.table(),
        }
        passed = cmp.passed
        print(f"{'t':>12s} {'e':>12s} {'e_exact':>12s} {'rel_err':>10s}")
        for row in body["table"]:
            print(f"{row['t']:12.6g} {row['e']:12.6g} {row['e_exact']:12.6g} {row['rel_error']:10.3e}")
    else:
        ladder = _parse_ladder(args.ladder)
        rc = cfgmod.build(art.config)
        conv = self_convergence(rc.setup, ladder, rc.coupling)
        body = conv.as_dict()
        orders = conv.time_orders or conv.space_orders
        passed = bool(conv.monotone and orders and orders[-1] >= args.min_order)
        body["passed"] = passed
        print(f"{'n':>6s} {'dt':>10s} {'front err':>12s} {'u err':>12s} {'w err':>12s}")
        for (n, dt), fe, ue, we in zip(ladder, conv.labels["front_errors"], conv.labels["u_errors"], conv.labels["w_errors"]):
            print(f"{n:6d} {dt:10.3g} {fe:12.4e} {ue:12.4e} {we:12.4e}")
        print("orders (front, dt):", ", ".join(f"{o:.3f}" for o in conv.time_orders or []))
    report_path.write_text(artifacts.dumps_json(body))
    print(("PASS" if passed else "FAIL") + f": report written to {report_path}")
    return EXIT_OK if passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# sweep


def parse_axis(spec: str) -> tuple[str, list]:
    """``path=a:b:n`` (n evenly spaced values) or ``path=v1,v2,...``."""
    path, sep, values = spec.partition("=")
    if not sep or not path:
        raise ConfigurationError(f"axis {spec!r} is not PATH=VALUES")
    values = values.strip()
    if not values:
        raise ConfigurationError(f"axis {path!r} is empty")
    if ":" in values:
        try:
            a, b, n = values.split(":")
            n = int(n)
            pts = [float(v) for v in np.linspace(float(a), float(b), n)]
        except ValueError:
            raise ConfigurationError(f"axis {path!r}: range must be a:b:n") from None
    else:
        try:
            pts = [float(v) for v in values.split(",") if v.strip()]
        except ValueError:
            raise ConfigurationError(f"axis {path!r}: values must be numbers") from None
    if not pts:
        raise ConfigurationError(f"axis {path!r} is empty")
    return path.strip(), pts


def _sweep_point(job):
    index, data, out_dir = job
    try:
        _, summary = execute(data, out_dir)
        rep = summary["report"]
        return index, rep["classification"], rep["stop_time"], rep["final_state"]["e"], "ok", ""
    except (StefanBakeError, ValueError, ArithmeticError) as exc:
        return index, "", float("nan"), float("nan"), "error", str(exc).splitlines()[0]


INDEX_COLUMNS = ("point", "classification", "stop_time", "final_e", "status", "error", "artifact")


def sweep(template: dict, axes: list, out_dir, jobs: int = 1) -> list:
    """Run every grid point; returns index rows in grid order."""
    if not axes:
        raise ConfigurationError("sweep needs at least one axis")
    for name, pts in axes:
        if not pts:
            raise ConfigurationError(f"axis {name!r} is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = [a for a, _ in axes]
    work = []
    points = list(product(*[pts for _, pts in axes]))
    for i, values in enumerate(points):
        data = template
        for name, v in zip(names, values):
            data = cfgmod.set_path(data, name, v)
        work.append((i, data, out_dir / f"point-{i:04d}"))
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, work))
    else:
        results = [_sweep_point(job) for job in work]
    results.sort(key=lambda r: r[0])
    rows = []
    for (i, cls, t, e, status, err), values in zip(results, points):
        row = {"point": i, **dict(zip(names, values)), "classification": cls, "stop_time": t, "final_e": e,
               "status": status, "error": err, "artifact": f"point-{i:04d}" if status == "ok" else ""}
        rows.append(row)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["point", *names, *INDEX_COLUMNS[1:]], lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (artifacts._fmt(v) if isinstance(v, float) else v) for k, v in row.items()})
    (out_dir / "index.csv").write_text(buf.getvalue())
    return rows


def cmd_sweep(args) -> int:
    template = cfgmod.load(args.template)
    axes = [parse_axis(a) for a in args.axis or []]
    out = Path(args.output) if args.output else output_root() / f"sweep-{Path(args.template).stem}"
    jobs = args.jobs if args.jobs else (os.cpu_count() or 1)
    rows = sweep(template, axes, out, jobs)
    failed = [r for r in rows if r["status"] != "ok"]
    for r in rows:
        print(f"point {r['point']:4d}: {r['classification'] or 'ERROR':22s} {r['error']}")
    print(f"{len(rows) - len(failed)}/{len(rows)} points completed; index: {out / 'index.csv'}")
    return EXIT_OK if not failed else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stefanbake", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configuration and write an artifact")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="artifact directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="certify, oracle-check or convergence-test an artifact")
    p.add_argument("artifact")
    p.add_argument("--mode", choices=("certify", "oracle", "converge"), default="certify")
    p.add_argument("--ladder", nargs="+", help="N:DT refinement levels for converge mode")
    p.add_argument("--tol", action="append", help="tolerance override KEY=VALUE (certify mode)")
    p.add_argument("--report", help="report path (default: <artifact>/<mode>.json)")
    p.add_argument("--e-min", type=float, default=0.2, help="oracle validity window lower end")
    p.add_argument("--rel-tol", type=float, default=0.01, help="oracle relative tolerance")
    p.add_argument("--min-order", type=float, default=0.7, help="required front error order in dt")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="run a parameter grid")
    p.add_argument("template")
    p.add_argument("--axis", action="append", help="PATH=a:b:n or PATH=v1,v2,... (repeatable)")
    p.add_argument("-j", "--jobs", type=int, default=0, help="worker processes (default: core count)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "verify" and args.mode == "converge" and not args.ladder:
        print("error: converge mode needs --ladder", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except StefanBakeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
