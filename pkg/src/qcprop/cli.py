"""Command-line front end: propagate, sweep, convergence and validate."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from qcprop import catalog
from qcprop.config import ExperimentConfig, Mode, expand_sweep, load_config, parse_config
from qcprop.errors import ConfigError, FitDegenerate, PropagatorError
from qcprop.exact import Representation, exact_amplitude
from qcprop.semiclassics import propagator_qc
from qcprop.validation import run_validate

logger = logging.getLogger("qcprop")

EXACT_DIM_LIMIT = 10_000


def _c(x) -> dict | None:
    return None if x is None else {"re": float(np.real(x)), "im": float(np.imag(x))}


def _error_record(exc: Exception) -> dict:
    code = getattr(exc, "code", type(exc).__name__)
    return {"status": "error", "error": {"code": code, "message": str(exc)}}


def run_propagate(cfg: ExperimentConfig, timing: bool = False) -> dict:
    """One quasiclassical amplitude, compared with the oracle when feasible."""
    t0 = time.perf_counter()
    res = propagator_qc(cfg.geometry, cfg.hamiltonian, cfg.boundary, cfg.solver, checks=cfg.checks)
    rec = {"input": cfg.raw, "status": "ok", "qc": _c(res.amplitude), "exact": None,
           "rel_error": None}
    rec.update({k: v for k, v in res.to_record().items() if k != "amplitude"})
    bd = cfg.boundary
    if cfg.exact.get("enabled", True):
        rep = Representation.for_geometry(cfg.geometry, cfg.exact.get("n_max"))
        if rep.dimension > EXACT_DIM_LIMIT:
            rec["status"] = "qc-only"
        else:
            try:
                ex = exact_amplitude(rep, cfg.hamiltonian, bd.z_I, bd.z_F, bd.tau)
            except PropagatorError as exc:
                rec["status"] = "qc-only"
                rec["exact_error"] = {"code": exc.code, "message": str(exc)}
            else:
                rec["exact"] = _c(ex)
                if ex != 0:
                    rec["rel_error"] = float(abs(res.amplitude / ex - 1))
    else:
        rec["status"] = "qc-only"
    if timing:
        rec["wall_time"] = time.perf_counter() - t0
    return rec


def _sweep_point(args) -> dict:
    index, raw, values, tol, timing = args
    try:
        rec = run_propagate(parse_config(raw, Mode.PROPAGATE, tol), timing)
    except (PropagatorError, ValueError, ArithmeticError) as exc:
        rec = dict(_error_record(exc), input=raw)
    return {"index": index, "axes": values, **rec}


def run_sweep(cfg: ExperimentConfig, parallel: int = 1, tol: float | None = None,
              timing: bool = False) -> list[dict]:
    """Cartesian sweep; per-point failures are recorded, never raised."""
    points = expand_sweep(cfg.raw, cfg.axes)
    tasks = [(i, raw, vals, tol, timing) for i, (raw, vals) in enumerate(points)]
    if parallel > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(_sweep_point, tasks))
    return [_sweep_point(t) for t in tasks]


def _weight_of(rec: dict) -> float:
    return float(rec["input"]["geometry"]["weight"])


def run_convergence(cfg: ExperimentConfig, parallel: int = 1, tol: float | None = None) -> dict:
    """Least-squares slope of ``log(rel_error)`` against ``log(l)``."""
    records = run_sweep(cfg, parallel, tol)
    pts = [(_weight_of(r), r["rel_error"]) for r in records
           if r.get("rel_error") is not None and r["status"] == "ok"]
    data = [{"weight": w, "rel_error": e} for w, e in pts]
    if pts and max(e for _, e in pts) < 1e-9:
        return {"exact_family": True, "slope": None, "intercept": None, "residual": None,
                "points": data}
    valid = [(w, e) for w, e in pts if e > 0 and np.isfinite(e)]
    if len(valid) < 3 or len({w for w, _ in valid}) < 3:
        raise FitDegenerate(f"convergence fit needs 3 distinct weights, got {len(valid)} points")
    x = np.log([w for w, _ in valid])
    y = np.log([e for _, e in valid])
    (slope, intercept), res, *_ = np.polyfit(x, y, 1, full=True)
    residual = float(np.sqrt(res[0] / len(x))) if len(res) else 0.0
    return {"exact_family": False, "slope": float(slope), "intercept": float(intercept),
            "residual": residual, "points": data}


# -- output ------------------------------------------------------------------------

def _flatten(rec: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in rec.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict) and set(v) == {"re", "im"}:
            out[f"{key}_re"], out[f"{key}_im"] = v["re"], v["im"]
        elif isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


def format_records(records: list[dict], fmt: str) -> str:
    if fmt == "jsonl":
        return "".join(json.dumps(r) + "\n" for r in records)
    rows = [_flatten(r) for r in records]
    fields: list[str] = []
    for row in rows:
        fields.extend(k for k in row if k not in fields)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcprop", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("propagate", "single propagation"), ("sweep", "parameter sweep"),
                        ("convergence", "error-vs-weight fit"), ("validate", "self-validation suite")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--example", choices=catalog.example_names(),
                       help="use a bundled example config")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
        p.add_argument("--parallel", type=int, default=1, metavar="N")
        p.add_argument("--tol", type=float, help="boundary-residual tolerance")
        p.add_argument("--timing", action="store_true", help="add wall_time to records")
        if name == "validate":
            p.add_argument("--perturb-metric", type=float, default=0.0, help=argparse.SUPPRESS)
    return parser


def _raw_config(args) -> dict:
    if args.config:
        return load_config(args.config)
    if args.example:
        return catalog.example_config(args.example)
    raise ConfigError("give --config or --example")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.parallel < 1:
        print("error: --parallel must be at least 1", file=sys.stderr)
        return 2
    try:
        if args.command == "validate":
            checks = run_validate(args.perturb_metric)
            records = [c.to_record() for c in checks]
            failed = [c for c in checks if not c.passed]
            records.append({"check": "summary", "passed": not failed, "total": len(checks),
                            "failed": len(failed)})
            _emit(format_records(records, args.format), args.out)
            for c in checks:
                mark = "PASS" if c.passed else "FAIL"
                print(f"{mark} {c.name}: {c.value:.3g} (limit {c.limit:.3g})", file=sys.stderr)
            return 1 if failed else 0
        cfg = parse_config(_raw_config(args), args.command, args.tol)
        if args.command == "propagate":
            records = [run_propagate(cfg, args.timing)]
        elif args.command == "sweep":
            records = run_sweep(cfg, args.parallel, args.tol, args.timing)
        else:
            records = [run_convergence(cfg, args.parallel, args.tol)]
    except PropagatorError as exc:
        _emit(format_records([_error_record(exc)], "jsonl"), args.out)
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 2
    _emit(format_records(records, args.format), args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
