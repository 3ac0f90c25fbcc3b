"""Command line entry point: ``nonmarkov {robustness,nm,bec-sweep,verify}``.

Exit codes: 0 success, 1 validation error, 2 solver failure, 3 partial results.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .bec import (
    BECParams,
    calibrate_tmax,
    crossover,
    default_grid,
    long_csv,
    sweep_ae,
    sweep_csv,
    sweep_D,
)
from .channel import QuantumChannel
from .measure import DEFAULT_THRESHOLD, assemble_report, robustness_series
from .qcore import DensityOperator, ValidationError, matrix_from_dict
from .robustness import SolverError, generalized_robustness
from .verification import run_checks

log = logging.getLogger("nonmarkov")

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_PARTIAL = 0, 1, 2, 3
OUT_ENV = "NONMARKOV_OUT"


def _read_json(path):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if exc.lineno <= len(text.splitlines()) else ""
        raise ValidationError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {line.strip()[:80]}") from exc


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    log.info("wrote %s", path)


def cmd_robustness(args) -> int:
    obj = _read_json(args.state)
    split = obj.get("split")
    rho = DensityOperator(matrix_from_dict(obj), tuple(split) if split else None)
    if rho.split is None:
        raise ValidationError("state file must declare a bipartite 'split'")
    methods = ["primal", "dual"] if args.method == "both" else [args.method]
    out = {}
    for m in methods:
        out[m] = generalized_robustness(rho, method=m, tol=args.tol).to_dict()
    result = dict(out[methods[-1]])
    if len(methods) == 2:
        result["primal"] = out["primal"]
        result["duality_difference"] = abs(out["primal"]["value"] - out["dual"]["value"])
    text = json.dumps(result, indent=2, sort_keys=True)
    if args.out:
        _write(Path(args.out), text)
    else:
        print(text)
    return EXIT_OK


def _load_lenient_trajectory(obj):
    try:
        times = [float(t) for t in obj["times"]]
        raw = obj["channels"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"trajectory needs 'times' and 'channels': {exc}") from exc
    if len(times) != len(raw) or len(times) < 2:
        raise ValidationError("trajectory needs at least two samples and one channel per time")
    if np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ValidationError("trajectory times must be nonnegative and strictly increasing")
    chans: List[Optional[QuantumChannel]] = []
    for i, c in enumerate(raw):
        try:
            chans.append(QuantumChannel.from_dict(c))
        except ValidationError as exc:
            log.error("channel %d rejected: %s", i, exc)
            chans.append(None)
    dims = {c.dim for c in chans if c is not None}
    if len(dims) != 1:
        raise ValidationError("no valid channels, or channels of mixed dimension")
    return times, chans, dims.pop()


def cmd_nm(args) -> int:
    times, chans, d = _load_lenient_trajectory(_read_json(args.trajectory))
    good = [i for i, c in enumerate(chans) if c is not None]
    solved = robustness_series([chans[i].choi for i in good], d, args.tol, args.parallel)
    results = [None] * len(chans)
    for i, r in zip(good, solved):
        results[i] = r
    report = assemble_report(times, results, args.threshold)
    out = _out_dir(args)
    stem = args.name
    _write(out / f"{stem}.csv", report.to_csv())
    _write(out / f"{stem}.json", report.summary_json())
    print(f"total {report.total:.12e} increments {report.n_increments}" + (" (partial)" if report.partial else ""))
    return EXIT_PARTIAL if report.partial else EXIT_OK


def _preset(args) -> BECParams:
    p = BECParams.load(args.preset) if args.preset else BECParams.preset()
    if args.sigma is not None:
        p = BECParams(**{**p.to_dict(), "sigma": args.sigma * p.L})
    return p


def cmd_bec_sweep(args) -> int:
    p = _preset(args)
    values = args.values
    if not values:
        raise ValidationError("sweep list is empty")
    if args.grid < 2:
        raise ValidationError("grid needs at least 2 samples")
    tmax = args.tmax if args.tmax is not None else calibrate_tmax(p)
    grid = default_grid(p, args.grid, tmax)
    out = _out_dir(args)
    summary = {"sweep": args.sweep, "sigma_over_L": p.sigma / p.L, "t_max": tmax, "t0_seconds": p.t0,
               "n_samples": args.grid, "threshold": args.threshold, "series": []}
    partial = False
    if args.sweep == "ae":
        series = [(f"D{p.d_ratio:g}", sweep_ae(p, values, grid, args.threshold, args.tol, args.parallel))]
        key = "a_E_over_aRb"
    else:
        bad = [v for v in values if v < 4]
        if bad:
            raise ValidationError(f"D/L values {bad} violate D >= 4L")
        series = [(f"ae{a:g}", sweep_D(p.with_ae(a), values, grid, args.threshold, args.tol, args.parallel))
                  for a in (args.ae or [p.ae_ratio])]
        key = "D_over_L"
    for tag, points in series:
        _write(out / f"sweep_{args.sweep}_{tag}.csv", sweep_csv(points, key))
        _write(out / f"sweep_{args.sweep}_{tag}_long.csv", long_csv(points, key))
        runs = []
        for pt in points:
            partial |= pt.report is None or pt.report.partial
            runs.append({key: pt.value, "error": pt.error,
                         "report": None if pt.report is None else pt.report.summary()})
        entry = {"tag": tag, "runs": runs}
        if args.sweep == "ae":
            entry["crossover_bracket"] = crossover(points)
        summary["series"].append(entry)
    _write(out / f"sweep_{args.sweep}.json", json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_PARTIAL if partial else EXIT_OK


def cmd_verify(args) -> int:
    t = time.time()
    results = run_checks(quick=args.quick, factor=args.factor)
    doc = {"checks": [r.to_dict() for r in results], "all_passed": all(r.passed for r in results),
           "elapsed_seconds": time.time() - t}
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.value:.3e} (tol {r.tolerance:g}) {r.detail}")
    if args.out:
        _write(Path(args.out), json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK if doc["all_passed"] else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nonmarkov", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, out_help):
        sp.add_argument("--tol", type=float, default=1e-8, help="SDP gap and feasibility tolerance")
        sp.add_argument("--out", default=None, help=out_help)
        sp.add_argument("--parallel", type=int, default=None, metavar="N", help="worker processes")

    sp = sub.add_parser("robustness", help="generalized robustness of a state file")
    sp.add_argument("state")
    sp.add_argument("--method", choices=["primal", "dual", "both"], default="both")
    common(sp, "result JSON path (default: stdout)")
    sp.set_defaults(func=cmd_robustness)

    sp = sub.add_parser("nm", help="non-Markovianity of a trajectory file")
    sp.add_argument("trajectory")
    sp.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    sp.add_argument("--name", default="report", help="output file stem")
    common(sp, f"output directory (default: ${OUT_ENV} or .)")
    sp.set_defaults(func=cmd_nm)

    sp = sub.add_parser("bec-sweep", help="scattering-length or separation sweep of the BEC model")
    sp.add_argument("--preset", default=None, help="BEC parameter JSON")
    sp.add_argument("--sweep", choices=["ae", "D"], default="ae")
    sp.add_argument("--values", type=float, nargs="*", default=None,
                    help="a_E/a_Rb values (ae sweep) or D/L values (D sweep)")
    sp.add_argument("--ae", type=float, nargs="*", default=None, help="a_E/a_Rb series for a D sweep")
    sp.add_argument("--grid", type=int, default=100, help="number of time samples")
    sp.add_argument("--tmax", type=float, default=None, help="final time in units of t0")
    sp.add_argument("--sigma", type=float, default=None, help="lattice-site width in units of L")
    sp.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    common(sp, f"output directory (default: ${OUT_ENV} or .)")
    sp.set_defaults(func=cmd_bec_sweep)

    sp = sub.add_parser("verify", help="run the built-in identity and bound audits")
    sp.add_argument("--quick", action="store_true")
    sp.add_argument("--factor", choices=["d2", "d"], default="d2", help="continuity-bound prefactor")
    sp.add_argument("--out", default=None, help="report JSON path")
    sp.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    for name in ("tol", "threshold"):
        if getattr(args, name, 1.0) is not None and getattr(args, name, 1.0) <= 0:
            print(f"error: --{name} must be positive", file=sys.stderr)
            return EXIT_VALIDATION
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
