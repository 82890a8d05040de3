"""Command-line front end: ``run``, ``sweep`` and ``validate`` a scenario file.

Exit codes: 0 success, 1 invalid scenario / failed validation, 2 runtime abort.
"""

from __future__ import annotations

import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
import sys
from typing import Sequence

from .allocator import CLFViolationError
from .scenario import Scenario, ScenarioError, load_scenario, validate_scenario
from .simulator import EtaSchedule, SimulationAborted, SimulationRecord, run

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ABORT = 2


def _fmt(x: float) -> str:
    return f"{x:.16e}"


def record_header(record: SimulationRecord, N: int, d: int) -> list[str]:
    n = record.n_rel
    return (
        ["t"]
        + [f"xi_{i + 1}" for i in range(n)]
        + [f"nu_{i + 1}" for i in range(n)]
        + [f"q_{i + 1}" for i in range(N)]
        + [f"T_{i + 1}" for i in range(d * N)]
        + ["V", "branch"]
    )


def write_record_csv(record: SimulationRecord, stream, N: int, d: int) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(record_header(record, N, d))
    for k in range(len(record)):
        row = [_fmt(record.t[k])]
        row += [_fmt(v) for v in record.Xi[k]]
        row += [_fmt(v) for v in record.q[k]]
        row += [_fmt(v) for v in record.T[k]]
        row += [_fmt(record.V[k]), str(record.branch[k])]
        w.writerow(row)


def summary_line(record: SimulationRecord) -> str:
    # repr keeps every digit so the line matches the record exactly
    return (
        f"I_t={record.impulse!r} N*s final_xi_norm={record.final_xi_norm!r} m "
        f"final_Xi_norm={record.final_Xi_norm!r} samples={len(record)}"
    )


def _parse_schedule(text: str) -> EtaSchedule:
    # "0:1.0,300:0.99"
    segs = []
    for part in text.split(","):
        t, _, eta = part.partition(":")
        segs.append((float(t), float(eta)))
    return EtaSchedule(tuple(segs))


def _load(args) -> Scenario:
    s = load_scenario(args.scenario)
    eta = None
    if getattr(args, "eta", None) is not None:
        eta = args.eta
    elif getattr(args, "eta_schedule", None):
        eta = _parse_schedule(args.eta_schedule)
    return s.with_overrides(
        eta=eta, dt=args.dt, t_f=args.tf, q_max=args.qmax, substeps=args.substeps, output=args.out
    )


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def cmd_run(args) -> int:
    try:
        s = _load(args)
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        rec = run(s.model, s.desired, s.clf, s.allocator_config, s.sim, s.initial)
    except SimulationAborted as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except CLFViolationError as exc:
        print(f"aborted: CLF violation: {exc}", file=sys.stderr)
        return EXIT_ABORT

    out, close = _open_out(s.output)
    try:
        write_record_csv(rec, out, s.model.N, s.model.d)
    finally:
        if close:
            out.close()
    print(summary_line(rec), file=sys.stderr if out is sys.stdout else sys.stdout)
    return EXIT_OK


def _sweep_row(job) -> tuple[float, str, str, str]:
    s, eta = job
    s = s.with_overrides(eta=eta)
    try:
        r = run(s.model, s.desired, s.clf, s.allocator_config, s.sim, s.initial)
    except (SimulationAborted, CLFViolationError) as exc:
        return eta, "", "", f"aborted: {exc}"
    return eta, repr(r.impulse), repr(r.final_xi_norm), "ok"


def cmd_sweep(args) -> int:
    try:
        s = _load(args)
        etas = [float(e) for e in args.etas.split(",")]
        for e in etas:
            if not 0.0 <= e <= 1.0:
                raise ValueError(f"eta value {e} outside [0, 1]")
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    jobs = [(s, e) for e in etas]
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_sweep_row, jobs))
    else:
        results = [_sweep_row(j) for j in jobs]
    partial = any(r[3] != "ok" for r in results)
    rows = [[repr(e), it, xi, status] for e, it, xi, status in results]

    # the scenario's output path belongs to `run`; sweeps go to --out or stdout
    out, close = _open_out(args.out)
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["eta", "I_t", "final_xi_norm", "status"])
        w.writerows(rows)
    finally:
        if close:
            out.close()
    return EXIT_ABORT if partial else EXIT_OK


def cmd_validate(args) -> int:
    checks, _ = validate_scenario(args.scenario)
    ok = True
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
        ok &= c.passed
    return EXIT_OK if ok else EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coulomb-formation",
        description="CLF-based charge/thrust allocation for hybrid Coulomb spacecraft formations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def overrides(p, eta=True):
        p.add_argument("scenario", help="scenario file, or a bundled name such as 'paper_square'")
        if eta:
            g = p.add_mutually_exclusive_group()
            g.add_argument("--eta", type=float, help="constant Coulomb share of the CLF decrease")
            g.add_argument("--eta-schedule", help="piecewise-constant schedule, e.g. '0:1.0,300:0.99'")
        p.add_argument("--dt", type=float, help="sampling period [s]")
        p.add_argument("--tf", type=float, help="final time [s]")
        p.add_argument("--qmax", type=float, help="charge cap [C]")
        p.add_argument("--substeps", type=int, help="RK4 substeps per hold interval")
        p.add_argument("--out", help="output CSV path ('-' for stdout)")

    p_run = sub.add_parser("run", help="simulate one scenario and write the per-sample CSV")
    overrides(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="impulse and final error for a list of constant eta values")
    overrides(p_sweep, eta=False)
    p_sweep.add_argument(
        "--etas", default="0,0.01,0.1,0.25,0.5,0.8,0.9,0.96,0.97,0.98,0.99,1.0", help="comma-separated eta values"
    )
    p_sweep.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="structural checks and CLF verification")
    p_val.add_argument("scenario")
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
