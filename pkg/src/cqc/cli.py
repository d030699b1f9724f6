"""Command-line front end: ``cqc {ideal,analyze,sweep,simulate,solve}``.

Exit codes are part of the interface: 0 ok, 2 usage, 3 vulnerability
(m'_k < 0), 4 invalid strategy, 5 I/O, 6 statistical mismatch,
7 infeasible target.
"""

from __future__ import annotations

import argparse
import csv
import enum
import io
import json
import math
import os
import sys

from .attack import solve_strategy
from .errors import CQCError, StrategyError
from .imperfections import CurveShape, DetectorModel, EfficiencyCurve
from .keyrate import key_rate
from .montecarlo import SimConfig, compare, simulate
from .protocol import BeamSplitter, Observables, ideal_observables
from .scenario import Scenario, analyze, sweep_rows


class Exit(enum.IntEnum):
    OK = 0
    USAGE = 2
    VULNERABLE = 3
    INVALID_STRATEGY = 4
    IO = 5
    MISMATCH = 6
    INFEASIBLE = 7


def fmt(x: float) -> str:
    """12 significant digits, '.' decimal point whatever the locale."""
    return format(x, ".12g")


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _emit_json(doc) -> None:
    sys.stdout.write(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")


def _emit_block(title: str, values: dict) -> None:
    print(f"[{title}]")
    width = max(len(k) for k in values)
    for k, v in values.items():
        print(f"  {k:<{width}} = {fmt(v) if isinstance(v, float) else v}")


class UsageError(Exception):
    pass


def _probability(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (0.0 <= v <= 1.0):
        raise argparse.ArgumentTypeError(f"must be in [0, 1], got {v}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be a decimal integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit an unsigned 64-bit integer")
    return v


def _default_seed() -> int:
    raw = os.environ.get("CQC_DEFAULT_SEED")
    if raw is None:
        return 0
    try:
        return _seed(raw.strip())
    except argparse.ArgumentTypeError as exc:
        raise UsageError(f"CQC_DEFAULT_SEED: {exc}") from None


def _load_scenario(args) -> Scenario:
    sc = Scenario.load(args.scenario)
    if args.R is not None:
        sc = sc.with_value("R", args.R)
    return sc


# -- commands -----------------------------------------------------------------


def cmd_ideal(args) -> int:
    bs = BeamSplitter.from_reflectance(args.R)
    obs = ideal_observables(bs)
    if obs.p_D1 > 0:
        rate = key_rate(obs, bs).as_dict()
    else:
        rate = {"qber": math.nan, "i_ab": 0.0, "i_ae": 0.0, "m_k": 0.0}
    if args.json:
        _emit_json({"R": bs.R, "T": bs.T, "observables": obs.as_dict(), "key_rate": rate})
    else:
        _emit_block("beam splitter", {"R": bs.R, "T": bs.T})
        _emit_block("observables", obs.as_dict())
        _emit_block("key rate", rate)
    return Exit.OK


def cmd_analyze(args) -> int:
    sc = _load_scenario(args)
    try:
        a = analyze(sc)
    except StrategyError as exc:
        return _report_violations(exc, args)
    rate = {"qber": a.qber, "i_ab": a.i_ab, "i_ae": a.i_ae, "m_k": a.m_k}
    imperfect = {
        "eta": a.eta,
        "p_d": a.p_d,
        "gamma_cmax": a.gamma_cmax,
        "delta_i_eta": a.delta_i_eta,
        "delta_m_k": a.delta_m_k,
        "m_k_prime": a.m_k_prime,
    }
    # an undefined bound cannot certify a positive rate
    vulnerable = not (a.m_k_prime >= 0.0)
    if args.json:
        doc = {
            "R": a.bs.R,
            "T": a.bs.T,
            "observables": a.measured.as_dict(),
            "key_rate": rate,
            "vulnerable": vulnerable,
            "notes": a.notes,
        }
        if not sc.ideal_detector:
            doc["imperfections"] = imperfect
        else:
            doc["key_rate"]["m_k_prime"] = a.m_k_prime
        _emit_json(doc)
    else:
        _emit_block("beam splitter", {"R": a.bs.R, "T": a.bs.T})
        _emit_block("observables", a.measured.as_dict())
        _emit_block("key rate", rate)
        if not sc.ideal_detector:
            _emit_block("imperfections", imperfect)
        for note in a.notes:
            print(f"note: {note}")
        if vulnerable:
            print("VULNERABLE: attacked key rate m'_k is not positive")
    return Exit.VULNERABLE if vulnerable else Exit.OK


def _report_violations(exc: StrategyError, args) -> int:
    if args.json:
        _emit_json({
            "error": "invalid-strategy",
            "violations": [
                {"kind": v.kind.value, "case": v.case.value, "magnitude": v.magnitude}
                for v in exc.violations
            ],
        })
    else:
        print("invalid attack strategy:", file=sys.stderr)
        for v in exc.violations:
            print(f"  {v.kind.value:<20} {v.case.value}  magnitude {fmt(v.magnitude)}", file=sys.stderr)
    return Exit.INVALID_STRATEGY


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def cmd_sweep(args) -> int:
    sc = _load_scenario(args)
    if not sc.sweep:
        raise UsageError("scenario has no sweep block")
    header, rows = sweep_rows(sc)
    text = _csv_text(header, rows)
    if args.out is not None:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"cannot write {args.out}: {exc}", file=sys.stderr)
            return Exit.IO
    if args.json:
        _emit_json({
            "variables": [axis.variable for axis in sc.sweep],
            "columns": header,
            "rows": rows,
        })
    elif args.out is None:
        sys.stdout.write(text)
    return Exit.OK


def cmd_simulate(args) -> int:
    sc = _load_scenario(args)
    seed = args.seed if args.seed is not None else _default_seed()
    cfg = SimConfig(args.trials, seed, args.shards)
    try:
        a = analyze(sc)
        strategy = sc.resolved_strategy(a.bs)
        detector = sc.resolved_detector
        if sc.eta is not None:
            detector = DetectorModel(EfficiencyCurve(CurveShape.FLAT, eta_max=sc.eta), detector.p_d)
        emp = simulate(a.bs, strategy, detector, cfg, shift=sc.shift)
    except StrategyError as exc:
        return _report_violations(exc, args)

    if sc.ideal_detector:
        fields = None
    else:
        # the closed forms only track efficiency on D3
        fields = ("p_D3", "p_e3")
    report = compare(emp, a.measured, args.z, fields)
    if args.json:
        _emit_json({
            "config": {"n_trials": cfg.n_trials, "seed": cfg.seed, "shards": cfg.shards},
            "empirical": emp.to_json_dict(),
            "comparison": report.to_json_dict(),
        })
    else:
        _emit_block("config", {"n_trials": cfg.n_trials, "seed": cfg.seed, "shards": cfg.shards})
        _emit_block("tallies", dict(emp.counts))
        _emit_block("estimates", emp.estimates.as_dict())
        _emit_block("std errors", dict(emp.std_errors))
        print(f"[comparison at z = {fmt(args.z)}]")
        for name, f in report.fields.items():
            status = "ok" if f.passed else "MISMATCH"
            print(f"  {name:<5} est {fmt(f.estimate):>14}  exp {fmt(f.expected):>14}  z {fmt(f.z):>10}  {status}")
        print("PASS" if report.passed else "FAIL")
    return Exit.OK if report.passed else Exit.MISMATCH


def cmd_solve(args) -> int:
    with open(args.target, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise UsageError("target must be a JSON object of observables")
    unknown = set(data) - set(Observables.field_names())
    if unknown:
        raise UsageError(f"unknown observables in target: {sorted(unknown)}")
    # missing fields default to 0, like unspecified strategy weights
    target = Observables(**{k: float(data.get(k, 0.0)) for k in Observables.field_names()})
    bs = BeamSplitter.from_reflectance(args.R)
    res = solve_strategy(target, bs, args.tol)

    if res.feasible and args.out is not None:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(res.strategy.dumps() + "\n")
        except OSError as exc:
            print(f"cannot write {args.out}: {exc}", file=sys.stderr)
            return Exit.IO
    if args.json:
        _emit_json({
            "feasible": res.feasible,
            "residual": res.residual,
            "residuals": dict(res.residuals),
            "strategy": res.strategy.to_json_dict(),
        })
    else:
        if res.feasible:
            if args.out is None:
                print(res.strategy.dumps())
            print(f"residual {fmt(res.residual)} <= tolerance {fmt(args.tol)}", file=sys.stderr)
        else:
            print(f"infeasible: best residual {fmt(res.residual)} > tolerance {fmt(args.tol)}")
            _emit_block("residuals", dict(res.residuals))
    return Exit.OK if res.feasible else Exit.INFEASIBLE


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cqc", description="Security analysis of counterfactual QKD under intercept-resend attacks."
    )
    sub = p.add_subparsers(dest="cmd", required=True)

    def add_common(sp):
        sp.add_argument("--json", action="store_true", help="emit a single JSON document")

    s = sub.add_parser("ideal", help="no-Eve statistics and key rate")
    s.add_argument("--R", type=_probability, required=True, help="beam-splitter reflectance")
    add_common(s)
    s.set_defaults(func=cmd_ideal)

    s = sub.add_parser("analyze", help="analytic pipeline for a scenario file")
    s.add_argument("scenario")
    s.add_argument("--R", type=_probability, default=None, help="override the scenario's R")
    add_common(s)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("sweep", help="parameter sweep to CSV")
    s.add_argument("scenario")
    s.add_argument("--out", default=None, help="CSV path (stdout if omitted)")
    s.add_argument("--R", type=_probability, default=None)
    add_common(s)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("simulate", help="Monte Carlo run compared with the closed forms")
    s.add_argument("scenario")
    s.add_argument("--trials", type=int, default=1_000_000)
    s.add_argument("--seed", type=_seed, default=None, help="default: $CQC_DEFAULT_SEED or 0")
    s.add_argument("--shards", type=int, default=1)
    s.add_argument("--z", type=float, default=4.0, help="z-score threshold")
    s.add_argument("--R", type=_probability, default=None)
    add_common(s)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("solve", help="find a strategy reproducing target observables")
    s.add_argument("target")
    s.add_argument("--R", type=_probability, required=True)
    s.add_argument("--out", default=None, help="strategy JSON path (stdout if omitted)")
    s.add_argument("--tol", type=float, default=1e-9)
    add_common(s)
    s.set_defaults(func=cmd_solve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args))
    except UsageError as exc:
        parser.exit(Exit.USAGE, f"cqc: error: {exc}\n")
    except StrategyError as exc:
        return _report_violations(exc, args)
    except (CQCError, json.JSONDecodeError) as exc:
        parser.exit(Exit.USAGE, f"cqc: error: {exc}\n")
    except OSError as exc:
        print(f"cqc: I/O error: {exc}", file=sys.stderr)
        return Exit.IO


if __name__ == "__main__":
    sys.exit(main())
