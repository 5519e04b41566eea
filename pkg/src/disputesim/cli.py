"""Batch command-line front end.

Subcommands wire the simulator and analysis modules to config files and
CSV/JSON outputs:

  simulate       run one full dispute, write result + transcript
  tables         emit the schedule tables (optimized / fixed / continuous)
  curve          emit delay-curve breakpoints
  search         exhaustive strategy search vs the greedy strategy
  fit            fit the three-term round bound per (K, G) pair
  verify-bounds  numerical checks of the round-bound machinery
  economics      bond / expense / delay table rows

Every run is reproducible from its config: outputs land in
out/<command>/<config-hash>/ with the echoed config alongside.  Exit
codes: 0 all checks passed (or honest claim won), 1 violation or
dishonest win, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time as _time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import adversary as adv
from . import analysis, bounds
from .clock import make_params
from .commitment import ENCODING_NOTE
from .errors import ConfigError, DisputeError
from .tournament import make_dispute, result_json, run_dispute, transcripts_json_lines
from .vm import HASH_NAME

_UNITS = {"s": 1, "h": 3600, "d": 86400, "w": 604800}


def parse_duration(text: str) -> int:
    """Whole seconds from '7200', '2h', '1.5d', '1w'."""
    text = text.strip()
    unit = 1
    if text and text[-1].lower() in _UNITS:
        unit = _UNITS[text[-1].lower()]
        text = text[:-1]
    try:
        value = float(text) * unit
    except ValueError as exc:
        raise ConfigError(f"bad duration {text!r}") from exc
    if value != int(value):
        raise ConfigError(f"duration {text!r} is not a whole number of seconds")
    return int(value)


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad integer list {text!r}") from exc


def load_config(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def apply_config(args: argparse.Namespace) -> None:
    """Fill argparse defaults from --config; explicit flags win."""
    if not getattr(args, "config", None):
        return
    subparser: argparse.ArgumentParser = args.subparser
    values = load_config(args.config)
    known = {
        action.dest.replace("_", "-"): action.dest
        for action in subparser._actions
        if action.dest not in ("help", "config", "subparser", "fn")
    }
    for key, value in values.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        dest = known[key]
        default = subparser.get_default(dest)
        if getattr(args, dest) == default:  # not overridden on the command line
            setattr(args, dest, value)


def _out_dir(args: argparse.Namespace, command: str, echo: dict) -> Path:
    canonical = "".join(f"{k}={echo[k]}\n" for k in sorted(echo))
    digest = hashlib.sha256(canonical.encode()).hexdigest()[:12]
    out = Path(args.out) / command / digest
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.echo").write_text(canonical)
    return out


def _report(args: argparse.Namespace, command: str, echo: dict, body: dict) -> dict:
    report = {
        "command": command,
        "config": {k: str(v) for k, v in sorted(echo.items())},
        "hash_function": HASH_NAME,
        "encoding": ENCODING_NOTE,
    }
    if not args.no_timestamp:
        report["generated_at"] = int(_time.time())
    report.update(body)
    return report


def _write_report(out: Path, report: dict) -> None:
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def _pmap(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--out", default="out", help="output root directory")
    p.add_argument("--no-timestamp", action="store_true", help="omit the report timestamp")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for grid commands")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    params = make_params(
        parse_duration(str(args.t_c)),
        parse_duration(str(args.t_m)),
        parse_duration(str(args.t_g)),
        int(args.group_size),
        tree_height=int(args.tree_height),
    )
    policy = adv.make_policy(str(args.adversary))
    echo = {
        "t-c": params.t_c,
        "t-m": params.t_m,
        "t-g": params.t_g,
        "group-size": params.group_size,
        "tree-height": params.tree_height,
        "n-claims": int(args.n_claims),
        "adversary": policy.name,
        "mode": args.mode,
        "seed": int(args.seed),
    }
    out = _out_dir(args, "simulate", echo)
    setup = make_dispute(params, int(args.n_claims), seed=int(args.seed))
    result = run_dispute(
        setup, policy, mode=str(args.mode), record_transcripts=bool(args.transcripts)
    )
    (out / "result.json").write_text(result_json(result) + "\n")
    if args.transcripts:
        (out / "transcript.jsonl").write_text(transcripts_json_lines(result) + "\n")
    report = _report(
        args,
        "simulate",
        echo,
        {
            "winner": result.winner,
            "rounds": result.rounds,
            "elapsed_seconds": result.elapsed_seconds,
            "honest_won": result.honest_won,
        },
    )
    _write_report(out, report)
    print(f"simulate: winner={result.winner} rounds={result.rounds} -> {out}")
    return 0 if result.honest_won else 1


# ---------------------------------------------------------------------------
# tables / curve / economics
# ---------------------------------------------------------------------------


def cmd_tables(args: argparse.Namespace) -> int:
    t_c = parse_duration(str(args.t_c))
    t_m = parse_duration(str(args.t_m))
    g_values = parse_int_list(str(args.g_values))
    exponents = parse_int_list(str(args.n_exponents))
    fixed_k = int(args.fixed_k)
    echo = {
        "table": args.table,
        "g-values": ",".join(map(str, g_values)),
        "n-exponents": ",".join(map(str, exponents)),
        "t-c": t_c,
        "t-m": t_m,
        "fixed-k": fixed_k,
        "with-economics": bool(args.with_economics),
    }
    out = _out_dir(args, "tables", echo)
    written = []
    if args.table in ("opt", "all"):
        rows = [
            analysis.optimize_grace(g, 2**e, t_c, t_m)
            for g in g_values
            for e in exponents
        ]
        with (out / "schedule_opt.csv").open("w", newline="") as fh:
            analysis.write_schedule_csv(fh, rows)
        written.append("schedule_opt.csv")
    if args.table in ("fixed", "all"):
        rows = [
            analysis.fixed_schedule(g, fixed_k, 2**e, t_c, t_m, mode="discrete")
            for g in g_values
            for e in exponents
        ]
        with (out / "schedule_fixed.csv").open("w", newline="") as fh:
            analysis.write_schedule_csv(fh, rows)
        written.append("schedule_fixed.csv")
    if args.table in ("continuous", "all"):
        rows = [
            analysis.fixed_schedule(g, fixed_k, 2**e, t_c, t_m, mode="continuous")
            for g in g_values
            for e in exponents
        ]
        with (out / "continuous.csv").open("w", newline="") as fh:
            analysis.write_schedule_csv(fh, rows)
        written.append("continuous.csv")
    if args.with_economics:
        rows = [
            analysis.economics(
                g, fixed_k, 2**e, Fraction(str(args.match_cost)), t_c=t_c, t_m=t_m
            )
            for g in g_values
            for e in exponents
        ]
        with (out / "economics.csv").open("w", newline="") as fh:
            analysis.write_economics_csv(fh, rows)
        written.append("economics.csv")
    _write_report(out, _report(args, "tables", echo, {"files": written}))
    print(f"tables: wrote {', '.join(written)} -> {out}")
    return 0


def cmd_curve(args: argparse.Namespace) -> int:
    k_max = int(args.k)
    group = int(args.g)
    n_max = int(args.n_max)
    echo = {"k": k_max, "g": group, "n-max": n_max}
    out = _out_dir(args, "curve", echo)
    points = analysis.delay_breakpoints(k_max, group, n_max)
    with (out / "delay_curve.csv").open("w", newline="") as fh:
        analysis.write_delay_curve_csv(fh, points)
    _write_report(out, _report(args, "curve", echo, {"breakpoints": len(points)}))
    print(f"curve: {len(points)} breakpoints -> {out}")
    return 0


def cmd_economics(args: argparse.Namespace) -> int:
    t_c = parse_duration(str(args.t_c))
    t_m = parse_duration(str(args.t_m))
    exponents = parse_int_list(str(args.n_exponents))
    echo = {
        "g": int(args.g),
        "k": int(args.k),
        "n-exponents": ",".join(map(str, exponents)),
        "match-cost": str(args.match_cost),
        "t-c": t_c,
        "t-m": t_m,
    }
    out = _out_dir(args, "economics", echo)
    rows = [
        analysis.economics(
            int(args.g), int(args.k), 2**e, Fraction(str(args.match_cost)), t_c=t_c, t_m=t_m
        )
        for e in exponents
    ]
    with (out / "economics.csv").open("w", newline="") as fh:
        analysis.write_economics_csv(fh, rows)
    _write_report(out, _report(args, "economics", echo, {"rows": len(rows)}))
    print(f"economics: {len(rows)} rows -> {out}")
    return 0


# ---------------------------------------------------------------------------
# search / fit / verify-bounds
# ---------------------------------------------------------------------------


def _search_point(point: tuple[int, int, int]) -> dict:
    k_max, group, n = point
    exhaustive, _ = adv.exhaustive_max_delay(k_max, group, n)
    greedy = analysis.max_delay_rounds(k_max, group, n)
    return {
        "k": k_max,
        "g": group,
        "n": n,
        "exhaustive": exhaustive,
        "greedy": greedy,
        "match": exhaustive == greedy,
    }


def cmd_search(args: argparse.Namespace) -> int:
    k_values = parse_int_list(str(args.k_values))
    g_values = parse_int_list(str(args.g_values))
    n_max = int(args.n_max)
    echo = {
        "k-values": ",".join(map(str, k_values)),
        "g-values": ",".join(map(str, g_values)),
        "n-max": n_max,
        "witness": bool(args.witness),
    }
    out = _out_dir(args, "search", echo)
    points = [(k, g, n) for k in k_values for g in g_values for n in range(2, n_max + 1)]
    results = _pmap(_search_point, points, args.jobs)
    mismatches = [r for r in results if not r["match"]]
    if args.witness:
        # round-by-round witness of one maximum-delay dispute per (K, G)
        witnesses = [
            {"k": k, "g": g, "n": n_max, "path": adv.exhaustive_max_delay(k, g, n_max)[1]}
            for k in k_values
            for g in g_values
        ]
        (out / "witness.json").write_text(
            json.dumps(witnesses, indent=2, sort_keys=True) + "\n"
        )
    _write_report(
        out,
        _report(
            args,
            "search",
            echo,
            {"points": len(results), "mismatches": mismatches, "ok": not mismatches},
        ),
    )
    print(f"search: {len(results)} points, {len(mismatches)} mismatches -> {out}")
    return 1 if mismatches else 0


def _fit_pair(job: tuple[int, int, int]) -> dict:
    k_max, group, n_max = job
    points = analysis.delay_breakpoints(k_max, group, n_max)
    fit = analysis.fit_bound(points)
    return {
        "k": k_max,
        "g": group,
        "alpha": round(fit.alpha, 6),
        "beta": round(fit.beta, 6),
        "gamma": round(fit.gamma, 6),
        "rms": round(fit.rms, 6),
        "max_abs_err": round(fit.max_abs_err, 6),
    }


def cmd_fit(args: argparse.Namespace) -> int:
    k_values = parse_int_list(str(args.k_values))
    g_values = parse_int_list(str(args.g_values))
    n_max = int(args.n_max)
    echo = {
        "k-values": ",".join(map(str, k_values)),
        "g-values": ",".join(map(str, g_values)),
        "n-max": n_max,
    }
    out = _out_dir(args, "fit", echo)
    jobs = [(k, g, n_max) for g in g_values for k in k_values]
    rows = _pmap(_fit_pair, jobs, args.jobs)
    with (out / "fit.csv").open("w", newline="") as fh:
        fh.write("K,G,alpha,beta,gamma,rms,max_abs_err\n")
        for r in rows:
            fh.write(
                f"{r['k']},{r['g']},{r['alpha']},{r['beta']},{r['gamma']},"
                f"{r['rms']},{r['max_abs_err']}\n"
            )
    worst_rms = max(r["rms"] for r in rows)
    worst_err = max(r["max_abs_err"] for r in rows)
    _write_report(
        out,
        _report(
            args,
            "fit",
            echo,
            {"pairs": len(rows), "worst_rms": worst_rms, "worst_max_abs_err": worst_err},
        ),
    )
    print(f"fit: {len(rows)} pairs, worst rms {worst_rms} -> {out}")
    return 0


def _dominance_pair(job: tuple[int, int, int]) -> list[dict]:
    k_max, group, n_max = job
    violations = []
    for point in analysis.delay_breakpoints(k_max, group, n_max):
        fitted = analysis.numerical_bound(k_max, group, point.n_claims)
        proven = bounds.settlement_bound(k_max, group, point.n_claims)
        if not (point.rounds < fitted and point.rounds < proven):
            violations.append(
                {"k": k_max, "g": group, "n": point.n_claims, "rounds": point.rounds}
            )
    return violations


def cmd_verify_bounds(args: argparse.Namespace) -> int:
    k_values = parse_int_list(str(args.k_values))
    g_values = parse_int_list(str(args.g_values))
    n_max = int(args.n_max)
    trace_k = parse_int_list(str(args.trace_k_values))
    trace_g = parse_int_list(str(args.trace_g_values))
    trace_n = int(args.trace_n_max)
    echo = {
        "k-values": ",".join(map(str, k_values)),
        "g-values": ",".join(map(str, g_values)),
        "n-max": n_max,
        "trace-k-values": ",".join(map(str, trace_k)),
        "trace-g-values": ",".join(map(str, trace_g)),
        "trace-n-max": trace_n,
        "hoeffding-samples": int(args.hoeffding_samples),
    }
    out = _out_dir(args, "verify-bounds", echo)
    checks = []

    dominance = [
        v
        for vs in _pmap(
            _dominance_pair, [(k, g, n_max) for g in g_values for k in k_values], args.jobs
        )
        for v in vs
    ]
    checks.append(
        {
            "check": "delay-under-fitted-and-proven-bounds",
            "grid": {"k": k_values, "g": g_values, "n_max": n_max},
            "violations": dominance,
        }
    )

    trace_violations = []
    ramp_violations = []
    threshold_violations = []
    for g in trace_g:
        for k in trace_k:
            for n in range(2, trace_n + 1):
                trace = adv.greedy_trace(k, g, n)
                for j in range(1, len(trace)):
                    if not bounds.recurrence_check(trace[j - 1], trace[j], g):
                        trace_violations.append({"k": k, "g": g, "n": n, "round": j})
                for j, dist in enumerate(trace):
                    if not bounds.ramp_bound_check(dist, n, j, g):
                        ramp_violations.append({"k": k, "g": g, "n": n, "round": j})
                j_star = bounds.j_threshold(k, g, n)
                at = trace[min(j_star, len(trace) - 1)]
                if not bounds.under_slope4_ramp(at):
                    threshold_violations.append({"k": k, "g": g, "n": n, "j": j_star})
    trace_grid = {"k": trace_k, "g": trace_g, "n_max": trace_n}
    checks.append(
        {
            "check": "per-round-recurrence",
            "grid": trace_grid,
            "violations": trace_violations,
        }
    )
    checks.append(
        {"check": "ramp-bound", "grid": trace_grid, "violations": ramp_violations}
    )
    checks.append(
        {
            "check": "slope4-ramp-at-threshold",
            "grid": trace_grid,
            "violations": threshold_violations,
        }
    )

    import random

    rng = random.Random(20240901)
    hoeffding_violations = []
    for _ in range(int(args.hoeffding_samples)):
        n = rng.randint(1, 200)
        g = rng.choice([2, 3, 4, 8])
        p = 1.0 - 1.0 / g
        k = rng.randint(0, int(n * p))
        if not bounds.hoeffding_tail_check(n, p, k):
            hoeffding_violations.append({"n": n, "p": p, "k": k})
    checks.append(
        {
            "check": "hoeffding-tail",
            "grid": {"samples": int(args.hoeffding_samples)},
            "violations": hoeffding_violations,
        }
    )

    ok = all(not c["violations"] for c in checks)
    _write_report(out, _report(args, "verify-bounds", echo, {"checks": checks, "ok": ok}))
    for c in checks:
        print(f"verify-bounds: {c['check']}: {len(c['violations'])} violations")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="disputesim", description="fraud-proof dispute simulator and analyzer"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one full dispute")
    _add_common(p)
    p.add_argument("--n-claims", default=2)
    p.add_argument("--tree-height", default=4)
    p.add_argument("--t-c", default="1w")
    p.add_argument("--t-m", default="2h")
    p.add_argument("--t-g", default="8h")
    p.add_argument("--group-size", default=4)
    p.add_argument("--adversary", default="stall", choices=adv.POLICIES)
    p.add_argument("--mode", default="discrete", choices=("discrete", "continuous"))
    p.add_argument("--seed", default=0)
    p.add_argument("--transcripts", action="store_true")
    p.set_defaults(fn=cmd_simulate, subparser=p)

    p = sub.add_parser("tables", help="emit schedule tables")
    _add_common(p)
    p.add_argument("--table", default="all", choices=("opt", "fixed", "continuous", "all"))
    p.add_argument("--g-values", default="2,4,8")
    p.add_argument("--n-exponents", default="4,8,12,16")
    p.add_argument("--t-c", default="1w")
    p.add_argument("--t-m", default="2h")
    p.add_argument("--fixed-k", default=21)
    p.add_argument("--with-economics", action="store_true")
    p.add_argument("--match-cost", default="0.05")
    p.set_defaults(fn=cmd_tables, subparser=p)

    p = sub.add_parser("curve", help="delay-curve breakpoints")
    _add_common(p)
    p.add_argument("--k", default=21)
    p.add_argument("--g", default=4)
    p.add_argument("--n-max", default=1 << 16)
    p.set_defaults(fn=cmd_curve, subparser=p)

    p = sub.add_parser("search", help="exhaustive vs greedy strategy")
    _add_common(p)
    p.add_argument("--k-values", default="3,4,5,6")
    p.add_argument("--g-values", default="2,3")
    p.add_argument("--n-max", default=40)
    p.add_argument("--witness", action="store_true")
    p.set_defaults(fn=cmd_search, subparser=p)

    p = sub.add_parser("fit", help="fit the round bound")
    _add_common(p)
    p.add_argument("--k-values", default="8,16,24,32,40")
    p.add_argument("--g-values", default="2,4,8")
    p.add_argument("--n-max", default=1 << 24)
    p.set_defaults(fn=cmd_fit, subparser=p)

    p = sub.add_parser("verify-bounds", help="numerical bound checks")
    _add_common(p)
    p.add_argument("--k-values", default="2,4,8,16,24,32,40")
    p.add_argument("--g-values", default="2,4,8")
    p.add_argument("--n-max", default=1 << 24)
    p.add_argument("--trace-k-values", default="3,4,5,6")
    p.add_argument("--trace-g-values", default="2,3")
    p.add_argument("--trace-n-max", default=40)
    p.add_argument("--hoeffding-samples", default=500)
    p.set_defaults(fn=cmd_verify_bounds, subparser=p)

    p = sub.add_parser("economics", help="bond and expense table")
    _add_common(p)
    p.add_argument("--g", default=4)
    p.add_argument("--k", default=21)
    p.add_argument("--n-exponents", default="1,20")
    p.add_argument("--match-cost", default="0.05")
    p.add_argument("--t-c", default="1w")
    p.add_argument("--t-m", default="2h")
    p.set_defaults(fn=cmd_economics, subparser=p)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        apply_config(args)
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DisputeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
