"""Command-line front end.

    gqgames geometry       --geometry eloily
    gqgames contextuality  --geometry doily --workers 4
    gqgames game classical --geometry eloily --players 4 --shots 10000
    gqgames game quantum   --geometry eloily --players 2
    gqgames invariant
    gqgames verify-all

Exit codes: 0 success, 1 a verification failed, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np

from . import acceptance, games, geometry, invariant, qsim
from . import contextuality as ctx

SCHEMA_VERSION = "1.0"
DEFAULTS = {"geometry": "eloily", "players": 2, "seed": 0, "shots": 1000, "workers": 1, "format": "text"}
SELECTORS = ("grid", "doily", "eloily", "w52", "mermin", "doily-2q")
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad flags or unreadable input; maps to exit code 2."""


def schema_path() -> Path:
    return geometry.data_path("report.schema.json")


def load_schema() -> dict:
    return json.loads(schema_path().read_text(encoding="utf-8"))


def validate_report(report: dict) -> None:
    jsonschema.validate(report, load_schema())


def resolve_geometry(selector: str) -> geometry.Geometry:
    if selector in SELECTORS:
        return geometry.build_named(selector)
    path = Path(selector)
    if not path.is_file():
        raise UsageError(f"unknown geometry {selector!r}: expected one of {', '.join(SELECTORS)} or a file")
    try:
        return geometry.load(path)
    except (geometry.GeometryFormatError, geometry.GeometryValidationError, OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def probability(value) -> dict:
    """Exact values keep their fraction; floats are paired with the nearest small one."""
    if isinstance(value, Fraction):
        return {"rational": f"{value.numerator}/{value.denominator}", "decimal": float(value)}
    frac = Fraction(value).limit_denominator(10**6)
    return {"rational": f"{frac.numerator}/{frac.denominator}", "decimal": min(1.0, max(0.0, round(value, 12)))}


# ---------------------------------------------------------------------------
# commands


def cmd_geometry(args, timing: dict) -> tuple[dict, bool]:
    g = resolve_geometry(args.geometry)
    spread_reason = geometry.spread_failure(g, g.negative_lines)
    order = geometry.gq_order(g)
    t0 = time.perf_counter()
    subs = {}
    if order is not None and g.n_points <= 27:
        subs = {k: len(geometry.enumerate_subgeometries(g, k)) for k in ("grid", "doily")}
    timing["subgeometries"] = time.perf_counter() - t0
    result = {
        "name": g.name,
        "points": g.n_points,
        "lines": g.n_lines,
        "negative_lines": len(g.negative_lines),
        "negative_spread": spread_reason is None,
        "spread_failure": spread_reason,
        "gq_order": list(order) if order else None,
        "subgeometries": subs,
        "point_labels": [g.label(k) for k in range(g.n_points)],
        "line_table": [
            {"points": list(g.line_labels(li)), "sign": ln.sign} for li, ln in enumerate(g.lines)
        ],
    }
    return result, True


def cmd_contextuality(args, timing: dict) -> tuple[dict, bool]:
    g = resolve_geometry(args.geometry)
    try:
        res = ctx.degree_of_contextuality(g, args.workers)
    except ctx.SearchTooLargeError as exc:
        raise UsageError(str(exc)) from exc
    timing["search"] = res.elapsed
    witness = {g.label(k): int(v) for k, v in enumerate(res.witness.values)}
    violated = sorted(ctx.violated_lines(g, res.witness).violated)
    result = {
        "geometry": g.name,
        "d": res.d,
        "hv_bound": g.n_lines - 2 * res.d,
        "lines": g.n_lines,
        "assignments": res.assignments,
        "minimal_assignments": res.minimal_count,
        "minimal_non_spread": res.non_spread_count,
        "witness": witness,
        "violated_lines": [" ".join(g.line_labels(li)) for li in violated],
    }
    return result, True


def _sample(spec, responder, args, exact: float) -> dict:
    transcripts = games.play(spec, responder, args.shots, args.seed)
    wins = sum(t.win for t in transcripts)
    out = {
        "rounds": args.shots,
        "wins": wins,
        "rate": wins / args.shots,
        "within_3_sigma": games.within_binomial(wins, args.shots, exact),
    }
    if args.transcripts:
        out["transcripts"] = [games.TRANSCRIPT_HEADER] + [
            t.to_record(spec.geometry) for t in transcripts[: args.transcripts]
        ]
    return out


def _classical(spec: games.GameSpec, args) -> tuple[dict, games.ClassicalStrategy]:
    g = spec.geometry
    if g.n_points <= games.MAX_SWEEP_POINTS:
        res, a, dev = games.optimal_assignment_value(spec)
        search = res.note
    else:
        try:
            a = ctx.degree_of_contextuality(g, args.workers).witness
        except ctx.SearchTooLargeError as exc:
            raise UsageError(str(exc)) from exc
        res, strategy = games.best_strategy_for_assignment(spec, a)
        search = (
            "minimal assignment from the exhaustive contextuality scan with its best deviation "
            "choice; restricted to assignment-derived strategies"
        )
        return _classical_result(res, search), strategy
    return _classical_result(res, search), games.strategy_from_assignment(g, a, dev)


def _classical_result(res, search: str) -> dict:
    return {"value": probability(res.value), "advantage": probability(1 - res.value), "search": search}


def _quantum(spec: games.GameSpec, args) -> tuple[dict, object]:
    g = spec.geometry
    if g.width == 2:
        if args.protocol != "joint":
            raise UsageError("delegation is implemented for the three-qubit games only")
        try:
            responder = qsim.skew_flip_responder(spec)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        state = "Bell pairs; the first player negates skew outcomes"
    else:
        try:
            vector = qsim.find_shared_state(qsim.SharedStateSpec.for_geometry(g, args.players))
        except (qsim.StateNotFoundError, ValueError) as exc:
            raise UsageError(f"{g.name}: {exc}") from exc
        responder = qsim.QuantumResponder(vector, args.players, g.width)
        state = "joint +1 eigenstate of every replicated point operator"
    p = qsim.quantum_win_probability(spec, responder)
    result = {"value": probability(p), "search": "exact enumeration of measurement branches", "state": state}
    if args.protocol != "joint":
        responder = qsim.DelegationResponder(
            responder.state, args.players, g.width, args.protocol == "delegation-3"
        )
    return result, responder


def cmd_game(args, timing: dict) -> tuple[dict, bool]:
    g = resolve_geometry(args.geometry)
    try:
        spec = games.GameSpec(g, args.players)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.mode == "classical" and args.protocol != "joint":
        raise UsageError("--protocol applies to quantum play")
    t0 = time.perf_counter()
    if args.mode == "classical":
        result, responder = _classical(spec, args)
    else:
        result, responder = _quantum(spec, args)
    timing["exact"] = time.perf_counter() - t0
    exact = result["value"]["decimal"]
    t0 = time.perf_counter()
    result["sampled"] = _sample(spec, responder, args, exact)
    timing["sampling"] = time.perf_counter() - t0
    return result, result["sampled"]["within_3_sigma"]


def cmd_invariant(args, timing: dict) -> tuple[dict, bool]:
    ok = True
    maxima = {}
    for kind in ("grid", "doily", "eloily"):
        res = invariant.max_i3(kind, args.workers)
        maxima[kind] = {"max": res.value, "hv_bound": res.hv_bound, "d": res.d, "direct_check": res.direct_check}
        ok &= res.value == res.hv_bound and res.direct_check
    solved = invariant.solve_sign_dressing()
    dressing = {
        "matches_solver": solved.signs == invariant.DRESSING.signs,
        "rank": solved.rank,
        "nullity": solved.nullity,
        "negated_points": sorted(
            invariant.slot_label(*s) for s in invariant.SLOTS
            if invariant.DRESSING.sign(invariant.slot_operator(*s).id) < 0
        ),
    }
    ok &= dressing["matches_solver"]
    doily = geometry.build_doily()
    pf = invariant.doily_pfaffian_all(doily)
    bits = np.arange(1 << doily.n_points)
    vals = np.where((bits[:, None] >> np.arange(doily.n_points)) & 1, -1, 1)
    chi = (doily.signs * vals[:, doily.line_points].prod(axis=2)).sum(axis=1)
    pfaff = {"max": int(pf.max()), "equals_chi": bool((pf == chi).all()), "assignments": int(bits.size)}
    ok &= pfaff["equals_chi"]
    g = invariant.canonical_eloily()
    rng = np.random.default_rng(args.seed)
    vals = rng.choice(np.array([-1, 1]), size=(args.shots, g.n_points))
    chi = (g.signs * vals[:, g.line_points].prod(axis=2)).sum(axis=1)
    i3 = invariant.i3_det(invariant.values_to_matrices(vals))
    spot = {"samples": args.shots, "passed": int((i3 == chi).sum())}
    ok &= spot["passed"] == spot["samples"]
    return {"max_i3": maxima, "dressing": dressing, "doily_pfaffian": pfaff, "i3_equals_chi": spot}, ok


def cmd_verify_all(args, timing: dict) -> tuple[dict, bool]:
    golden = None
    if args.geometry not in SELECTORS:
        golden = args.geometry
    elif args.geometry != "eloily":
        raise UsageError("verify-all takes the default geometry or a replacement labelling file")
    only = None
    if args.only:
        try:
            only = [int(x) - 1 for x in args.only.split(",")]
        except ValueError:
            raise UsageError(f"--only expects comma-separated criterion numbers, got {args.only!r}") from None
        if any(not 0 <= i < len(acceptance.CRITERIA) for i in only):
            raise UsageError(f"criteria are numbered 1..{len(acceptance.CRITERIA)}")
    results = acceptance.run_all(golden, args.workers, only)
    for r in results:
        timing[r.key] = r.elapsed
        if not args.quiet:
            print(r.line(), file=sys.stderr)
    entries = []
    for r in results:
        d = r.as_dict()
        d.pop("elapsed")
        entries.append(d)
    passed = sum(r.passed for r in results)
    return {"criteria": entries, "passed": passed, "total": len(results)}, passed == len(results)


COMMANDS = {
    "geometry": cmd_geometry,
    "contextuality": cmd_contextuality,
    "game": cmd_game,
    "invariant": cmd_invariant,
    "verify-all": cmd_verify_all,
}


# ---------------------------------------------------------------------------
# output


def _flatten(prefix: str, value, rows: list) -> None:
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, rows)
    elif isinstance(value, list) and value and isinstance(value[0], (dict, list)):
        for k, v in enumerate(value):
            _flatten(f"{prefix}.{k}", v, rows)
    elif isinstance(value, list):
        rows.append((prefix, " ".join(map(str, value))))
    else:
        rows.append((prefix, "" if value is None else value))


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True) + "\n"
    rows: list = []
    _flatten("", {k: v for k, v in report.items() if k not in ("config",)}, rows)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["key", "value"])
        for k, v in sorted(report["config"].items()):
            writer.writerow([f"config.{k}", v])
        writer.writerows(rows)
        return buf.getvalue()
    header = " ".join(f"{k}={v}" for k, v in sorted(report["config"].items()))
    lines = [f"# gqgames {report['command']} ({header})"]
    lines += [f"{k}: {v}" for k, v in rows]
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--geometry", default=DEFAULTS["geometry"],
                        help=f"{', '.join(SELECTORS)} or a geometry file (default: eloily)")
    common.add_argument("--players", type=int, choices=(2, 4), default=DEFAULTS["players"])
    common.add_argument("--seed", type=_seed, default=DEFAULTS["seed"], help="64-bit RNG seed (default: 0)")
    common.add_argument("--shots", type=_positive, default=DEFAULTS["shots"],
                        help="sampled rounds or spot checks (default: 1000)")
    common.add_argument("--workers", type=_positive, default=DEFAULTS["workers"],
                        help="threads for exhaustive searches (default: 1)")
    common.add_argument("--format", choices=("json", "csv", "text"), default=DEFAULTS["format"])
    common.add_argument("--output", help="write the report here instead of stdout")
    common.add_argument("--timing", action="store_true",
                        help="include wall-clock timings (makes JSON output run-dependent)")

    parser = argparse.ArgumentParser(prog="gqgames", description="Contextuality games on Pauli geometries.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("geometry", parents=[common], help="describe a geometry")
    sub.add_parser("contextuality", parents=[common], help="degree of contextuality by exhaustive search")
    game = sub.add_parser("game", parents=[common], help="classical or quantum value of a game")
    game.add_argument("mode", choices=("classical", "quantum"))
    game.add_argument("--protocol", choices=("joint", "delegation", "delegation-3"), default="joint",
                      help="how quantum players measure in sampled rounds (default: joint)")
    game.add_argument("--transcripts", type=int, default=0, metavar="N",
                      help="include the first N round records")
    sub.add_parser("invariant", parents=[common], help="I3 and Pfaffian checks")
    va = sub.add_parser("verify-all", parents=[common], help="run every acceptance criterion")
    va.add_argument("--only", help="comma-separated criterion numbers")
    va.add_argument("--quiet", action="store_true", help="no per-criterion lines on stderr")
    return parser


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = {k: getattr(args, k) for k in DEFAULTS}
    if args.command == "game":
        config["mode"] = args.mode
        config["protocol"] = args.protocol
    timing: dict = {}
    try:
        result, ok = COMMANDS[args.command](args, timing)
    except UsageError as exc:
        print(f"gqgames: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": args.command,
        "config": config,
        "status": "ok" if ok else "fail",
        "result": result,
    }
    if args.timing or args.format == "text":
        report["timing"] = {k: round(v, 4) for k, v in timing.items()}
    validate_report(report)
    text = render(report, args.format)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
