"""Operator command line: validation, trust reports, and exchange simulation.

Batch-only; all randomized subcommands take --seed and produce
byte-identical output for identical inputs.  Exit codes: 0 success,
1 domain error (invalid topology, unknown sensor, failed session),
2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

from .kljn import (
    BudgetExhaustedError,
    CurrentInjectionAttacker,
    KljnSessionConfig,
    WireSubstitutionAttacker,
    auth_bit_cost,
    run_key_exchange,
)
from .orchestrator import (
    apply_kill_event,
    establish_network_keys,
    load_state,
    save_state,
    state_to_json,
    trust_report,
)
from .topology import (
    Topology,
    TopologyFormatError,
    UnknownSensorError,
    bundled_topology_path,
    parse_topology,
    validate,
)
from .trust import (
    KillSwitchState,
    TrustCoefficients,
    coefficients_closed_form,
    coefficients_fixed_point,
    rank_peers,
    trust,
    trust_matrix,
)


class DomainError(ValueError):
    """User-facing failure that should exit 1 with a diagnostic."""


def _read_topology_text(arg: str) -> str:
    path = Path(arg)
    if path.exists():
        return path.read_text(encoding="utf-8")
    if arg in ("fig2", "fig2.json"):
        return bundled_topology_path("fig2").read_text(encoding="utf-8")
    raise DomainError(f"topology file not found: {arg}")


def _load_checked_topology(arg: str) -> Topology:
    t = parse_topology(_read_topology_text(arg))
    report = validate(t)
    if report.errors:
        details = "; ".join(issue.message for issue in report.errors)
        raise DomainError(f"invalid topology: {details}")
    return t


def _kill_state(kill_list: str | None, t: Topology) -> KillSwitchState:
    ks = KillSwitchState()
    if kill_list:
        for sensor in kill_list.split(","):
            sensor = sensor.strip()
            if not sensor:
                continue
            if not t.has_sensor(sensor):
                raise DomainError(f"--kill names unknown sensor {sensor!r}")
            ks.kill(sensor, note="cli flag")
    return ks


def _coefficients(args) -> TrustCoefficients:
    if getattr(args, "coefficients", "closed-form") == "fixed-point":
        return coefficients_fixed_point(args.tol if args.tol is not None else 1e-10)
    return coefficients_closed_form()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def matrix_to_csv(order, values, full_precision: bool = False) -> str:
    """Trust matrix as CSV, rows = evaluator, columns = evaluated peer."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sensor", *order])
    for row_id, row in zip(order, values):
        cells = [repr(float(v)) if full_precision else f"{v:.3f}" for v in row]
        writer.writerow([row_id, *cells])
    return buf.getvalue()


def _cmd_validate(args) -> int:
    t = parse_topology(_read_topology_text(args.topology))
    report = validate(t)
    for issue in report.errors:
        print(f"error [{issue.code}]: {issue.message}")
    for issue in report.warnings:
        print(f"warning [{issue.code}]: {issue.message}")
    if report.ok:
        print(f"ok: {len(t.sensors)} sensors, {len(t.kljn_edges)} KLJN edges")
        return 0
    return 1


def _cmd_trust(args) -> int:
    t = _load_checked_topology(args.topology)
    value = trust(t, _coefficients(args), _kill_state(args.kill, t), args.evaluator, args.peer)
    print(repr(value) if args.full_precision else f"{value:.3f}")
    return 0


def _cmd_trust_matrix(args) -> int:
    t = _load_checked_topology(args.topology)
    matrix = trust_matrix(t, _coefficients(args), _kill_state(args.kill, t))
    if args.format == "json":
        doc = {
            "order": matrix.order,
            "values": [[float(v) for v in row] for row in matrix.values],
        }
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    else:
        _emit(matrix_to_csv(matrix.order, matrix.values, args.full_precision), args.out)
    return 0


def _cmd_rank(args) -> int:
    t = _load_checked_topology(args.topology)
    ranking = rank_peers(t, _coefficients(args), _kill_state(args.kill, t), args.evaluator)
    lines = [f"{sensor},{value:.3f}" for sensor, value in ranking]
    _emit("\n".join(lines) + ("\n" if lines else ""), args.out)
    return 0


def _cmd_coefficients(args) -> int:
    closed = coefficients_closed_form()
    doc = {
        "a": closed.a,
        "b": closed.b,
        "c": closed.c,
        "residuals": dict(zip(("a", "b", "c"), closed.residuals())),
    }
    if args.check is not None:
        numeric = coefficients_fixed_point(args.check)
        deviations = {
            "a": abs(closed.a - numeric.a),
            "b": abs(closed.b - numeric.b),
            "c": abs(closed.c - numeric.c),
        }
        doc["fixed_point"] = {"a": numeric.a, "b": numeric.b, "c": numeric.c}
        doc["deviations"] = deviations
        if max(deviations.values()) >= args.check:
            print(json.dumps(doc, indent=2))
            print(f"error: fixed-point solution deviates beyond {args.check}", file=sys.stderr)
            return 1
    if args.format == "json":
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    else:
        lines = [f"a = {closed.a!r}", f"b = {closed.b!r}", f"c = {closed.c!r}"]
        for name, residual in doc["residuals"].items():
            lines.append(f"residual_{name} = {residual:.3e}")
        if args.check is not None:
            for name, dev in doc["deviations"].items():
                lines.append(f"fixed_point_deviation_{name} = {dev:.3e}")
        _emit("\n".join(lines) + "\n", args.out)
    return 0


def _build_attacker(name: str, start: int, seed: int):
    if name == "none":
        return None
    if name == "wire-substitution":
        return WireSubstitutionAttacker(start_period=start, seed=seed)
    if name == "current-injection":
        return CurrentInjectionAttacker(start_period=start, seed=seed)
    raise DomainError(f"unknown attacker model {name!r}")


def _cmd_simulate_kljn(args) -> int:
    cfg = KljnSessionConfig(seed=args.seed)
    if args.tol is not None:
        cfg = replace(cfg, level_tolerance=args.tol)
    attacker = _build_attacker(args.attacker, args.attack_start, args.seed)

    exhausted = False
    try:
        result = run_key_exchange(cfg, args.bits, attacker=attacker)
    except BudgetExhaustedError as exc:
        result = exc.partial
        exhausted = True

    doc = {
        "config": {
            "r_low": cfg.r_low,
            "r_high": cfg.r_high,
            "t_eff": cfg.t_eff,
            "bandwidth": cfg.bandwidth,
            "samples_per_period": cfg.samples_per_period,
            "level_tolerance": cfg.level_tolerance,
            "data_word_bits": cfg.data_word_bits,
            "seed": cfg.seed,
        },
        "target_bits": args.bits,
        "attacker": args.attacker,
        "key_length": len(result.key_bits),
        "periods_used": result.periods_used,
        "discard_count": result.discard_count,
        "undecided_count": result.undecided_count,
        "attack_detected": result.attack_detected,
        "budget_exhausted": exhausted,
        "level_statistics": result.level_statistics,
        "auth_bits_per_word": auth_bit_cost(cfg.data_word_bits),
    }
    if args.emit_key:
        doc["key_hex"] = result.key_hex
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return 1 if (exhausted or result.attack_detected) else 0


def _cmd_establish(args) -> int:
    t = _load_checked_topology(args.topology)
    cfg = KljnSessionConfig(seed=args.seed)
    state = establish_network_keys(t, cfg, master_seed=args.seed, target_bits=args.bits)
    if args.out:
        save_state(state, args.out)
    else:
        sys.stdout.write(state_to_json(state))
    failed = sum(1 for r in state.records.values() if r.status == "failed")
    if failed:
        print(f"warning: {failed} record(s) failed", file=sys.stderr)
    return 0


def _cmd_kill(args) -> int:
    state = load_state(args.state)
    apply_kill_event(state, args.sensor, note=args.note)
    save_state(state, args.out or args.state)
    return 0


def _cmd_report(args) -> int:
    state = load_state(args.state)
    doc = trust_report(state, _coefficients(args))
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    if args.csv:
        text = matrix_to_csv(
            doc["matrix"]["order"], doc["matrix"]["values"], args.full_precision
        )
        Path(args.csv).write_text(text, encoding="utf-8")
    return 0


def _add_coefficient_flags(sub) -> None:
    sub.add_argument(
        "--coefficients",
        choices=["closed-form", "fixed-point"],
        default="closed-form",
        help="how to obtain the tier coefficients",
    )
    sub.add_argument("--tol", type=float, default=None, help="fixed-point solver tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kextrust",
        description="Key-exchange trust evaluation and wired exchange simulation",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("validate", help="check a topology document")
    p.add_argument("topology")
    p.set_defaults(handler=_cmd_validate)

    p = subs.add_parser("trust", help="trust of one sensor in another")
    p.add_argument("topology")
    p.add_argument("evaluator")
    p.add_argument("peer")
    p.add_argument("--kill", default=None, help="comma-separated compromised sensors")
    p.add_argument("--full-precision", action="store_true")
    _add_coefficient_flags(p)
    p.set_defaults(handler=_cmd_trust)

    p = subs.add_parser("trust-matrix", help="all-pairs trust values")
    p.add_argument("topology")
    p.add_argument("--kill", default=None, help="comma-separated compromised sensors")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--full-precision", action="store_true")
    p.add_argument("--out", default=None)
    _add_coefficient_flags(p)
    p.set_defaults(handler=_cmd_trust_matrix)

    p = subs.add_parser("rank", help="peers of a sensor by descending trust")
    p.add_argument("topology")
    p.add_argument("evaluator")
    p.add_argument("--kill", default=None)
    p.add_argument("--out", default=None)
    _add_coefficient_flags(p)
    p.set_defaults(handler=_cmd_rank)

    p = subs.add_parser("coefficients", help="tier coefficients and residuals")
    p.add_argument("--check", type=float, default=None, metavar="TOL",
                   help="cross-check against the fixed-point solver at TOL")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_coefficients)

    p = subs.add_parser("simulate-kljn", help="run one wired key-exchange session")
    p.add_argument("--bits", type=int, default=128, help="target key length")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=None, help="level classification tolerance")
    p.add_argument("--attacker", choices=["none", "wire-substitution", "current-injection"],
                   default="none")
    p.add_argument("--attack-start", type=int, default=0, metavar="PERIOD")
    p.add_argument("--emit-key", action="store_true",
                   help="include the key as hex in the report")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_simulate_kljn)

    p = subs.add_parser("establish", help="establish keys for every sensor pair")
    p.add_argument("topology")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--bits", type=int, default=128, help="key length per wired session")
    p.add_argument("--out", default=None, help="state file (stdout if omitted)")
    p.set_defaults(handler=_cmd_establish)

    p = subs.add_parser("kill", help="mark a sensor compromised in a state file")
    p.add_argument("state")
    p.add_argument("sensor")
    p.add_argument("--note", default="")
    p.add_argument("--out", default=None, help="write here instead of in place")
    p.set_defaults(handler=_cmd_kill)

    p = subs.add_parser("report", help="trust report for an established state")
    p.add_argument("state")
    p.add_argument("--out", default=None)
    p.add_argument("--csv", default=None, help="also write the matrix as CSV here")
    p.add_argument("--full-precision", action="store_true")
    _add_coefficient_flags(p)
    p.set_defaults(handler=_cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (DomainError, TopologyFormatError, UnknownSensorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
