"""Command line entry point.

Exit codes: 0 success, 1 verification failure, 2 usage or input error,
3 stop condition not reached within the step budget.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .dsl import RuleSyntaxError, extract_statechart, load_rules, lint
from .engine import ConfigError, Mode, NonTerminationError, parse_trace_tsv
from .fssp import (
    FsspError,
    Variant,
    build_instance,
    fuzz,
    load_instance,
    parse_squad,
    shipped_program,
    verify_phase_postconditions,
    verify_run,
    write_replay,
)
from .multiset import CountOverflowError
from .topology import TopologyError, bfs_levels, load_topology

OK, FAILED, USAGE, NONTERMINATION = 0, 1, 2, 3


class UsageError(Exception):
    pass


def cmd_run(args) -> int:
    topology = load_topology(args.system)
    if args.rules:
        program = load_rules(args.rules).program
    else:
        program = shipped_program(args.variant)
    if args.mode:
        program = replace(program, mode=Mode(args.mode))
    instance = build_instance(args.variant, topology, args.commander,
                              parse_squad(args.squad), program)
    status = OK
    try:
        trace = instance.run(args.max_steps)
    except NonTerminationError as exc:
        trace = exc.trace
        print(f"error: {exc}", file=sys.stderr)
        status = NONTERMINATION
    text = instance.trace_tsv(trace)
    if args.trace:
        Path(args.trace).write_text(text, encoding="utf-8")
        out = sys.stdout
    else:
        sys.stdout.write(text)
        out = sys.stderr
    if status == NONTERMINATION:
        return status
    report = verify_run(trace, instance)
    if report.fired:
        print(f"fired at step {report.firing_step}", file=out)
    else:
        print("did not fire", file=out)
    for msg in report.failures:
        print(f"FAIL: {msg}", file=out)
    return OK if report.ok else FAILED


def cmd_oracle(args) -> int:
    topology = load_topology(args.system)
    sys.stdout.write(bfs_levels(topology, args.commander).to_tsv())
    return OK


def cmd_verify(args) -> int:
    instance = load_instance(args.instance,
                             load_rules(args.rules).program if args.rules else None)
    columns, trace = parse_trace_tsv(Path(args.trace).read_text(encoding="utf-8"))
    if len(columns) != instance.topology.node_count or trace.start != 0:
        raise UsageError("trace does not match the instance (cell count or start step)")
    if trace.rows[0] != instance.config.cells:
        raise UsageError("trace row 0 is not the instance's initial configuration")
    report = verify_run(trace, instance)
    failures = list(report.failures)
    if instance.variant is Variant.STATIC:
        for c in verify_phase_postconditions(trace, instance):
            if not c.ok:
                got = c.actual.render(instance.program.alphabet) if c.actual else "missing"
                failures.append(f"phase {c.phase}: cell {c.cell} at step {c.step} is {got}, "
                                f"expected {c.expected.render(instance.program.alphabet)}")
    if report.fired:
        print(f"fired at step {report.firing_step} "
              f"(expected {instance.expected_firing_step()})")
    for label, flag in (("simultaneous", report.simultaneous), ("first time", report.first_time),
                        ("non-squad clean", report.non_squad_clean),
                        ("objects cleared", report.empty_at_end),
                        ("step count", report.formula_match)):
        print(f"{label}: {'ok' if flag else 'FAILED'}")
    for msg in failures:
        print(f"FAIL: {msg}")
    return OK if not failures else FAILED


def cmd_lint(args) -> int:
    diags = lint(load_rules(args.rules).program)
    for d in diags:
        print(d)
    return FAILED if any(d.severity == "error" for d in diags) else OK


def cmd_statechart(args) -> int:
    dot = extract_statechart(load_rules(args.rules).program).to_dot()
    if args.out:
        Path(args.out).write_text(dot, encoding="utf-8")
    else:
        sys.stdout.write(dot)
    return OK


def cmd_fuzz(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    variants = [Variant(v) for v in args.variants.split(",") if v]
    programs = {}
    if args.static_rules:
        programs[Variant.STATIC] = load_rules(args.static_rules).program
    if args.dynamic_rules:
        programs[Variant.DYNAMIC] = load_rules(args.dynamic_rules).program
    summary = fuzz(args.seed, args.n, args.max_nodes, variants, programs,
                   stop_on_failure=True)
    print(f"runs: {summary.runs} ({', '.join(f'{k} {v}' for k, v in summary.by_variant.items())})")
    print(f"phase checks: {summary.phase_checks}; static squads with multi-path cells: "
          f"{summary.multi_path_squads}")
    if summary.ok:
        print("failures: 0")
        return OK
    failure = summary.failures[0]
    replay = write_replay(failure, args.replay_dir)
    print(f"FAIL: case {failure.case.index} ({failure.case.variant.value}, "
          f"{failure.case.topology.kind.value}, {failure.case.topology.node_count} nodes)")
    for msg in failure.reasons[:10]:
        print(f"  {msg}")
    print(f"replay: {replay}")
    return FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="membrane-fssp",
        description="Firing squad synchronization in hyperdag / symmetric neural P systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate an instance and write its trace")
    p.add_argument("--system", required=True, help="topology file")
    p.add_argument("--variant", required=True, choices=[v.value for v in Variant])
    p.add_argument("--rules", help="rule file replacing the shipped program")
    p.add_argument("--commander", required=True, type=int)
    p.add_argument("--squad", required=True, help="comma separated node ids")
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--max-steps", type=int)
    p.add_argument("--trace", help="output TSV path (default: stdout)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("oracle", help="print the level table for a commander")
    p.add_argument("--system", required=True)
    p.add_argument("--commander", required=True, type=int)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("verify", help="check a trace against an instance file")
    p.add_argument("trace")
    p.add_argument("instance")
    p.add_argument("--rules")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("lint", help="static checks on a rule file")
    p.add_argument("rules")
    p.set_defaults(func=cmd_lint)

    p = sub.add_parser("statechart", help="export the state graph as DOT")
    p.add_argument("rules")
    p.add_argument("--out")
    p.set_defaults(func=cmd_statechart)

    p = sub.add_parser("fuzz", help="random instances of both algorithms")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--n", type=int, default=200, help="number of random structures")
    p.add_argument("--max-nodes", type=int, default=25)
    p.add_argument("--variants", default="dynamic,static")
    p.add_argument("--static-rules")
    p.add_argument("--dynamic-rules")
    p.add_argument("--replay-dir", default="fuzz-failures")
    p.set_defaults(func=cmd_fuzz)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CountOverflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILED
    except (UsageError, TopologyError, RuleSyntaxError, FsspError, ConfigError,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
