"""Acceptance gate. Each test prints one PASS/FAIL line for its criterion."""
import random
import time

import pytest

from conftest import GOLDEN
from membrane_fssp.engine import apply_cell
from membrane_fssp.fssp import (
    Variant,
    build_instance,
    check_case,
    generate_cases,
    random_graph,
    random_layered_dag,
    random_tree,
    shipped_program,
    verify_phase_postconditions,
    verify_run,
)
from membrane_fssp.multiset import Multiset
from membrane_fssp.topology import Kind, bfs_levels, brute_force_counts
from test_topology import FIG1, FIG2, FIG3

FUZZ_SEED = 1
FUZZ_STRUCTURES = 200


@pytest.fixture
def report(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
        return ok
    return emit


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def test_criterion_1_table1(fig1, report):
    def go():
        inst = build_instance("dynamic", fig1, 3, [1, 2, 3, 4, 5])
        trace = inst.run()
        return inst, trace, inst.trace_tsv(trace)

    (inst, trace, text), secs = _timed(go)
    rep = verify_run(trace, inst)
    identical = text.encode() == (GOLDEN / "table1.tsv").read_bytes()
    ok = (identical and rep.ok and rep.firing_step == 7 == inst.level_table.eccentricity + 5
          and len(trace) == 8 and len(inst.columns()) == 8 and secs < 1)
    report(1, ok, f"byte-identical={identical}, fired at {rep.firing_step}, {secs:.3f}s")
    assert ok


def test_criterion_2_table2(fig2, report):
    def go():
        inst = build_instance("static", fig2, 6, [4, 5, 6, 7, 9, 10])
        trace = inst.run()
        return inst, trace, inst.trace_tsv(trace)

    (inst, trace, text), secs = _timed(go)
    rep = verify_run(trace, inst)
    identical = text.encode() == (GOLDEN / "table2.tsv").read_bytes()

    # The squad listed alongside the table (1 instead of 6) changes only the
    # f marks of cells 1 and 6 and which of the two fires; it must still work.
    stated = build_instance("static", fig2, 6, [1, 4, 5, 7, 9, 10])
    stated_trace = stated.run()
    stated_rep = verify_run(stated_trace, stated)
    changed = {x for t in range(26) for x in range(1, 11)
               if stated_trace.cell(t, x) != trace.cell(t, x)}

    ok = (identical and rep.ok and rep.firing_step == 25 == 6 * 3 + 7 and len(trace) == 26
          and stated_rep.ok and stated_rep.firing_step == 25 and changed == {1, 6}
          and secs < 1)
    report(2, ok, f"byte-identical={identical} (squad 4,5,6,7,9,10 as in row 0), "
                  f"fired at {rep.firing_step}; squad 1,4,5,7,9,10 fires at "
                  f"{stated_rep.firing_step}, differs only in cells {sorted(changed)}; {secs:.3f}s")
    assert ok


def test_criterion_3_oracle_tables(fig1, fig2, fig3, report):
    tables = (bfs_levels(fig1, 3).rows() == FIG1, bfs_levels(fig2, 6).rows() == FIG2,
              bfs_levels(fig3, 1).rows() == FIG3)
    rng = random.Random(2024)
    makers = (random_tree, random_layered_dag, random_graph)
    kinds = set()
    mismatches = 0
    for i in range(100):
        topo = makers[i % 3](rng, rng.randint(2, 12))
        kinds.add(topo.kind)
        c = rng.randint(1, topo.node_count)
        if bfs_levels(topo, c).count != brute_force_counts(topo, c):
            mismatches += 1
    ok = all(tables) and mismatches == 0 and kinds == set(Kind)
    report(3, ok, f"fig tables match={tables}, brute-force mismatches {mismatches}/100")
    assert ok


@pytest.fixture(scope="module")
def fuzz_results():
    cases = generate_cases(FUZZ_SEED, FUZZ_STRUCTURES, 25)
    t0 = time.perf_counter()
    results = []
    for case in cases:
        inst = build_instance(case.variant, case.topology, case.commander, case.squad)
        trace = inst.run()
        phases = (verify_phase_postconditions(trace, inst)
                  if case.variant is Variant.STATIC else [])
        results.append((case, inst, verify_run(trace, inst), phases))
    return results, time.perf_counter() - t0


def test_criterion_4_fuzz(fuzz_results, report):
    results, secs = fuzz_results
    failures = [(c.index, c.variant.value, r.failures) for c, _, r, _ in results if not r.ok]
    static = [(c, i) for c, i, _, _ in results if c.variant is Variant.STATIC]
    coverage = {
        "tree": any(c.topology.kind is Kind.TREE for c, _ in static),
        "multi-path dag": any(c.topology.kind is Kind.DAG
                              and max(i.level_table.count.values()) >= 2 for c, i in static),
        "graph": any(c.topology.kind is Kind.GRAPH for c, _ in static),
        "singleton": any(len(c.squad) == 1 for c, _ in static),
        "full": any(len(c.squad) == c.topology.node_count for c, _ in static),
        "commander-in-squad": any(c.commander in c.squad for c, _ in static),
        "count>=2 squad cell": any(any(i.level_table.count[x] >= 2 for x in c.squad)
                                   for c, i in static),
    }
    timing = all(r.formula_match for _, _, r, _ in results)
    ok = (not failures and timing and len(results) >= 200 and all(coverage.values())
          and secs < 60)
    report(4, ok, f"{len(results)} runs from {FUZZ_STRUCTURES} structures, "
                  f"{len(failures)} failures, coverage={all(coverage.values())}, {secs:.1f}s")
    assert ok, failures[:5] or coverage


def test_criterion_5_phase_postconditions(fuzz_results, report):
    results, _ = fuzz_results
    checks = [p for _, _, _, ps in results for p in ps]
    bad = [(p.cell, p.phase, p.step) for p in checks if not p.ok]
    ok = bool(checks) and not bad
    report(5, ok, f"{len(checks)} phase checks, {len(bad)} failures")
    assert ok, bad[:5]


def test_criterion_6_cell_transitions(fig1, fig2, report):
    t1 = build_instance("dynamic", fig1, 3, [1, 2, 3, 4, 5])
    t2 = build_instance("static", fig2, 6, [4, 5, 6, 7, 9, 10])
    runs = {"dynamic": (t1, t1.run()), "static": (t2, t2.run())}
    # variant, cell, step, expected rule applications
    cases = [
        ("dynamic", 8, 3, [("6", 4)]),
        ("dynamic", 8, 5, [("8", 1)]),
        ("static", 6, 5, [("4.2", 1), ("4.3", 2)]),
        ("static", 6, 17, [("6.1", 1), ("6.2", 4)]),
        ("static", 6, 18, [("7.1", 1)]),
    ]
    results = []
    for variant, cell, t, apps in cases:
        inst, trace = runs[variant]
        now, nxt = trace.cell(t, cell), trace.cell(t + 1, cell)
        res = apply_cell(now.state, now.contents, inst.program)
        delivered = trace.reports[t].delivered.get(cell, Multiset())
        results.append(res.applications == apps and res.target == nxt.state
                       and res.leftover + res.produced_here + delivered == nxt.contents)
    ok = all(results)
    report(6, ok, "dynamic cell 8 steps 3->4, 5->6; static cell 6 steps 5->6, 17->18->19: "
                  f"{results}")
    assert ok


MUTATION_SEEDS = (1, 2, 3)


def _killing_case(mutant, batches):
    for cases in batches:
        for case in cases:
            reasons, _ = check_case(case, mutant)
            if reasons:
                return case
    return None


def test_criterion_7_mutation_sensitivity(report):
    survivors = []
    killed = 0
    rule_84_case = None
    for variant in Variant:
        program = shipped_program(variant)
        batches = [generate_cases(seed, FUZZ_STRUCTURES, 25, [variant]) for seed in MUTATION_SEEDS]
        for rule in program.rules:
            case = _killing_case(program.without(rule.label), batches)
            if case is None:
                survivors.append(f"{variant.value} {rule.label}")
                continue
            killed += 1
            if variant is Variant.STATIC and rule.label == "8.4":
                rule_84_case = case
    counts = bfs_levels(rule_84_case.topology, rule_84_case.commander).count if rule_84_case else {}
    multi = rule_84_case is not None and any(counts[x] >= 2 for x in rule_84_case.squad)
    ok = not survivors and multi
    report(7, ok, f"{killed} mutants killed, survivors: {survivors or 'none'}; "
                  f"8.4 killed on a squad with a count>=2 cell: {multi}")
    assert ok, f"surviving deletions: {survivors}"
