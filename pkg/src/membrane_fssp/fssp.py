"""Firing squad instances, their verification, and randomized checking.

Two programs ship with the package:

* ``dynamic``: an extra *sergeant* cell is attached to the commander and
  grows mobile channels to every squad cell; fires after ``e + 5`` steps.
* ``static``: four phases over the fixed structure; fires after
  ``6e + 7`` steps.

``e`` is always the commander's eccentricity in the original structure.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .dsl import parse_rules
from .engine import (
    QUIESCENCE,
    Cell,
    ChannelPolicy,
    RuleProgram,
    NonTerminationError,
    SystemConfig,
    Trace,
    make_config,
    run,
    trace_to_tsv,
)
from .multiset import CountOverflowError, Multiset
from .topology import (
    Kind,
    LevelTable,
    Topology,
    bfs_levels,
    build_topology,
    format_topology,
    load_topology,
)


class FsspError(ValueError):
    pass


class Variant(str, enum.Enum):
    DYNAMIC = "dynamic"
    STATIC = "static"


CHANNELS = ChannelPolicy("alpha", frozenset({"theta"}), frozenset({"omega"}))


def data_path(name: str) -> Path:
    return Path(str(resources.files("membrane_fssp") / "data" / name))


@lru_cache(maxsize=None)
def shipped_program(variant: Variant | str) -> RuleProgram:
    variant = Variant(variant)
    text = data_path(f"{variant.value}.rules").read_text(encoding="utf-8")
    return parse_rules(text).program


@dataclass(frozen=True)
class FsspInstance:
    variant: Variant
    base_topology: Topology
    commander: int
    squad: frozenset[int]
    level_table: LevelTable
    config: SystemConfig
    sergeant: int | None = None

    @property
    def topology(self) -> Topology:
        return self.config.topology

    @property
    def program(self) -> RuleProgram:
        return self.config.program

    def columns(self) -> list[int]:
        """Trace column order: sergeant (if any), then by level and id."""
        cols = self.level_table.order()
        return [self.sergeant, *cols] if self.sergeant else cols

    def expected_firing_step(self) -> int:
        return expected_firing_step(self.variant, self.level_table)

    def run(self, max_steps: int | None = None) -> Trace:
        return run(self.config, QUIESCENCE, max_steps, self.level_table)

    def trace_tsv(self, trace: Trace) -> str:
        return trace_to_tsv(trace, self.program.alphabet, self.columns())


def _check_squad(squad: Iterable[int], allowed: Iterable[int]) -> frozenset[int]:
    squad = frozenset(int(x) for x in squad)
    if not squad:
        raise FsspError("squad is empty: nothing to synchronize")
    bad = sorted(squad - set(allowed))
    if bad:
        raise FsspError(f"squad members {bad} are not cells of this system")
    return squad


def build_dynamic_instance(topology: Topology, commander: int, squad: Iterable[int],
                           program: RuleProgram | None = None) -> FsspInstance:
    """Attach the sergeant (node n+1) to the commander and mark the cells.

    Trees are extended as dags, since the commander may gain a second parent.
    """
    topology.neighbors(commander)
    n = topology.node_count
    sergeant = n + 1
    squad = _check_squad(squad, range(1, n + 2))
    if topology.kind is Kind.GRAPH:
        extended = topology.with_arcs([(sergeant, commander)], n + 1)
    else:
        extended = topology.with_arcs([(sergeant, commander)], n + 1, Kind.DAG)
    program = program or shipped_program(Variant.DYNAMIC)
    start = program.states[0]
    cells = {}
    for x in range(1, n + 2):
        objs = []
        if x == sergeant:
            objs.append("alpha")
        if x in squad:
            objs.append("f")
        cells[x] = Cell(start, Multiset(objs))
    config = make_config(extended, program, cells, CHANNELS)
    return FsspInstance(Variant.DYNAMIC, topology, commander, squad,
                        bfs_levels(topology, commander), config, sergeant)


def build_static_instance(topology: Topology, commander: int, squad: Iterable[int],
                          program: RuleProgram | None = None) -> FsspInstance:
    if topology.node_count < 2:
        raise FsspError("the static algorithm needs at least two cells")
    topology.neighbors(commander)
    squad = _check_squad(squad, topology.nodes)
    program = program or shipped_program(Variant.STATIC)
    start = program.states[0]
    cells = {}
    for x in topology.nodes:
        objs = ["a"] if x == commander else []
        if x in squad:
            objs.append("f")
        cells[x] = Cell(start, Multiset(objs))
    config = make_config(topology, program, cells)
    return FsspInstance(Variant.STATIC, topology, commander, squad,
                        bfs_levels(topology, commander), config)


def build_instance(variant: Variant | str, topology: Topology, commander: int,
                   squad: Iterable[int], program: RuleProgram | None = None) -> FsspInstance:
    if Variant(variant) is Variant.DYNAMIC:
        return build_dynamic_instance(topology, commander, squad, program)
    return build_static_instance(topology, commander, squad, program)


def expected_firing_step(variant: Variant | str, level_table: LevelTable) -> int:
    e = level_table.eccentricity
    return e + 5 if Variant(variant) is Variant.DYNAMIC else 6 * e + 7


# --- verification -----------------------------------------------------------

@dataclass
class VerificationReport:
    fired: bool = False
    firing_step: int | None = None
    simultaneous: bool = False
    first_time: bool = False
    non_squad_clean: bool = False
    empty_at_end: bool = False
    formula_match: bool = False
    phase_checks: list["PhaseCheck"] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def verify_run(trace: Trace, instance: FsspInstance) -> VerificationReport:
    """Check the firing squad contract on a recorded trace."""
    rep = VerificationReport()
    firing = instance.program.firing_state
    squad = sorted(instance.squad)
    others = [x for x in instance.topology.nodes if x not in instance.squad]
    expected = instance.expected_firing_step()
    steps = range(trace.start, trace.last_step + 1)

    first_entry = {}
    for x in squad:
        first_entry[x] = next((t for t in steps if trace.cell(t, x).state == firing), None)
    all_in = [t for t in steps if all(trace.cell(t, x).state == firing for x in squad)]
    if all_in:
        rep.fired = True
        rep.firing_step = F = all_in[0]
    else:
        rep.failures.append(f"squad never all in {firing} (trace ends at step {trace.last_step})")
        F = None

    entries = set(first_entry.values())
    rep.simultaneous = None not in entries and len(entries) == 1
    if not rep.simultaneous:
        detail = ", ".join(f"{x}@{t}" for x, t in first_entry.items())
        rep.failures.append(f"squad cells first enter {firing} at different steps: {detail}")
    if F is not None:
        early = [x for x in squad if first_entry[x] is not None and first_entry[x] < F]
        rep.first_time = not early
        if early:
            rep.failures.append(f"cells {early} were in {firing} before step {F}")
        rep.formula_match = F == expected
        if not rep.formula_match:
            rep.failures.append(f"fired at step {F}, expected {expected}")

    end = F if F is not None else trace.last_step
    rest = "s1" if instance.variant is Variant.DYNAMIC else instance.program.states[0]
    clean = True
    for x in others:
        visits = [t for t in steps if trace.cell(t, x).state == firing]
        if visits:
            clean = False
            rep.failures.append(f"non-squad cell {x} entered {firing} at step {visits[0]}")
        if trace.cell(end, x).state != rest:
            clean = False
            rep.failures.append(
                f"non-squad cell {x} is in {trace.cell(end, x).state} at step {end}, expected {rest}")
    rep.non_squad_clean = clean

    empty = True
    for x in instance.topology.nodes:
        want = Multiset()
        if instance.variant is Variant.DYNAMIC:
            if x == instance.sergeant:
                want = Multiset(["alpha"])
            elif x in instance.squad:
                want = Multiset(["omega"])
        got = trace.cell(end, x).contents
        if got != want:
            empty = False
            rep.failures.append(
                f"cell {x} holds {got.render(instance.program.alphabet) or 'nothing'} "
                f"at step {end}")
    rep.empty_at_end = empty and F is not None
    return rep


@dataclass(frozen=True)
class PhaseCheck:
    cell: int
    phase: str
    step: int
    expected: Cell
    actual: Cell | None

    @property
    def ok(self) -> bool:
        return self.actual == self.expected


def verify_phase_postconditions(trace: Trace, instance: FsspInstance) -> list[PhaseCheck]:
    """Per-cell state and contents at the end of each static phase.

    With level L, path count K and eccentricity E, a cell must be
    s2 at step L+2, s6 at 5E+2, s8 at 5E+5+L and fired/reset and empty at
    6E+7, holding exactly the objects listed below.
    """
    if instance.variant is not Variant.STATIC:
        raise FsspError("phase postconditions apply to the static variant only")
    lt = instance.level_table
    E = lt.eccentricity
    firing = instance.program.firing_state
    checks = []
    for x in instance.topology.nodes:
        L, K = lt.level[x], lt.count[x]
        cmd = x == instance.commander
        f = {"f": 1} if x in instance.squad else {}
        expected = [
            ("I", L + 2, Cell("s2", Multiset({
                "a": K, "k": K,
                "l": sum(lt.count[z] for z in lt.peers[x]),
                "d": sum(lt.count[z] for z in lt.successors[x]),
                "e": 2 if cmd else 0, **f}))),
            ("II", 5 * E + 2, Cell("s6", Multiset({"a": K, "e": E + 2 if cmd else 0, **f}))),
            ("III", 5 * E + 5 + L, Cell("s8", Multiset({"a": K, "b": (E + 1 - L) * K, **f}))),
            ("IV", 6 * E + 7, Cell(firing if x in instance.squad else "s0")),
        ]
        for phase, t, want in expected:
            got = trace.cell(t, x) if trace.start <= t <= trace.last_step else None
            checks.append(PhaseCheck(x, phase, t, want, got))
    return checks


# --- instance files ---------------------------------------------------------

def format_instance(topology_ref: str, commander: int, squad: Iterable[int],
                    variant: Variant | str) -> str:
    return (f"topology: {topology_ref}\ncommander: {commander}\n"
            f"squad: {','.join(map(str, sorted(squad)))}\nvariant: {Variant(variant).value}\n")


def parse_squad(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.replace(" ", "").split(",") if tok]
    except ValueError:
        raise FsspError(f"bad squad list {text!r}") from None


def load_instance(path: str | Path, program: RuleProgram | None = None) -> FsspInstance:
    """Read an instance file; the topology path is relative to the file."""
    path = Path(path)
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        key = key.strip()
        if not sep or key not in ("topology", "commander", "squad", "variant"):
            raise FsspError(f"{path}:{lineno}: unexpected line {raw.strip()!r}")
        if key in fields:
            raise FsspError(f"{path}:{lineno}: duplicate '{key}'")
        fields[key] = value.strip()
    missing = {"topology", "commander", "squad", "variant"} - set(fields)
    if missing:
        raise FsspError(f"{path}: missing {sorted(missing)}")
    try:
        variant = Variant(fields["variant"])
    except ValueError:
        raise FsspError(f"{path}: unknown variant {fields['variant']!r}") from None
    if not fields["commander"].isdigit():
        raise FsspError(f"{path}: bad commander {fields['commander']!r}")
    topology = load_topology(path.parent / fields["topology"])
    return build_instance(variant, topology, int(fields["commander"]),
                          parse_squad(fields["squad"]), program)


# --- randomized checking ----------------------------------------------------

MAX_FUZZ_NODES = 25


def random_tree(rng: random.Random, n: int) -> Topology:
    order = list(range(1, n + 1))
    rng.shuffle(order)
    arcs = [(order[rng.randrange(i)], order[i]) for i in range(1, n)]
    return build_topology(Kind.TREE, n, arcs)


def random_graph(rng: random.Random, n: int) -> Topology:
    order = list(range(1, n + 1))
    rng.shuffle(order)
    edges = {(order[rng.randrange(i)], order[i]) for i in range(1, n)}
    for _ in range(rng.randint(0, n)):
        u, v = rng.sample(range(1, n + 1), 2) if n > 1 else (1, 1)
        if u != v:
            edges.add((u, v))
    return build_topology(Kind.GRAPH, n, edges)


def random_layered_dag(rng: random.Random, n: int) -> Topology:
    """Layered dag in which most nodes have several parents in the layer
    above, so level-preserving path counts above one are common."""
    order = list(range(1, n + 1))
    rng.shuffle(order)
    layers: list[list[int]] = []
    i = 0
    while i < n:
        size = rng.randint(1, min(4, n - i))
        layers.append(order[i:i + size])
        i += size
    rank = {x: k for k, x in enumerate(order)}
    arcs = set()
    for above, layer in zip(layers, layers[1:]):
        for x in layer:
            for p in rng.sample(above, rng.randint(1, min(3, len(above)))):
                arcs.add((p, x))
        if len(layer) > 1 and rng.random() < 0.3:
            u, v = sorted(rng.sample(layer, 2), key=rank.get)
            arcs.add((u, v))
    # Layers above may leave several weakly connected pieces; bridge them
    # along the global rank so the result stays acyclic.
    parent = {x: x for x in order}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in arcs:
        parent[find(u)] = find(v)
    for x in order[1:]:
        if find(x) != find(order[0]):
            y = rng.choice([z for z in order if find(z) == find(order[0])])
            u, v = sorted((x, y), key=rank.get)
            arcs.add((u, v))
            parent[find(x)] = find(y)
    return build_topology(Kind.DAG, n, arcs, include_siblings=rng.random() < 0.25)


@dataclass(frozen=True)
class FuzzCase:
    index: int
    variant: Variant
    topology: Topology
    commander: int
    squad: frozenset[int]

    def instance_text(self, topology_ref: str) -> str:
        return format_instance(topology_ref, self.commander, self.squad, self.variant)


def _pick_squad(rng: random.Random, case_kind: int, n: int, commander: int,
                variant: Variant, counts: dict[int, int]) -> set[int]:
    nodes = list(range(1, n + 1))
    if case_kind == 0:
        squad = {rng.choice(nodes)}
    elif case_kind == 1:
        squad = set(nodes)
    elif case_kind == 2:
        squad = {commander} | set(rng.sample(nodes, rng.randint(0, n - 1)))
    else:
        squad = set(rng.sample(nodes, rng.randint(1, n)))
        multi = [x for x in nodes if counts[x] >= 2]
        if multi:
            squad.add(rng.choice(multi))
    if variant is Variant.DYNAMIC and rng.random() < 0.2:
        squad.add(n + 1)
    return squad


def generate_cases(seed: int, instance_count: int, max_nodes: int,
                   variants: Sequence[Variant | str] = (Variant.DYNAMIC, Variant.STATIC)
                   ) -> list[FuzzCase]:
    """Reproducible random cases; each generated structure is used once per
    requested variant."""
    if not 2 <= max_nodes <= MAX_FUZZ_NODES:
        raise FsspError(f"max_nodes must be in 2..{MAX_FUZZ_NODES}")
    variants = [Variant(v) for v in variants]
    if not variants:
        raise FsspError("no variants requested")
    rng = random.Random(seed)
    makers = (random_tree, random_layered_dag, random_graph)
    cases = []
    for i in range(instance_count):
        n = rng.randint(2, max_nodes)
        topo = makers[i % 3](rng, n)
        commander = rng.randint(1, n)
        counts = bfs_levels(topo, commander).count
        for variant in variants:
            squad = _pick_squad(rng, (i // 3) % 4, n, commander, variant, counts)
            cases.append(FuzzCase(i, variant, topo, commander, frozenset(squad)))
    return cases


@dataclass
class FuzzFailure:
    case: FuzzCase
    reasons: list[str]


@dataclass
class FuzzSummary:
    runs: int = 0
    by_variant: dict[str, int] = field(default_factory=dict)
    phase_checks: int = 0
    multi_path_squads: int = 0
    failures: list[FuzzFailure] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def check_case(case: FuzzCase, program: RuleProgram | None = None,
               phases: bool = True) -> tuple[list[str], int]:
    """Run one case; returns failure reasons and the number of phase checks made."""
    inst = build_instance(case.variant, case.topology, case.commander, case.squad, program)
    try:
        trace = inst.run()
    except NonTerminationError as exc:
        return [str(exc)], 0
    except CountOverflowError as exc:
        return [f"count overflow: {exc}"], 0
    reasons = list(verify_run(trace, inst).failures)
    n_phase = 0
    if phases and case.variant is Variant.STATIC:
        checks = verify_phase_postconditions(trace, inst)
        n_phase = len(checks)
        for c in checks:
            if not c.ok:
                got = c.actual.render(inst.program.alphabet) if c.actual else "missing"
                want = c.expected.render(inst.program.alphabet)
                reasons.append(f"phase {c.phase}: cell {c.cell} at step {c.step} is {got}, expected {want}")
    return reasons, n_phase


def fuzz(seed: int, instance_count: int, max_nodes: int = MAX_FUZZ_NODES,
         variants: Sequence[Variant | str] = (Variant.DYNAMIC, Variant.STATIC),
         programs: dict[Variant, RuleProgram] | None = None,
         stop_on_failure: bool = False) -> FuzzSummary:
    programs = programs or {}
    summary = FuzzSummary()
    for case in generate_cases(seed, instance_count, max_nodes, variants):
        reasons, n_phase = check_case(case, programs.get(case.variant))
        summary.runs += 1
        summary.by_variant[case.variant.value] = summary.by_variant.get(case.variant.value, 0) + 1
        summary.phase_checks += n_phase
        if case.variant is Variant.STATIC:
            counts = bfs_levels(case.topology, case.commander).count
            if any(counts[x] >= 2 for x in case.squad):
                summary.multi_path_squads += 1
        if reasons:
            summary.failures.append(FuzzFailure(case, reasons))
            if stop_on_failure:
                break
    return summary


def write_replay(failure: FuzzFailure, directory: str | Path) -> Path:
    """Write the failing case as a topology file plus instance file."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = f"fuzz-{failure.case.index}-{failure.case.variant.value}"
    (directory / f"{stem}.top").write_text(format_topology(failure.case.topology), encoding="utf-8")
    inst = directory / f"{stem}.inst"
    inst.write_text(failure.case.instance_text(f"{stem}.top"), encoding="utf-8")
    return inst

