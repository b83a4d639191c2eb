"""Synchronous evolution of state-based P systems.

One step works on a snapshot: every cell picks its rules under the weak
priority policy, rewrites its own contents, and the tagged products are
delivered (replicated) to their destinations. Nothing delivered or produced
during step ``t`` is visible to any rule before step ``t + 1``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Iterable, NamedTuple, Sequence, Union

from .multiset import EMPTY, CountOverflowError, Multiset
from .topology import Kind, LevelTable, Topology


class ConfigError(ValueError):
    pass


class Dest(str, enum.Enum):
    HERE = "here"
    GO = "go"
    UP = "up"
    DOWN = "down"
    SIDE = "side"
    OUT = "out"


class Mode(str, enum.Enum):
    MAX = "max"
    MIN = "min"


@dataclass(frozen=True)
class Rule:
    label: str
    source: str
    lhs: Multiset
    target: str
    productions: tuple[tuple[Multiset, Dest], ...] = ()

    def __post_init__(self):
        if not self.lhs:
            raise ValueError(f"rule {self.label}: left-hand side is empty")

    @cached_property
    def here(self) -> Multiset:
        out = EMPTY
        for ms, dest in self.productions:
            if dest is Dest.HERE:
                out = out + ms
        return out

    @cached_property
    def sent(self) -> tuple[tuple[Multiset, Dest], ...]:
        return tuple((ms, d) for ms, d in self.productions if d is not Dest.HERE)

    def symbols(self) -> set[str]:
        syms = set(self.lhs)
        for ms, _ in self.productions:
            syms |= set(ms)
        return syms


@dataclass(frozen=True)
class RuleProgram:
    """Rules in priority order (earlier wins) plus the declared vocabulary."""

    alphabet: tuple[str, ...]
    states: tuple[str, ...]
    rules: tuple[Rule, ...]
    firing_state: str | None = None
    mode: Mode = Mode.MAX

    @cached_property
    def by_state(self) -> dict[str, tuple[Rule, ...]]:
        acc: dict[str, list[Rule]] = {s: [] for s in self.states}
        for r in self.rules:
            acc.setdefault(r.source, []).append(r)
        return {s: tuple(rs) for s, rs in acc.items()}

    def rule(self, label: str) -> Rule:
        for r in self.rules:
            if r.label == label:
                return r
        raise KeyError(label)

    def without(self, label: str) -> "RuleProgram":
        """Copy with one rule deleted (labels of the others unchanged)."""
        self.rule(label)
        return replace(self, rules=tuple(r for r in self.rules if r.label != label))

    def problems(self) -> list[str]:
        """Vocabulary violations: undeclared states or objects used by rules."""
        out = []
        states, alpha = set(self.states), set(self.alphabet)
        if self.firing_state is not None and self.firing_state not in states:
            out.append(f"firing state {self.firing_state} is not declared")
        for r in self.rules:
            for s in (r.source, r.target):
                if s not in states:
                    out.append(f"rule {r.label}: undeclared state {s}")
            for sym in sorted(r.symbols() - alpha):
                out.append(f"rule {r.label}: undeclared object {sym}")
        return out


@dataclass(frozen=True)
class ChannelPolicy:
    """Mobile channels: every cell holding ``anchor`` is linked to every
    cell holding a mobile or fixed endpoint symbol."""

    anchor: str
    mobile: frozenset[str]
    fixed: frozenset[str]

    def __post_init__(self):
        groups = [{self.anchor}, set(self.mobile), set(self.fixed)]
        if groups[0] & groups[1] or groups[0] & groups[2] or groups[1] & groups[2]:
            raise ConfigError("channel endpoint symbol groups must be disjoint")

    @property
    def endpoints(self) -> frozenset[str]:
        return self.mobile | self.fixed


class Cell(NamedTuple):
    state: str
    contents: Multiset = EMPTY

    def render(self, alphabet: Sequence[str]) -> str:
        objs = self.contents.render(alphabet)
        return f"{self.state} {objs}" if objs else self.state

    @classmethod
    def parse(cls, text: str) -> "Cell":
        tokens = text.split()
        if not tokens:
            raise ValueError("empty cell text")
        return cls(tokens[0], Multiset.parse(tokens[1:]))


@dataclass(frozen=True)
class SystemConfig:
    topology: Topology
    program: RuleProgram
    cells: tuple[Cell, ...]
    channel_policy: ChannelPolicy | None = None
    environment: Multiset = EMPTY
    step_index: int = 0

    def cell(self, node: int) -> Cell:
        return self.cells[node - 1]


def make_config(topology: Topology, program: RuleProgram,
                cells: Sequence[Cell] | dict[int, Cell],
                channel_policy: ChannelPolicy | None = None) -> SystemConfig:
    """Build a validated configuration.

    ``cells`` may be a sequence indexed from node 1, or a dict; nodes
    missing from the dict start empty in the program's first state.
    """
    if isinstance(cells, dict):
        initial = program.states[0]
        cells = [cells.get(x, Cell(initial)) for x in topology.nodes]
    cells = tuple(Cell(c.state, c.contents) for c in cells)
    if len(cells) != topology.node_count:
        raise ConfigError(f"{len(cells)} cells given for {topology.node_count} nodes")
    problems = program.problems()
    if problems:
        raise ConfigError("; ".join(problems))
    if topology.kind is Kind.GRAPH:
        for r in program.rules:
            for _, dest in r.sent:
                if dest in (Dest.UP, Dest.DOWN, Dest.SIDE):
                    raise ConfigError(
                        f"rule {r.label}: '{dest.value}' target needs a tree or dag, "
                        "structure is a graph")
    states, alpha = set(program.states), set(program.alphabet)
    for x, c in zip(topology.nodes, cells):
        if c.state not in states:
            raise ConfigError(f"cell {x}: unknown state {c.state}")
        extra = set(c.contents) - alpha
        if extra:
            raise ConfigError(f"cell {x}: objects {sorted(extra)} not in the alphabet")
    if channel_policy is not None:
        missing = ({channel_policy.anchor} | channel_policy.endpoints) - alpha
        if missing:
            raise ConfigError(f"channel symbols {sorted(missing)} not in the alphabet")
    return SystemConfig(topology, program, cells, channel_policy)


# --- one cell ---------------------------------------------------------------

class CellResult(NamedTuple):
    target: str
    leftover: Multiset
    produced_here: Multiset
    emissions: list[tuple[Multiset, Dest]]
    applications: list[tuple[str, int]]


def apply_cell(state: str, contents: Multiset, program: RuleProgram) -> CellResult:
    """Rewrite one cell's contents for one step.

    Rules are scanned in priority order. The first rule that applies fixes
    the target state; afterwards only rules with that same target may apply.
    In max mode each such rule is applied as often as the *remaining*
    original contents allow, in min mode at most once. Products are never
    consumed in the step that creates them.
    """
    target = None
    avail = contents
    here = EMPTY
    emissions: list[tuple[Multiset, Dest]] = []
    used: list[tuple[str, int]] = []
    for rule in program.by_state.get(state, ()):
        if target is not None and rule.target != target:
            continue
        k = avail.multiplicity(rule.lhs)
        if not k:
            continue
        if program.mode is Mode.MIN:
            k = 1
        try:
            avail = avail - rule.lhs.scale(k)
            here = here + rule.here.scale(k)
            emissions.extend((ms.scale(k), d) for ms, d in rule.sent)
        except CountOverflowError as exc:
            raise CountOverflowError(f"rule {rule.label}: {exc}") from None
        used.append((rule.label, k))
        if target is None:
            target = rule.target
    if target is None:
        return CellResult(state, contents, EMPTY, [], [])
    return CellResult(target, avail, here, emissions, used)


# --- whole system -----------------------------------------------------------

@dataclass(frozen=True)
class StepReport:
    applications: dict[int, tuple[tuple[str, int], ...]]
    targets: dict[int, str]
    delivered: dict[int, Multiset]
    quiescent: bool


def _channel_links(config: SystemConfig) -> dict[int, set[int]]:
    policy = config.channel_policy
    links: dict[int, set[int]] = {}
    if policy is None:
        return links
    anchors = [x for x in config.topology.nodes if policy.anchor in config.cell(x).contents]
    ends = [x for x in config.topology.nodes
            if any(s in config.cell(x).contents for s in policy.endpoints)]
    for a in anchors:
        for t in ends:
            if a != t:
                links.setdefault(a, set()).add(t)
                links.setdefault(t, set()).add(a)
    return links


def effective_neighbors(config: SystemConfig, cell: int) -> frozenset[int]:
    """Static neighbors plus mobile-channel partners, from this config's contents."""
    static = config.topology.neighbors(cell)
    return static | _channel_links(config).get(cell, frozenset())


def step(config: SystemConfig) -> tuple[SystemConfig, StepReport]:
    topo = config.topology
    links = _channel_links(config)
    results = {}
    for x in topo.nodes:
        c = config.cell(x)
        try:
            results[x] = apply_cell(c.state, c.contents, config.program)
        except CountOverflowError as exc:
            raise CountOverflowError(f"cell {x}: {exc}") from None

    inbox: dict[int, Multiset] = {x: EMPTY for x in topo.nodes}
    env = config.environment
    for x, res in results.items():
        for ms, dest in res.emissions:
            if dest is Dest.GO:
                to = topo.neighbors(x) | links.get(x, frozenset())
            elif dest is Dest.UP:
                to = topo.parents(x)
            elif dest is Dest.DOWN:
                to = topo.children(x)
            elif dest is Dest.SIDE:
                to = topo.siblings(x)
            elif dest is Dest.OUT:
                env = env + ms
                continue
            else:
                to = (x,)
            for y in to:
                inbox[y] = inbox[y] + ms

    cells = []
    for x in topo.nodes:
        res = results[x]
        cells.append(Cell(res.target, res.leftover + res.produced_here + inbox[x]))
    applied = {x: tuple(r.applications) for x, r in results.items() if r.applications}
    delivered = {x: ms for x, ms in inbox.items() if ms}
    report = StepReport(
        applications=applied,
        targets={x: r.target for x, r in results.items()},
        delivered=delivered,
        quiescent=not applied and not delivered,
    )
    new = replace(config, cells=tuple(cells), environment=env,
                  step_index=config.step_index + 1)
    return new, report


# --- runs and traces --------------------------------------------------------

QUIESCENCE = "quiescence"
StopCondition = Union[str, Callable[[SystemConfig], bool], None]


@dataclass
class Trace:
    rows: list[tuple[Cell, ...]]
    start: int = 0
    reports: list[StepReport] = field(default_factory=list)
    final: SystemConfig | None = None

    def __len__(self):
        return len(self.rows)

    def cell(self, step_index: int, node: int) -> Cell:
        return self.rows[step_index - self.start][node - 1]

    @property
    def last_step(self) -> int:
        return self.start + len(self.rows) - 1

    def truncated(self, last_step: int) -> "Trace":
        return Trace(self.rows[: last_step - self.start + 1], self.start)


class NonTerminationError(RuntimeError):
    def __init__(self, trace: Trace, budget: int):
        self.trace = trace
        self.budget = budget
        super().__init__(
            f"stop condition not reached within {budget} steps "
            f"(stopped at step {trace.last_step})")


def default_budget(level_table: LevelTable) -> int:
    return 10 * (6 * level_table.eccentricity + 7)


def run(config: SystemConfig, until: StopCondition = QUIESCENCE,
        max_steps: int | None = None, level_table: LevelTable | None = None) -> Trace:
    """Step ``config`` repeatedly and record every configuration.

    ``until`` is ``"quiescence"`` (stop before the first step in which
    nothing happens), a predicate on configurations, or ``None`` (run
    exactly ``max_steps`` steps). Failing to meet a stop condition within
    the budget raises :class:`NonTerminationError`.
    """
    if max_steps is None:
        if level_table is None:
            raise ValueError("max_steps is required when no level table is given")
        max_steps = default_budget(level_table)
    if max_steps < 0:
        raise ValueError("max_steps must be non-negative")
    if until is not None and until != QUIESCENCE and not callable(until):
        raise ValueError(f"unknown stop condition {until!r}")

    trace = Trace([config.cells], config.step_index)
    taken = 0
    while True:
        if callable(until) and until(config):
            break
        if taken == max_steps and until is None:
            break
        nxt, report = step(config)
        if until == QUIESCENCE and report.quiescent:
            break
        if taken == max_steps:
            trace.final = config
            raise NonTerminationError(trace, max_steps)
        config = nxt
        trace.rows.append(config.cells)
        trace.reports.append(report)
        taken += 1
    trace.final = config
    return trace


def trace_to_tsv(trace: Trace, alphabet: Sequence[str], columns: Iterable[int],
                 labels: dict[int, str] | None = None) -> str:
    columns = list(columns)
    labels = labels or {}
    lines = ["\t".join(["step"] + [labels.get(x, str(x)) for x in columns])]
    for i, row in enumerate(trace.rows):
        cells = [row[x - 1].render(alphabet) for x in columns]
        lines.append("\t".join([str(trace.start + i)] + cells))
    return "\n".join(lines) + "\n"


def parse_trace_tsv(text: str) -> tuple[list[int], Trace]:
    """Read a TSV trace back; returns the column node ids and a trace whose
    rows are indexed by node id."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty trace file")
    header = lines[0].split("\t")
    if header[0] != "step":
        raise ValueError("trace header must start with 'step'")
    try:
        columns = [int(h) for h in header[1:]]
    except ValueError:
        raise ValueError(f"trace header has non-numeric cell labels: {header[1:]}") from None
    n = len(columns)
    if sorted(columns) != list(range(1, n + 1)):
        raise ValueError("trace columns must be a permutation of 1..N")
    rows = []
    start = None
    for lineno, line in enumerate(lines[1:], 2):
        parts = line.split("\t")
        if len(parts) != n + 1:
            raise ValueError(f"line {lineno}: expected {n + 1} fields, got {len(parts)}")
        idx = int(parts[0])
        if start is None:
            start = idx
        elif idx != start + len(rows):
            raise ValueError(f"line {lineno}: step {idx} out of sequence")
        row: list[Cell | None] = [None] * n
        for x, txt in zip(columns, parts[1:]):
            row[x - 1] = Cell.parse(txt)
        rows.append(tuple(row))
    return columns, Trace(rows, start or 0)
