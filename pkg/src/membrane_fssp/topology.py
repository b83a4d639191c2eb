"""Cell structures (trees, dags, symmetric digraphs) and commander-rooted levels.

A structure's ``neighbors`` relation is what ``go`` transfers travel along.
:func:`bfs_levels` turns any structure into the virtual dag used by the
FSSP programs: per-node level, number of level-preserving paths from the
commander, and the predecessor / successor / peer sets.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable

Arc = tuple[int, int]


class TopologyError(ValueError):
    pass


class Kind(str, enum.Enum):
    TREE = "tree"
    DAG = "dag"
    GRAPH = "graph"


@dataclass(frozen=True)
class Topology:
    kind: Kind
    node_count: int
    arcs: frozenset[Arc]
    include_siblings: bool = False

    @property
    def nodes(self) -> range:
        return range(1, self.node_count + 1)

    @cached_property
    def _parents(self) -> dict[int, frozenset[int]]:
        acc: dict[int, set[int]] = {x: set() for x in self.nodes}
        for u, v in self.arcs:
            acc[v].add(u)
        return {x: frozenset(s) for x, s in acc.items()}

    @cached_property
    def _children(self) -> dict[int, frozenset[int]]:
        acc: dict[int, set[int]] = {x: set() for x in self.nodes}
        for u, v in self.arcs:
            acc[u].add(v)
        return {x: frozenset(s) for x, s in acc.items()}

    @cached_property
    def _neighbors(self) -> dict[int, frozenset[int]]:
        out = {}
        for x in self.nodes:
            if self.kind is Kind.GRAPH:
                nb = set(self._children[x])
            else:
                nb = self._children[x] | self._parents[x]
                if self.kind is Kind.DAG and self.include_siblings:
                    nb = nb | self.siblings(x)
            out[x] = frozenset(nb - {x})
        return out

    def _check_node(self, node: int) -> None:
        if not 1 <= node <= self.node_count:
            raise TopologyError(f"node {node} out of range 1..{self.node_count}")

    def parents(self, node: int) -> frozenset[int]:
        self._check_node(node)
        return self._parents[node]

    def children(self, node: int) -> frozenset[int]:
        self._check_node(node)
        return self._children[node]

    def siblings(self, node: int) -> frozenset[int]:
        self._check_node(node)
        sib: set[int] = set()
        for p in self._parents[node]:
            sib |= self._children[p]
        sib.discard(node)
        return frozenset(sib)

    def neighbors(self, node: int) -> frozenset[int]:
        self._check_node(node)
        return self._neighbors[node]

    def with_arcs(self, extra: Iterable[Arc], node_count: int | None = None,
                  kind: Kind | None = None) -> "Topology":
        """Validated copy with more arcs (and possibly more nodes / another kind)."""
        return build_topology(
            kind or self.kind,
            node_count or self.node_count,
            set(self.arcs) | set(extra),
            self.include_siblings,
        )


def build_topology(kind: Kind | str, node_count: int, arcs: Iterable[Arc],
                   include_siblings: bool = False) -> Topology:
    kind = Kind(kind)
    if node_count < 1:
        raise TopologyError(f"node count must be positive, got {node_count}")
    arcs = {(int(u), int(v)) for u, v in arcs}
    for u, v in sorted(arcs):
        for end in (u, v):
            if not 1 <= end <= node_count:
                raise TopologyError(f"arc {u}->{v}: endpoint {end} out of range 1..{node_count}")
        if u == v:
            raise TopologyError(f"arc {u}->{v} is a self-loop")
    if kind is Kind.GRAPH:
        arcs |= {(v, u) for u, v in arcs}
    else:
        _check_acyclic(node_count, arcs)
    if kind is Kind.TREE:
        _check_tree(node_count, arcs)
    _check_connected(node_count, arcs)
    return Topology(kind, node_count, frozenset(arcs),
                    include_siblings and kind is Kind.DAG)


def _check_acyclic(n: int, arcs: set[Arc]) -> None:
    succ: dict[int, list[int]] = {x: [] for x in range(1, n + 1)}
    for u, v in arcs:
        succ[u].append(v)
    color = dict.fromkeys(succ, 0)
    for root in sorted(succ):
        if color[root]:
            continue
        color[root] = 1
        stack = [(root, iter(sorted(succ[root])))]
        while stack:
            x, it = stack[-1]
            for y in it:
                if color[y] == 1:
                    raise TopologyError(f"cycle through arc {x}->{y}")
                if color[y] == 0:
                    color[y] = 1
                    stack.append((y, iter(sorted(succ[y]))))
                    break
            else:
                color[x] = 2
                stack.pop()


def _check_tree(n: int, arcs: set[Arc]) -> None:
    parents: dict[int, list[int]] = {x: [] for x in range(1, n + 1)}
    for u, v in arcs:
        parents[v].append(u)
    for x, ps in parents.items():
        if len(ps) > 1:
            raise TopologyError(f"tree node {x} has multiple parents {sorted(ps)}")
    roots = [x for x, ps in parents.items() if not ps]
    if len(roots) != 1:
        raise TopologyError(f"tree must have exactly one root, found {roots}")


def _check_connected(n: int, arcs: set[Arc]) -> None:
    adj: dict[int, set[int]] = {x: set() for x in range(1, n + 1)}
    for u, v in arcs:
        adj[u].add(v)
        adj[v].add(u)
    seen = {1}
    todo = [1]
    while todo:
        x = todo.pop()
        for y in adj[x] - seen:
            seen.add(y)
            todo.append(y)
    if len(seen) != n:
        missing = min(set(adj) - seen)
        raise TopologyError(f"structure is not weakly connected: node {missing} unreachable from node 1")


@dataclass(frozen=True)
class LevelTable:
    commander: int
    level: dict[int, int]
    count: dict[int, int]
    predecessors: dict[int, frozenset[int]]
    successors: dict[int, frozenset[int]]
    peers: dict[int, frozenset[int]]
    eccentricity: int

    def order(self) -> list[int]:
        """Nodes sorted by level, then id (the column order of trace tables)."""
        return sorted(self.level, key=lambda x: (self.level[x], x))

    def rows(self) -> list[tuple[str, ...]]:
        def fmt(s):
            return ",".join(map(str, sorted(s))) or "-"

        return [
            (str(x), str(self.level[x]), fmt(self.predecessors[x]),
             fmt(self.successors[x]), fmt(self.peers[x]), str(self.count[x]))
            for x in sorted(self.level)
        ]

    def to_tsv(self) -> str:
        header = ("node", "level", "predecessors", "successors", "peers", "count")
        return "".join("\t".join(r) + "\n" for r in [header, *self.rows()])


def bfs_levels(topology: Topology, commander: int) -> LevelTable:
    """Levels and level-preserving path counts by breadth-first search.

    Neighbors are visited in ascending id order; the result does not depend
    on that choice.
    """
    topology._check_node(commander)
    level = dict.fromkeys(topology.nodes, -1)
    count = dict.fromkeys(topology.nodes, 0)
    level[commander] = 0
    count[commander] = 1
    queue = deque([commander])
    while queue:
        x = queue.popleft()
        for y in sorted(topology.neighbors(x)):
            if level[y] == -1:
                queue.append(y)
                level[y] = level[x] + 1
            if level[y] == level[x] + 1:
                count[y] += count[x]

    preds, succs, peers = {}, {}, {}
    for x in topology.nodes:
        nb = topology.neighbors(x)
        preds[x] = frozenset(y for y in nb if level[y] == level[x] - 1)
        succs[x] = frozenset(y for y in nb if level[y] == level[x] + 1)
        peers[x] = frozenset(y for y in nb if level[y] == level[x])
    return LevelTable(commander, level, count, preds, succs, peers, max(level.values()))


BRUTE_FORCE_LIMIT = 15


def brute_force_counts(topology: Topology, commander: int) -> dict[int, int]:
    """Count level-preserving paths by explicit path enumeration.

    Shortest distances come from Floyd-Warshall over the neighbor relation,
    and every simple path from the commander whose i-th node lies at
    distance i is enumerated. Exponential; test use only.
    """
    n = topology.node_count
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_LIMIT} nodes, got {n}")
    topology._check_node(commander)
    inf = float("inf")
    dist = {(x, y): 0 if x == y else inf for x in topology.nodes for y in topology.nodes}
    for x in topology.nodes:
        for y in topology.neighbors(x):
            dist[x, y] = 1
    for k in topology.nodes:
        for i in topology.nodes:
            for j in topology.nodes:
                if dist[i, k] + dist[k, j] < dist[i, j]:
                    dist[i, j] = dist[i, k] + dist[k, j]

    counts = dict.fromkeys(topology.nodes, 0)

    def extend(path):
        tip = path[-1]
        counts[tip] += 1
        for y in topology.neighbors(tip):
            if y not in path and dist[commander, y] == len(path):
                extend(path + [y])

    extend([commander])
    return counts


# --- text format -----------------------------------------------------------

def parse_topology(text: str) -> Topology:
    """Parse the line-oriented topology format.

    ::

        kind: dag
        nodes: 3
        siblings: false
        arc: 1 2
        arc: 1 3
    """
    kind = nodes = None
    siblings = False
    arcs: list[Arc] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        key, value = key.strip(), value.strip()
        if not sep:
            raise TopologyError(f"line {lineno}: expected 'key: value', got {raw!r}")
        if key != "arc" and key in seen:
            raise TopologyError(f"line {lineno}: duplicate '{key}'")
        seen.add(key)
        if key == "kind":
            try:
                kind = Kind(value)
            except ValueError:
                raise TopologyError(f"line {lineno}: unknown kind {value!r}") from None
        elif key == "nodes":
            if not value.isdigit():
                raise TopologyError(f"line {lineno}: bad node count {value!r}")
            nodes = int(value)
        elif key == "siblings":
            if value not in ("true", "false"):
                raise TopologyError(f"line {lineno}: siblings must be true or false")
            siblings = value == "true"
        elif key == "arc":
            parts = value.split()
            if len(parts) != 2 or not all(p.isdigit() for p in parts):
                raise TopologyError(f"line {lineno}: arc needs two node ids, got {value!r}")
            arcs.append((int(parts[0]), int(parts[1])))
        else:
            raise TopologyError(f"line {lineno}: unknown key {key!r}")
    if kind is None:
        raise TopologyError("missing 'kind:' line")
    if nodes is None:
        raise TopologyError("missing 'nodes:' line")
    return build_topology(kind, nodes, arcs, siblings)


def format_topology(topology: Topology) -> str:
    lines = [f"kind: {topology.kind.value}", f"nodes: {topology.node_count}"]
    if topology.kind is Kind.DAG:
        lines.append(f"siblings: {'true' if topology.include_siblings else 'false'}")
    arcs = sorted(topology.arcs)
    if topology.kind is Kind.GRAPH:
        arcs = [(u, v) for u, v in arcs if u < v]
    lines += [f"arc: {u} {v}" for u, v in arcs]
    return "\n".join(lines) + "\n"


def load_topology(path: str | Path) -> Topology:
    return parse_topology(Path(path).read_text(encoding="utf-8"))
