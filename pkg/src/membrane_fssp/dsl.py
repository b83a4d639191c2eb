"""Text format for rule programs, statechart extraction and linting.

A program file has header directives followed by one rule per line::

    alphabet: a d e
    states: s0 s1
    firing: s1          # optional
    mode: max           # optional, max (default) or min
    numbering: state    # optional, 'state' (4.2 style) or 'global' (1, 2, ...)

    s0 a -> s1 a e d_go

Left of ``->``: source state then the consumed objects. Right of ``->``:
target state then products. ``obj^n`` abbreviates ``n`` copies, and a
``_go`` / ``_up`` / ``_down`` / ``_side`` / ``_out`` suffix sends the
product away instead of keeping it. Object names cannot contain ``_``.
Rule order is priority order.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .engine import Dest, Mode, Rule, RuleProgram
from .multiset import Multiset


class RuleSyntaxError(ValueError):
    def __init__(self, lineno: int | None, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno else message)


_OBJ = re.compile(r"^([A-Za-z][A-Za-z0-9]*)(?:\^([1-9][0-9]*))?(?:_([a-z]+))?$")
_STATE = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")
_HEADERS = ("alphabet", "states", "firing", "mode", "numbering")


@dataclass(frozen=True)
class SourceProgram:
    text: str
    program: RuleProgram
    lines: dict[str, int]


def parse_rules(text: str) -> SourceProgram:
    headers: dict[str, str] = {}
    raw_rules: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" in line:
            raw_rules.append((lineno, line))
            continue
        key, sep, value = line.partition(":")
        key = key.strip()
        if not sep or key not in _HEADERS:
            raise RuleSyntaxError(lineno, f"expected a rule or header directive, got {raw.strip()!r}")
        if key in headers:
            raise RuleSyntaxError(lineno, f"duplicate header '{key}'")
        if raw_rules:
            raise RuleSyntaxError(lineno, f"header '{key}' after the first rule")
        headers[key] = value.strip()

    for key in ("alphabet", "states"):
        if key not in headers:
            raise RuleSyntaxError(None, f"missing '{key}:' header")
    alphabet = tuple(headers["alphabet"].split())
    states = tuple(headers["states"].split())
    for sym in alphabet:
        if not _OBJ.match(sym) or "^" in sym or "_" in sym:
            raise RuleSyntaxError(None, f"bad object name {sym!r} in alphabet")
    for st in states:
        if not _STATE.match(st):
            raise RuleSyntaxError(None, f"bad state name {st!r}")
    if not states:
        raise RuleSyntaxError(None, "no states declared")
    if len(set(alphabet)) != len(alphabet) or len(set(states)) != len(states):
        raise RuleSyntaxError(None, "duplicate name in alphabet or states")
    firing = headers.get("firing") or None
    if firing is not None and firing not in states:
        raise RuleSyntaxError(None, f"firing state {firing} is not declared")
    try:
        mode = Mode(headers.get("mode", "max"))
    except ValueError:
        raise RuleSyntaxError(None, f"unknown mode {headers['mode']!r}") from None
    numbering = headers.get("numbering", "state")
    if numbering not in ("state", "global"):
        raise RuleSyntaxError(None, f"unknown numbering {numbering!r}")

    known_states, known_objs = set(states), set(alphabet)
    rules = []
    lines = {}
    per_state: dict[str, int] = {}
    for lineno, line in raw_rules:
        lhs_txt, _, rhs_txt = line.partition("->")
        if "->" in rhs_txt:
            raise RuleSyntaxError(lineno, "more than one '->'")
        lhs_tok, rhs_tok = lhs_txt.split(), rhs_txt.split()
        if not lhs_tok or not rhs_tok:
            raise RuleSyntaxError(lineno, "rule needs a state on both sides of '->'")
        source, target = lhs_tok[0], rhs_tok[0]
        for st in (source, target):
            if st not in known_states:
                raise RuleSyntaxError(lineno, f"unknown state {st!r}")
        if len(lhs_tok) == 1:
            raise RuleSyntaxError(lineno, "empty left-hand side")

        lhs: dict[str, int] = {}
        for tok in lhs_tok[1:]:
            obj, n, tag = _object(lineno, tok, known_objs)
            if tag is not None:
                raise RuleSyntaxError(lineno, f"target tag on consumed object {tok!r}")
            lhs[obj] = lhs.get(obj, 0) + n

        groups: dict[Dest, dict[str, int]] = {}
        for tok in rhs_tok[1:]:
            obj, n, tag = _object(lineno, tok, known_objs)
            try:
                dest = Dest(tag) if tag is not None else Dest.HERE
            except ValueError:
                raise RuleSyntaxError(lineno, f"unknown target tag '_{tag}'") from None
            if dest is Dest.HERE and tag is not None:
                raise RuleSyntaxError(lineno, "'_here' is implicit; drop the suffix")
            g = groups.setdefault(dest, {})
            g[obj] = g.get(obj, 0) + n

        if numbering == "global":
            label = str(len(rules) + 1)
        else:
            per_state[source] = per_state.get(source, 0) + 1
            label = f"{states.index(source)}.{per_state[source]}"
        rules.append(Rule(label, source, Multiset(lhs), target,
                          tuple((Multiset(g), d) for d, g in groups.items())))
        lines[label] = lineno

    program = RuleProgram(alphabet, states, tuple(rules), firing, mode)
    return SourceProgram(text, program, lines)


def _object(lineno: int, tok: str, known: set[str]) -> tuple[str, int, str | None]:
    m = _OBJ.match(tok)
    if not m:
        raise RuleSyntaxError(lineno, f"malformed object token {tok!r}")
    obj, n, tag = m.group(1), int(m.group(2) or 1), m.group(3)
    if obj not in known:
        raise RuleSyntaxError(lineno, f"unknown object {obj!r}")
    return obj, n, tag


def serialize(program: RuleProgram) -> str:
    out = [
        f"alphabet: {' '.join(program.alphabet)}",
        f"states: {' '.join(program.states)}",
    ]
    if program.firing_state is not None:
        out.append(f"firing: {program.firing_state}")
    out.append(f"mode: {program.mode.value}")
    if program.rules and all(r.label == str(i) for i, r in enumerate(program.rules, 1)):
        out.append("numbering: global")
    if program.rules:
        out.append("")
    order = program.alphabet
    for r in program.rules:
        parts = [r.source, r.lhs.render(order), "->", r.target]
        for ms, dest in r.productions:
            rendered = ms.render(order).split()
            if dest is not Dest.HERE:
                rendered = [f"{t}_{dest.value}" for t in rendered]
            parts.extend(rendered)
        out.append(" ".join(p for p in parts if p))
    return "\n".join(out) + "\n"


def load_rules(path: str | Path) -> SourceProgram:
    return parse_rules(Path(path).read_text(encoding="utf-8"))


# --- statechart -------------------------------------------------------------

@dataclass(frozen=True)
class Statechart:
    states: tuple[str, ...]
    arcs: dict[tuple[str, str], tuple[str, ...]]

    def to_dot(self, name: str = "statechart") -> str:
        lines = [f"digraph {name} {{"]
        lines += [f'  "{s}";' for s in self.states]
        for (src, dst), labels in self.arcs.items():
            lines.append(f'  "{src}" -> "{dst}" [label="{", ".join(labels)}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def extract_statechart(program: RuleProgram) -> Statechart:
    arcs: dict[tuple[str, str], list[str]] = {}
    for r in program.rules:
        arcs.setdefault((r.source, r.target), []).append(r.label)
    return Statechart(program.states, {k: tuple(v) for k, v in arcs.items()})


# --- lint -------------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" or "warning"
    code: str
    message: str

    def __str__(self):
        return f"{self.severity}: [{self.code}] {self.message}"


def lint(program: RuleProgram) -> list[Diagnostic]:
    """Static checks on a program.

    * ``dead-state``: a non-firing state without outgoing rules.
    * ``unsatisfiable``: a rule that can never fire, because it consumes an
      undeclared object or its source state is unreachable from the
      initial (first declared) state.
    * ``shadow``: an earlier rule with the same source consumes a sub-multiset
      of a later rule's left-hand side but moves to another state, so it may
      block the later rule. Often deliberate, hence a warning.
    """
    diags = []
    sources = {r.source for r in program.rules}
    for s in program.states:
        if s not in sources and s != program.firing_state:
            diags.append(Diagnostic("error", "dead-state", f"state {s} has no outgoing rules"))

    reach = {program.states[0]} if program.states else set()
    changed = True
    while changed:
        changed = False
        for r in program.rules:
            if r.source in reach and r.target not in reach:
                reach.add(r.target)
                changed = True
    alpha = set(program.alphabet)
    for r in program.rules:
        bad = sorted(set(r.lhs) - alpha)
        if bad:
            diags.append(Diagnostic("error", "unsatisfiable",
                                    f"rule {r.label} consumes undeclared objects {bad}"))
        elif r.source not in reach:
            diags.append(Diagnostic("error", "unsatisfiable",
                                    f"rule {r.label}: source state {r.source} is unreachable"))

    for src, rules in program.by_state.items():
        for i, early in enumerate(rules):
            for late in rules[i + 1:]:
                if early.target != late.target and late.lhs.contains(early.lhs):
                    diags.append(Diagnostic(
                        "warning", "shadow",
                        f"rule {early.label} ({src} -> {early.target}) may block "
                        f"rule {late.label} ({src} -> {late.target})"))
    return diags
