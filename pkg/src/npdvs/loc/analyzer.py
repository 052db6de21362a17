"""Checkers and distribution analyzers over traces.

Instance ``i`` of a formula is *not evaluable* when one of its terms refers
past the last instance of that event in the trace, and *undefined* when
evaluating it divides by zero. Neither counts as a violation or lands in a
distribution bin.
"""

from __future__ import annotations

import operator as _op
from bisect import bisect_left
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from ..trace_model import EventIndex, Trace, TraceEvent
from .formula import (
    OP_NAMES,
    AnalysisPeriod,
    LocFormula,
    Neg,
    Node,
    Num,
    Term,
    offsets_by_event,
    parse_formula,
    to_text,
)


class LocEvalError(ValueError):
    pass


class _Marker:
    def __init__(self, name: str):
        self.name = name

    def __repr__(self) -> str:
        return self.name.upper()


UNDEFINED = _Marker("undefined")
NOT_EVALUABLE = _Marker("not-evaluable")

_RELATIONS: dict[str, Callable[[float, float], bool]] = {
    "<=": _op.le, "<": _op.lt, ">=": _op.ge, ">": _op.gt, "==": _op.eq, "!=": _op.ne,
}


def _as_formula(formula) -> LocFormula:
    return parse_formula(formula) if isinstance(formula, str) else formula


def _check_header(formula: LocFormula, header: Sequence[str]) -> None:
    for t in formula.terms():
        if t.annotation not in header:
            raise LocEvalError(f"annotation {t.annotation!r} is not in the trace header")


# --- random-access evaluation -----------------------------------------------

def eval_node(node: Node, lookup: Callable[[Term], float]) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Term):
        return lookup(node)
    if isinstance(node, Neg):
        return -eval_node(node.operand, lookup)
    a = eval_node(node.left, lookup)
    b = eval_node(node.right, lookup)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    return a / b


def evaluate_instance(formula, trace: Trace, index: EventIndex, i: int):
    """Value of the formula's left-hand side for instance ``i``.

    Returns a float, :data:`UNDEFINED` or :data:`NOT_EVALUABLE`. ``trace``
    must be materialized.
    """
    formula = _as_formula(formula)
    if i < 0:
        raise ValueError("instance index must be >= 0")
    _check_header(formula, trace.header)
    events = trace.materialize().events
    for t in formula.terms():
        if index.instance_at(t.event, i + t.offset) is None:
            return NOT_EVALUABLE

    def lookup(t: Term) -> float:
        return events[index.instance_at(t.event, i + t.offset)].annotations[t.annotation]

    try:
        return eval_node(formula.lhs, lookup)
    except ZeroDivisionError:
        return UNDEFINED


# --- streaming evaluation -----------------------------------------------------

def _compile(node: Node, slot_of: dict[Term, int]) -> Callable[[Sequence[float]], float]:
    if isinstance(node, Num):
        c = node.value
        return lambda v: c
    if isinstance(node, Term):
        k = slot_of[node]
        return lambda v: v[k]
    if isinstance(node, Neg):
        f = _compile(node.operand, slot_of)
        return lambda v: -f(v)
    f = _compile(node.left, slot_of)
    g = _compile(node.right, slot_of)
    if node.op == "+":
        return lambda v: f(v) + g(v)
    if node.op == "-":
        return lambda v: f(v) - g(v)
    if node.op == "*":
        return lambda v: f(v) * g(v)
    return lambda v: f(v) / g(v)


class _InstanceStream:
    """Evaluates instances 0, 1, 2, ... as soon as their events have arrived.

    Per event name only the instances from the oldest pending ``i`` onwards
    are buffered, so a single-event formula holds at most max_offset + 1
    instances.
    """

    def __init__(self, formula: LocFormula, header: Sequence[str], sink):
        _check_header(formula, header)
        self.formula = formula
        self.sink = sink
        self.offsets = offsets_by_event(formula)
        self.keys: dict[str, tuple[str, ...]] = {}
        for t in formula.terms():
            ks = self.keys.setdefault(t.event, ())
            if t.annotation not in ks:
                self.keys[t.event] = ks + (t.annotation,)
        slots = []
        slot_of: dict[Term, int] = {}
        for t in formula.terms():
            if t not in slot_of:
                slot_of[t] = len(slots)
                slots.append((t.event, t.offset, self.keys[t.event].index(t.annotation)))
        self.slots = slots
        self.fn = _compile(formula.lhs, slot_of)
        self.buffers: dict[str, deque] = {e: deque() for e in self.offsets}
        self.counts: dict[str, int] = {e: 0 for e in self.offsets}
        self.next_i = 0
        self.undefined = 0

    def feed(self, ev: TraceEvent) -> None:
        keys = self.keys.get(ev.name)
        if keys is None:
            return
        ann = ev.annotations
        try:
            self.buffers[ev.name].append(tuple(ann[k] for k in keys))
        except KeyError as e:
            raise LocEvalError(f"event {ev.name!r} has no annotation {e.args[0]!r}") from None
        self.counts[ev.name] += 1
        self._drain()

    def _ready(self) -> bool:
        i = self.next_i
        for e, off in self.offsets.items():
            if self.counts[e] <= i + off:
                return False
        return True

    def _drain(self) -> None:
        bufs = self.buffers
        while self._ready():
            vals = [bufs[e][off][k] for e, off, k in self.slots]
            try:
                value = self.fn(vals)
            except ZeroDivisionError:
                value = UNDEFINED
                self.undefined += 1
            self.sink(self.next_i, value)
            self.next_i += 1
            for b in bufs.values():
                b.popleft()

    @property
    def evaluated(self) -> int:
        return self.next_i

    @property
    def not_evaluable(self) -> int:
        candidates = max(self.counts.values(), default=0)
        return max(0, candidates - self.next_i)


# --- results ----------------------------------------------------------------

def _num(x: float) -> str:
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


@dataclass
class Bin:
    lower: float | None  # None means -inf
    upper: float | None  # None means +inf
    count: int
    fraction: float
    closed_lower: bool = False
    closed_upper: bool = True

    @property
    def label(self) -> str:
        lo = "-inf" if self.lower is None else _num(self.lower)
        hi = "+inf" if self.upper is None else _num(self.upper)
        left = "[" if self.closed_lower else "("
        right = "]" if self.closed_upper else ")"
        return f"{left}{lo},{hi}{right}"


@dataclass
class DistributionResult:
    formula: LocFormula
    operator: str
    period: AnalysisPeriod
    total_instances: int
    undefined_instances: int
    not_evaluable: int
    bins: list[Bin]

    @property
    def counts(self) -> list[int]:
        return [b.count for b in self.bins]

    @property
    def fractions(self) -> list[float]:
        return [b.fraction for b in self.bins]

    @property
    def defined_instances(self) -> int:
        return self.total_instances - self.undefined_instances

    def to_csv(self) -> str:
        lines = [
            f"# formula: {to_text(self.formula)}",
            f"# operator: {OP_NAMES[self.operator]}",
            f"# total: {self.total_instances}",
            f"# undefined: {self.undefined_instances}",
            f"# not_evaluable: {self.not_evaluable}",
            "bin_boundary,count,fraction",
        ]
        for b in self.bins:
            lines.append(f'"{b.label}",{b.count},{b.fraction:.6f}')
        return "\n".join(lines) + "\n"

    def to_gnuplot(self) -> str:
        """Two columns, grid point and fraction; only for cumulative operators."""
        if self.operator == "><":
            rows = [f"{_num(b.upper if b.upper is not None else b.lower)} {b.fraction:.6f}"
                    for b in self.bins]
        else:
            rows = [f"{_num(b.lower if self.operator == '|>' else b.upper)} {b.fraction:.6f}"
                    for b in self.bins]
        return "\n".join(rows) + "\n"


@dataclass
class ViolationReport:
    formula: LocFormula
    violations: list[tuple[int, float]] = field(default_factory=list)
    evaluated_instances: int = 0
    undefined: list[int] = field(default_factory=list)
    not_evaluable: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def format(self) -> str:
        lines = [
            f"formula: {to_text(self.formula)}",
            f"evaluated: {self.evaluated_instances}",
            f"violations: {len(self.violations)}",
        ]
        if self.undefined:
            lines.append(f"undefined: {len(self.undefined)}")
        for i, v in self.violations:
            lines.append(f"  i={i} value={v!r}")
        return "\n".join(lines) + "\n"


# --- analyzers ----------------------------------------------------------------

class AssertionChecker:
    def __init__(self, formula, header: Sequence[str]):
        formula = _as_formula(formula)
        if formula.kind != "assertion":
            raise LocEvalError("check() needs an assertion formula (relation, not distribution)")
        self.formula = formula
        self.rel = _RELATIONS[formula.relation]
        self.report = ViolationReport(formula)
        self.stream = _InstanceStream(formula, header, self._sink)

    def _sink(self, i: int, value) -> None:
        if value is UNDEFINED:
            self.report.undefined.append(i)
        elif not self.rel(value, self.formula.rhs):
            self.report.violations.append((i, value))

    def feed(self, ev: TraceEvent) -> None:
        self.stream.feed(ev)

    def result(self) -> ViolationReport:
        self.report.evaluated_instances = self.stream.evaluated
        self.report.not_evaluable = self.stream.not_evaluable
        return self.report


class DistributionAnalyzer:
    """Single-pass histogram; memory is the bin array plus the instance buffers."""

    def __init__(self, formula, header: Sequence[str]):
        formula = _as_formula(formula)
        if formula.kind != "distribution":
            raise LocEvalError("analyze needs a distribution formula (><, <| or |>)")
        self.formula = formula
        self.grid = formula.period.grid()
        # partition counts; cumulative operators are derived from them at the end
        self.part = [0] * (len(self.grid) + 1)
        self.ties = [0] * len(self.grid)
        self.stream = _InstanceStream(formula, header, self._sink)

    def _sink(self, i: int, value) -> None:
        if value is UNDEFINED:
            return
        grid = self.grid
        k = bisect_left(grid, value)
        self.part[k] += 1
        if k < len(grid) and grid[k] == value:
            self.ties[k] += 1

    def feed(self, ev: TraceEvent) -> None:
        self.stream.feed(ev)

    def result(self) -> DistributionResult:
        s = self.stream
        n = s.evaluated - s.undefined
        grid = self.grid
        op = self.formula.operator

        def frac(c: int) -> float:
            return c / n if n else 0.0

        bins: list[Bin] = []
        if op == "><":
            edges = [None] + grid + [None]
            for k, c in enumerate(self.part):
                bins.append(Bin(edges[k], edges[k + 1], c, frac(c),
                                closed_upper=edges[k + 1] is not None))
        elif op == "<|":
            run = 0
            for k, x in enumerate(grid):
                run += self.part[k]  # values <= grid[k]
                bins.append(Bin(None, x, run, frac(run)))
        else:
            below = 0
            for k, x in enumerate(grid):
                # values >= x = n - (values < x) ; values < x = part[0..k] minus ties at x
                c = n - (below + self.part[k] - self.ties[k])
                bins.append(Bin(x, None, c, frac(c), closed_lower=True, closed_upper=False))
                below += self.part[k]
        return DistributionResult(self.formula, op, self.formula.period,
                                  s.evaluated, s.undefined, s.not_evaluable, bins)


def _run(analyzers, trace: Trace) -> None:
    feeds = [a.feed for a in analyzers]
    for ev in trace:
        for f in feeds:
            f(ev)


def check(formula, trace: Trace) -> ViolationReport:
    checker = AssertionChecker(formula, trace.header)
    _run([checker], trace)
    return checker.result()


def analyze_distribution(formula, trace: Trace) -> DistributionResult:
    analyzer = DistributionAnalyzer(formula, trace.header)
    _run([analyzer], trace)
    return analyzer.result()


def analyze_many(formulas: Iterable, trace: Trace) -> list:
    """One pass over ``trace`` feeding several checkers/analyzers."""
    analyzers = []
    for f in formulas:
        f = _as_formula(f)
        cls = AssertionChecker if f.kind == "assertion" else DistributionAnalyzer
        analyzers.append(cls(f, trace.header))
    _run(analyzers, trace)
    return [a.result() for a in analyzers]


def percentile_cut(result: DistributionResult, p: float) -> float | None:
    """Grid value where the cumulative distribution reaches fraction ``p``.

    For ``<|`` this is the smallest x with fraction(value <= x) >= p, for
    ``|>`` the largest x with fraction(value >= x) >= p.
    """
    if not 0 < p < 1:
        raise ValueError("p must be in (0, 1)")
    if result.operator == "<|":
        for b in result.bins:
            if b.fraction >= p:
                return b.upper
        return None
    if result.operator == "|>":
        for b in reversed(result.bins):
            if b.fraction >= p:
                return b.lower
        return None
    raise ValueError("percentile_cut needs a cumulative (<| or |>) distribution")
