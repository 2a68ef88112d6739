"""R1/R2/R3 dialect verification and the optional signature check.

Verification is pure: nothing here touches agent state.  Every check runs
and all violations are collected, so operators see the full picture.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Mapping, Optional, Protocol, Sequence, Tuple

from .dialect import (
    Cond,
    Default,
    Dialect,
    Literal,
    Node,
    ParamRef,
    Template,
    template_heads,
    walk_template,
)
from .errors import UnknownAlgorithm
from .message import CORE_PERFORMATIVES, Signed
from .sexpr import Symbol, canonical_encode

# Deterministic step budget granted per millisecond of declared time.
STEPS_PER_MS = 1000


@dataclass(frozen=True)
class SystemLimits:
    """Hard ceilings.  Deployments may lower them, never raise them."""

    max_depth_ceiling: int = 64
    max_expansion_ceiling: int = 8192
    verification_time_ceiling: int = 1000

    def __post_init__(self):
        if (
            self.max_depth_ceiling > 64
            or self.max_expansion_ceiling > 8192
            or self.verification_time_ceiling > 1000
        ):
            raise ValueError("system limits can only be configured downward")
        if min(self.max_depth_ceiling, self.max_expansion_ceiling, self.verification_time_ceiling) <= 0:
            raise ValueError("system limits must be positive")

    def __le__(self, other: "SystemLimits") -> bool:
        return (
            self.max_depth_ceiling <= other.max_depth_ceiling
            and self.max_expansion_ceiling <= other.max_expansion_ceiling
            and self.verification_time_ceiling <= other.verification_time_ceiling
        )


DEFAULT_LIMITS = SystemLimits()


@dataclass(frozen=True)
class Violation:
    rule: str  # R1-self | R1-cycle | R2 | R3 | Signature
    detail: str
    name: str

    def __str__(self) -> str:
        return f"{self.rule}: {self.name} ({self.detail})"


@dataclass(frozen=True)
class VerificationResult:
    violations: Tuple[Violation, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def rules(self) -> set[str]:
        return {v.rule for v in self.violations}

    def __add__(self, other: "VerificationResult") -> "VerificationResult":
        return VerificationResult(self.violations + other.violations)


PASS = VerificationResult()


class _BudgetExceeded(Exception):
    pass


class StepBudget:
    """Deterministic step counter with a wall-clock backstop."""

    def __init__(self, budget_ms: int):
        self.budget_ms = budget_ms
        self.limit = budget_ms * STEPS_PER_MS
        self.steps = 0
        self._deadline = time.monotonic() + budget_ms / 1000.0

    def tick(self, n: int = 1) -> None:
        self.steps += n
        if self.steps > self.limit:
            raise _BudgetExceeded(f"step budget of {self.limit} exceeded")
        if self.steps & 0x3FF == 0 and time.monotonic() > self._deadline:
            raise _BudgetExceeded(f"wall-clock budget of {self.budget_ms} ms exceeded")


def _no_tick(n: int = 1) -> None:
    pass


# -- R1 ----------------------------------------------------------------------


def _names_in(t: Template) -> Iterable[str]:
    if isinstance(t, Literal):
        if isinstance(t.atom, Symbol):
            yield t.atom.text
    elif isinstance(t, ParamRef):
        yield t.name
    elif isinstance(t, Default):
        yield t.param
    elif isinstance(t, Cond):
        for b in t.branches:
            yield b.param
            if isinstance(b.value, Symbol):
                yield b.value.text
    elif isinstance(t, Node):
        yield t.head


def contains_self_ref(name: str, t: Template, tick: Callable[[int], None] = _no_tick) -> bool:
    """True iff the symbol ``name`` occurs anywhere in ``t``."""
    for node in walk_template(t):
        tick(1)
        for n in _names_in(node):
            if n == name:
                return True
    return False


@dataclass(frozen=True)
class DependencyGraph:
    """Performative call graph; edges run from caller to any performative named in a list head."""

    edges: Mapping[str, Tuple[str, ...]]

    @property
    def nodes(self) -> Tuple[str, ...]:
        return tuple(self.edges)


def build_dependency_graph(
    dialects: Iterable[Dialect], tick: Callable[[int], None] = _no_tick
) -> DependencyGraph:
    dialects = list(dialects)
    callers: dict[str, list] = {}
    for d in dialects:
        for perf in d.defs:
            callers.setdefault(perf.name, []).append(perf.template)
    known = set(callers) | CORE_PERFORMATIVES
    edges: dict[str, Tuple[str, ...]] = {}
    for name, templates in callers.items():
        out: list[str] = []
        for t in templates:
            for head in template_heads(t):
                tick(1)
                if head in known and head not in out:
                    out.append(head)
        edges[name] = tuple(out)
    for core in sorted(CORE_PERFORMATIVES):
        edges.setdefault(core, ())
    return DependencyGraph(edges)


@dataclass(frozen=True)
class Cycle:
    """One strongly connected component that contains a cycle.

    ``path`` is an elementary witness cycle (first node not repeated);
    ``members`` is every node of the component, each of which lies on some
    elementary cycle.
    """

    path: Tuple[Hashable, ...]
    members: frozenset

    def describe(self) -> str:
        return " -> ".join(map(str, self.path + self.path[:1]))


def detect_cycles(
    adjacency: Mapping[Hashable, Iterable[Hashable]], tick: Callable[[int], None] = _no_tick
) -> list[Cycle]:
    """All cyclic components of a digraph, via iterative Tarjan SCC.

    Successors missing from ``adjacency`` are treated as sink nodes.  The
    result is empty iff the graph is acyclic.
    """
    succ = {v: tuple(ws) for v, ws in adjacency.items()}
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    components: list[list] = []
    counter = 0
    for root in succ:
        if root in index:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, i = work[-1]
            ws = succ.get(v, ())
            if i < len(ws):
                work[-1] = (v, i + 1)
                w = ws[i]
                tick(1)
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, 0))
                elif w in on_stack and index[w] < low[v]:
                    low[v] = index[w]
                continue
            work.pop()
            if work:
                u = work[-1][0]
                if low[v] < low[u]:
                    low[u] = low[v]
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                if len(comp) > 1 or v in succ.get(v, ()):
                    components.append(comp)

    cycles = []
    for comp in components:
        members = frozenset(comp)
        start = min(comp, key=index.__getitem__)
        cycles.append(Cycle(_witness(start, members, succ, tick), members))
    return cycles


def _witness(start, members: frozenset, succ, tick) -> Tuple[Hashable, ...]:
    """Shortest cycle through ``start`` inside its component (BFS back to start)."""
    if start in succ.get(start, ()):
        return (start,)
    parent = {start: None}
    frontier = [start]
    while frontier:
        nxt = []
        for v in frontier:
            for w in succ.get(v, ()):
                tick(1)
                if w == start:
                    path = [v]
                    while parent[path[-1]] is not None:
                        path.append(parent[path[-1]])
                    return tuple(reversed(path))
                if w in members and w not in parent:
                    parent[w] = v
                    nxt.append(w)
        frontier = nxt
    raise AssertionError("strongly connected component without a cycle")


def cyclic_nodes(cycles: Sequence[Cycle]) -> frozenset:
    out: frozenset = frozenset()
    for c in cycles:
        out |= c.members
    return out


def verify_r1(
    d: Dialect, installed: Sequence[Dialect] = (), tick: Callable[[int], None] = _no_tick
) -> VerificationResult:
    violations = []
    for perf in d.defs:
        if contains_self_ref(perf.name, perf.template, tick):
            violations.append(Violation("R1-self", f"{perf.name} refers to itself", perf.name))
    others = [x for x in installed if x.name != d.name]
    graph = build_dependency_graph([d, *others], tick)
    own = set(d.names)
    for cycle in detect_cycles(graph.edges, tick):
        if len(cycle.path) == 1 and cycle.path[0] in own:
            continue  # already reported as R1-self
        violations.append(Violation("R1-cycle", cycle.describe(), str(cycle.path[0])))
    return VerificationResult(tuple(violations))


# -- R2 / R3 -----------------------------------------------------------------


def verify_r2(d: Dialect, limits: SystemLimits = DEFAULT_LIMITS) -> VerificationResult:
    req = d.requirements
    checks = (
        ("max-depth", req.max_depth, limits.max_depth_ceiling),
        ("max-expansion-size", req.max_expansion_size, limits.max_expansion_ceiling),
        ("verification-time", req.verification_time_ms, limits.verification_time_ceiling),
    )
    return VerificationResult(
        tuple(
            Violation("R2", f"{label} {declared} exceeds ceiling {ceiling}", label)
            for label, declared, ceiling in checks
            if declared > ceiling
        )
    )


def verify_r3(d: Dialect) -> VerificationResult:
    return VerificationResult(
        tuple(
            Violation("R3", f"{p.name} is a core performative and cannot be redefined", p.name)
            for p in d.defs
            if p.name in CORE_PERFORMATIVES
        )
    )


# -- signatures --------------------------------------------------------------


class SignatureProvider(Protocol):
    algorithm: str

    def sign(self, payload: bytes) -> bytes: ...

    def verify(self, payload: bytes, signature: bytes) -> bool: ...


def signing_payload(d: Dialect) -> bytes:
    return canonical_encode(d.source)


def verify_signature(
    d: Dialect,
    signature: Optional[Signed],
    providers: Mapping[str, SignatureProvider] | None = None,
) -> VerificationResult:
    """Check ``signature`` over the dialect's canonical bytes.

    With no providers registered, or no signature supplied, the check passes.
    Raises :class:`UnknownAlgorithm` when the named algorithm has no provider.
    """
    if not providers or signature is None:
        return PASS
    if d.signature_algorithm is not None and d.signature_algorithm != signature.algorithm:
        return VerificationResult((
            Violation(
                "Signature",
                f"dialect declares {d.signature_algorithm}, signed with {signature.algorithm}",
                d.name,
            ),
        ))
    provider = providers.get(signature.algorithm)
    if provider is None:
        raise UnknownAlgorithm(signature.algorithm)
    if not provider.verify(signing_payload(d), signature.signature):
        return VerificationResult((Violation("Signature", "signature does not verify", d.name),))
    return PASS


def verify_all(
    d: Dialect,
    installed: Sequence[Dialect] = (),
    limits: SystemLimits = DEFAULT_LIMITS,
    providers: Mapping[str, SignatureProvider] | None = None,
    signature: Optional[Signed] = None,
) -> VerificationResult:
    """R1, R2, R3, then the signature check, collecting every violation."""
    budget = StepBudget(min(d.requirements.verification_time_ms, limits.verification_time_ceiling))
    result = PASS
    try:
        result += verify_r1(d, installed, budget.tick)
    except _BudgetExceeded as exc:
        result += VerificationResult((Violation("R2", f"verification {exc}", d.name),))
    result += verify_r2(d, limits)
    result += verify_r3(d)
    try:
        result += verify_signature(d, signature, providers)
    except UnknownAlgorithm as exc:
        result += VerificationResult((Violation("Signature", str(exc), d.name),))
    return result
