"""Single-pass template expansion under a metered resource context."""

from __future__ import annotations

import time
from typing import Callable, Mapping, Optional, Sequence

from .dialect import (
    Cond,
    Default,
    Dialect,
    Literal,
    Node,
    ParamRef,
    ParamSpec,
    PerformativeDef,
    ResourceRequirements,
    Seq,
    Template,
)
from .errors import (
    AbsentParameter,
    ArityMismatch,
    DanglingKeyword,
    DuplicateKeyword,
    NoMatchingBranch,
    ResourceExhausted,
    ResultNotValidMessage,
    UnknownDialect,
    UnknownDialectPerformative,
    UnknownKeyword,
    ValidationError,
)
from .message import LangMessage, Message, WithLimits, parse_message
from .sexpr import Keyword, SExpr, SList, Symbol, atom_text, depth, serialize
from .verify import DEFAULT_LIMITS, STEPS_PER_MS, SystemLimits


class _Absent:
    __slots__ = ()

    def __repr__(self) -> str:
        return "ABSENT"


ABSENT = _Absent()


class ResourceContext:
    """Meters nesting depth, emitted characters, and time for one expansion.

    Every check happens before the counter would pass its limit, so after a
    :class:`ResourceExhausted` the recorded usage is still within bounds.
    """

    def __init__(self, max_depth: int, max_size: int, budget_ms: int):
        self.depth = 0
        self.max_depth = max_depth
        self.size = 0
        self.max_size = max_size
        self.budget_ms = budget_ms
        self.steps = 0
        self.step_budget = budget_ms * STEPS_PER_MS
        self.started_at = time.monotonic()

    @classmethod
    def from_limits(cls, limits: SystemLimits = DEFAULT_LIMITS) -> "ResourceContext":
        return cls(limits.max_depth_ceiling, limits.max_expansion_ceiling, limits.verification_time_ceiling)

    def tighten(self, max_depth=None, max_size=None, budget_ms=None) -> None:
        """Lower any limit; values above the current limit are ignored."""
        if max_depth is not None:
            self.max_depth = min(self.max_depth, max_depth)
        if max_size is not None:
            self.max_size = min(self.max_size, max_size)
        if budget_ms is not None and budget_ms < self.budget_ms:
            self.budget_ms = budget_ms
            self.step_budget = min(self.step_budget, budget_ms * STEPS_PER_MS)

    def apply_wrapper(self, wrapper: WithLimits) -> None:
        self.tighten(max_depth=wrapper.max_depth, budget_ms=wrapper.timeout_ms)

    def apply_requirements(self, req: ResourceRequirements) -> None:
        self.tighten(req.max_depth, req.max_expansion_size, req.verification_time_ms)

    def enter_depth(self, extra: int = 1) -> None:
        if self.depth + extra > self.max_depth:
            raise ResourceExhausted("depth", self.max_depth, self.depth + extra)
        self.depth += extra

    def exit_depth(self, n: int = 1) -> None:
        self.depth -= n

    def check_depth(self, extra: int) -> None:
        if self.depth + extra > self.max_depth:
            raise ResourceExhausted("depth", self.max_depth, self.depth + extra)

    def add_size(self, n: int) -> None:
        if self.size + n > self.max_size:
            raise ResourceExhausted("size", self.max_size, self.size + n)
        self.size += n

    def tick(self) -> None:
        self.steps += 1
        if self.steps > self.step_budget:
            raise ResourceExhausted("time", self.step_budget, self.steps)
        if self.steps & 0xFF == 0:
            self.check_time()

    def check_time(self) -> None:
        elapsed_ms = (time.monotonic() - self.started_at) * 1000.0
        if elapsed_ms > self.budget_ms:
            raise ResourceExhausted("time", self.budget_ms, int(elapsed_ms))


def bind_arguments(spec: ParamSpec, args: Sequence[SExpr]) -> dict:
    """Bind leading positional arguments, then ``:key value`` pairs.

    Positional arguments are those before the first keyword.  Keyword
    parameters not supplied are bound to :data:`ABSENT`.
    """
    n = 0
    while n < len(args) and not isinstance(args[n], Keyword):
        n += 1
    if n != len(spec.positional):
        raise ArityMismatch(f"expected {len(spec.positional)} positional argument(s), got {n}")
    env: dict = dict(zip(spec.positional, args[:n]))
    for name in spec.keyword:
        env[name] = ABSENT
    rest = args[n:]
    i = 0
    while i < len(rest):
        key = rest[i]
        if not isinstance(key, Keyword):
            raise ArityMismatch(f"unexpected positional argument {serialize(key)} after keywords")
        if key.name not in spec.keyword:
            raise UnknownKeyword(f"unknown keyword :{key.name}")
        if i + 1 >= len(rest):
            raise DanglingKeyword(f":{key.name} has no value")
        if env[key.name] is not ABSENT:
            raise DuplicateKeyword(f":{key.name} given twice")
        env[key.name] = rest[i + 1]
        i += 2
    return env


def _emit_value(value: SExpr, ctx: ResourceContext) -> SExpr:
    ctx.check_depth(depth(value))
    ctx.add_size(len(serialize(value)))
    return value


def _expand_list(head, children, env, ctx) -> SList:
    ctx.enter_depth()
    ctx.add_size(1)  # "("
    out = []
    if head is not None:
        sym = Symbol(head)
        ctx.add_size(len(head))
        out.append(sym)
    for child in children:
        if out:
            ctx.add_size(1)  # separating space
        out.append(_expand(child, env, ctx))
    ctx.add_size(1)  # ")"
    ctx.exit_depth()
    return SList(tuple(out))


def _expand(t: Template, env: Mapping, ctx: ResourceContext) -> SExpr:
    ctx.tick()
    if isinstance(t, Literal):
        ctx.add_size(len(atom_text(t.atom)))
        return t.atom
    if isinstance(t, ParamRef):
        value = env[t.name]
        if value is ABSENT:
            raise AbsentParameter(f"parameter {t.name!r} was not supplied and has no default")
        return _emit_value(value, ctx)
    if isinstance(t, Node):
        return _expand_list(t.head, t.children, env, ctx)
    if isinstance(t, Seq):
        return _expand_list(None, t.items, env, ctx)
    if isinstance(t, Default):
        value = env[t.param]
        if value is ABSENT:
            return _expand(t.fallback, env, ctx)
        return _emit_value(value, ctx)
    if isinstance(t, Cond):
        for branch in t.branches:
            ctx.tick()
            if env[branch.param] == branch.value:
                return _expand(branch.template, env, ctx)
        if t.otherwise is None:
            raise NoMatchingBranch("no cond branch matched and there is no else")
        return _expand(t.otherwise, env, ctx)
    raise TypeError(f"not a template: {t!r}")


def expand_template(t: Template, env: Mapping, ctx: ResourceContext) -> SExpr:
    """One traversal of ``t``; the output is never fed back through the expander."""
    return _expand(t, env, ctx)


def expand_performative(perf: PerformativeDef, args: Sequence[SExpr], ctx: ResourceContext) -> SExpr:
    return expand_template(perf.template, bind_arguments(perf.params, args), ctx)


def expand_invocation(
    msg: LangMessage,
    dialects: Mapping[str, Dialect],
    ctx: Optional[ResourceContext] = None,
) -> Message:
    """Expand a ``lang`` message into a core message.

    Each ``lang`` layer, whether in the input or produced by a template,
    costs one unit of depth and tightens the limits to the named dialect's
    declared requirements.
    """
    if ctx is None:
        ctx = ResourceContext.from_limits()
    current = msg
    while True:
        ctx.enter_depth()
        dialect = dialects.get(current.dialect)
        if dialect is None:
            raise UnknownDialect(f"dialect {current.dialect!r} is not installed")
        ctx.apply_requirements(dialect.requirements)
        inner = current.inner
        head = inner.head_symbol()
        if head == "lang":
            current = LangMessage(inner.items[1].text, inner.items[2])
            continue
        perf = dialect.performative(head)
        if perf is None:
            raise UnknownDialectPerformative(f"dialect {dialect.name!r} has no performative {head!r}")
        out = expand_performative(perf, inner.items[1:], ctx)
        try:
            result = parse_message(out)
        except ValidationError as exc:
            raise ResultNotValidMessage(f"{serialize(out)[:80]}: {exc}") from None
        if not isinstance(result, LangMessage):
            return result
        # a template may hand off to another dialect; still metered by depth
        current = result


def dialect_expander(d: Dialect, limits: SystemLimits = DEFAULT_LIMITS) -> Callable[[SList], SExpr]:
    """Expander for bare invocations of ``d``'s own performatives (used for :examples)."""

    def expand(invocation: SList) -> SExpr:
        ctx = ResourceContext.from_limits(limits)
        ctx.apply_requirements(d.requirements)
        perf = d.performative(invocation.head_symbol())
        if perf is None:
            raise UnknownDialectPerformative(f"dialect {d.name!r} has no performative {invocation.head!r}")
        return expand_performative(perf, invocation.items[1:], ctx)

    return expand
