"""Dialect definitions: the ``(define ...)`` form parsed into structured data.

A definition is an ordinary S-expression, carried by ``(meta (define ...))``
or ``(meta (teach ...))``.  Nothing here evaluates templates; expansion lives
in :mod:`cbcl.expand` and the safety checks in :mod:`cbcl.verify`.

Template syntax inside an ``extend`` body:

* a symbol equal to a declared parameter is a reference to it;
* ``(or param fallback)`` substitutes ``fallback`` when ``param`` is absent;
* ``(cond ((= param atom) template) ... (else template))`` picks the first
  branch whose atom equals the argument;
* a list headed by any other symbol is a node with that literal head;
* any other list is a plain sequence, any other atom a literal.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Tuple, Union

from .errors import (
    CBCLError,
    DuplicatePerformative,
    MalformedDefinition,
    MalformedExamples,
    MalformedExtend,
    MalformedResourceRequirements,
    MissingResourceRequirements,
    UndeclaredParamInTemplate,
    UnknownClause,
)
from .message import RESERVED_HEADS, Recipient
from .sexpr import (
    Atom,
    Integer,
    Keyword,
    SExpr,
    SList,
    Symbol,
    canonical_encode,
    depth,
    is_atom,
    is_safe_symbol,
    serialize,
)

HASH_ALGORITHM = "sha256"
KEY_MARKER = "&key"
# Static nesting cap for template source; far above the 64-level runtime
# ceiling and well inside the interpreter's recursion limit.
MAX_TEMPLATE_NESTING = 128
_TEMPLATE_FORMS = frozenset({"or", "cond", "else", "="})
_REQUIREMENT_FIELDS = {
    "max-depth": "max_depth",
    "max-expansion-size": "max_expansion_size",
    "verification-time": "verification_time_ms",
}


@dataclass(frozen=True)
class ContentHash:
    algorithm: str
    digest: bytes

    def hex(self) -> str:
        return self.digest.hex()

    def __str__(self) -> str:
        return f"{self.algorithm}:{self.digest.hex()}"


@dataclass(frozen=True)
class ResourceRequirements:
    max_depth: int
    max_expansion_size: int
    verification_time_ms: int


@dataclass(frozen=True)
class ParamSpec:
    positional: Tuple[str, ...] = ()
    keyword: Tuple[str, ...] = ()

    @property
    def names(self) -> Tuple[str, ...]:
        return self.positional + self.keyword


# -- templates ---------------------------------------------------------------


@dataclass(frozen=True)
class Literal:
    atom: Atom


@dataclass(frozen=True)
class ParamRef:
    name: str


@dataclass(frozen=True)
class Default:
    param: str
    fallback: "Template"


@dataclass(frozen=True)
class CondBranch:
    param: str
    value: Atom
    template: "Template"


@dataclass(frozen=True)
class Cond:
    branches: Tuple[CondBranch, ...]
    otherwise: Optional["Template"] = None


@dataclass(frozen=True)
class Node:
    head: str
    children: Tuple["Template", ...] = ()


@dataclass(frozen=True)
class Seq:
    items: Tuple["Template", ...] = ()


Template = Union[Literal, ParamRef, Default, Cond, Node, Seq]


def template_children(t: Template) -> Tuple[Template, ...]:
    if isinstance(t, Node):
        return t.children
    if isinstance(t, Seq):
        return t.items
    if isinstance(t, Default):
        return (t.fallback,)
    if isinstance(t, Cond):
        kids = tuple(b.template for b in t.branches)
        return kids + ((t.otherwise,) if t.otherwise is not None else ())
    return ()


def walk_template(t: Template) -> Iterator[Template]:
    stack = [t]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(template_children(node)))


def template_size(t: Template) -> int:
    return sum(1 for _ in walk_template(t))


def template_heads(t: Template) -> Iterator[str]:
    """Symbols in list-head position: the only places expansion could dispatch."""
    for node in walk_template(t):
        if isinstance(node, Node):
            yield node.head


@dataclass(frozen=True)
class PerformativeDef:
    name: str
    params: ParamSpec
    template: Template


@dataclass(frozen=True)
class ExamplePair:
    input: SList
    expected: SExpr


@dataclass(frozen=True)
class Dialect:
    name: str
    parents: Tuple[str, ...]
    author: Recipient
    requirements: ResourceRequirements
    defs: Tuple[PerformativeDef, ...]
    examples: Tuple[ExamplePair, ...]
    hash: ContentHash
    source: SList = field(repr=False, compare=False)
    signature_algorithm: Optional[str] = None

    def performative(self, name: str) -> PerformativeDef | None:
        for d in self.defs:
            if d.name == name:
                return d
        return None

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(d.name for d in self.defs)

    @property
    def size(self) -> int:
        """Total template nodes across all performatives."""
        return sum(template_size(d.template) for d in self.defs)


def dialect_hash(source: SExpr) -> ContentHash:
    return ContentHash(HASH_ALGORITHM, hashlib.sha256(canonical_encode(source)).digest())


# -- parsing -----------------------------------------------------------------


def _parse_params(expr: SExpr, perf: str) -> ParamSpec:
    if not isinstance(expr, SList):
        raise MalformedExtend(f"{perf}: parameter list must be a list")
    positional: list[str] = []
    keyword: list[str] = []
    target = positional
    seen = set()
    for item in expr.items:
        if not isinstance(item, Symbol):
            raise MalformedExtend(f"{perf}: parameter names must be symbols")
        name = item.text
        if name == KEY_MARKER:
            if target is keyword:
                raise MalformedExtend(f"{perf}: &key given twice")
            target = keyword
            continue
        if name.startswith("&") or name in _TEMPLATE_FORMS or name in RESERVED_HEADS or not is_safe_symbol(name):
            raise MalformedExtend(f"{perf}: {name!r} cannot be a parameter name")
        if name in seen:
            raise MalformedExtend(f"{perf}: duplicate parameter {name!r}")
        seen.add(name)
        target.append(name)
    return ParamSpec(tuple(positional), tuple(keyword))


def _param_operand(expr: SExpr, params: frozenset, perf: str, form: str) -> str:
    if not isinstance(expr, Symbol):
        raise MalformedExtend(f"{perf}: {form} needs a parameter name, got {expr!r}")
    if expr.text not in params:
        raise UndeclaredParamInTemplate(f"{perf}: {form} refers to undeclared parameter {expr.text!r}")
    return expr.text


def _parse_cond(items, params: frozenset, perf: str) -> Cond:
    branches = []
    otherwise = None
    for i, branch in enumerate(items):
        if not isinstance(branch, SList) or len(branch) != 2:
            raise MalformedExtend(f"{perf}: cond branch must be (test template)")
        test, body = branch.items
        if test == Symbol("else"):
            if i != len(items) - 1:
                raise MalformedExtend(f"{perf}: else must be the last cond branch")
            otherwise = _parse_template(body, params, perf)
            continue
        if not isinstance(test, SList) or len(test) != 3 or test.head_symbol() != "=":
            raise MalformedExtend(f"{perf}: cond test must be (= param value)")
        name = _param_operand(test[1], params, perf, "cond")
        value = test[2]
        if not is_atom(value):
            raise MalformedExtend(f"{perf}: cond compares against an atom")
        branches.append(CondBranch(name, value, _parse_template(body, params, perf)))
    if not branches and otherwise is None:
        raise MalformedExtend(f"{perf}: empty cond")
    return Cond(tuple(branches), otherwise)


def _parse_template(expr: SExpr, params: frozenset, perf: str) -> Template:
    if not isinstance(expr, SList):
        if isinstance(expr, Symbol) and expr.text in params:
            return ParamRef(expr.text)
        return Literal(expr)
    head = expr.head_symbol()
    if head == "or":
        if len(expr) != 3:
            raise MalformedExtend(f"{perf}: (or param fallback) takes exactly two operands")
        name = _param_operand(expr[1], params, perf, "or")
        return Default(name, _parse_template(expr[2], params, perf))
    if head == "cond":
        return _parse_cond(expr.items[1:], params, perf)
    if head is not None and head not in params:
        return Node(head, tuple(_parse_template(c, params, perf) for c in expr.items[1:]))
    return Seq(tuple(_parse_template(c, params, perf) for c in expr.items))


def parse_template(expr: SExpr, params: ParamSpec, perf: str = "<template>") -> Template:
    if depth(expr) > MAX_TEMPLATE_NESTING:
        raise MalformedExtend(f"{perf}: template nested deeper than {MAX_TEMPLATE_NESTING}")
    return _parse_template(expr, frozenset(params.names), perf)


def _parse_extend(clause: SList) -> PerformativeDef:
    if len(clause) != 4 or not isinstance(clause[1], Symbol):
        raise MalformedExtend("expected (extend <name> (<params>) <template>)")
    name = clause[1].text
    if name in RESERVED_HEADS or name in _TEMPLATE_FORMS or not is_safe_symbol(name):
        raise MalformedExtend(f"{name!r} is reserved and cannot name a performative")
    params = _parse_params(clause[2], name)
    return PerformativeDef(name, params, parse_template(clause[3], params, name))


def _parse_requirements(clause: SList) -> ResourceRequirements:
    if len(clause) != 2 or not isinstance(clause[1], SList):
        raise MalformedResourceRequirements(
            "expected (:resource-requirements ((max-depth N) (max-expansion-size N) (verification-time N)))"
        )
    values: dict[str, int] = {}
    for entry in clause[1].items:
        if (
            not isinstance(entry, SList)
            or len(entry) != 2
            or entry.head_symbol() not in _REQUIREMENT_FIELDS
            or not isinstance(entry[1], Integer)
        ):
            raise MalformedResourceRequirements(f"bad requirement entry {serialize(entry)}")
        key = _REQUIREMENT_FIELDS[entry.head_symbol()]
        if key in values:
            raise MalformedResourceRequirements(f"duplicate requirement {entry.head_symbol()}")
        if entry[1].value <= 0:
            raise MalformedResourceRequirements(f"{entry.head_symbol()} must be positive")
        values[key] = entry[1].value
    missing = [k for k, f in _REQUIREMENT_FIELDS.items() if f not in values]
    if missing:
        raise MissingResourceRequirements(f"missing {', '.join(missing)}")
    return ResourceRequirements(**values)


def _parse_examples(clause: SList, defs: dict) -> Tuple[ExamplePair, ...]:
    items = clause.items[1:]
    if len(items) % 2:
        raise MalformedExamples(":examples takes input/output pairs")
    pairs = []
    for i in range(0, len(items), 2):
        inp, expected = items[i], items[i + 1]
        if not isinstance(inp, SList) or inp.head_symbol() not in defs:
            raise MalformedExamples(f"example input {serialize(inp)} does not invoke this dialect")
        pairs.append(ExamplePair(inp, expected))
    return tuple(pairs)


def parse_dialect(source: SExpr) -> Dialect:
    """Build a :class:`Dialect` from a ``(define name (parents) @author clause...)`` form."""
    if not isinstance(source, SList) or source.head_symbol() != "define" or len(source) < 4:
        raise MalformedDefinition("expected (define <name> (<parents>) @<author> <clause>...)")
    _, name, parents, author, *clauses = source.items
    if not isinstance(name, Symbol) or not is_safe_symbol(name.text):
        raise MalformedDefinition("dialect name must be a symbol")
    if not isinstance(parents, SList) or any(p != Symbol("cbcl") for p in parents.items):
        raise MalformedDefinition("the only permitted parent dialect is cbcl")
    who = Recipient.from_expr(author)
    if who is None:
        raise MalformedDefinition("dialect author must be an @recipient")

    requirements = None
    signature_algorithm = None
    defs: dict[str, PerformativeDef] = {}
    example_clauses = []
    for clause in clauses:
        if not isinstance(clause, SList) or not clause.items:
            raise UnknownClause(f"unexpected clause {serialize(clause)}")
        head = clause.head
        if head == Symbol("extend"):
            perf = _parse_extend(clause)
            if perf.name in defs:
                raise DuplicatePerformative(f"performative {perf.name!r} defined twice")
            defs[perf.name] = perf
        elif head == Keyword("resource-requirements"):
            if requirements is not None:
                raise MalformedResourceRequirements("resource requirements given twice")
            requirements = _parse_requirements(clause)
        elif head == Keyword("examples"):
            example_clauses.append(clause)
        elif head == Keyword("signature-algorithm"):
            if len(clause) != 2 or not isinstance(clause[1], Symbol) or signature_algorithm:
                raise MalformedDefinition("expected one (:signature-algorithm <name>)")
            signature_algorithm = clause[1].text
        else:
            raise UnknownClause(f"unknown clause {serialize(clause)[:60]}")
    if requirements is None:
        raise MissingResourceRequirements(f"dialect {name.text!r} declares no :resource-requirements")
    examples: Tuple[ExamplePair, ...] = ()
    for clause in example_clauses:
        examples += _parse_examples(clause, defs)

    return Dialect(
        name=name.text,
        parents=tuple(p.text for p in parents.items),
        author=who,
        requirements=requirements,
        defs=tuple(defs.values()),
        examples=examples,
        hash=dialect_hash(source),
        source=source,
        signature_algorithm=signature_algorithm,
    )


# -- example checks ----------------------------------------------------------


@dataclass(frozen=True)
class ExampleResult:
    pair: ExamplePair
    actual: Optional[SExpr]
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.error is None and self.actual == self.pair.expected

    def describe(self) -> str:
        if self.passed:
            return f"pass: {serialize(self.pair.input)}"
        got = self.error if self.error is not None else serialize(self.actual)
        return f"FAIL: {serialize(self.pair.input)}\n  expected {serialize(self.pair.expected)}\n  got      {got}"


@dataclass(frozen=True)
class ExampleReport:
    results: Tuple[ExampleResult, ...] = ()

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> Tuple[ExampleResult, ...]:
        return tuple(r for r in self.results if not r.passed)


def check_examples(d: Dialect, expander: Callable[[SList], SExpr]) -> ExampleReport:
    """Expand each example input with ``expander`` and compare to the declared output."""
    results = []
    for pair in d.examples:
        try:
            actual = expander(pair.input)
        except CBCLError as exc:
            results.append(ExampleResult(pair, None, f"{exc.code}: {exc}"))
            continue
        results.append(ExampleResult(pair, actual))
    return ExampleReport(tuple(results))
