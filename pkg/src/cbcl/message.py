"""Classification of S-expressions into the four message categories.

Dispatch is on the head symbol alone: the eight core performatives, ``meta``,
``lang`` and the three wrapper heads are pairwise distinct, so every list
classifies one way or is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

from .errors import (
    MalformedLang,
    MalformedMeta,
    MalformedParams,
    MalformedWrapper,
    MissingRecipient,
    UnknownPerformative,
)
from .sexpr import Integer, Keyword, SExpr, SList, String, Symbol, is_safe_symbol

CORE_PERFORMATIVES = frozenset(
    {"tell", "ask", "reply", "hello", "bye", "ok", "error", "cancel"}
)
WRAPPER_HEADS = frozenset({"with-limits", "envelope", "signed"})
RESERVED_HEADS = frozenset({"meta", "lang"}) | WRAPPER_HEADS

_LIMIT_KEYS = {"timeout": "timeout_ms", "max-depth": "max_depth"}
_HEX = frozenset("0123456789abcdef")


@dataclass(frozen=True)
class Recipient:
    """An ``@name`` address; ``name`` excludes the ``@``."""

    name: str

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name or not is_safe_symbol("@" + self.name):
            raise ValueError(f"invalid recipient name {self.name!r}")

    @property
    def symbol(self) -> Symbol:
        return Symbol("@" + self.name)

    @classmethod
    def from_expr(cls, expr: SExpr) -> "Recipient | None":
        if isinstance(expr, Symbol) and len(expr.text) > 1 and expr.text[0] == "@":
            try:
                return cls(expr.text[1:])
            except ValueError:
                return None
        return None

    def __str__(self) -> str:
        return "@" + self.name


@dataclass(frozen=True)
class Parameter:
    key: Keyword
    value: SExpr


@dataclass(frozen=True)
class SimpleMessage:
    performative: str
    to: Recipient
    content: Optional[SExpr] = None
    params: Tuple[Parameter, ...] = ()

    def __post_init__(self):
        if self.performative not in CORE_PERFORMATIVES:
            raise ValueError(f"{self.performative!r} is not a core performative")
        if isinstance(self.content, Keyword):
            raise ValueError("content cannot be a keyword")

    def param(self, name: str) -> SExpr | None:
        for p in self.params:
            if p.key.name == name:
                return p.value
        return None


@dataclass(frozen=True)
class Define:
    source: SList


@dataclass(frozen=True)
class Query:
    dialect: str
    to: Recipient


@dataclass(frozen=True)
class Teach:
    dialect: str
    to: Recipient
    source: SList


MetaAction = Union[Define, Query, Teach]


@dataclass(frozen=True)
class MetaMessage:
    action: MetaAction


@dataclass(frozen=True)
class LangMessage:
    """A dialect invocation scoped by ``(lang <dialect> ...)``; ``inner`` is unexpanded."""

    dialect: str
    inner: SList


@dataclass(frozen=True)
class WithLimits:
    timeout_ms: Optional[int] = None
    max_depth: Optional[int] = None


@dataclass(frozen=True)
class Envelope:
    metadata: Tuple[Parameter, ...] = ()


@dataclass(frozen=True)
class Signed:
    algorithm: str
    signature: bytes


Wrapper = Union[WithLimits, Envelope, Signed]


@dataclass(frozen=True)
class WrappedMessage:
    wrapper: Wrapper
    inner: "Message"


Message = Union[SimpleMessage, MetaMessage, LangMessage, WrappedMessage]


# -- parsing -----------------------------------------------------------------


def _head(expr: SExpr) -> str:
    if not isinstance(expr, SList) or not expr.items:
        raise UnknownPerformative("a message must be a non-empty list")
    head = expr.head_symbol()
    if head is None:
        raise UnknownPerformative("message head must be a symbol")
    return head


def parse_params(items, error=MalformedParams) -> Tuple[Parameter, ...]:
    """Read ``:key value`` pairs; keys must be distinct keywords."""
    if len(items) % 2:
        raise error(f"dangling keyword parameter {items[-1]!r}")
    params = []
    seen = set()
    for i in range(0, len(items), 2):
        key = items[i]
        if not isinstance(key, Keyword):
            raise error(f"expected a keyword, found {key!r}")
        if key.name in seen:
            raise error(f"duplicate parameter :{key.name}")
        seen.add(key.name)
        params.append(Parameter(key, items[i + 1]))
    return tuple(params)


def _parse_simple(head: str, expr: SList) -> SimpleMessage:
    items = expr.items
    to = Recipient.from_expr(items[1]) if len(items) > 1 else None
    if to is None:
        raise MissingRecipient(f"{head} needs an @recipient as its second element")
    rest = items[2:]
    content = None
    if rest and not isinstance(rest[0], Keyword):
        content, rest = rest[0], rest[1:]
    return SimpleMessage(head, to, content, parse_params(rest))


def _parse_meta(expr: SList) -> MetaMessage:
    items = expr.items
    if len(items) != 2 or not isinstance(items[1], SList):
        raise MalformedMeta("meta takes exactly one action form")
    action = items[1]
    kind = action.head_symbol()
    args = action.items[1:]
    if kind == "define":
        if not args or not isinstance(args[0], Symbol):
            raise MalformedMeta("define needs a dialect name")
        return MetaMessage(Define(action))
    if kind == "query":
        to = Recipient.from_expr(args[1]) if len(args) == 2 else None
        if to is None or not isinstance(args[0], Symbol):
            raise MalformedMeta("expected (query <dialect> @recipient)")
        return MetaMessage(Query(args[0].text, to))
    if kind == "teach":
        to = Recipient.from_expr(args[1]) if len(args) == 3 else None
        if to is None or not isinstance(args[0], Symbol):
            raise MalformedMeta("expected (teach <dialect> @recipient <definition>)")
        source = args[2]
        if (
            not isinstance(source, SList)
            or source.head_symbol() != "define"
            or len(source) < 2
            or source[1] != args[0]
        ):
            raise MalformedMeta(f"teach payload must be (define {args[0].text} ...)")
        return MetaMessage(Teach(args[0].text, to, source))
    raise MalformedMeta(f"unknown meta action {action.head!r}")


def _check_lang(expr: SList) -> SList:
    items = expr.items
    if len(items) != 3 or not isinstance(items[1], Symbol):
        raise MalformedLang("expected (lang <dialect> (<performative> ...))")
    inner = items[2]
    if not isinstance(inner, SList) or inner.head_symbol() is None:
        raise MalformedLang("lang body must be a list headed by a symbol")
    return inner


def _parse_lang(expr: SList) -> LangMessage:
    inner = _check_lang(expr)
    # Directly nested lang layers are validated here too, so expansion
    # never meets a malformed layer.
    layer = inner
    while layer.head_symbol() == "lang":
        layer = _check_lang(layer)
    return LangMessage(expr.items[1].text, inner)


def _parse_wrapper(head: str, expr: SList) -> tuple[Wrapper, SExpr]:
    items = expr.items
    if len(items) < 2:
        raise MalformedWrapper(f"{head} needs an inner message")
    inner = items[-1]
    if head == "signed":
        if len(items) != 4:
            raise MalformedWrapper("expected (signed <algorithm> \"<hex>\" <message>)")
        alg, sig = items[1], items[2]
        if not isinstance(alg, Symbol) or not isinstance(sig, String):
            raise MalformedWrapper("signed needs an algorithm symbol and a hex string")
        hexdigits = sig.text
        if len(hexdigits) % 2 or not set(hexdigits) <= _HEX:
            raise MalformedWrapper("signature must be lowercase hex")
        return Signed(alg.text, bytes.fromhex(hexdigits)), inner
    params = parse_params(items[1:-1], MalformedWrapper)
    if head == "envelope":
        return Envelope(params), inner
    values = {}
    for p in params:
        field = _LIMIT_KEYS.get(p.key.name)
        if field is None:
            raise MalformedWrapper(f"unknown limit :{p.key.name}")
        if not isinstance(p.value, Integer) or p.value.value <= 0:
            raise MalformedWrapper(f":{p.key.name} must be a positive integer")
        values[field] = p.value.value
    return WithLimits(**values), inner


def parse_message(expr: SExpr) -> Message:
    """Classify ``expr``; raises a :class:`ValidationError` subclass if it is not a message."""
    wrappers = []
    while True:
        head = _head(expr)
        if head not in WRAPPER_HEADS:
            break
        wrapper, expr = _parse_wrapper(head, expr)
        wrappers.append(wrapper)
    if head in CORE_PERFORMATIVES:
        msg: Message = _parse_simple(head, expr)
    elif head == "meta":
        msg = _parse_meta(expr)
    elif head == "lang":
        msg = _parse_lang(expr)
    else:
        raise UnknownPerformative(
            f"{head!r} is not a core performative; dialect performatives need a lang wrapper"
        )
    for wrapper in reversed(wrappers):
        msg = WrappedMessage(wrapper, msg)
    return msg


def unwrap(msg: Message) -> tuple[Tuple[Wrapper, ...], Message]:
    """Split off wrappers outermost-first, returning them with the core message."""
    wrappers = []
    while isinstance(msg, WrappedMessage):
        wrappers.append(msg.wrapper)
        msg = msg.inner
    return tuple(wrappers), msg


# -- serializing -------------------------------------------------------------


def _params_expr(params) -> list:
    out = []
    for p in params:
        out.append(p.key)
        out.append(p.value)
    return out


def _wrapper_prefix(wrapper: Wrapper) -> list:
    if isinstance(wrapper, WithLimits):
        out = [Symbol("with-limits")]
        if wrapper.timeout_ms is not None:
            out += [Keyword("timeout"), Integer(wrapper.timeout_ms)]
        if wrapper.max_depth is not None:
            out += [Keyword("max-depth"), Integer(wrapper.max_depth)]
        return out
    if isinstance(wrapper, Envelope):
        return [Symbol("envelope")] + _params_expr(wrapper.metadata)
    return [Symbol("signed"), Symbol(wrapper.algorithm), String(wrapper.signature.hex())]


def serialize_message(msg: Message) -> SList:
    """Render ``msg`` back to the S-expression it was classified from."""
    wrappers, core = unwrap(msg)
    if isinstance(core, SimpleMessage):
        items = [Symbol(core.performative), core.to.symbol]
        if core.content is not None:
            items.append(core.content)
        out = SList(tuple(items + _params_expr(core.params)))
    elif isinstance(core, MetaMessage):
        action = core.action
        if isinstance(action, Define):
            body = action.source
        elif isinstance(action, Query):
            body = SList.of(Symbol("query"), Symbol(action.dialect), action.to.symbol)
        else:
            body = SList.of(Symbol("teach"), Symbol(action.dialect), action.to.symbol, action.source)
        out = SList.of(Symbol("meta"), body)
    elif isinstance(core, LangMessage):
        out = SList.of(Symbol("lang"), Symbol(core.dialect), core.inner)
    else:
        raise TypeError(f"not a message: {core!r}")
    for wrapper in reversed(wrappers):
        out = SList(tuple(_wrapper_prefix(wrapper)) + (out,))
    return out
