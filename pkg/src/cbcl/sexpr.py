"""S-expression values, the fuel-bounded reader, and both serializers.

Atoms are one of five kinds (symbol, keyword, string, integer, boolean);
everything else is a list.  All values are immutable.

Two renderings exist.  :func:`serialize` produces the display form that
:func:`parse_sexpr` reads back.  :func:`canonical_encode` produces the
whitespace-free, length-prefixed byte form used for hashing and signing.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterator, Tuple, Union

from .errors import (
    EmptyInput,
    FuelExhausted,
    InvalidAtom,
    InvalidEncoding,
    ParseError,
    TrailingInput,
    UnbalancedParen,
    UnterminatedString,
)

WHITESPACE = " \t\r\n"
DELIMITERS = '()"' + WHITESPACE

_TOKEN = re.compile(r'[^ \t\r\n()"]+')
# Bare tokens must not smuggle control characters or exotic whitespace that
# other readers might treat as separators.
_FORBIDDEN_IN_TOKEN = re.compile(r"[\x00-\x1f\x7f-\x9f\s]")
_INTEGER = re.compile(r"-?[0-9]+\Z")
_DIGITS = "0123456789"
_STRING_RUN = re.compile(r'[^"\\]*')
_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t"}
_TRUE = ("#t", "true")
_FALSE = ("#f", "false")


def _check_bare(text: str, kind: str) -> None:
    if not isinstance(text, str) or not text:
        raise ValueError(f"{kind} text must be a non-empty string")
    if not _TOKEN.fullmatch(text) or _FORBIDDEN_IN_TOKEN.search(text):
        raise ValueError(f"{kind} text {text!r} contains a delimiter or control character")


@dataclass(frozen=True, slots=True)
class Symbol:
    text: str

    def __post_init__(self):
        _check_bare(self.text, "symbol")


@dataclass(frozen=True, slots=True)
class Keyword:
    """A ``:name`` atom.  ``name`` excludes the leading colon."""

    name: str

    def __post_init__(self):
        _check_bare(self.name, "keyword")


@dataclass(frozen=True, slots=True)
class String:
    text: str

    def __post_init__(self):
        if not isinstance(self.text, str):
            raise ValueError("string atom needs str text")


@dataclass(frozen=True, slots=True)
class Integer:
    value: int

    def __post_init__(self):
        if type(self.value) is not int:
            raise ValueError("integer atom needs an int value")


@dataclass(frozen=True, slots=True)
class Boolean:
    value: bool

    def __post_init__(self):
        if type(self.value) is not bool:
            raise ValueError("boolean atom needs a bool value")


Atom = Union[Symbol, Keyword, String, Integer, Boolean]
ATOM_TYPES = (Symbol, Keyword, String, Integer, Boolean)


@dataclass(frozen=True, slots=True, eq=False)
class SList:
    # Equality and hashing are iterative so arbitrarily deep values compare safely.
    items: Tuple["SExpr", ...] = ()

    def __post_init__(self):
        if not isinstance(self.items, tuple):
            object.__setattr__(self, "items", tuple(self.items))

    @classmethod
    def of(cls, *items: "SExpr") -> "SList":
        return cls(items)

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator["SExpr"]:
        return iter(self.items)

    def __getitem__(self, index):
        return self.items[index]

    @property
    def head(self) -> "SExpr | None":
        return self.items[0] if self.items else None

    def __eq__(self, other) -> bool:
        if not isinstance(other, SList):
            return NotImplemented
        pending = [(self, other)]
        while pending:
            a, b = pending.pop()
            if a is b:
                continue
            if len(a.items) != len(b.items):
                return False
            for x, y in zip(a.items, b.items):
                if isinstance(x, SList):
                    if not isinstance(y, SList):
                        return False
                    pending.append((x, y))
                elif isinstance(y, SList) or x != y:
                    return False
        return True

    def __hash__(self) -> int:
        return hash(canonical_encode(self))

    def head_symbol(self) -> str | None:
        """Text of the leading symbol, or None when the head is anything else."""
        if self.items and isinstance(self.items[0], Symbol):
            return self.items[0].text
        return None


SExpr = Union[Atom, SList]


def is_atom(expr) -> bool:
    return isinstance(expr, ATOM_TYPES)


# -- reading -----------------------------------------------------------------


class _Fuel:
    __slots__ = ("remaining", "initial")

    def __init__(self, amount: int):
        self.initial = self.remaining = amount

    def burn(self, position: int) -> None:
        if self.remaining <= 0:
            raise FuelExhausted("parser fuel exhausted", position)
        self.remaining -= 1


def initial_fuel(text: str) -> int:
    """Fuel granted to the reader for ``text``: four steps per character plus one."""
    return len(text) * 4 + 1


def classify_token(token: str, position: int = 0) -> Atom:
    """Turn one bare (unquoted) token into an atom."""
    if token in _TRUE:
        return Boolean(True)
    if token in _FALSE:
        return Boolean(False)
    if _FORBIDDEN_IN_TOKEN.search(token):
        raise InvalidAtom(f"control or whitespace character in token {token!r}", position)
    if _INTEGER.match(token):
        return Integer(int(token))
    if token[0] == ":":
        if len(token) == 1:
            raise InvalidAtom("keyword without a name", position)
        return Keyword(token[1:])
    if token[0] in _DIGITS or (token[0] == "-" and len(token) > 1 and token[1] in _DIGITS):
        raise InvalidAtom(f"malformed number {token!r}", position)
    return Symbol(token)


def _skip_ws(text: str, pos: int, end: int) -> int:
    while pos < end and text[pos] in WHITESPACE:
        pos += 1
    return pos


def _read_string(text: str, start: int, end: int) -> tuple[String, int]:
    pos = start + 1
    chunks = []
    while True:
        run = _STRING_RUN.match(text, pos)
        chunks.append(run.group())
        pos = run.end()
        if pos >= end:
            raise UnterminatedString("unterminated string", start)
        if text[pos] == '"':
            return String("".join(chunks)), pos + 1
        # backslash escape
        if pos + 1 >= end:
            raise UnterminatedString("unterminated string", start)
        escaped = _ESCAPES.get(text[pos + 1])
        if escaped is None:
            raise InvalidAtom(f"unknown escape \\{text[pos + 1]}", pos)
        chunks.append(escaped)
        pos += 2


def _read_one(text: str, pos: int, end: int, fuel: _Fuel) -> tuple[SExpr, int]:
    # Explicit stack instead of recursion: nesting depth is bounded only by
    # the input length, never by the interpreter's call stack.
    stack: list[tuple[int, list]] = []
    while True:
        fuel.burn(pos)
        if pos >= end:
            raise UnbalancedParen("unclosed '('", stack[-1][0])
        c = text[pos]
        if c == "(":
            fuel.burn(pos)
            stack.append((pos, []))
            pos = _skip_ws(text, pos + 1, end)
            continue
        if c == ")":
            if not stack:
                raise UnbalancedParen("unexpected ')'", pos)
            fuel.burn(pos)
            _, items = stack.pop()
            value: SExpr = SList(tuple(items))
            pos += 1
        elif c == '"':
            value, pos = _read_string(text, pos, end)
        else:
            m = _TOKEN.match(text, pos)
            value = classify_token(m.group(), pos)
            pos = m.end()
        if not stack:
            return value, pos
        stack[-1][1].append(value)
        pos = _skip_ws(text, pos, end)


def parse_sexpr(source: str | bytes) -> SExpr:
    """Read exactly one S-expression from ``source``.

    Surrounding whitespace is ignored; anything else after the first form is
    a :class:`TrailingInput` error.  ``bytes`` are decoded as strict UTF-8.
    """
    if isinstance(source, (bytes, bytearray)):
        try:
            source = bytes(source).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InvalidEncoding("input is not valid UTF-8", exc.start) from None
    end = len(source)
    fuel = _Fuel(initial_fuel(source))
    pos = _skip_ws(source, 0, end)
    if pos == end:
        raise EmptyInput("empty input", pos)
    expr, pos = _read_one(source, pos, end, fuel)
    pos = _skip_ws(source, pos, end)
    if pos != end:
        raise TrailingInput("trailing input after first expression", pos)
    return expr


def is_safe_symbol(name: str) -> bool:
    """True iff ``name`` would be read back as exactly ``Symbol(name)``."""
    if not isinstance(name, str) or not name or not _TOKEN.fullmatch(name):
        return False
    try:
        atom = classify_token(name)
    except ParseError:
        return False
    return isinstance(atom, Symbol)


# -- display form ------------------------------------------------------------


def _quote(text: str) -> str:
    return '"' + (
        text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
    ) + '"'


def atom_text(atom: Atom) -> str:
    """Display form of a single atom."""
    if isinstance(atom, Symbol):
        return atom.text
    if isinstance(atom, String):
        return _quote(atom.text)
    if isinstance(atom, Keyword):
        return ":" + atom.name
    if isinstance(atom, Integer):
        return str(atom.value)
    if isinstance(atom, Boolean):
        return "#t" if atom.value else "#f"
    raise TypeError(f"not an atom: {atom!r}")


_OPEN, _CLOSE, _SPACE = object(), object(), object()


def _walk_tokens(expr: SExpr):
    """Yield atoms and the _OPEN/_CLOSE/_SPACE markers in display order."""
    stack = [expr]
    while stack:
        item = stack.pop()
        if item is _CLOSE or item is _SPACE:
            yield item
        elif isinstance(item, SList):
            yield _OPEN
            stack.append(_CLOSE)
            children = item.items
            for i in range(len(children) - 1, -1, -1):
                stack.append(children[i])
                if i:
                    stack.append(_SPACE)
        else:
            yield item


def serialize(expr: SExpr) -> str:
    """Single-space separated display text; inverse of :func:`parse_sexpr`."""
    out = []
    for tok in _walk_tokens(expr):
        if tok is _OPEN:
            out.append("(")
        elif tok is _CLOSE:
            out.append(")")
        elif tok is _SPACE:
            out.append(" ")
        else:
            out.append(atom_text(tok))
    return "".join(out)


_KIND = {Symbol: "symbol", String: "string", Keyword: "keyword", Integer: "integer", Boolean: "boolean"}


def _atom_value(atom: Atom):
    if isinstance(atom, Symbol):
        return atom.text
    if isinstance(atom, String):
        return atom.text
    if isinstance(atom, Keyword):
        return atom.name
    return atom.value


def to_json(expr: SExpr) -> str:
    """Single-line JSON tree: ``{"type": kind, "value": v}`` or ``{"type": "list", "items": [...]}``."""
    out = []
    for tok in _walk_tokens(expr):
        if tok is _OPEN:
            out.append('{"type": "list", "items": [')
        elif tok is _CLOSE:
            out.append("]}")
        elif tok is _SPACE:
            out.append(", ")
        else:
            out.append(json.dumps({"type": _KIND[type(tok)], "value": _atom_value(tok)}))
    return "".join(out)


# -- canonical form ----------------------------------------------------------

# Symbols are bare RFC 9804 verbatim atoms; every other kind carries a
# one-letter tag so that e.g. the string "a" and the symbol a never share bytes.
_TAGS = {String: b"s", Keyword: b"k", Integer: b"i", Boolean: b"b"}
_TAG_TYPES = {v[0]: k for k, v in _TAGS.items()}


def _canonical_payload(atom: Atom) -> bytes:
    if isinstance(atom, String):
        return atom.text.encode("utf-8")
    return atom_text(atom).encode("utf-8")


def canonical_atom(atom: Atom) -> bytes:
    payload = _canonical_payload(atom)
    tag = _TAGS.get(type(atom), b"")
    return tag + str(len(payload)).encode("ascii") + b":" + payload


def canonical_encode(expr: SExpr) -> bytes:
    """Deterministic byte encoding: structurally equal values give equal bytes."""
    out = []
    for tok in _walk_tokens(expr):
        if tok is _OPEN:
            out.append(b"(")
        elif tok is _CLOSE:
            out.append(b")")
        elif tok is _SPACE:
            continue
        else:
            out.append(canonical_atom(tok))
    return b"".join(out)


def _decode_atom(kind, payload: bytes, pos: int) -> Atom:
    try:
        text = payload.decode("utf-8")
    except UnicodeDecodeError:
        raise InvalidEncoding("atom payload is not valid UTF-8", pos) from None
    try:
        if kind is Symbol:
            return Symbol(text)
        if kind is String:
            return String(text)
        if kind is Keyword:
            if not text.startswith(":"):
                raise ValueError("keyword payload must start with ':'")
            return Keyword(text[1:])
        if kind is Integer:
            if not _INTEGER.match(text) or str(int(text)) != text:
                raise ValueError("non-canonical integer")
            return Integer(int(text))
        if text == "#t":
            return Boolean(True)
        if text == "#f":
            return Boolean(False)
        raise ValueError("boolean payload must be #t or #f")
    except ValueError as exc:
        raise InvalidAtom(str(exc), pos) from None


def canonical_decode(data: bytes) -> SExpr:
    """Inverse of :func:`canonical_encode`; rejects anything it would not emit."""
    data = bytes(data)
    end = len(data)
    if end == 0:
        raise EmptyInput("empty input", 0)
    pos = 0
    stack: list[tuple[int, list]] = []
    while True:
        if pos >= end:
            if stack:
                raise UnbalancedParen("unclosed '('", stack[-1][0])
            raise EmptyInput("empty input", pos)
        c = data[pos]
        if c == 0x28:  # (
            stack.append((pos, []))
            pos += 1
            continue
        if c == 0x29:  # )
            if not stack:
                raise UnbalancedParen("unexpected ')'", pos)
            _, items = stack.pop()
            value: SExpr = SList(tuple(items))
            pos += 1
        else:
            start = pos
            kind = _TAG_TYPES.get(c)
            if kind is None:
                kind = Symbol
            else:
                pos += 1
            digits_end = pos
            while digits_end < end and 0x30 <= data[digits_end] <= 0x39:
                digits_end += 1
            if digits_end == pos or digits_end >= end or data[digits_end] != 0x3A:
                raise InvalidAtom("expected <length>:", start)
            digits = data[pos:digits_end]
            if len(digits) > 1 and digits[0] == 0x30:
                raise InvalidAtom("length with leading zero", start)
            if len(digits) > len(str(end)):
                raise InvalidAtom("length exceeds input", start)
            length = int(digits)
            body_start = digits_end + 1
            if body_start + length > end:
                raise InvalidAtom("length exceeds input", start)
            value = _decode_atom(kind, data[body_start:body_start + length], start)
            pos = body_start + length
        if not stack:
            if pos != end:
                raise TrailingInput("trailing bytes after first expression", pos)
            return value
        stack[-1][1].append(value)


# -- structural measures -----------------------------------------------------


def depth(expr: SExpr) -> int:
    """Nesting depth: 0 for an atom, 1 + deepest child for a list."""
    best = 0
    stack = [(expr, 0)]
    while stack:
        node, d = stack.pop()
        if isinstance(node, SList):
            d += 1
            if d > best:
                best = d
            stack.extend((child, d) for child in node.items)
    return best


def node_count(expr: SExpr) -> int:
    count = 0
    stack = [expr]
    while stack:
        node = stack.pop()
        count += 1
        if isinstance(node, SList):
            stack.extend(node.items)
    return count


def symbols_in(expr: SExpr) -> Iterator[str]:
    """Every symbol text occurring anywhere in ``expr``."""
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, SList):
            stack.extend(node.items)
        elif isinstance(node, Symbol):
            yield node.text
