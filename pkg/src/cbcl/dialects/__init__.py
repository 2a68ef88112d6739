"""Bundled dialect definitions: worked examples and the attack corpus."""

from __future__ import annotations

from importlib import resources

BENIGN = ("logistics", "agriculture", "planning", "cross-chain", "artifacts", "email")
ATTACKS = ("recursion-bomb", "ping-pong", "core-redefine", "expansion-bomb")
NESTING = ("nest-d1", "nest-d2", "nest-d3")


def names() -> list[str]:
    return sorted(p.name[: -len(".cbcl")] for p in resources.files(__name__).iterdir() if p.name.endswith(".cbcl"))


def source(name: str) -> str:
    """Text of the bundled file ``<name>.cbcl``."""
    path = resources.files(__name__) / f"{name}.cbcl"
    if not path.is_file():
        raise KeyError(name)
    return path.read_text(encoding="utf-8")


def load(name: str):
    """Parse a bundled file into a :class:`~cbcl.dialect.Dialect`."""
    from ..dialect import parse_dialect
    from ..message import MetaMessage, parse_message
    from ..sexpr import parse_sexpr

    msg = parse_message(parse_sexpr(source(name)))
    assert isinstance(msg, MetaMessage)
    return parse_dialect(msg.action.source)
