"""Shared test helpers."""

from __future__ import annotations

import random

from cbcl import Agent, dialects, run_pipeline
from cbcl.sexpr import Boolean, Integer, Keyword, SList, String, Symbol

SYMBOL_START = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ!$%&*+-./<=>?@^_~"
SYMBOL_REST = SYMBOL_START + "0123456789:#"
STRING_CHARS = 'abc XYZ\\"\n\t()#:;-019é漢😀'


def make_agent(*names: str, **kwargs) -> Agent:
    """Agent with the named bundled dialects installed through the pipeline."""
    agent = Agent(**kwargs)
    for name in names:
        result = run_pipeline(dialects.source(name), agent)
        assert result.accepted, result.describe()
    return agent


def random_symbol(rng: random.Random) -> Symbol:
    """A symbol that no lexer rule other than the symbol rule could claim."""
    while True:
        text = rng.choice(SYMBOL_START) + "".join(
            rng.choice(SYMBOL_REST) for _ in range(rng.randrange(0, 8))
        )
        if text in ("true", "false"):
            continue
        if text[0] in "+-" and len(text) > 1 and text[1].isdigit():
            continue
        return Symbol(text)


def random_atom(rng: random.Random):
    kind = rng.randrange(5)
    if kind == 0:
        return random_symbol(rng)
    if kind == 1:
        return Keyword(random_symbol(rng).text)
    if kind == 2:
        return String("".join(rng.choice(STRING_CHARS) for _ in range(rng.randrange(0, 10))))
    if kind == 3:
        return Integer(rng.randint(-(10**12), 10**12))
    return Boolean(rng.random() < 0.5)


def random_sexpr(rng: random.Random, max_depth: int = 6, max_width: int = 5):
    if max_depth == 0 or rng.random() < 0.4:
        return random_atom(rng)
    return SList(tuple(random_sexpr(rng, max_depth - 1, max_width) for _ in range(rng.randrange(0, max_width + 1))))
