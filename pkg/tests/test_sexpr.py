import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbcl.errors import (
    EmptyInput,
    InvalidAtom,
    InvalidEncoding,
    ParseError,
    TrailingInput,
    UnbalancedParen,
    UnterminatedString,
)
from cbcl.sexpr import (
    Boolean,
    Integer,
    Keyword,
    SList,
    String,
    Symbol,
    canonical_decode,
    canonical_encode,
    depth,
    initial_fuel,
    is_safe_symbol,
    node_count,
    parse_sexpr,
    serialize,
    to_json,
)

from support import SYMBOL_REST, SYMBOL_START, random_sexpr

# -- strategies ---------------------------------------------------------------

symbols = st.builds(
    lambda a, b: a + b,
    st.sampled_from(SYMBOL_START),
    st.text(alphabet=SYMBOL_REST, max_size=8),
).filter(lambda s: s not in ("true", "false") and not (s[0] in "+-" and s[1:2].isdigit()))
atoms = st.one_of(
    symbols.map(Symbol),
    symbols.map(Keyword),
    st.text(max_size=12).map(String),
    st.integers().map(Integer),
    st.booleans().map(Boolean),
)
sexprs = st.recursive(atoms, lambda kids: st.lists(kids, max_size=5).map(lambda xs: SList(tuple(xs))), max_leaves=30)


def test_tell_example():
    assert parse_sexpr('(tell @bob "The meeting is at 3pm")') == SList.of(
        Symbol("tell"), Symbol("@bob"), String("The meeting is at 3pm")
    )


def test_empty_list():
    assert parse_sexpr("()") == SList(())
    assert parse_sexpr("  ( \t\r\n )  ") == SList(())


@pytest.mark.parametrize(
    "text, error",
    [
        ("(a b", UnbalancedParen),
        ("a)", TrailingInput),
        ("(a) (b)", TrailingInput),
        (")", UnbalancedParen),
        ("", EmptyInput),
        ("   ", EmptyInput),
        ('"abc', UnterminatedString),
        ('("a\\q")', InvalidAtom),
        ("12abc", InvalidAtom),
        (":", InvalidAtom),
        ("a\x00b", InvalidAtom),
    ],
)
def test_parse_errors(text, error):
    with pytest.raises(error) as caught:
        parse_sexpr(text)
    assert caught.value.position >= 0


def test_error_positions():
    with pytest.raises(UnbalancedParen) as caught:
        parse_sexpr("((")
    assert caught.value.position in (0, 1, 2)
    with pytest.raises(TrailingInput) as caught:
        parse_sexpr("(a) (b)")
    assert caught.value.position == 4


def test_bytes_input():
    assert parse_sexpr('(s "é")'.encode()) == SList.of(Symbol("s"), String("é"))
    with pytest.raises(InvalidEncoding):
        parse_sexpr(b"(\xff)")


def test_atom_kinds():
    assert parse_sexpr("#t") == Boolean(True)
    assert parse_sexpr("true") == Boolean(True)
    assert parse_sexpr("false") == Boolean(False)
    assert parse_sexpr("-7") == Integer(-7)
    assert parse_sexpr(":route") == Keyword("route")
    assert parse_sexpr('"a\\"b\\\\c\\nd\\te"') == String('a"b\\c\nd\te')
    assert parse_sexpr("A->B") == Symbol("A->B")
    assert parse_sexpr("-") == Symbol("-")


def test_serialize_examples():
    assert serialize(SList.of(Symbol("a"), SList.of(Symbol("b"), Integer(3)))) == "(a (b 3))"
    assert serialize(String("hi there")) == '"hi there"'
    assert serialize(Integer(-7)) == "-7"
    assert serialize(Boolean(True)) == "#t"


def test_is_safe_symbol():
    assert is_safe_symbol("tell")
    assert not is_safe_symbol("42")
    assert not is_safe_symbol("")
    for bad in ("#t", "#f", "true", "-3", "a b", "(x", 'q"', ":k", "a\tb"):
        assert not is_safe_symbol(bad), bad


def test_atoms_reject_bad_text():
    for bad in ("", "a b", "(", 'x"y'):
        with pytest.raises(ValueError):
            Symbol(bad)
    with pytest.raises(ValueError):
        Keyword("")


def test_canonical_examples():
    assert canonical_encode(SList.of(Symbol("a"), Symbol("b"))) == b"(1:a1:b)"
    assert canonical_encode(String("")) == b"s0:"
    assert canonical_encode(Integer(-12)) == b"i3:-12"
    assert canonical_encode(Keyword("k")) == b"k2::k"
    assert canonical_encode(Boolean(False)) == b"b2:#f"
    assert canonical_encode(String("é")) == b"s2:\xc3\xa9"


def test_canonical_distinguishes_kinds():
    forms = [Symbol("a"), String("a"), Keyword("a"), SList.of(Symbol("a"))]
    assert len({canonical_encode(f) for f in forms}) == len(forms)


@pytest.mark.parametrize("data", [b"", b"(", b"1:a1:b", b"(01:a)", b"(2:a)", b"i2:01", b"x1:a", b"(1:a))", b"b2:#x"])
def test_canonical_decode_rejects(data):
    with pytest.raises(ParseError):
        canonical_decode(data)


@given(sexprs)
@settings(max_examples=400)
def test_round_trip(expr):
    assert parse_sexpr(serialize(expr)) == expr


@given(sexprs)
@settings(max_examples=400)
def test_canonical_inverse(expr):
    assert canonical_decode(canonical_encode(expr)) == expr


@given(sexprs, sexprs)
@settings(max_examples=300)
def test_canonical_injective(a, b):
    assert (canonical_encode(a) == canonical_encode(b)) == (a == b)


@given(st.text(max_size=60))
@settings(max_examples=1000)
def test_parser_total_on_text(text):
    try:
        parse_sexpr(text)
    except ParseError:
        pass


@given(st.binary(max_size=60))
@settings(max_examples=500)
def test_parser_total_on_bytes(data):
    try:
        parse_sexpr(data)
    except ParseError:
        pass


def test_fuel_formula():
    assert initial_fuel("") == 1
    assert initial_fuel("(a)") == 13


def test_deep_nesting_is_iterative():
    text = "(" * 20000 + ")" * 20000
    expr = parse_sexpr(text)
    assert depth(expr) == 20000
    assert serialize(expr) == text
    assert canonical_decode(canonical_encode(expr)) == expr
    assert to_json(expr).count("[") == 20000


def test_depth_and_count():
    expr = parse_sexpr("(a (b c) ())")
    assert depth(expr) == 2
    assert node_count(expr) == 6
    assert depth(Symbol("x")) == 0


def test_generated_corpus_round_trips():
    rng = random.Random(3)
    for _ in range(500):
        e = random_sexpr(rng)
        assert parse_sexpr(serialize(e)) == e
