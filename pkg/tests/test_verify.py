import hashlib
import random
import statistics
import time

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from cbcl import Agent, dialects
from cbcl.dialect import ParamSpec, parse_dialect, parse_template
from cbcl.errors import MalformedExtend, UndeclaredParamInTemplate, UnknownAlgorithm
from cbcl.message import Signed
from cbcl.sexpr import SList, Symbol, parse_sexpr, symbols_in
from cbcl.verify import (
    PASS,
    SystemLimits,
    build_dependency_graph,
    contains_self_ref,
    detect_cycles,
    signing_payload,
    verify_all,
    verify_r1,
    verify_r2,
    verify_r3,
    verify_signature,
)

import oracles
from test_sexpr import sexprs


def dialect(body: str, name: str = "t", req=(8, 512, 100)):
    d, s, ms = req
    return parse_dialect(
        parse_sexpr(
            f"(define {name} (cbcl) @me (:resource-requirements ((max-depth {d})"
            f" (max-expansion-size {s}) (verification-time {ms}))) {body})"
        )
    )


class HashSigner:
    """Test provider whose signature is the SHA-256 of the payload."""

    algorithm = "sha256-stub"

    def sign(self, payload: bytes) -> bytes:
        return hashlib.sha256(payload).digest()

    def verify(self, payload: bytes, signature: bytes) -> bool:
        return hashlib.sha256(payload).digest() == signature


# -- R1 -----------------------------------------------------------------------


def test_self_ref_examples():
    bomb = dialects.load("recursion-bomb")
    assert contains_self_ref("bomb", bomb.performative("bomb").template)
    log = dialects.load("logistics")
    assert not contains_self_ref("track-shipment", log.performative("track-shipment").template)
    lit = parse_template(parse_sexpr('(tell @x "bomb" :bomb 1)'), ParamSpec())
    assert not contains_self_ref("bomb", lit)


def test_self_ref_in_any_position():
    for src in ("(tell @x f)", "(tell @x (g f))", "(f 1)", "(tell @x (cond ((= a f) 1) (else 2)))"):
        t = parse_template(parse_sexpr(src), ParamSpec(("a",)))
        assert contains_self_ref("f", t), src


symbol_pool = st.sampled_from(["f", "g", "h", "x", "y", "tell", "@z"])
template_src = st.recursive(
    st.one_of(symbol_pool.map(Symbol), sexprs.filter(lambda e: not isinstance(e, SList))),
    lambda kids: st.lists(kids, min_size=0, max_size=4).map(lambda xs: SList(tuple(xs))),
    max_leaves=20,
)


@given(template_src, st.sampled_from(["f", "g", "h", "x"]))
@settings(max_examples=500)
def test_self_ref_sound_and_complete(src, name):
    try:
        t = parse_template(src, ParamSpec(("x",), ("y",)))
    except (MalformedExtend, UndeclaredParamInTemplate):
        assume(False)
    assert contains_self_ref(name, t) == (name in set(symbols_in(src)))


def test_cycle_examples():
    [cycle] = detect_cycles({"ping": ["pong"], "pong": ["ping"]})
    assert cycle.members == {"ping", "pong"}
    assert cycle.describe() == "ping -> pong -> ping"
    assert detect_cycles({"a": ["b"], "b": ["c"], "c": []}) == []
    [loop] = detect_cycles({"a": ["a"]})
    assert loop.path == ("a",)


def test_cycles_agree_with_path_enumeration_up_to_8_nodes():
    rng = random.Random(8)
    for _ in range(3000):
        n = rng.randint(1, 8)
        p = rng.uniform(0.05, 0.4)
        adj = {v: [w for w in range(n) if rng.random() < p] for v in range(n)}
        cycles = detect_cycles(adj)
        got = set().union(*(c.members for c in cycles)) if cycles else set()
        assert got == oracles.nodes_on_cycles(adj)


def test_graph_uses_head_positions_only():
    d = dialect("(extend f (x) (tell @y (g x) h)) (extend g (x) (ask @y x)) (extend h (x) (tell @y x))")
    g = build_dependency_graph([d])
    assert g.edges["f"] == ("tell", "g")
    assert g.edges["g"] == ("ask",)


def test_r1_examples():
    bomb = verify_r1(dialects.load("recursion-bomb"))
    assert [(v.rule, v.name) for v in bomb.violations] == [("R1-self", "bomb")]
    assert verify_r1(dialects.load("logistics")) == PASS
    pp = verify_r1(dialects.load("ping-pong"))
    assert pp.rules() == {"R1-cycle"}


def test_r1_catches_staged_cycle():
    b = dialect("(extend g (x) (tell @y (f x)))", name="b")
    assert verify_r1(b).passed  # f is unknown, so only data
    a = dialect("(extend f (x) (tell @y (g x)))", name="a")
    result = verify_r1(a, [b])
    assert result.rules() == {"R1-cycle"}
    assert "f" in result.violations[0].detail and "g" in result.violations[0].detail


# -- R2 / R3 ------------------------------------------------------------------


def test_r2_examples():
    assert verify_r2(dialects.load("logistics")).passed
    over = verify_r2(dialect("(extend f (x) x)", req=(128, 4096, 1000)))
    assert [(v.rule, v.name) for v in over.violations] == [("R2", "max-depth")]
    assert verify_r2(dialect("(extend f (x) x)", req=(64, 8192, 1000))).passed


def test_limits_only_go_down():
    SystemLimits(32, 4096, 500)
    with pytest.raises(ValueError):
        SystemLimits(65, 8192, 1000)
    with pytest.raises(ValueError):
        SystemLimits(0, 8192, 1000)


@given(
    st.tuples(st.integers(1, 64), st.integers(1, 8192), st.integers(1, 1000)),
    st.tuples(st.integers(1, 64), st.integers(1, 8192), st.integers(1, 1000)),
    st.tuples(st.integers(1, 200), st.integers(1, 20000), st.integers(1, 3000)),
)
@settings(max_examples=200)
def test_r2_monotone(lo, hi, req):
    small = SystemLimits(*map(min, lo, hi))
    big = SystemLimits(*map(max, lo, hi))
    d = dialect("(extend f (x) x)", req=req)
    if verify_r2(d, small).passed:
        assert verify_r2(d, big).passed


def test_r3_examples():
    hijack = verify_r3(dialects.load("core-redefine"))
    assert [(v.rule, v.name) for v in hijack.violations] == [("R3", "tell")]
    assert verify_r3(dialects.load("logistics")).passed
    assert verify_r3(dialect("")).passed
    many = verify_r3(dialect("(extend ask (x) x) (extend bye (x) x) (extend fine (x) x)"))
    assert [v.name for v in many.violations] == ["ask", "bye"]


# -- signatures ---------------------------------------------------------------


def test_signature_checks():
    d = dialects.load("logistics")
    signer = HashSigner()
    providers = {signer.algorithm: signer}
    good = Signed(signer.algorithm, signer.sign(signing_payload(d)))
    assert verify_signature(d, good, {}).passed
    assert verify_signature(d, None, providers).passed
    assert verify_signature(d, good, providers).passed
    flipped = bytearray(good.signature)
    flipped[0] ^= 1
    bad = verify_signature(d, Signed(signer.algorithm, bytes(flipped)), providers)
    assert bad.rules() == {"Signature"}
    with pytest.raises(UnknownAlgorithm):
        verify_signature(d, Signed("rot13", b"x"), providers)
    assert verify_all(d, providers=providers, signature=Signed("rot13", b"x")).rules() == {"Signature"}


def test_declared_algorithm_must_match():
    d = dialect("(:signature-algorithm ed25519) (extend f (x) (tell @y x))")
    signer = HashSigner()
    sig = Signed(signer.algorithm, signer.sign(signing_payload(d)))
    assert verify_signature(d, sig, {signer.algorithm: signer}).rules() == {"Signature"}


# -- verify_all ---------------------------------------------------------------


@pytest.mark.parametrize(
    "name, rules",
    [("recursion-bomb", {"R1-self"}), ("ping-pong", {"R1-cycle"}), ("core-redefine", {"R3"})],
)
def test_attack_rule_tags(name, rules):
    assert verify_all(dialects.load(name)).rules() == rules


def test_oversized_dialect_rule_tag():
    assert verify_all(dialect("(extend f (x) x)", req=(65, 100, 100))).rules() == {"R2"}


def test_violations_accumulate():
    d = dialect("(extend tell (x) (tell @y x)) (extend f (x) (f x))", req=(65, 100, 100))
    assert verify_all(d).rules() == {"R1-self", "R2", "R3"}


def test_empty_dialect_passes():
    assert verify_all(dialect("")).passed


def test_benign_five_performatives_is_fast():
    d = dialects.load("email")
    assert len(d.defs) == 5
    samples = []
    for _ in range(31):
        t0 = time.perf_counter()
        assert verify_all(d).passed
        samples.append(time.perf_counter() - t0)
    assert statistics.median(samples) < 1e-3


def test_step_budget_counts_as_r2():
    body = " ".join(f"(extend p{i} (x) (tell @y (p{i - 1} x) (p{max(i - 2, 0)} x)))" for i in range(1, 200))
    d = dialect("(extend p0 (x) (tell @y x)) " + body, req=(8, 512, 1))
    result = verify_all(d)
    assert result.rules() == {"R2"}
    assert "budget" in result.violations[0].detail
    assert verify_all(dialect("(extend p0 (x) (tell @y x)) " + body, req=(8, 512, 1000))).passed


def test_verification_is_pure():
    agent = Agent()
    before = agent.installed
    verify_all(dialects.load("logistics"), list(agent.dialects.values()))
    assert agent.installed == before == {}
