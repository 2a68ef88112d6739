import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbcl import Agent, InstallPolicy, dialects
from cbcl.agent import (
    AlreadyInstalled,
    Installed,
    RejectedNameCollision,
    RejectedPolicy,
    RejectedVerification,
    dialect_dependencies,
)
from cbcl.dialect import parse_dialect
from cbcl.errors import UnknownDialect, ValidationError
from cbcl.expand import expand_invocation
from cbcl.message import LangMessage, Signed, parse_message
from cbcl.sexpr import SList, Symbol, parse_sexpr

from test_sexpr import sexprs
from test_verify import HashSigner


def from_text(text: str):
    return parse_dialect(parse_sexpr(text))


def small(name: str, body: str):
    return from_text(
        f"(define {name} (cbcl) @me (:resource-requirements ((max-depth 8)"
        f" (max-expansion-size 512) (verification-time 100))) {body})"
    )


LOGISTICS = dialects.source("logistics")


def logistics_variant(old: str, new: str):
    text = LOGISTICS.replace(old, new)
    assert text != LOGISTICS
    return parse_message(parse_sexpr(text)).action.source


def test_fresh_install_and_idempotent_reinstall():
    agent = Agent()
    d = dialects.load("logistics")
    assert agent.install(d) == Installed("logistics", d.hash)
    before = agent.installed
    assert agent.install(d) == AlreadyInstalled("logistics", d.hash)
    assert agent.installed == before
    assert agent.check_invariants() == []


def test_name_collision():
    agent = Agent()
    agent.install(dialects.load("logistics"))
    other = parse_dialect(logistics_variant('(or priority "normal")', '(or priority "low")'))
    outcome = agent.install(other)
    assert isinstance(outcome, RejectedNameCollision)
    assert outcome.installed == dialects.load("logistics").hash
    assert outcome.offered == other.hash
    assert agent.lookup("logistics").hash == outcome.installed


@pytest.mark.parametrize("name", ["recursion-bomb", "ping-pong", "core-redefine"])
def test_attacks_rejected(name):
    agent = Agent()
    outcome = agent.install(dialects.load(name))
    assert isinstance(outcome, RejectedVerification)
    assert agent.installed == {}


def test_expansion_bomb_installs_but_is_capped_at_runtime():
    from cbcl import run_pipeline

    agent = Agent()
    assert isinstance(agent.install(dialects.load("expansion-bomb")), Installed)
    result = run_pipeline('(lang amplify (blow-up "aaaaaaaaaaaaaaaa"))', agent)
    assert result.describe() == "Rejected(expand, ResourceExhausted(size))"


def test_cross_dialect_cycle_rejected_at_second_install():
    agent = Agent()
    assert isinstance(agent.install(small("b", "(extend g (x) (tell @y (f x)))")), Installed)
    outcome = agent.install(small("a", "(extend f (x) (tell @y (g x)))"))
    assert isinstance(outcome, RejectedVerification)
    assert outcome.result.rules() == {"R1-cycle"}
    assert sorted(agent.installed) == ["b"]


def test_uninstall():
    agent = Agent()
    agent.install(dialects.load("logistics"))
    assert agent.uninstall("logistics")
    assert agent.lookup("logistics") is None
    assert not agent.uninstall("logistics")
    assert not agent.uninstall("never-was")


def test_uninstall_refused_for_dependency():
    agent = Agent()
    base = small("base", "(extend fetch (x) (tell @store x))")
    user = small("user", "(extend get-it (x) (tell @y (fetch x)))")
    agent.install(base)
    agent.install(user)
    assert dialect_dependencies(user, agent.dialects) == {"base"}
    assert agent.dependents("base") == ["user"]
    before = agent.installed
    assert not agent.uninstall("base")
    assert agent.installed == before
    assert agent.uninstall("user")
    assert agent.uninstall("base")


def test_lang_hand_off_is_a_dependency():
    agent = Agent()
    agent.install(small("b", "(extend arrive (x) (tell @y x))"))
    agent.install(small("a", "(extend go (x) (lang b (arrive x)))"))
    assert agent.dependents("b") == ["a"]
    assert not agent.uninstall("b")


def test_supports():
    agent = Agent()
    assert agent.supports("logistics") == (False, None)
    d = dialects.load("logistics")
    agent.install(d)
    assert agent.supports("logistics") == (True, d.hash)


def test_examples_failure_blocks_support_only_when_required():
    broken = parse_dialect(
        logistics_variant(':route "A->B" :priority "normal")', ':route "A->B" :priority "urgent")')
    )
    strict = Agent()
    assert isinstance(strict.install(broken), Installed)
    assert strict.supports("logistics") == (False, None)
    assert not strict.installed["logistics"].examples.passed
    lax = Agent(policy=InstallPolicy(require_examples_pass=False))
    lax.install(broken)
    assert lax.supports("logistics") == (True, broken.hash)


def test_policy_defaults():
    p = InstallPolicy()
    assert (p.auto_install_teach, p.require_signature, p.require_examples_pass) == (True, False, True)


def test_signature_policy():
    d = dialects.load("logistics")
    needs = InstallPolicy(require_signature=True)
    assert isinstance(Agent(policy=needs).install(d), RejectedPolicy)
    assert isinstance(Agent(policy=needs).install(d, Signed("x", b"1")), RejectedPolicy)
    signer = HashSigner()
    agent = Agent(policy=needs, providers={signer.algorithm: signer})
    from cbcl.verify import signing_payload

    good = Signed(signer.algorithm, signer.sign(signing_payload(d)))
    assert isinstance(agent.install(d, good), Installed)
    bad = Signed(signer.algorithm, b"\0" * 32)
    outcome = Agent(policy=needs, providers={signer.algorithm: signer}).install(d, bad)
    assert isinstance(outcome, RejectedVerification)
    assert outcome.result.rules() == {"Signature"}


def test_approval_hook():
    agent = Agent(policy=InstallPolicy(approve=lambda d: d.name != "logistics"))
    assert isinstance(agent.install(dialects.load("logistics")), RejectedPolicy)
    assert isinstance(agent.install(dialects.load("email")), Installed)


def test_check_invariants_reports_tampering():
    agent = Agent()
    agent.install(dialects.load("logistics"))
    assert agent.check_invariants() == []
    entry = agent._table["logistics"]
    agent._table["renamed"] = entry
    assert any("renamed" in p for p in agent.check_invariants())


_FULL = Agent()
for _name in dialects.BENIGN + dialects.NESTING:
    _FULL.install(dialects.load(_name))


@given(st.lists(sexprs, max_size=4), st.sampled_from(sorted(_FULL.installed) + ["nosuch", "other"]))
@settings(max_examples=300)
def test_dispatch_depends_only_on_name(body, name):
    expr = SList((Symbol("lang"), Symbol(name), SList((Symbol("x"), *body))))
    try:
        msg = parse_message(expr)
    except ValidationError:
        return
    assert isinstance(msg, LangMessage)
    try:
        expand_invocation(msg, _FULL.dialects)
    except UnknownDialect:
        assert name not in _FULL.installed
    except Exception:
        assert name in _FULL.installed
    else:
        assert name in _FULL.installed
