"""The end-to-end message pipeline: parse, classify, verify+install or expand, deliver.

Every input yields exactly one :class:`Delivered` or :class:`Rejected`; no
typed failure escapes as an exception.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Tuple, Union

from .agent import Agent, AlreadyInstalled, Installed, InstallOutcome, RejectedNameCollision, RejectedPolicy
from .agent import RejectedVerification
from .dialect import parse_dialect
from .errors import (
    CBCLError,
    DialectParseError,
    ExpansionError,
    NameCollision,
    ParseError,
    PolicyRejected,
    ValidationError,
    VerificationFailed,
)
from .expand import expand_invocation
from .message import (
    Define,
    LangMessage,
    Message,
    MetaMessage,
    Query,
    Recipient,
    Signed,
    SimpleMessage,
    Teach,
    WithLimits,
    Wrapper,
    parse_message,
    serialize_message,
    unwrap,
)
from .sexpr import SExpr, SList, String, Symbol, canonical_decode, parse_sexpr, serialize


class Stage(str, enum.Enum):
    PARSE = "parse"
    CLASSIFY = "classify"
    VERIFY = "verify"
    EXPAND = "expand"


class Provenance(str, enum.Enum):
    DIRECT = "direct"
    EXPANDED = "expanded"
    INSTALLED = "installed-then-acked"


@dataclass(frozen=True)
class Delivered:
    message: Message
    provenance: Provenance
    wrappers: Tuple[Wrapper, ...] = ()
    reply: Optional[SList] = None
    install: Optional[InstallOutcome] = None

    accepted = True

    def describe(self) -> str:
        text = f"Delivered({self.provenance.value}) {serialize(serialize_message(self.message))}"
        if self.reply is not None:
            text += f"\n  reply: {serialize(self.reply)}"
        return text


@dataclass(frozen=True)
class Rejected:
    stage: Stage
    error: CBCLError

    accepted = False

    def describe(self) -> str:
        return f"Rejected({self.stage.value}, {self.error.summary})"

    @property
    def detail(self) -> str:
        return str(self.error)


PipelineResult = Union[Delivered, Rejected]

DEFAULT_SENDER = Recipient("sender")


def _outcome_error(outcome: InstallOutcome) -> CBCLError:
    if isinstance(outcome, RejectedVerification):
        return VerificationFailed(outcome.result)
    if isinstance(outcome, RejectedNameCollision):
        return NameCollision(outcome.name, outcome.installed.hex(), outcome.offered.hex())
    assert isinstance(outcome, RejectedPolicy)
    return PolicyRejected(f"{outcome.name}: {outcome.reason}")


def _install(source: SList, agent: Agent, signature, sender: Recipient, core, wrappers):
    try:
        dialect = parse_dialect(source)
    except DialectParseError as exc:
        return Rejected(Stage.VERIFY, exc)
    outcome = agent.install(dialect, signature)
    if isinstance(outcome, (Installed, AlreadyInstalled)):
        return Delivered(core, Provenance.INSTALLED, wrappers, SList.of(Symbol("ok"), sender.symbol), outcome)
    return Rejected(Stage.VERIFY, _outcome_error(outcome))


def process_expr(expr: SExpr, agent: Agent, sender: Recipient = DEFAULT_SENDER) -> PipelineResult:
    """Pipeline stages after parsing, for callers that already hold an S-expression."""
    try:
        msg = parse_message(expr)
    except ValidationError as exc:
        return Rejected(Stage.CLASSIFY, exc)
    wrappers, core = unwrap(msg)
    signature = next((w for w in reversed(wrappers) if isinstance(w, Signed)), None)

    if isinstance(core, SimpleMessage):
        return Delivered(core, Provenance.DIRECT, wrappers)

    if isinstance(core, LangMessage):
        ctx = agent.resource_context(*(w for w in wrappers if isinstance(w, WithLimits)))
        try:
            expanded = expand_invocation(core, agent.dialects, ctx)
        except ExpansionError as exc:
            return Rejected(Stage.EXPAND, exc)
        return Delivered(expanded, Provenance.EXPANDED, wrappers)

    assert isinstance(core, MetaMessage)
    action = core.action
    if isinstance(action, Query):
        ok, _ = agent.supports(action.dialect)
        if ok:
            reply = SList.of(Symbol("ok"), sender.symbol)
        else:
            reply = SList.of(Symbol("error"), sender.symbol, String(f"unsupported dialect {action.dialect}"))
        return Delivered(core, Provenance.DIRECT, wrappers, reply)
    if isinstance(action, Teach):
        if not agent.policy.auto_install_teach:
            return Rejected(Stage.VERIFY, PolicyRejected(f"{action.dialect}: teach requires approval"))
        return _install(action.source, agent, signature, sender, core, wrappers)
    assert isinstance(action, Define)
    return _install(action.source, agent, signature, sender, core, wrappers)


def run_pipeline(source: str | bytes, agent: Agent, sender: Recipient = DEFAULT_SENDER) -> PipelineResult:
    """Process one message in display syntax."""
    try:
        expr = parse_sexpr(source)
    except ParseError as exc:
        return Rejected(Stage.PARSE, exc)
    return process_expr(expr, agent, sender)


def run_canonical(payload: bytes, agent: Agent, sender: Recipient = DEFAULT_SENDER) -> PipelineResult:
    """Process one message received in canonical byte form."""
    try:
        expr = canonical_decode(payload)
    except ParseError as exc:
        return Rejected(Stage.PARSE, exc)
    return process_expr(expr, agent, sender)
