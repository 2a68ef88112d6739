"""Agent state: the installed-dialect table and install policy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Optional, Union

from .dialect import ContentHash, Dialect, ExampleReport, check_examples, walk_template
from .dialect import Literal, Node
from .expand import ResourceContext, dialect_expander
from .message import Recipient, Signed, WithLimits
from .sexpr import Symbol
from .verify import (
    DEFAULT_LIMITS,
    SignatureProvider,
    SystemLimits,
    VerificationResult,
    verify_all,
    verify_r1,
    verify_r2,
    verify_r3,
)


@dataclass
class InstallPolicy:
    auto_install_teach: bool = True
    require_signature: bool = False
    require_examples_pass: bool = True
    # Extra veto point for deployment rules such as rate limiting.
    approve: Optional[Callable[[Dialect], bool]] = None


@dataclass(frozen=True)
class InstalledDialect:
    dialect: Dialect
    hash: ContentHash
    verification: VerificationResult
    examples: ExampleReport


# -- install outcomes --------------------------------------------------------


@dataclass(frozen=True)
class Installed:
    name: str
    hash: ContentHash
    accepted = True


@dataclass(frozen=True)
class AlreadyInstalled:
    name: str
    hash: ContentHash
    accepted = True


@dataclass(frozen=True)
class RejectedVerification:
    name: str
    result: VerificationResult
    accepted = False


@dataclass(frozen=True)
class RejectedNameCollision:
    name: str
    installed: ContentHash
    offered: ContentHash
    accepted = False


@dataclass(frozen=True)
class RejectedPolicy:
    name: str
    reason: str
    accepted = False


InstallOutcome = Union[Installed, AlreadyInstalled, RejectedVerification, RejectedNameCollision, RejectedPolicy]


def dialect_dependencies(d: Dialect, table: Mapping[str, Dialect]) -> set[str]:
    """Names of other dialects in ``table`` whose performatives ``d``'s templates invoke.

    Both direct calls (a list head naming another dialect's performative) and
    hand-offs through an emitted ``(lang other ...)`` form count.
    """
    own = set(d.names)
    owners: dict[str, set[str]] = {}
    for other in table.values():
        if other.name == d.name:
            continue
        for name in other.names:
            owners.setdefault(name, set()).add(other.name)
    deps: set[str] = set()
    for perf in d.defs:
        for node in walk_template(perf.template):
            if not isinstance(node, Node):
                continue
            if node.head not in own:
                deps |= owners.get(node.head, set())
            if node.head == "lang" and node.children:
                target = node.children[0]
                if isinstance(target, Literal) and isinstance(target.atom, Symbol):
                    if target.atom.text in table and target.atom.text != d.name:
                        deps.add(target.atom.text)
    return deps


class Agent:
    """One agent's installed dialects, keyed by unique name."""

    def __init__(
        self,
        name: str = "agent",
        limits: SystemLimits = DEFAULT_LIMITS,
        policy: Optional[InstallPolicy] = None,
        providers: Optional[Mapping[str, SignatureProvider]] = None,
    ):
        self.id = Recipient(name)
        self.limits = limits
        self.policy = policy if policy is not None else InstallPolicy()
        self.providers: Dict[str, SignatureProvider] = dict(providers or {})
        self._table: Dict[str, InstalledDialect] = {}

    def __repr__(self) -> str:
        return f"Agent({self.id}, dialects={sorted(self._table)})"

    @property
    def installed(self) -> Mapping[str, InstalledDialect]:
        return dict(self._table)

    @property
    def dialects(self) -> Dict[str, Dialect]:
        """Name -> dialect view used for ``lang`` dispatch."""
        return {name: entry.dialect for name, entry in self._table.items()}

    def lookup(self, name: str) -> Dialect | None:
        entry = self._table.get(name)
        return entry.dialect if entry else None

    def install(self, d: Dialect, signature: Optional[Signed] = None) -> InstallOutcome:
        existing = self._table.get(d.name)
        if existing is not None:
            if existing.hash == d.hash:
                return AlreadyInstalled(d.name, d.hash)
            return RejectedNameCollision(d.name, existing.hash, d.hash)
        if self.policy.require_signature:
            if signature is None:
                return RejectedPolicy(d.name, "a signature is required")
            if not self.providers:
                return RejectedPolicy(d.name, "signature required but no provider is registered")
        if self.policy.approve is not None and not self.policy.approve(d):
            return RejectedPolicy(d.name, "vetoed by approval hook")
        result = verify_all(
            d,
            [e.dialect for e in self._table.values()],
            self.limits,
            self.providers,
            signature,
        )
        if not result.passed:
            return RejectedVerification(d.name, result)
        examples = check_examples(d, dialect_expander(d, self.limits))
        self._table[d.name] = InstalledDialect(d, d.hash, result, examples)
        return Installed(d.name, d.hash)

    def dependents(self, name: str) -> list[str]:
        """Installed dialects whose templates rely on dialect ``name``."""
        table = self.dialects
        return sorted(
            other for other, d in table.items() if other != name and name in dialect_dependencies(d, table)
        )

    def uninstall(self, name: str) -> bool:
        """Remove ``name`` unless it is absent or another dialect depends on it."""
        if name not in self._table or self.dependents(name):
            return False
        del self._table[name]
        return True

    def supports(self, name: str) -> tuple[bool, ContentHash | None]:
        entry = self._table.get(name)
        if entry is None:
            return False, None
        if self.policy.require_examples_pass and not entry.examples.passed:
            return False, None
        return True, entry.hash

    def resource_context(self, *wrappers: WithLimits) -> ResourceContext:
        ctx = ResourceContext.from_limits(self.limits)
        for w in wrappers:
            ctx.apply_wrapper(w)
        return ctx

    def check_invariants(self) -> list[str]:
        """Describe any broken table invariant; empty when the agent is well formed."""
        problems = []
        dialects = [e.dialect for e in self._table.values()]
        for name, entry in self._table.items():
            d = entry.dialect
            if d.name != name:
                problems.append(f"entry {name!r} holds dialect {d.name!r}")
            if entry.hash != d.hash:
                problems.append(f"{name}: stored hash differs from dialect hash")
            if not entry.verification.passed:
                problems.append(f"{name}: installed without passing verification")
            for check in (verify_r2(d, self.limits), verify_r3(d)):
                problems.extend(f"{name}: {v}" for v in check.violations)
        if dialects:
            # The whole table, taken together, must still be free of recursion.
            probe = dialects[0]
            r1 = verify_r1(probe, dialects[1:])
            problems.extend(str(v) for v in r1.violations)
            for d in dialects[1:]:
                problems.extend(
                    str(v) for v in verify_r1(d, []).violations if v.rule == "R1-self"
                )
        return problems
