"""Seeded push-gossip simulation of dialect dissemination.

Each round every agent informed at the start of the round contacts
``fanout`` peers chosen uniformly at random and, with probability
``p_transmit``, sends them the dialect as a canonical-form ``teach``
message.  A receiver counts as informed only once its own pipeline has
verified and installed the dialect.

Randomness comes from :class:`random.Random` (MT19937) and only its
``random()`` method is used, so a run is reproducible from the seed alone.
"""

from __future__ import annotations

import random
import statistics
from dataclasses import dataclass, replace
from typing import Callable, Iterator, Optional, Sequence, Tuple

from .agent import Agent, Installed
from .dialect import Dialect
from .message import MetaMessage, Recipient, Teach, serialize_message
from .pipeline import Delivered, run_canonical
from .sexpr import canonical_encode

MAX_AGENTS = 10_000


class InvalidConfig(ValueError):
    pass


@dataclass(frozen=True)
class SimulationConfig:
    n_agents: int
    dialect: Dialect
    p_transmit: float = 0.8
    seed: int = 0
    max_rounds: int = 100
    fanout: int = 1
    # None means fully connected; otherwise topology[i] lists i's neighbours.
    topology: Optional[Tuple[Tuple[int, ...], ...]] = None

    def validate(self) -> None:
        if not 1 <= self.n_agents <= MAX_AGENTS:
            raise InvalidConfig(f"n_agents must be in 1..{MAX_AGENTS}, got {self.n_agents}")
        if not 0.0 <= self.p_transmit <= 1.0:
            raise InvalidConfig(f"p_transmit must be in [0, 1], got {self.p_transmit}")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must be an unsigned 64-bit value")
        if self.max_rounds < 1:
            raise InvalidConfig("max_rounds must be positive")
        if self.fanout < 1:
            raise InvalidConfig("fanout must be positive")
        if self.topology is not None:
            if len(self.topology) != self.n_agents:
                raise InvalidConfig("topology must list neighbours for every agent")
            for i, peers in enumerate(self.topology):
                for j in peers:
                    if not 0 <= j < self.n_agents or j == i:
                        raise InvalidConfig(f"agent {i} has invalid neighbour {j}")
                if len(set(peers)) != len(peers):
                    raise InvalidConfig(f"agent {i} lists a neighbour twice")


@dataclass(frozen=True)
class RoundStats:
    round: int
    newly_informed: int
    coverage: float
    rejected: int
    # deliveries attempted this round, including those to informed agents
    transmissions: int = 0

    def to_record(self) -> dict:
        return {
            "round": self.round,
            "newly_informed": self.newly_informed,
            "coverage": self.coverage,
            "rejected": self.rejected,
        }


@dataclass(frozen=True)
class SimulationResult:
    rounds: Tuple[RoundStats, ...]
    converged: bool

    @property
    def rounds_to_convergence(self) -> Optional[int]:
        return self.rounds[-1].round if self.converged else None

    @property
    def coverage(self) -> float:
        return self.rounds[-1].coverage

    @property
    def rejected(self) -> int:
        return sum(r.rejected for r in self.rounds)

    def records(self) -> Iterator[dict]:
        return (r.to_record() for r in self.rounds)


def agent_name(i: int) -> str:
    return f"agent-{i}"


def teach_payload(d: Dialect, to: Recipient) -> bytes:
    """Canonical bytes of ``(meta (teach <name> @to <definition>))``."""
    return canonical_encode(serialize_message(MetaMessage(Teach(d.name, to, d.source))))


def _sample(rng: random.Random, pool: Sequence[int], k: int) -> list[int]:
    """``k`` distinct members of ``pool``, by partial Fisher-Yates."""
    items = list(pool)
    k = min(k, len(items))
    for i in range(k):
        j = i + int(rng.random() * (len(items) - i))
        items[i], items[j] = items[j], items[i]
    return items[:k]


def _peers(rng: random.Random, cfg: SimulationConfig, i: int) -> list[int]:
    if cfg.topology is not None:
        return _sample(rng, cfg.topology[i], cfg.fanout)
    n = cfg.n_agents
    if cfg.fanout == 1:
        j = int(rng.random() * (n - 1))
        return [j + 1 if j >= i else j]
    return _sample(rng, [j for j in range(n) if j != i], cfg.fanout)


def simulate(
    config: SimulationConfig,
    agent_factory: Callable[[str], Agent] = Agent,
) -> SimulationResult:
    """Run one simulation; agent 0 starts out holding the dialect."""
    config.validate()
    n = config.n_agents
    rng = random.Random(config.seed)
    agents: dict[int, Agent] = {}
    informed = [False] * n
    informed[0] = True
    count = 1
    stats = [RoundStats(0, 1, 1 / n, 0, 0)]
    rnd = 0
    while count < n and rnd < config.max_rounds:
        rnd += 1
        senders = [i for i in range(n) if informed[i]]
        new = rejected = sent = 0
        for i in senders:
            for j in _peers(rng, config, i):
                if rng.random() >= config.p_transmit:
                    continue
                sent += 1
                if informed[j]:
                    continue  # already installed; a resend is idempotent
                if j not in agents:
                    agents[j] = agent_factory(agent_name(j))
                receiver = agents[j]
                result = run_canonical(teach_payload(config.dialect, receiver.id), receiver)
                if isinstance(result, Delivered) and isinstance(result.install, Installed):
                    informed[j] = True
                    new += 1
                else:
                    rejected += 1
        count += new
        stats.append(RoundStats(rnd, new, count / n, rejected, sent))
    return SimulationResult(tuple(stats), count == n)


def median_rounds(results: Sequence[SimulationResult]) -> float:
    """Median rounds to convergence; unconverged runs count as infinitely slow."""
    return statistics.median(
        r.rounds_to_convergence if r.converged else float("inf") for r in results
    )


def run_trials(base: SimulationConfig, trials: int) -> list[SimulationResult]:
    """``trials`` runs seeded ``base.seed``, ``base.seed + 1``, ..."""
    return [simulate(replace(base, seed=(base.seed + t) % 2**64)) for t in range(trials)]


@dataclass(frozen=True)
class ScalingPoint:
    n: int
    median_rounds: float


def convergence_scaling(
    n_values: Sequence[int], trials: int, base: SimulationConfig
) -> list[ScalingPoint]:
    return [
        ScalingPoint(n, median_rounds(run_trials(replace(base, n_agents=n), trials)))
        for n in n_values
    ]

