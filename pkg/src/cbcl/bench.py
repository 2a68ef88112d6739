"""Micro-benchmarks for the core operations.  Informational only."""

from __future__ import annotations

import statistics
import timeit
from dataclasses import dataclass
from typing import Callable

from . import dialects
from .agent import Agent
from .dialect import parse_dialect
from .expand import ResourceContext, expand_performative
from .gossip import SimulationConfig, simulate
from .message import parse_message
from .pipeline import run_pipeline
from .sexpr import parse_sexpr
from .verify import verify_r1, verify_r2, verify_r3

TELL = '(tell @bob "hello" :priority high)'
LANG = '(lang logistics (track-shipment "PKG-123" :route "A->B"))'


@dataclass(frozen=True)
class BenchRow:
    operation: str
    median_ns: float
    loops: int

    def render(self) -> str:
        return f"{self.operation:<28} {_human(self.median_ns):>12}"


def _human(ns: float) -> str:
    for unit, scale in (("s", 1e9), ("ms", 1e6), ("us", 1e3)):
        if ns >= scale:
            return f"{ns / scale:.2f} {unit}"
    return f"{ns:.0f} ns"


def time_op(fn: Callable[[], object], repeat: int = 7, min_time: float = 0.05) -> tuple[float, int]:
    """Median nanoseconds per call over ``repeat`` batches of auto-sized loops."""
    timer = timeit.Timer(fn)
    loops = 1
    while timer.timeit(loops) < min_time and loops < 1_000_000:
        loops *= 2
    samples = [t / loops * 1e9 for t in timer.repeat(repeat, loops)]
    return statistics.median(samples), loops


def operations() -> list[tuple[str, Callable[[], object]]]:
    define_src = dialects.source("logistics")
    logistics = dialects.load("logistics")
    agent = Agent()
    run_pipeline(define_src, agent)
    track = logistics.performative("track-shipment")
    args = parse_sexpr(LANG).items[2].items[1:]
    define_expr = parse_message(parse_sexpr(define_src)).action.source
    gossip_cfg = SimulationConfig(100, logistics, seed=7)

    def expand_once():
        ctx = ResourceContext.from_limits()
        ctx.apply_requirements(logistics.requirements)
        return expand_performative(track, args, ctx)

    return [
        ("parse tell", lambda: parse_sexpr(TELL)),
        ("parse meta define", lambda: parse_sexpr(define_src)),
        ("parse lang invocation", lambda: parse_sexpr(LANG)),
        ("pipeline tell", lambda: run_pipeline(TELL, agent)),
        ("pipeline lang", lambda: run_pipeline(LANG, agent)),
        ("pipeline define", lambda: run_pipeline(define_src, Agent())),
        ("parse dialect", lambda: parse_dialect(define_expr)),
        ("template expansion", expand_once),
        ("R1 verify", lambda: verify_r1(logistics)),
        ("R2 verify", lambda: verify_r2(logistics)),
        ("R3 verify", lambda: verify_r3(logistics)),
        ("gossip 100 agents", lambda: simulate(gossip_cfg)),
    ]


def run(repeat: int = 7, min_time: float = 0.05) -> list[BenchRow]:
    rows = []
    for name, fn in operations():
        median, loops = time_op(fn, repeat, min_time)
        rows.append(BenchRow(name, median, loops))
    return rows
