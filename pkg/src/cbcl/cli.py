"""``cbcl`` command line: parse, verify, expand, agent, gossip, bench.

Exit status is 0 when the input is accepted, 1 when it is rejected and 2
for usage errors, so scripts can branch on the status alone.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import bench as bench_mod
from . import dialects as bundled
from .agent import Agent
from .dialect import Dialect, parse_dialect
from .errors import CBCLError, ParseError
from .gossip import InvalidConfig, SimulationConfig, median_rounds, run_trials
from .message import MetaMessage, parse_message
from .pipeline import Rejected, run_pipeline
from .sexpr import SList, canonical_encode, parse_sexpr, serialize, to_json
from .verify import verify_all

EXIT_OK, EXIT_REJECTED, EXIT_USAGE = 0, 1, 2
_RULES = ("R1", "R2", "R3", "Signature")


def _read_source(path: str) -> str:
    """Text of ``path``; ``-`` is stdin and a bundled dialect name also resolves."""
    if path == "-":
        return sys.stdin.read()
    p = Path(path)
    if p.is_file():
        try:
            return p.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise click.UsageError(f"cannot read {path}: {exc}") from None
    try:
        return bundled.source(path)
    except KeyError:
        raise click.UsageError(f"no such file or bundled dialect: {path}") from None


def _load_dialect(path: str) -> Dialect:
    """Parse a dialect file holding ``(meta (define ...))`` or a bare ``(define ...)``."""
    expr = parse_sexpr(_read_source(path))
    if isinstance(expr, SList) and expr.head_symbol() == "meta":
        msg = parse_message(expr)
        assert isinstance(msg, MetaMessage)
        expr = msg.action.source
    return parse_dialect(expr)


def _fail(message: str) -> None:
    click.echo(message, err=True)
    sys.exit(EXIT_REJECTED)


@click.group()
@click.version_option(package_name="cbcl")
def main() -> None:
    """Tools for CBCL messages and dialects."""


@main.command()
@click.argument("path", default="-")
@click.option("--canonical", is_flag=True, help="Print canonical bytes as hex.")
@click.option("--json", "as_json", is_flag=True, help="Print a JSON tree.")
def parse(path: str, canonical: bool, as_json: bool) -> None:
    """Parse one S-expression from PATH (default stdin)."""
    if canonical and as_json:
        raise click.UsageError("--canonical and --json are exclusive")
    try:
        expr = parse_sexpr(_read_source(path))
    except ParseError as exc:
        _fail(f"error: {exc.code}: {exc.reason} (position {exc.position})")
    if canonical:
        click.echo(canonical_encode(expr).hex())
    elif as_json:
        click.echo(to_json(expr))
    else:
        click.echo(serialize(expr))


@main.command()
@click.argument("path")
def verify(path: str) -> None:
    """Run R1, R2, R3 and the signature check on a dialect file."""
    try:
        d = _load_dialect(path)
    except CBCLError as exc:
        _fail(f"error: {exc.code}: {exc}")
    result = verify_all(d)
    click.echo(f"dialect {d.name} {d.hash.hex()[:16]}")
    for rule in _RULES:
        hits = [v for v in result.violations if v.rule.split("-")[0] == rule]
        if not hits:
            click.echo(f"{rule}: pass")
        for v in hits:
            click.echo(str(v))
    click.echo(f"verdict: {result.verdict}")
    sys.exit(EXIT_OK if result.passed else EXIT_REJECTED)


@main.command()
@click.option("-d", "--dialect", "dialect_paths", multiple=True, help="Dialect file (repeatable).")
@click.argument("message")
def expand(dialect_paths: tuple[str, ...], message: str) -> None:
    """Install the given dialects into a scratch agent and run MESSAGE."""
    agent = Agent()
    for path in dialect_paths:
        result = run_pipeline(_read_source(path), agent)
        if isinstance(result, Rejected):
            _fail(f"{path}: {result.describe()}")
    result = run_pipeline(message, agent)
    click.echo(result.describe())
    sys.exit(EXIT_OK if result.accepted else EXIT_REJECTED)


@main.command()
@click.argument("dialect_paths", nargs=-1)
def agent(dialect_paths: tuple[str, ...]) -> None:
    """Line-oriented REPL: one message per line; :dialects lists, :quit exits."""
    session = Agent("repl")
    for path in dialect_paths:
        click.echo(run_pipeline(_read_source(path), session).describe())
    interactive = sys.stdin.isatty()
    while True:
        if interactive:
            click.echo("cbcl> ", nl=False)
        line = sys.stdin.readline()
        if not line:
            break
        line = line.strip()
        if not line:
            continue
        if line == ":quit":
            break
        if line == ":dialects":
            for name, entry in sorted(session.installed.items()):
                click.echo(f"{name} {entry.hash.hex()[:16]}")
            continue
        click.echo(run_pipeline(line, session).describe())


@main.command()
@click.option("--agents", "n_agents", type=click.IntRange(1, 10_000), default=100, show_default=True)
@click.option("--p", "p_transmit", type=click.FloatRange(0.0, 1.0), default=0.8, show_default=True)
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True)
@click.option("--trials", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--max-rounds", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--fanout", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--dialect", "dialect_path", default="logistics", show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Emit one JSON record per trial round.")
def gossip(n_agents, p_transmit, seed, trials, max_rounds, fanout, dialect_path, as_json) -> None:
    """Simulate push-gossip dissemination of a dialect."""
    try:
        d = _load_dialect(dialect_path)
    except CBCLError as exc:
        _fail(f"error: {exc.code}: {exc}")
    base = SimulationConfig(n_agents, d, p_transmit, seed, max_rounds, fanout)
    try:
        results = run_trials(base, trials)
    except InvalidConfig as exc:
        raise click.UsageError(str(exc)) from None
    if as_json:
        for t, r in enumerate(results):
            for rec in r.records():
                click.echo(json.dumps({"trial": t, **rec}))
    else:
        width = max(len(r.rounds) for r in results)
        click.echo("round  mean-coverage  min-coverage")
        for i in range(width):
            cov = [r.rounds[min(i, len(r.rounds) - 1)].coverage for r in results]
            click.echo(f"{i:>5}  {sum(cov) / len(cov):>13.4f}  {min(cov):>12.4f}")
    converged = sum(r.converged for r in results)
    med = median_rounds(results)
    summary = f"converged {converged}/{trials}; median rounds to full coverage: {med:g}"
    click.echo(summary, err=as_json)
    sys.exit(EXIT_OK if converged == trials else EXIT_REJECTED)


@main.command()
@click.option("--repeat", type=click.IntRange(min=1), default=7, show_default=True)
@click.option("--min-time", type=click.FloatRange(min=0.0), default=0.05, show_default=True)
def bench(repeat: int, min_time: float) -> None:
    """Time the core operations and print median per-call cost."""
    click.echo(f"{'operation':<28} {'median':>12}")
    for row in bench_mod.run(repeat, min_time):
        click.echo(row.render())

