"""CBCL: a homoiconic agent communication language with verified dialects."""

from .agent import Agent, InstallPolicy
from .dialect import Dialect, dialect_hash, parse_dialect
from .errors import CBCLError
from .expand import ResourceContext, expand_invocation
from .gossip import SimulationConfig, simulate
from .message import parse_message, serialize_message
from .pipeline import Delivered, Rejected, run_canonical, run_pipeline
from .sexpr import canonical_decode, canonical_encode, parse_sexpr, serialize
from .verify import SystemLimits, verify_all

__version__ = "0.1.0"

__all__ = [
    "Agent",
    "CBCLError",
    "Delivered",
    "Dialect",
    "InstallPolicy",
    "Rejected",
    "ResourceContext",
    "SimulationConfig",
    "SystemLimits",
    "canonical_decode",
    "canonical_encode",
    "dialect_hash",
    "expand_invocation",
    "parse_dialect",
    "parse_message",
    "parse_sexpr",
    "run_canonical",
    "run_pipeline",
    "serialize",
    "serialize_message",
    "simulate",
    "verify_all",
]
