"""Asynchronous multiparty sessions typed by global types with split communications."""

from sessionweave.analysis import boundedness, depth, inactive, is_bounded, paths_prefixes, players_of_type
from sessionweave.dsl import (
    Diagnostic,
    ParseError,
    SourceFile,
    parse,
    parse_file,
    parse_global_type,
    parse_process,
    parse_queue,
    parse_session,
    parse_trace,
    pretty,
)
from sessionweave.queues import normalize_queue, rm
from sessionweave.session import Network, Session, apply_trace, session_steps
from sessionweave.terms import Communication, GlobalType, Message, Process
from sessionweave.typecheck import (
    Derivation,
    Guard,
    Judgement,
    TypeFailure,
    check_untypable_exhaustive,
    recheck_derivation,
    typecheck,
)
from sessionweave.typesem import TypeConfig, step_with, type_steps
from sessionweave.verify import (
    ExplorationBound,
    check_lock_freedom,
    check_session_fidelity,
    check_subject_reduction,
    find_races,
)

__version__ = "0.1.0"

__all__ = [
    "Communication",
    "Derivation",
    "Diagnostic",
    "ExplorationBound",
    "GlobalType",
    "Guard",
    "Judgement",
    "Message",
    "Network",
    "ParseError",
    "Process",
    "Session",
    "SourceFile",
    "TypeConfig",
    "TypeFailure",
    "apply_trace",
    "boundedness",
    "check_lock_freedom",
    "check_session_fidelity",
    "check_subject_reduction",
    "check_untypable_exhaustive",
    "depth",
    "find_races",
    "inactive",
    "is_bounded",
    "normalize_queue",
    "parse",
    "parse_file",
    "parse_global_type",
    "parse_process",
    "parse_queue",
    "parse_session",
    "parse_trace",
    "paths_prefixes",
    "players_of_type",
    "pretty",
    "recheck_derivation",
    "rm",
    "session_steps",
    "step_with",
    "type_steps",
    "typecheck",
]
