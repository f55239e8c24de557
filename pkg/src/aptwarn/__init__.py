"""Temporal rule mining over hacker-forum mentions and enterprise attack logs.

The pipeline: ingest mention postings and ground-truth attack events into
a day-indexed thread, mine condition-to-attack rules whose conditional
frequency beats the head's base rate, replay mention streams to emit
dated warnings with full provenance, and score warnings against ground
truth with assignment-based matching and windowed precision/recall/F1,
including a frequency-proportional random baseline.
"""

__version__ = "0.1.0"

from .core_model import (
    ActionAtom,
    AnnotatedThread,
    Atom,
    ConditionAtom,
    EventType,
    ProbInterval,
    Thread,
    World,
)
from .ingest import AttackEvent, CveMapping, MentionRecord, build_thread, extract_cves
from .learner import AptRule, LearnConfig, compute_pfr, derive_interval, learn_program, prior
from .warn import Warning, generate_warnings, qualify, replay, triggered_rules
from .evaluation import (
    MatchPair,
    MetricsReport,
    WindowSpec,
    baseline_evaluate,
    baseline_generate,
    evaluate_windows,
    match,
    metrics,
    qualified_pair,
)
from .synth import SynthConfig, generate, oracle_pfr

__all__ = [
    "__version__",
    "ActionAtom",
    "AnnotatedThread",
    "Atom",
    "ConditionAtom",
    "EventType",
    "ProbInterval",
    "Thread",
    "World",
    "AttackEvent",
    "CveMapping",
    "MentionRecord",
    "build_thread",
    "extract_cves",
    "AptRule",
    "LearnConfig",
    "compute_pfr",
    "derive_interval",
    "learn_program",
    "prior",
    "Warning",
    "generate_warnings",
    "qualify",
    "replay",
    "triggered_rules",
    "MatchPair",
    "MetricsReport",
    "WindowSpec",
    "baseline_evaluate",
    "baseline_generate",
    "evaluate_windows",
    "match",
    "metrics",
    "qualified_pair",
    "SynthConfig",
    "generate",
    "oracle_pfr",
]
