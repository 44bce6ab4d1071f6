"""Interleaved reasoning/response token streams for real-time speech decoding.

The package splits into five layers:

* :mod:`interspeak.tokens` - token roles, protocol configuration, containers;
* :mod:`interspeak.codec` - offline interleave/deinterleave and validation;
* :mod:`interspeak.scheduler` - the online decode loop driving a producer
  into a talker sink under one of four speaking paradigms;
* :mod:`interspeak.latency` - closed-form latency arithmetic and a
  discrete-event generation/playback simulator;
* :mod:`interspeak.pipeline` - dataset construction and verification for
  interleaved reasoning/response training records.
"""

from .codec import (
    PatternError,
    PatternViolation,
    SegmentDescriptor,
    build_schedule,
    deinterleave,
    interleave,
    spoken_projection,
    validate_pattern,
)
from .latency import (
    BreakEvenRate,
    DecodeParadigm,
    Jitter,
    LatencyReport,
    ParadigmComparison,
    RateModel,
    break_even_rate,
    closed_form_latency,
    compare_paradigms,
    simulate_events,
)
from .pipeline import (
    CorpusStats,
    MathRecord,
    OvershootViolation,
    QuarantineSignal,
    TrainingRecord,
    VerificationFailure,
    VerificationReport,
    Verdict,
    WhitespaceTokenizer,
    build_training_record,
    canonical_numeral,
    check_delayed_onset,
    check_overshoot,
    default_tokenize,
    length_ratio,
    run_corpus,
    verify_record,
)
from .scheduler import (
    CollectingSink,
    END_OF_STREAM,
    EndSignal,
    ProducerFailure,
    SchedulerPhase,
    SchedulerState,
    ScriptedProducer,
    SinkFailure,
    inject_markers_policy,
    new_scheduler_state,
    run_decode,
    step,
)
from .tokens import (
    InterleaveConfig,
    InterleavedSequence,
    StreamPair,
    TailPolicy,
    Token,
    TokenRole,
    default_config,
    end_token,
    is_control,
    padding_token,
    split_marker,
)

__version__ = "0.1.0"

__all__ = [
    "BreakEvenRate",
    "CollectingSink",
    "CorpusStats",
    "DecodeParadigm",
    "END_OF_STREAM",
    "EndSignal",
    "InterleaveConfig",
    "InterleavedSequence",
    "Jitter",
    "LatencyReport",
    "MathRecord",
    "OvershootViolation",
    "ParadigmComparison",
    "PatternError",
    "PatternViolation",
    "ProducerFailure",
    "QuarantineSignal",
    "RateModel",
    "SchedulerPhase",
    "SchedulerState",
    "ScriptedProducer",
    "SegmentDescriptor",
    "SinkFailure",
    "StreamPair",
    "TailPolicy",
    "Token",
    "TokenRole",
    "TrainingRecord",
    "VerificationFailure",
    "VerificationReport",
    "Verdict",
    "WhitespaceTokenizer",
    "break_even_rate",
    "build_schedule",
    "build_training_record",
    "canonical_numeral",
    "check_delayed_onset",
    "check_overshoot",
    "closed_form_latency",
    "compare_paradigms",
    "default_config",
    "default_tokenize",
    "deinterleave",
    "end_token",
    "inject_markers_policy",
    "interleave",
    "is_control",
    "length_ratio",
    "new_scheduler_state",
    "padding_token",
    "run_corpus",
    "run_decode",
    "simulate_events",
    "split_marker",
    "spoken_projection",
    "step",
    "validate_pattern",
    "verify_record",
]
