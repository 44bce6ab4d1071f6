"""Pure conversion between stream pairs and interleaved sequences.

The schedule builder is the single source of truth for the alternation
grammar.  ``interleave`` realizes a schedule with concrete tokens,
``deinterleave`` inverts it exactly, and ``validate_pattern`` checks an
arbitrary sequence against the grammar.  The online decode scheduler is
required to reproduce these schedules token for token, so any change to the
rules here must keep the two in lockstep.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .tokens import (
    InterleaveConfig,
    InterleavedSequence,
    StreamPair,
    TailPolicy,
    Token,
    TokenRole,
    is_control,
    padding_token,
    split_marker,
)


@dataclass(frozen=True)
class SegmentDescriptor:
    """One homogeneous run of tokens inside a schedule."""

    role: TokenRole
    length: int
    cycle: int

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError(f"segment length must be >= 1, got {self.length}")
        if self.cycle < 0:
            raise ValueError(f"cycle must be >= 0, got {self.cycle}")


@dataclass(frozen=True)
class PatternViolation:
    """A position where a sequence deviates from the schedule grammar.

    ``position`` may equal the sequence length when the sequence ends before
    the grammar does; ``found`` is then the END role standing in for
    "nothing".  Symmetrically, ``expected`` is END for trailing surplus.
    """

    position: int
    expected: TokenRole
    found: TokenRole
    cycle: int


class PatternError(ValueError):
    """Raised when a sequence cannot be decoded under a config."""

    def __init__(self, violations: Sequence[PatternViolation]):
        self.violations = tuple(violations)
        first = self.violations[0] if self.violations else None
        detail = (
            f"first at position {first.position}: expected {first.expected.value}, "
            f"found {first.found.value}"
            if first
            else "no detail"
        )
        super().__init__(f"{len(self.violations)} pattern violation(s); {detail}")


def build_schedule(
    config: InterleaveConfig, n_response: int, n_reasoning: int
) -> list[SegmentDescriptor]:
    """Lay out the segment runs for streams of the given lengths.

    Cycles alternate a response run of ``p`` and a reasoning run of ``q``
    (each followed by its marker / padding decorations) for as long as both
    streams have tokens left.  The moment one stream is exhausted the other
    is emitted as a single contiguous block under CONTIGUOUS_REMAINDER; a run
    therefore grows past its nominal length exactly when nothing of the other
    stream will ever follow it.  Under PAD_TO_CYCLE every cycle keeps the full
    nominal geometry and missing content slots are filled with padding.
    """
    if n_response < 0 or n_reasoning < 0:
        raise ValueError("stream lengths must be non-negative")
    if config.tail_policy is TailPolicy.PAD_TO_CYCLE:
        return _build_padded_schedule(config, n_response, n_reasoning)
    return _build_contiguous_schedule(config, n_response, n_reasoning)


def _build_contiguous_schedule(
    config: InterleaveConfig, n_response: int, n_reasoning: int
) -> list[SegmentDescriptor]:
    segs: list[SegmentDescriptor] = []
    rem_response = n_response
    rem_reasoning = n_reasoning
    cycle = 0
    while rem_response > 0 or rem_reasoning > 0:
        k = rem_response if rem_reasoning == 0 else min(config.p, rem_response)
        if k:
            segs.append(SegmentDescriptor(TokenRole.RESPONSE, k, cycle))
            rem_response -= k
        if config.emit_markers and (k > 0 or rem_reasoning > 0):
            segs.append(SegmentDescriptor(TokenRole.SPLIT_MARKER, 1, cycle))
        if rem_reasoning == 0:
            break
        j = rem_reasoning if rem_response == 0 else min(config.q, rem_reasoning)
        segs.append(SegmentDescriptor(TokenRole.REASONING, j, cycle))
        rem_reasoning -= j
        if config.padding_per_cycle:
            segs.append(
                SegmentDescriptor(TokenRole.PADDING, config.padding_per_cycle, cycle)
            )
        if config.emit_markers:
            segs.append(SegmentDescriptor(TokenRole.SPLIT_MARKER, 1, cycle))
        cycle += 1
    return segs


def _build_padded_schedule(
    config: InterleaveConfig, n_response: int, n_reasoning: int
) -> list[SegmentDescriptor]:
    segs: list[SegmentDescriptor] = []
    rem_response = n_response
    rem_reasoning = n_reasoning
    cycle = 0
    while rem_response > 0 or rem_reasoning > 0:
        k = min(config.p, rem_response)
        if k:
            segs.append(SegmentDescriptor(TokenRole.RESPONSE, k, cycle))
            rem_response -= k
        if config.p - k:
            segs.append(SegmentDescriptor(TokenRole.PADDING, config.p - k, cycle))
        if config.emit_markers:
            segs.append(SegmentDescriptor(TokenRole.SPLIT_MARKER, 1, cycle))
        j = min(config.q, rem_reasoning)
        if j:
            segs.append(SegmentDescriptor(TokenRole.REASONING, j, cycle))
            rem_reasoning -= j
        trailing_pad = (config.q - j) + config.padding_per_cycle
        if trailing_pad:
            segs.append(SegmentDescriptor(TokenRole.PADDING, trailing_pad, cycle))
        if config.emit_markers:
            segs.append(SegmentDescriptor(TokenRole.SPLIT_MARKER, 1, cycle))
        cycle += 1
    return segs


def _expand_schedule(
    schedule: Iterable[SegmentDescriptor],
) -> list[tuple[TokenRole, int]]:
    """Flatten descriptors into one (role, cycle) entry per token position."""
    out: list[tuple[TokenRole, int]] = []
    for seg in schedule:
        out.extend((seg.role, seg.cycle) for _ in range(seg.length))
    return out


def interleave(pair: StreamPair, config: InterleaveConfig) -> InterleavedSequence:
    """Encode a stream pair into the interleaved protocol order."""
    schedule = build_schedule(config, len(pair.response), len(pair.reasoning))
    response_iter = iter(pair.response)
    reasoning_iter = iter(pair.reasoning)
    tokens: list[Token] = []
    cycles: list[int] = []
    mask: list[bool] = []
    for seg in schedule:
        for _ in range(seg.length):
            if seg.role is TokenRole.RESPONSE:
                tok = next(response_iter)
            elif seg.role is TokenRole.REASONING:
                tok = next(reasoning_iter)
            elif seg.role is TokenRole.PADDING:
                tok = padding_token()
            else:
                tok = split_marker()
            tokens.append(tok)
            cycles.append(seg.cycle)
            mask.append(not (config.mask_control_in_loss and is_control(tok.role)))
    return InterleavedSequence(tuple(tokens), tuple(cycles), tuple(mask))


def validate_pattern(
    seq: InterleavedSequence, config: InterleaveConfig
) -> list[PatternViolation]:
    """Check a sequence against the schedule grammar; empty result = valid.

    The expected role string is reconstructed from the sequence's own content
    counts, so the check accepts exactly the image of ``interleave`` for this
    config.  Violations are data, not errors.
    """
    n_response = sum(1 for t in seq.tokens if t.role is TokenRole.RESPONSE)
    n_reasoning = sum(1 for t in seq.tokens if t.role is TokenRole.REASONING)
    expected = _expand_schedule(build_schedule(config, n_response, n_reasoning))
    violations: list[PatternViolation] = []
    actual = seq.roles
    for i in range(min(len(actual), len(expected))):
        role, cycle = expected[i]
        if actual[i] is not role:
            violations.append(PatternViolation(i, role, actual[i], cycle))
    if len(actual) < len(expected):
        role, cycle = expected[len(actual)]
        violations.append(PatternViolation(len(actual), role, TokenRole.END, cycle))
    elif len(actual) > len(expected):
        last_cycle = expected[-1][1] if expected else 0
        violations.append(
            PatternViolation(
                len(expected), TokenRole.END, actual[len(expected)], last_cycle
            )
        )
    return violations


def deinterleave(seq: InterleavedSequence, config: InterleaveConfig) -> StreamPair:
    """Recover the unique stream pair whose interleaving reproduces ``seq``.

    Raises :class:`PatternError` carrying the violations when the sequence
    does not conform to the grammar.
    """
    violations = validate_pattern(seq, config)
    if violations:
        raise PatternError(violations)
    reasoning = tuple(t for t in seq.tokens if t.role is TokenRole.REASONING)
    response = tuple(t for t in seq.tokens if t.role is TokenRole.RESPONSE)
    return StreamPair(reasoning=reasoning, response=response)


def spoken_projection(seq: InterleavedSequence) -> tuple[Token, ...]:
    """The subsequence of response tokens, in order: what the listener hears."""
    return tuple(t for t in seq.tokens if t.role is TokenRole.RESPONSE)
