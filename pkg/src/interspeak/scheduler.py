"""Online decode loop enforcing the response:reasoning alternation.

The producer is role-agnostic: it is asked for one content token at a time
and the scheduler stamps the expected role onto whatever comes back.  All
structure (markers, padding, block lengths, tail handling) is owned by the
scheduler, which must emit byte-for-byte the same transcript the offline
codec produces for the same underlying streams.

Stream ends are discovered lazily through :class:`EndSignal`, so at a block
boundary the scheduler sometimes has to fetch the next content token of the
*other* stream before it knows whether to close the current run or extend it
as a contiguous tail.  Such a fetched token is buffered and emitted on a
later step; the producer is still consulted exactly once per content token,
and never for control tokens.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence

from .latency import (
    DecodeParadigm,
    LatencyReport,
    RateModel,
    report_from_arrivals,
)
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


class EndSignal:
    """Sentinel returned by a producer when a stream has no more tokens."""

    _instance: "EndSignal | None" = None

    def __new__(cls) -> "EndSignal":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "EndSignal()"


END_OF_STREAM = EndSignal()


class TokenProducer(Protocol):
    def next(
        self, expected_role: TokenRole, context: Sequence[Token]
    ) -> Token | EndSignal: ...


class TalkerSink(Protocol):
    def accept(self, token: Token, emission_time: float) -> None: ...


class ProducerFailure(RuntimeError):
    """The producer raised while being consulted for a content token."""


class SinkFailure(RuntimeError):
    """The sink raised; carries the transcript position of the failed token."""

    def __init__(self, position: int, message: str):
        self.position = position
        super().__init__(f"sink failed at transcript position {position}: {message}")


class ScriptedProducer:
    """Replays fixed response/reasoning token lists; counts its consults."""

    def __init__(
        self,
        response: Sequence[Token] = (),
        reasoning: Sequence[Token] = (),
    ):
        self._queues = {
            TokenRole.RESPONSE: list(response),
            TokenRole.REASONING: list(reasoning),
        }
        self._ended: set[TokenRole] = set()
        self.total_consults = 0
        self.content_consults = 0
        self.consults_after_end = 0
        self.consults_by_role: dict[TokenRole, int] = {
            TokenRole.RESPONSE: 0,
            TokenRole.REASONING: 0,
        }

    @classmethod
    def from_pair(cls, pair: StreamPair) -> "ScriptedProducer":
        return cls(response=pair.response, reasoning=pair.reasoning)

    def next(
        self, expected_role: TokenRole, context: Sequence[Token]
    ) -> Token | EndSignal:
        self.total_consults += 1
        if expected_role in self.consults_by_role:
            self.consults_by_role[expected_role] += 1
        if expected_role in self._ended:
            self.consults_after_end += 1
        queue = self._queues.get(expected_role)
        if not queue:
            self._ended.add(expected_role)
            return END_OF_STREAM
        self.content_consults += 1
        return queue.pop(0)


class CollectingSink:
    """Records every delivered token with its emission time."""

    def __init__(self, fail_at: int | None = None):
        self.received: list[tuple[Token, float]] = []
        self._fail_at = fail_at

    def accept(self, token: Token, emission_time: float) -> None:
        if self._fail_at is not None and len(self.received) == self._fail_at:
            raise RuntimeError("sink rejected token")
        self.received.append((token, emission_time))

    @property
    def tokens(self) -> list[Token]:
        return [tok for tok, _ in self.received]

    @property
    def times(self) -> list[float]:
        return [t for _, t in self.received]


class SchedulerPhase(enum.Enum):
    IN_RESPONSE = "in_response"
    IN_REASONING = "in_reasoning"
    IN_PADDING = "in_padding"
    DONE = "done"


@dataclass
class SchedulerState:
    """Mutable decode state; ``transcript`` grows one token per step."""

    phase: SchedulerPhase = SchedulerPhase.IN_RESPONSE
    position_in_segment: int = 0
    cycle: int = 0
    tokens: list[Token] = field(default_factory=list)
    cycle_indices: list[int] = field(default_factory=list)
    loss_mask: list[bool] = field(default_factory=list)
    # Internal bookkeeping.
    _mode: str = "response"  # response | reasoning | padding | marker | done
    _after_marker: str = "reasoning"
    _pad_remaining: int = 0
    _slot: int = 0  # pad-to-cycle slot index within the current block
    _buffer: Token | None = None
    _response_done: bool = False
    _reasoning_done: bool = False
    _run: int = 0
    _merged: bool = False

    @property
    def transcript(self) -> InterleavedSequence:
        return InterleavedSequence(
            tuple(self.tokens), tuple(self.cycle_indices), tuple(self.loss_mask)
        )


def new_scheduler_state() -> SchedulerState:
    return SchedulerState()


def inject_markers_policy(config: InterleaveConfig):
    """The deterministic control-injection rule applied at block boundaries.

    Given the role of the content run that just completed and its length, the
    rule yields the control roles the scheduler appends before consulting the
    producer again: a split marker after a full response block, the padding
    run plus a split marker after a full reasoning block, nothing elsewhere.
    """
    if not config.emit_markers:
        raise ValueError("marker injection policy requires emit_markers")

    def rule(role: TokenRole, run_length: int) -> tuple[TokenRole, ...]:
        if role is TokenRole.RESPONSE and run_length == config.p:
            return (TokenRole.SPLIT_MARKER,)
        if role is TokenRole.REASONING and run_length == config.q:
            return (TokenRole.PADDING,) * config.padding_per_cycle + (
                TokenRole.SPLIT_MARKER,
            )
        return ()

    return rule


def _loss_bit(config: InterleaveConfig, role: TokenRole) -> bool:
    return not (config.mask_control_in_loss and is_control(role))


def _emit(state: SchedulerState, config: InterleaveConfig, token: Token) -> None:
    state.tokens.append(token)
    state.cycle_indices.append(state.cycle)
    state.loss_mask.append(_loss_bit(config, token.role))


def _consult(
    producer: TokenProducer,
    role: TokenRole,
    state: SchedulerState,
) -> Token | None:
    """Ask the producer for one content token; None means end of stream."""
    try:
        got = producer.next(role, state.tokens)
    except Exception as exc:  # producer contract: any raise is a failure
        raise ProducerFailure(f"producer raised for role {role.value}: {exc}") from exc
    if isinstance(got, EndSignal):
        return None
    return replace(got, role=role)


def _deliver(
    sink: TalkerSink, state: SchedulerState, token: Token, clock: float
) -> None:
    try:
        sink.accept(token, clock)
    except Exception as exc:
        raise SinkFailure(len(state.tokens) - 1, str(exc)) from exc


def step(
    state: SchedulerState,
    producer: TokenProducer,
    sink: TalkerSink,
    config: InterleaveConfig,
    clock: float,
) -> SchedulerState:
    """Advance the decode by one transcript token.

    Exactly one token is appended per step, except in the terminal corner
    where both streams turn out to be exhausted and the machine goes straight
    to DONE without emitting.  Response tokens are delivered to the sink at
    ``clock``.
    """
    if state.phase is SchedulerPhase.DONE:
        raise ValueError("scheduler is done")
    if config.tail_policy is TailPolicy.PAD_TO_CYCLE:
        _step_padded(state, producer, sink, config, clock)
    else:
        _step_contiguous(state, producer, sink, config, clock)
    return state


def _finish(state: SchedulerState) -> None:
    state.phase = SchedulerPhase.DONE
    state._mode = "done"


def _enter_response(state: SchedulerState, *, next_cycle: bool) -> None:
    if next_cycle:
        state.cycle += 1
    state.phase = SchedulerPhase.IN_RESPONSE
    state._mode = "response"
    state._run = 0
    state._slot = 0
    state._merged = False
    state.position_in_segment = 0


def _enter_reasoning(state: SchedulerState, *, merged: bool) -> None:
    state.phase = SchedulerPhase.IN_REASONING
    state._mode = "reasoning"
    state._run = 0
    state._slot = 0
    state._merged = merged
    state.position_in_segment = 0


def _begin_reasoning_close(state: SchedulerState, config: InterleaveConfig) -> None:
    """After a reasoning run: padding, trailing marker, then next cycle."""
    target = "done" if _nothing_left(state) else "response"
    if config.padding_per_cycle:
        state.phase = SchedulerPhase.IN_PADDING
        state._mode = "padding"
        state._pad_remaining = config.padding_per_cycle
        state._after_marker = target
        state.position_in_segment = 0
    elif config.emit_markers:
        state._mode = "marker"
        state._after_marker = target
    elif target == "done":
        _finish(state)
    else:
        _enter_response(state, next_cycle=True)


def _nothing_left(state: SchedulerState) -> bool:
    return (
        state._response_done
        and state._reasoning_done
        and state._buffer is None
    )


def _step_contiguous(
    state: SchedulerState,
    producer: TokenProducer,
    sink: TalkerSink,
    config: InterleaveConfig,
    clock: float,
) -> None:
    while True:
        if state._mode == "done":
            return

        if state._mode == "marker":
            _emit(state, config, split_marker())
            target = state._after_marker
            if target == "reasoning":
                _enter_reasoning(state, merged=state._response_done)
            elif target == "response":
                _enter_response(state, next_cycle=True)
            else:
                _finish(state)
            return

        if state._mode == "padding":
            _emit(state, config, padding_token())
            state._pad_remaining -= 1
            state.position_in_segment += 1
            if state._pad_remaining == 0:
                target = "done" if _nothing_left(state) else "response"
                if config.emit_markers:
                    state._mode = "marker"
                    state._after_marker = target
                elif target == "done":
                    _finish(state)
                else:
                    _enter_response(state, next_cycle=True)
            return

        if state._mode == "response":
            if state._buffer is not None and state._buffer.role is TokenRole.RESPONSE:
                tok, state._buffer = state._buffer, None
                _emit(state, config, tok)
                state._run += 1
                state.position_in_segment += 1
                _deliver(sink, state, tok, clock)
                return
            may_pull = not state._response_done and (
                state._merged or state._run < config.p
            )
            if may_pull:
                tok = _consult(producer, TokenRole.RESPONSE, state)
                if tok is None:
                    state._response_done = True
                else:
                    _emit(state, config, tok)
                    state._run += 1
                    state.position_in_segment += 1
                    _deliver(sink, state, tok, clock)
                    return
            if (
                not state._response_done
                and not state._merged
                and state._run >= config.p
            ):
                # Nominal block complete: close it only if reasoning follows,
                # otherwise this run is the contiguous response tail.
                if not state._reasoning_done and state._buffer is None:
                    peeked = _consult(producer, TokenRole.REASONING, state)
                    if peeked is None:
                        state._reasoning_done = True
                    else:
                        state._buffer = peeked
                if state._reasoning_done:
                    state._merged = True
                    continue
                if config.emit_markers:
                    _emit(state, config, split_marker())
                    _enter_reasoning(state, merged=False)
                    return
                _enter_reasoning(state, merged=False)
                continue
            # Response stream exhausted: the run (possibly empty) ends here.
            if not state._reasoning_done and state._buffer is None:
                peeked = _consult(producer, TokenRole.REASONING, state)
                if peeked is None:
                    state._reasoning_done = True
                else:
                    state._buffer = peeked
            reasoning_follows = state._buffer is not None
            if state._run > 0 or reasoning_follows:
                if config.emit_markers:
                    _emit(state, config, split_marker())
                    if reasoning_follows:
                        _enter_reasoning(state, merged=True)
                    else:
                        _finish(state)
                    return
                if reasoning_follows:
                    _enter_reasoning(state, merged=True)
                    continue
                _finish(state)
                return
            _finish(state)
            return

        if state._mode == "reasoning":
            if state._buffer is not None and state._buffer.role is TokenRole.REASONING:
                tok, state._buffer = state._buffer, None
                _emit(state, config, tok)
                state._run += 1
                state.position_in_segment += 1
                return
            may_pull = not state._reasoning_done and (
                state._merged or state._run < config.q
            )
            if may_pull:
                tok = _consult(producer, TokenRole.REASONING, state)
                if tok is None:
                    state._reasoning_done = True
                else:
                    _emit(state, config, tok)
                    state._run += 1
                    state.position_in_segment += 1
                    return
            if (
                not state._reasoning_done
                and not state._merged
                and state._run >= config.q
            ):
                # Nominal reasoning block complete: extend it as the tail if
                # no response will ever follow, otherwise close the cycle.
                if state._response_done:
                    state._merged = True
                    continue
                if state._buffer is None:
                    peeked = _consult(producer, TokenRole.RESPONSE, state)
                    if peeked is None:
                        state._response_done = True
                        state._merged = True
                        continue
                    state._buffer = peeked
                _begin_reasoning_close(state, config)
                continue
            # Reasoning stream exhausted mid-run; close the unit.
            _begin_reasoning_close(state, config)
            continue


def _step_padded(
    state: SchedulerState,
    producer: TokenProducer,
    sink: TalkerSink,
    config: InterleaveConfig,
    clock: float,
) -> None:
    while True:
        if state._mode == "done":
            return

        if state._mode == "marker":
            _emit(state, config, split_marker())
            if state._after_marker == "reasoning":
                _enter_reasoning(state, merged=False)
            elif state._after_marker == "response":
                _enter_response(state, next_cycle=True)
            else:
                _finish(state)
            return

        if state._mode == "response":
            if state._slot == 0:
                # A cycle only exists if some content remains on either stream.
                if state._response_done and state._reasoning_done and state._buffer is None:
                    _finish(state)
                    return
                if state._response_done and state._buffer is None and not state._reasoning_done:
                    peeked = _consult(producer, TokenRole.REASONING, state)
                    if peeked is None:
                        state._reasoning_done = True
                        _finish(state)
                        return
                    state._buffer = peeked
            if state._slot < config.p:
                tok: Token | None = None
                if not state._response_done:
                    tok = _consult(producer, TokenRole.RESPONSE, state)
                    if tok is None:
                        state._response_done = True
                        if state._slot == 0 and state._buffer is None:
                            if state._reasoning_done:
                                _finish(state)
                                return
                            peeked = _consult(producer, TokenRole.REASONING, state)
                            if peeked is None:
                                state._reasoning_done = True
                                _finish(state)
                                return
                            state._buffer = peeked
                if tok is None:
                    tok = padding_token()
                    _emit(state, config, tok)
                else:
                    _emit(state, config, tok)
                    _deliver(sink, state, tok, clock)
                state._slot += 1
                state.position_in_segment = state._slot
                if state._slot == config.p:
                    if config.emit_markers:
                        state._mode = "marker"
                        state._after_marker = "reasoning"
                    else:
                        _enter_reasoning(state, merged=False)
                return
            if config.emit_markers:
                state._mode = "marker"
                state._after_marker = "reasoning"
                continue
            _enter_reasoning(state, merged=False)
            continue

        if state._mode == "reasoning":
            total_slots = config.q + config.padding_per_cycle
            if state._slot < config.q:
                tok = None
                if state._buffer is not None:
                    tok, state._buffer = state._buffer, None
                elif not state._reasoning_done:
                    tok = _consult(producer, TokenRole.REASONING, state)
                    if tok is None:
                        state._reasoning_done = True
                if tok is None:
                    _emit(state, config, padding_token())
                else:
                    _emit(state, config, tok)
            else:
                _emit(state, config, padding_token())
                state.phase = SchedulerPhase.IN_PADDING
            state._slot += 1
            state.position_in_segment = state._slot
            if state._slot == total_slots:
                if config.emit_markers:
                    state._mode = "marker"
                    state._after_marker = "response"
                else:
                    _enter_response(state, next_cycle=True)
            return


def run_decode(
    producer: TokenProducer,
    sink: TalkerSink,
    config: InterleaveConfig,
    paradigm: DecodeParadigm,
    rate: RateModel,
) -> tuple[InterleavedSequence, LatencyReport]:
    """Drive a producer to exhaustion under a paradigm; return transcript + timing.

    Content tokens cost one generation interval each; split markers are free
    and padding costs an interval only under padding-counted accounting.  The
    sink receives exactly what the paradigm verbalizes, timestamped.
    """
    if rate.jitter is not None:
        raise ValueError("run_decode is a deterministic replay; jitter not supported")
    interval = 1.0 / rate.generation_rate_g
    arrivals: list[float] = []

    if paradigm is DecodeParadigm.THINKING_IN_SPEAKING:
        state = new_scheduler_state()
        t = 0.0
        while state.phase is not SchedulerPhase.DONE:
            before = len(state.tokens)
            step(state, producer, sink, config, clock=t + interval)
            if len(state.tokens) == before:
                continue
            role = state.tokens[-1].role
            if role in (TokenRole.RESPONSE, TokenRole.REASONING):
                t += interval
                if role is TokenRole.RESPONSE:
                    arrivals.append(t)
            elif role is TokenRole.PADDING and rate.padding_counted:
                t += interval
        transcript = state.transcript
    else:
        tokens: list[Token] = []
        t = 0.0

        def pull_stream(role: TokenRole, verbalize: bool) -> None:
            nonlocal t
            while True:
                tok = _pull(producer, role, tokens)
                if tok is None:
                    return
                t += interval
                tokens.append(tok)
                if verbalize:
                    try:
                        sink.accept(tok, t)
                    except Exception as exc:
                        raise SinkFailure(len(tokens) - 1, str(exc)) from exc
                    arrivals.append(t)

        if paradigm is DecodeParadigm.SPEAKING_WITHOUT_THINKING:
            pull_stream(TokenRole.RESPONSE, verbalize=True)
        elif paradigm is DecodeParadigm.SILENT_REASONING:
            pull_stream(TokenRole.REASONING, verbalize=False)
            pull_stream(TokenRole.RESPONSE, verbalize=True)
        else:  # FULL_VERBALIZATION
            pull_stream(TokenRole.REASONING, verbalize=True)
            pull_stream(TokenRole.RESPONSE, verbalize=True)
        transcript = InterleavedSequence(
            tuple(tokens), (0,) * len(tokens), (True,) * len(tokens)
        )

    content = sum(
        1
        for tok in transcript.tokens
        if tok.role in (TokenRole.RESPONSE, TokenRole.REASONING)
    )
    control = sum(1 for tok in transcript.tokens if is_control(tok.role))
    report = report_from_arrivals(
        paradigm,
        arrivals,
        generation_end=t,
        total_content=content,
        spoken=len(arrivals),
        control=control,
        config=config,
        rate=rate,
    )
    return transcript, report


def _pull(
    producer: TokenProducer, role: TokenRole, context: Sequence[Token]
) -> Token | None:
    try:
        got = producer.next(role, context)
    except Exception as exc:
        raise ProducerFailure(f"producer raised for role {role.value}: {exc}") from exc
    if isinstance(got, EndSignal):
        return None
    return replace(got, role=role)
