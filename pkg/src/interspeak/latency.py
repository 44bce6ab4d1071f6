"""Latency arithmetic and a discrete-event simulator for the four paradigms.

The rate model captures the central asymmetry this protocol exploits: the
generator produces on the order of 100 tokens per second while natural speech
playback only consumes about 12.5, so a 2:8 response:reasoning split still
emits 20 spoken tokens per second.  Split markers never cost generation time;
padding tokens cost time only under the padding-counted accounting flag, and
reports always carry both emission figures so the accounting choice stays
visible.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass
from typing import Sequence

from . import codec
from .tokens import InterleaveConfig, TokenRole

_EPS = 1e-9


class DecodeParadigm(enum.Enum):
    """How reasoning and response generation are ordered and verbalized."""

    SPEAKING_WITHOUT_THINKING = "speaking-without-thinking"
    FULL_VERBALIZATION = "full-verbalization"
    SILENT_REASONING = "silent-reasoning"
    THINKING_IN_SPEAKING = "thinking-in-speaking"


@dataclass(frozen=True)
class Jitter:
    """Log-normal multiplier on per-token generation intervals (mean 1)."""

    sigma: float
    kind: str = "lognormal"

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError("jitter sigma must be positive")
        if self.kind != "lognormal":
            raise ValueError(f"unsupported jitter kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma}

    @classmethod
    def from_dict(cls, data: dict) -> "Jitter":
        return cls(sigma=float(data["sigma"]), kind=str(data.get("kind", "lognormal")))


@dataclass(frozen=True)
class RateModel:
    """Generation throughput, playback demand, and talker expansion factors."""

    generation_rate_g: float = 100.0
    playback_rate_c: float = 12.5
    talker_fanout_f: int = 0
    window_len_l: int = 0
    window_hop: int = 0
    jitter: Jitter | None = None
    padding_counted: bool = False

    def __post_init__(self) -> None:
        if self.generation_rate_g <= 0:
            raise ValueError("generation_rate_g must be positive")
        if self.playback_rate_c <= 0:
            raise ValueError("playback_rate_c must be positive")
        if self.talker_fanout_f < 0:
            raise ValueError("talker_fanout_f must be non-negative")
        if self.talker_fanout_f > 0:
            if self.window_len_l < 1:
                raise ValueError("window_len_l must be >= 1 when fanout is set")
            if self.window_hop > self.window_len_l:
                raise ValueError("window_hop must not exceed window_len_l")

    def to_dict(self) -> dict:
        return {
            "generation_rate_g": self.generation_rate_g,
            "playback_rate_c": self.playback_rate_c,
            "talker_fanout_f": self.talker_fanout_f,
            "window_len_l": self.window_len_l,
            "window_hop": self.window_hop,
            "jitter": self.jitter.to_dict() if self.jitter else None,
            "padding_counted": self.padding_counted,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RateModel":
        jitter = data.get("jitter")
        return cls(
            generation_rate_g=float(data["generation_rate_g"]),
            playback_rate_c=float(data["playback_rate_c"]),
            talker_fanout_f=int(data["talker_fanout_f"]),
            window_len_l=int(data["window_len_l"]),
            window_hop=int(data["window_hop"]),
            jitter=Jitter.from_dict(jitter) if jitter else None,
            padding_counted=bool(data["padding_counted"]),
        )


@dataclass(frozen=True)
class LatencyReport:
    """Timing and volume outcome of one paradigm run.

    ``first_audio_latency_s`` is measured at first verbalized token
    availability and is ``inf`` when nothing is ever verbalized.  Token
    counts cover content tokens only; control tokens are reported separately.
    """

    paradigm: DecodeParadigm
    first_audio_latency_s: float
    completion_time_s: float
    spoken_token_count: int
    total_generated_tokens: int
    underrun_events: tuple[tuple[float, int], ...]
    response_emission_rate: float
    emission_rate_padding_excluded: float
    emission_rate_padding_counted: float
    control_token_count: int = 0
    first_playback_s: float | None = None

    def to_dict(self) -> dict:
        return {
            "paradigm": self.paradigm.value,
            "first_audio_latency_s": self.first_audio_latency_s,
            "completion_time_s": self.completion_time_s,
            "spoken_token_count": self.spoken_token_count,
            "total_generated_tokens": self.total_generated_tokens,
            "underrun_count": len(self.underrun_events),
            "underrun_events": [list(ev) for ev in self.underrun_events],
            "response_emission_rate": self.response_emission_rate,
            "emission_rate_padding_excluded": self.emission_rate_padding_excluded,
            "emission_rate_padding_counted": self.emission_rate_padding_counted,
            "control_token_count": self.control_token_count,
            "first_playback_s": self.first_playback_s,
        }


@dataclass(frozen=True)
class BreakEvenRate:
    """Minimal generation rate sustaining playback, under both accountings."""

    padding_excluded: float
    padding_counted: float

    def active(self, padding_counted: bool) -> float:
        return self.padding_counted if padding_counted else self.padding_excluded

    def to_dict(self) -> dict:
        return {
            "padding_excluded": self.padding_excluded,
            "padding_counted": self.padding_counted,
        }


def steady_emission_rate(g: float, p: int, q: int, padding: int, *, padding_counted: bool) -> float:
    """Spoken tokens per second once the alternation reaches steady state."""
    cycle_cost = p + q + (padding if padding_counted else 0)
    return g * p / cycle_cost


def break_even_generation_rate(c: float, p: int, q: int, padding: int) -> BreakEvenRate:
    """Solve steady_emission_rate(g) == c for g, under both accountings."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if q < 0 or padding < 0:
        raise ValueError("q and padding must be non-negative")
    return BreakEvenRate(
        padding_excluded=c * (p + q) / p,
        padding_counted=c * (p + q + padding) / p,
    )


def break_even_rate(config: InterleaveConfig, rate: RateModel) -> BreakEvenRate:
    """Break-even generation rate for a config's geometry and a playback rate."""
    return break_even_generation_rate(
        rate.playback_rate_c, config.p, config.q, config.padding_per_cycle
    )


def _verbalized(paradigm: DecodeParadigm, role: TokenRole) -> bool:
    if paradigm is DecodeParadigm.FULL_VERBALIZATION:
        return role in (TokenRole.RESPONSE, TokenRole.REASONING)
    return role is TokenRole.RESPONSE


def _playback_drain(
    arrivals: Sequence[float], c: float, gate_time: float | None
) -> tuple[float | None, tuple[tuple[float, int], ...]]:
    """Run the playback FIFO over verbalized-token arrival times.

    Each token occupies ``1/c`` seconds of airtime.  An underrun is recorded
    whenever playback is mid-utterance but the next token has not arrived yet;
    the deficit is the stall duration expressed in playback tokens.
    """
    if not arrivals:
        return None, ()
    slot = 1.0 / c
    start = arrivals[0] if gate_time is None else max(arrivals[0], gate_time)
    underruns: list[tuple[float, int]] = []
    finish = start
    for i, t in enumerate(arrivals):
        if i and t > finish + _EPS:
            deficit = max(1, math.ceil((t - finish) * c))
            underruns.append((t, deficit))
        finish = max(finish, t) + slot
    return finish, tuple(underruns)


def _window_gate(arrivals: Sequence[float], rate: RateModel) -> float | None:
    """Playback start time once the first decode window of audio tokens exists."""
    if rate.talker_fanout_f <= 0 or not arrivals:
        return None
    needed = math.ceil(rate.window_len_l / rate.talker_fanout_f)
    return arrivals[min(needed, len(arrivals)) - 1]


def _token_timeline(
    paradigm: DecodeParadigm, m: int, n: int, config: InterleaveConfig
) -> tuple[list[tuple[TokenRole, int]], int]:
    """Role runs in generation order, plus the control-token count."""
    if paradigm is DecodeParadigm.THINKING_IN_SPEAKING:
        runs = [(seg.role, seg.length) for seg in codec.build_schedule(config, n, m)]
    elif paradigm is DecodeParadigm.SPEAKING_WITHOUT_THINKING:
        runs = [(TokenRole.RESPONSE, n)] if n else []
    else:
        runs = []
        if m:
            runs.append((TokenRole.REASONING, m))
        if n:
            runs.append((TokenRole.RESPONSE, n))
    control = sum(
        length
        for role, length in runs
        if role in (TokenRole.SPLIT_MARKER, TokenRole.PADDING)
    )
    return runs, control


def _emission_rates(
    paradigm: DecodeParadigm, config: InterleaveConfig, rate: RateModel
) -> tuple[float, float, float]:
    """(active, padding_excluded, padding_counted) spoken-token emission rates."""
    if paradigm is DecodeParadigm.THINKING_IN_SPEAKING:
        excluded = steady_emission_rate(
            rate.generation_rate_g,
            config.p,
            config.q,
            config.padding_per_cycle,
            padding_counted=False,
        )
        counted = steady_emission_rate(
            rate.generation_rate_g,
            config.p,
            config.q,
            config.padding_per_cycle,
            padding_counted=True,
        )
    else:
        excluded = counted = rate.generation_rate_g
    active = counted if rate.padding_counted else excluded
    return active, excluded, counted


def report_from_arrivals(
    paradigm: DecodeParadigm,
    arrivals: Sequence[float],
    generation_end: float,
    total_content: int,
    spoken: int,
    control: int,
    config: InterleaveConfig,
    rate: RateModel,
) -> LatencyReport:
    """Assemble a LatencyReport from verbalized arrival times."""
    gate = _window_gate(arrivals, rate)
    playback_end, underruns = _playback_drain(arrivals, rate.playback_rate_c, gate)
    first_audio = arrivals[0] if arrivals else math.inf
    completion = generation_end if playback_end is None else max(generation_end, playback_end)
    active, excluded, counted = _emission_rates(paradigm, config, rate)
    return LatencyReport(
        paradigm=paradigm,
        first_audio_latency_s=first_audio,
        completion_time_s=completion,
        spoken_token_count=spoken,
        total_generated_tokens=total_content,
        underrun_events=underruns,
        response_emission_rate=active,
        emission_rate_padding_excluded=excluded,
        emission_rate_padding_counted=counted,
        control_token_count=control,
        first_playback_s=gate,
    )


def closed_form_latency(
    paradigm: DecodeParadigm,
    M: int,
    N: int,
    config: InterleaveConfig,
    rate: RateModel,
) -> LatencyReport:
    """Deterministic latency arithmetic, no randomness permitted.

    First-audio latencies: thinking-in-speaking and speaking-without-thinking
    start each utterance with a response token so the first spoken token is
    available after one generation interval, 1/g.  Silent reasoning emits M
    reasoning tokens first, so its first spoken token lands at (M+1)/g.  Full
    verbalization speaks the reasoning itself, starting at 1/g.
    """
    if M < 0 or N < 0:
        raise ValueError("M and N must be non-negative")
    if rate.jitter is not None:
        raise ValueError("closed forms are deterministic; use simulate_events for jitter")
    g = rate.generation_rate_g
    runs, control = _token_timeline(paradigm, M, N, config)
    arrivals: list[float] = []
    clock = 0  # generation steps spent so far
    content = 0
    spoken = 0
    for role, length in runs:
        if role in (TokenRole.RESPONSE, TokenRole.REASONING):
            if _verbalized(paradigm, role):
                arrivals.extend((clock + i) / g for i in range(1, length + 1))
                spoken += length
            clock += length
            content += length
        elif role is TokenRole.PADDING and rate.padding_counted:
            clock += length
        # markers, and padding under the excluded accounting, are free
    return report_from_arrivals(
        paradigm, arrivals, clock / g, content, spoken, control, config, rate
    )


def simulate_events(
    paradigm: DecodeParadigm,
    M: int,
    N: int,
    config: InterleaveConfig,
    rate: RateModel,
    seed: int = 0,
) -> LatencyReport:
    """Token-granularity discrete-event run of generation feeding playback.

    Generation advances one token at a time at intervals of 1/g (perturbed by
    the jitter model when configured); verbalized tokens are queued for a
    playback process that drains them at ``c`` tokens per second, recording an
    underrun whenever it goes hungry mid-utterance.  Deterministic per seed.
    """
    if M < 0 or N < 0:
        raise ValueError("M and N must be non-negative")
    g = rate.generation_rate_g
    rng = random.Random(seed)
    jitter = rate.jitter

    def interval() -> float:
        base = 1.0 / g
        if jitter is None:
            return base
        mu = -0.5 * jitter.sigma * jitter.sigma
        return base * math.exp(rng.gauss(mu, jitter.sigma))

    runs, control = _token_timeline(paradigm, M, N, config)
    arrivals: list[float] = []
    t = 0.0
    content = 0
    spoken = 0
    for role, length in runs:
        costed = role in (TokenRole.RESPONSE, TokenRole.REASONING) or (
            role is TokenRole.PADDING and rate.padding_counted
        )
        speak = _verbalized(paradigm, role)
        for _ in range(length):
            if costed:
                t += interval()
            if role in (TokenRole.RESPONSE, TokenRole.REASONING):
                content += 1
                if speak:
                    arrivals.append(t)
                    spoken += 1
    return report_from_arrivals(
        paradigm, arrivals, t, content, spoken, control, config, rate
    )


@dataclass(frozen=True)
class ParadigmRow:
    """One comparison row: a report plus listener-facing derived columns."""

    report: LatencyReport
    spoken_words_est: float
    latency_ratio_vs_silent: float | None

    def to_dict(self) -> dict:
        d = self.report.to_dict()
        d["spoken_words_est"] = self.spoken_words_est
        d["latency_ratio_vs_silent"] = self.latency_ratio_vs_silent
        return d


@dataclass(frozen=True)
class ParadigmComparison:
    rows: tuple[ParadigmRow, ...]
    tokens_per_word: float

    def row(self, paradigm: DecodeParadigm) -> ParadigmRow:
        for r in self.rows:
            if r.report.paradigm is paradigm:
                return r
        raise KeyError(paradigm)


def compare_paradigms(
    M: int,
    N: int,
    config: InterleaveConfig,
    rate: RateModel,
    tokens_per_word: float = 4.0,
) -> ParadigmComparison:
    """Closed-form reports for all four paradigms on the same streams.

    ``tokens_per_word`` converts spoken token counts into estimated words
    (the default 4 matches ~20 tokens/s coming out at roughly five words/s).
    """
    if tokens_per_word <= 0:
        raise ValueError("tokens_per_word must be positive")
    reports = {
        paradigm: closed_form_latency(paradigm, M, N, config, rate)
        for paradigm in DecodeParadigm
    }
    silent = reports[DecodeParadigm.SILENT_REASONING].first_audio_latency_s
    rows = []
    for paradigm in DecodeParadigm:
        rep = reports[paradigm]
        if math.isinf(rep.first_audio_latency_s) or math.isinf(silent) or silent == 0:
            ratio = None
        else:
            ratio = rep.first_audio_latency_s / silent
        rows.append(
            ParadigmRow(
                report=rep,
                spoken_words_est=rep.spoken_token_count / tokens_per_word,
                latency_ratio_vs_silent=ratio,
            )
        )
    return ParadigmComparison(rows=tuple(rows), tokens_per_word=tokens_per_word)
