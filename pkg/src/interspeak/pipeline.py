"""Dataset construction and verification for interleaved math records.

A record pairs a symbolic reasoning trace with a concise spoken response.
Before a record becomes training data its token streams are replayed through
the interleave codec in emission order and checked for three defects:

* overshoot: a response numeral is spoken before the reasoning prefix (or
  the question itself) has produced that numeral;
* missing delayed onset: the response opens with substantive numeric content
  instead of a softening phrase, denying reasoning its head start;
* length ratio: the reasoning stream is not roughly twice the response.

The overshoot check is a rule-based numeric-precedence oracle.  It is
deliberately conservative: only numerals are checked, spelled-out numbers
beyond twenty are not matched, and anything subtler can be layered on through
the ``judge`` hook of :func:`run_corpus`.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import codec
from .tokens import (
    InterleaveConfig,
    InterleavedSequence,
    StreamPair,
    Token,
    TokenRole,
    default_config,
    end_token,
)

DEFAULT_RATIO_BAND = (1.2, 4.0)

DEFAULT_ONSET_LEXICON: tuple[str, ...] = (
    "sure",
    "okay",
    "ok",
    "well",
    "alright",
    "right",
    "so",
    "hmm",
    "let me",
    "let's",
    "good question",
    "great question",
    "one moment",
    "give me a second",
    "after calculating",
    "thanks",
)

_NUMBER_WORDS = {
    "zero": "0",
    "one": "1",
    "two": "2",
    "three": "3",
    "four": "4",
    "five": "5",
    "six": "6",
    "seven": "7",
    "eight": "8",
    "nine": "9",
    "ten": "10",
    "eleven": "11",
    "twelve": "12",
    "thirteen": "13",
    "fourteen": "14",
    "fifteen": "15",
    "sixteen": "16",
    "seventeen": "17",
    "eighteen": "18",
    "nineteen": "19",
    "twenty": "20",
}

_NUMERIC_RE = re.compile(r"\d+(?:,\d{3})*(?:\.\d+)?")
_TOKEN_RE = re.compile(r"\d+(?:,\d{3})*(?:\.\d+)?|\w+|[^\w\s]")

VOCAB_HEADER = "# vocab v1"


def canonical_numeral(surface: str | None) -> str | None:
    """Canonical digit string for a numeric token, else None.

    Thousands separators are stripped, trailing fractional zeros dropped
    ("8.0" -> "8", "8.50" -> "8.5"), and spelled-out numbers up to twenty map
    to digits.  Larger spelled numbers are deliberately not matched.
    """
    if surface is None:
        return None
    s = surface.strip().lower()
    if s in _NUMBER_WORDS:
        return _NUMBER_WORDS[s]
    if not _NUMERIC_RE.fullmatch(s):
        return None
    t = s.replace(",", "")
    if "." in t:
        t = t.rstrip("0").rstrip(".")
        if "." in t:
            head, frac = t.split(".", 1)
            return f"{int(head)}.{frac}"
    return str(int(t))


class WhitespaceTokenizer:
    """Deterministic splitter on whitespace, punctuation, and numerals.

    Numeric literals become single tokens with canonicalized surfaces; ids
    are assigned in first-seen order and can be persisted to a versioned
    vocabulary file.  ``decode(encode(t))`` equals ``t`` up to the documented
    normalization: whitespace collapses to single spaces around token
    boundaries and numerals appear in canonical form.
    """

    def __init__(self, vocab: dict[str, int] | None = None):
        self._vocab: dict[str, int] = dict(vocab) if vocab else {}

    def encode(
        self, text: str, role: TokenRole = TokenRole.RESPONSE
    ) -> list[Token]:
        tokens: list[Token] = []
        for match in _TOKEN_RE.finditer(text):
            raw = match.group()
            canon = canonical_numeral(raw)
            surface = canon if canon is not None else raw
            token_id = self._vocab.get(surface)
            if token_id is None:
                token_id = len(self._vocab)
                self._vocab[surface] = token_id
            tokens.append(Token(token_id, surface, role))
        return tokens

    def decode(self, tokens: Iterable[Token]) -> str:
        return " ".join(tok.text for tok in tokens if tok.text)

    @property
    def vocab(self) -> dict[str, int]:
        return dict(self._vocab)

    def save_vocab(self, path: str | Path) -> None:
        lines = [VOCAB_HEADER]
        for surface, token_id in sorted(self._vocab.items(), key=lambda kv: kv[1]):
            lines.append(f"{surface}\t{token_id}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load_vocab(cls, path: str | Path) -> "WhitespaceTokenizer":
        text = Path(path).read_text(encoding="utf-8")
        lines = text.splitlines()
        if not lines or lines[0] != VOCAB_HEADER:
            raise ValueError(f"unrecognized vocabulary header in {path}")
        vocab: dict[str, int] = {}
        for line in lines[1:]:
            if not line:
                continue
            surface, _, token_id = line.rpartition("\t")
            vocab[surface] = int(token_id)
        return cls(vocab)


def default_tokenize(text: str, tokenizer: WhitespaceTokenizer | None = None) -> list[Token]:
    """Tokenize with a fresh default tokenizer (or a shared one, if given)."""
    return (tokenizer or WhitespaceTokenizer()).encode(text)


@dataclass
class MathRecord:
    """One dataset instance: question forms, reasoning trace, spoken response."""

    id: str
    question_text: str
    spoken_question_text: str
    reasoning_text: str
    response_text: str
    final_answer: str
    audio_ref: str | None = None
    extra: dict = field(default_factory=dict)

    _KNOWN = (
        "id",
        "question_text",
        "spoken_question_text",
        "reasoning_text",
        "response_text",
        "final_answer",
        "audio_ref",
    )

    @classmethod
    def from_dict(cls, data: dict) -> "MathRecord":
        missing = [
            k
            for k in ("id", "question_text", "reasoning_text", "response_text", "final_answer")
            if k not in data
        ]
        if missing:
            raise ValueError(f"record missing fields: {missing}")
        extra = {k: v for k, v in data.items() if k not in cls._KNOWN}
        return cls(
            id=str(data["id"]),
            question_text=str(data["question_text"]),
            spoken_question_text=str(data.get("spoken_question_text") or data["question_text"]),
            reasoning_text=str(data["reasoning_text"]),
            response_text=str(data["response_text"]),
            final_answer=str(data["final_answer"]),
            audio_ref=data.get("audio_ref"),
            extra=extra,
        )

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "question_text": self.question_text,
            "spoken_question_text": self.spoken_question_text,
            "reasoning_text": self.reasoning_text,
            "response_text": self.response_text,
            "final_answer": self.final_answer,
        }
        if self.audio_ref is not None:
            out["audio_ref"] = self.audio_ref
        out.update(self.extra)
        return out


class Verdict(enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    QUARANTINE = "quarantine"


@dataclass(frozen=True)
class OvershootViolation:
    """A response numeral that outran its derivation."""

    response_position: int
    surface: str
    earliest_reasoning_position: int | None

    def to_list(self) -> list:
        return [self.response_position, self.surface, self.earliest_reasoning_position]


@dataclass(frozen=True)
class VerificationReport:
    record_id: str
    overshoot_violations: tuple[OvershootViolation, ...]
    delayed_onset_ok: bool
    length_ratio: float
    verdict: Verdict

    def failure_reason(self, ratio_band: tuple[float, float] = DEFAULT_RATIO_BAND) -> str | None:
        """Highest-priority defect, or None when the record passes."""
        if self.verdict is Verdict.QUARANTINE:
            return "quarantine"
        if self.verdict is Verdict.PASS:
            return None
        if self.overshoot_violations:
            return "overshoot"
        if not self.delayed_onset_ok:
            return "onset"
        lo, hi = ratio_band
        if not (lo <= self.length_ratio <= hi):
            return "ratio"
        return "judge"

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "verdict": self.verdict.value,
            "overshoot_violations": [v.to_list() for v in self.overshoot_violations],
            "delayed_onset_ok": self.delayed_onset_ok,
            "length_ratio": self.length_ratio,
        }


class QuarantineSignal(Exception):
    """The record is a data bug (answer never derived in the reasoning)."""

    def __init__(self, record_id: str, message: str):
        self.record_id = record_id
        super().__init__(message)


class VerificationFailure(Exception):
    """A record failed verification where a passing one was required."""

    def __init__(self, report: VerificationReport):
        self.report = report
        super().__init__(
            f"record {report.record_id} failed verification "
            f"({report.failure_reason() or report.verdict.value})"
        )


def _question_numerals(record: MathRecord, tokenizer: WhitespaceTokenizer) -> set[str]:
    allowed: set[str] = set()
    for text in (record.question_text, record.spoken_question_text):
        for tok in tokenizer.encode(text):
            canon = canonical_numeral(tok.surface)
            if canon is not None:
                allowed.add(canon)
    return allowed


def check_delayed_onset(
    record: MathRecord,
    lexicon: Sequence[str] = DEFAULT_ONSET_LEXICON,
    *,
    config: InterleaveConfig | None = None,
    tokenizer: WhitespaceTokenizer | None = None,
) -> bool:
    """True when the response gives reasoning a head start.

    The first spoken block (the first ``p`` response tokens) must be free of
    numerals, and a response that does contain numerals later must open with
    a softening phrase from the lexicon.  Numeral-free responses pass without
    a lexicon match.
    """
    config = config or default_config()
    tokenizer = tokenizer or WhitespaceTokenizer()
    tokens = tokenizer.encode(record.response_text)
    if not tokens:
        return False
    first_block = tokens[: config.p]
    if any(canonical_numeral(t.surface) is not None for t in first_block):
        return False
    if not any(canonical_numeral(t.surface) is not None for t in tokens):
        return True
    normalized = " ".join(record.response_text.lower().split())
    return any(normalized.startswith(phrase) for phrase in lexicon)


def length_ratio(record: MathRecord, tokenizer: WhitespaceTokenizer | None = None) -> float:
    """Reasoning tokens divided by response tokens."""
    tokenizer = tokenizer or WhitespaceTokenizer()
    response = tokenizer.encode(record.response_text)
    if not response:
        raise ValueError(f"record {record.id} has an empty response")
    reasoning = tokenizer.encode(record.reasoning_text)
    return len(reasoning) / len(response)


def check_overshoot(
    record: MathRecord,
    config: InterleaveConfig | None = None,
    tokenizer: WhitespaceTokenizer | None = None,
    *,
    onset_lexicon: Sequence[str] = DEFAULT_ONSET_LEXICON,
    ratio_band: tuple[float, float] = DEFAULT_RATIO_BAND,
) -> VerificationReport:
    """Replay the interleaved emission order and flag premature numerals.

    Each response-role numeral must already have occurred among the reasoning
    tokens emitted before it, or in either question form.  Non-numeric
    response tokens are not checked.  Raises :class:`QuarantineSignal` when
    the final answer never appears in the reasoning at all.
    """
    config = config or default_config()
    tokenizer = tokenizer or WhitespaceTokenizer()
    if not record.reasoning_text.strip() or not record.response_text.strip():
        raise ValueError(f"record {record.id} is not training-eligible")

    reasoning = tokenizer.encode(record.reasoning_text, role=TokenRole.REASONING)
    response = tokenizer.encode(record.response_text, role=TokenRole.RESPONSE)

    first_reasoning_pos: dict[str, int] = {}
    for i, tok in enumerate(reasoning):
        canon = canonical_numeral(tok.surface)
        if canon is not None and canon not in first_reasoning_pos:
            first_reasoning_pos[canon] = i

    answer = canonical_numeral(record.final_answer) or record.final_answer.strip()
    answer_present = answer in first_reasoning_pos or any(
        tok.surface == answer for tok in reasoning
    )
    if not answer_present:
        raise QuarantineSignal(
            record.id, f"final answer {record.final_answer!r} absent from reasoning"
        )

    allowed = _question_numerals(record, tokenizer)
    seq = codec.interleave(StreamPair(reasoning=reasoning, response=response), config)

    seen: set[str] = set()
    violations: list[OvershootViolation] = []
    response_pos = -1
    for tok in seq.tokens:
        if tok.role is TokenRole.REASONING:
            canon = canonical_numeral(tok.surface)
            if canon is not None:
                seen.add(canon)
        elif tok.role is TokenRole.RESPONSE:
            response_pos += 1
            canon = canonical_numeral(tok.surface)
            if canon is None or canon in allowed or canon in seen:
                continue
            violations.append(
                OvershootViolation(response_pos, tok.surface, first_reasoning_pos.get(canon))
            )

    onset_ok = check_delayed_onset(
        record, onset_lexicon, config=config, tokenizer=tokenizer
    )
    ratio = len(reasoning) / len(response)
    lo, hi = ratio_band
    verdict = (
        Verdict.PASS
        if not violations and onset_ok and lo <= ratio <= hi
        else Verdict.FAIL
    )
    return VerificationReport(
        record_id=record.id,
        overshoot_violations=tuple(violations),
        delayed_onset_ok=onset_ok,
        length_ratio=ratio,
        verdict=verdict,
    )


def verify_record(
    record: MathRecord,
    config: InterleaveConfig | None = None,
    tokenizer: WhitespaceTokenizer | None = None,
    *,
    onset_lexicon: Sequence[str] = DEFAULT_ONSET_LEXICON,
    ratio_band: tuple[float, float] = DEFAULT_RATIO_BAND,
) -> VerificationReport:
    """Like check_overshoot, but quarantine becomes a verdict, not an error."""
    config = config or default_config()
    tokenizer = tokenizer or WhitespaceTokenizer()
    try:
        return check_overshoot(
            record, config, tokenizer, onset_lexicon=onset_lexicon, ratio_band=ratio_band
        )
    except (QuarantineSignal, ValueError):
        onset_ok = False
        ratio = 0.0
        try:
            onset_ok = check_delayed_onset(
                record, onset_lexicon, config=config, tokenizer=tokenizer
            )
            ratio = length_ratio(record, tokenizer)
        except ValueError:
            pass
        return VerificationReport(
            record_id=record.id,
            overshoot_violations=(),
            delayed_onset_ok=onset_ok,
            length_ratio=ratio,
            verdict=Verdict.QUARANTINE,
        )


@dataclass(frozen=True)
class TrainingRecord:
    """A verified record rendered into protocol order with a loss mask."""

    record_id: str
    tokens: InterleavedSequence
    prompt_tokens: tuple[Token, ...]

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "prompt": {
                "ids": [t.id for t in self.prompt_tokens],
                "surfaces": [t.surface for t in self.prompt_tokens],
            },
            "body": {
                "ids": [t.id for t in self.tokens.tokens],
                "surfaces": [t.surface for t in self.tokens.tokens],
                "roles": [t.role.value for t in self.tokens.tokens],
                "cycle_index": list(self.tokens.cycle_index),
                "loss_mask": list(self.tokens.loss_mask),
            },
        }


def _assemble_training_record(
    record: MathRecord, config: InterleaveConfig, tokenizer: WhitespaceTokenizer
) -> TrainingRecord:
    prompt = tuple(
        tokenizer.encode(record.spoken_question_text, role=TokenRole.PROMPT)
    )
    reasoning = tokenizer.encode(record.reasoning_text, role=TokenRole.REASONING)
    response = tokenizer.encode(record.response_text, role=TokenRole.RESPONSE)
    body = codec.interleave(StreamPair(reasoning=reasoning, response=response), config)
    last_cycle = body.cycle_index[-1] if len(body) else 0
    tokens = InterleavedSequence(
        body.tokens + (end_token(),),
        body.cycle_index + (last_cycle,),
        body.loss_mask + (True,),
    )
    return TrainingRecord(record_id=record.id, tokens=tokens, prompt_tokens=prompt)


def build_training_record(
    record: MathRecord,
    config: InterleaveConfig | None = None,
    tokenizer: WhitespaceTokenizer | None = None,
    *,
    onset_lexicon: Sequence[str] = DEFAULT_ONSET_LEXICON,
    ratio_band: tuple[float, float] = DEFAULT_RATIO_BAND,
) -> TrainingRecord:
    """Verify a record and render it; raises unless the verdict is Pass."""
    config = config or default_config()
    tokenizer = tokenizer or WhitespaceTokenizer()
    report = check_overshoot(
        record, config, tokenizer, onset_lexicon=onset_lexicon, ratio_band=ratio_band
    )
    if report.verdict is not Verdict.PASS:
        raise VerificationFailure(report)
    return _assemble_training_record(record, config, tokenizer)


def _summary(values: Sequence[float]) -> dict:
    if not values:
        return {"count": 0, "min": 0.0, "max": 0.0, "mean": 0.0}
    return {
        "count": len(values),
        "min": min(values),
        "max": max(values),
        "mean": sum(values) / len(values),
    }


@dataclass
class CorpusStats:
    ingested: int = 0
    passed: int = 0
    failed_overshoot: int = 0
    failed_onset: int = 0
    failed_ratio: int = 0
    quarantined: int = 0
    malformed: int = 0
    length_ratio_summary: dict = field(default_factory=dict)
    reasoning_length_summary: dict = field(default_factory=dict)
    response_length_summary: dict = field(default_factory=dict)

    @property
    def rejected(self) -> int:
        return (
            self.failed_overshoot
            + self.failed_onset
            + self.failed_ratio
            + self.quarantined
        )

    def to_dict(self) -> dict:
        return {
            "ingested": self.ingested,
            "passed": self.passed,
            "failed_overshoot": self.failed_overshoot,
            "failed_onset": self.failed_onset,
            "failed_ratio": self.failed_ratio,
            "quarantined": self.quarantined,
            "malformed": self.malformed,
            "length_ratio_summary": self.length_ratio_summary,
            "reasoning_length_summary": self.reasoning_length_summary,
            "response_length_summary": self.response_length_summary,
        }


def run_corpus(
    input_path: str | Path,
    output_path: str | Path | None = None,
    config: InterleaveConfig | None = None,
    *,
    tokenizer: WhitespaceTokenizer | None = None,
    onset_lexicon: Sequence[str] = DEFAULT_ONSET_LEXICON,
    ratio_band: tuple[float, float] = DEFAULT_RATIO_BAND,
    report_path: str | Path | None = None,
    vocab_path: str | Path | None = None,
    header: dict | None = None,
    judge: Callable[[MathRecord, VerificationReport], VerificationReport] | None = None,
) -> CorpusStats:
    """Verify every record in a JSONL corpus and write the survivors.

    Outputs: training records (JSONL, header line first), a verification
    report sidecar keyed by record id, and the vocabulary file.  With
    ``output_path=None`` only the report sidecar is written (verify-only
    runs).  Per-record errors are recorded in the sidecar and never abort the
    run; malformed lines are counted separately from ingested records.
    ``judge`` is the hook where an external semantic verifier can rewrite a
    report before the verdict is acted on.
    """
    input_path = Path(input_path)
    output_path = Path(output_path) if output_path is not None else None
    if report_path is not None:
        report_path = Path(report_path)
    elif output_path is not None:
        report_path = Path(str(output_path) + ".reports.jsonl")
    else:
        raise ValueError("report_path is required when output_path is not given")
    if vocab_path is not None:
        vocab_path = Path(vocab_path)
    elif output_path is not None:
        vocab_path = Path(str(output_path) + ".vocab")
    config = config or default_config()
    tokenizer = tokenizer or WhitespaceTokenizer()
    header = header if header is not None else {"config": config.to_dict()}

    stats = CorpusStats()
    ratios: list[float] = []
    reasoning_lengths: list[float] = []
    response_lengths: list[float] = []

    out_lines = [json.dumps({"header": header})]
    report_lines = [json.dumps({"header": header})]

    with input_path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = MathRecord.from_dict(json.loads(line))
            except (json.JSONDecodeError, ValueError, TypeError) as exc:
                stats.malformed += 1
                report_lines.append(
                    json.dumps({"line": line_no, "malformed": True, "error": str(exc)})
                )
                continue
            stats.ingested += 1
            report = verify_record(
                record,
                config,
                tokenizer,
                onset_lexicon=onset_lexicon,
                ratio_band=ratio_band,
            )
            if judge is not None:
                report = judge(record, report)
            reason = report.failure_reason(ratio_band)
            if reason is None:
                stats.passed += 1
                if output_path is not None:
                    training = _assemble_training_record(record, config, tokenizer)
                    out_lines.append(json.dumps(training.to_dict()))
            elif reason == "quarantine":
                stats.quarantined += 1
            elif reason == "onset":
                stats.failed_onset += 1
            elif reason == "ratio":
                stats.failed_ratio += 1
            else:
                stats.failed_overshoot += 1
            if report.verdict is not Verdict.QUARANTINE:
                ratios.append(report.length_ratio)
                reasoning_lengths.append(
                    float(len(tokenizer.encode(record.reasoning_text)))
                )
                response_lengths.append(
                    float(len(tokenizer.encode(record.response_text)))
                )
            entry = report.to_dict()
            entry["reason"] = reason
            if record.extra:
                entry["extra"] = record.extra
            report_lines.append(json.dumps(entry))

    stats.length_ratio_summary = _summary(ratios)
    stats.reasoning_length_summary = _summary(reasoning_lengths)
    stats.response_length_summary = _summary(response_lengths)

    if output_path is not None:
        output_path.parent.mkdir(parents=True, exist_ok=True)
        output_path.write_text("\n".join(out_lines) + "\n", encoding="utf-8")
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text("\n".join(report_lines) + "\n", encoding="utf-8")
    if vocab_path is not None:
        tokenizer.save_vocab(vocab_path)
    return stats
