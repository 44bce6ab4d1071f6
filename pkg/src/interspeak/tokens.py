"""Token roles, interleave configuration, and stream containers.

These value types are shared by every other module: the codec and the
decode scheduler speak in :class:`Token` streams, the latency simulator
reads the cycle geometry off :class:`InterleaveConfig`, and the dataset
pipeline serializes :class:`InterleavedSequence` records.  Everything here
is immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


# Control and end-of-sequence tokens live at the very top of the id space so
# they can never collide with content ids handed out by any tokenizer.
MAX_TOKEN_ID = 2**31 - 1

SPLIT_MARKER_ID = MAX_TOKEN_ID
PADDING_ID = MAX_TOKEN_ID - 1
END_ID = MAX_TOKEN_ID - 2

RESERVED_IDS = frozenset({SPLIT_MARKER_ID, PADDING_ID, END_ID})


class TokenRole(enum.Enum):
    """Closed set of roles a token can carry."""

    PROMPT = "prompt"
    RESPONSE = "response"
    REASONING = "reasoning"
    SPLIT_MARKER = "split_marker"
    PADDING = "padding"
    END = "end"


CONTROL_ROLES = frozenset({TokenRole.SPLIT_MARKER, TokenRole.PADDING})
CONTENT_ROLES = frozenset({TokenRole.PROMPT, TokenRole.RESPONSE, TokenRole.REASONING})

_ROLE_FOR_RESERVED_ID = {
    SPLIT_MARKER_ID: TokenRole.SPLIT_MARKER,
    PADDING_ID: TokenRole.PADDING,
    END_ID: TokenRole.END,
}

_RESERVED_ID_FOR_ROLE = {role: tid for tid, role in _ROLE_FOR_RESERVED_ID.items()}


def is_control(role: TokenRole) -> bool:
    """True exactly for the two control roles: split markers and padding."""
    return role in CONTROL_ROLES


@dataclass(frozen=True)
class Token:
    """One atom of a generation stream: integer id, optional surface, role.

    Control-role and end tokens must carry their reserved id and an empty
    surface; content roles must not use a reserved id.
    """

    id: int
    surface: str | None
    role: TokenRole

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError(f"token id must be non-negative, got {self.id}")
        reserved_role = _ROLE_FOR_RESERVED_ID.get(self.id)
        if reserved_role is not None and self.role is not reserved_role:
            raise ValueError(
                f"id {self.id} is reserved for {reserved_role.value} tokens, "
                f"cannot carry role {self.role.value}"
            )
        expected_id = _RESERVED_ID_FOR_ROLE.get(self.role)
        if expected_id is not None:
            if self.id != expected_id:
                raise ValueError(
                    f"{self.role.value} tokens must use reserved id {expected_id}"
                )
            if self.surface:
                raise ValueError(f"{self.role.value} tokens must have an empty surface")

    @property
    def text(self) -> str:
        """Detokenized form; control and end tokens are string-invisible."""
        if self.role in CONTROL_ROLES or self.role is TokenRole.END:
            return ""
        return self.surface or ""


def split_marker() -> Token:
    return Token(SPLIT_MARKER_ID, "", TokenRole.SPLIT_MARKER)


def padding_token() -> Token:
    return Token(PADDING_ID, "", TokenRole.PADDING)


def end_token() -> Token:
    return Token(END_ID, "", TokenRole.END)


class TailPolicy(enum.Enum):
    """What the codec does when one stream exhausts mid-protocol.

    CONTIGUOUS_REMAINDER emits the leftover stream as one final block, which
    keeps the detokenized spoken output identical to the response text.
    PAD_TO_CYCLE keeps every cycle the same geometric shape by filling unused
    content slots with padding tokens (useful for uniform training data).
    """

    CONTIGUOUS_REMAINDER = "contiguous_remainder"
    PAD_TO_CYCLE = "pad_to_cycle"


@dataclass(frozen=True)
class InterleaveConfig:
    """The response:reasoning alternation protocol.

    Each full cycle is ``p`` response tokens, a split marker, ``q`` reasoning
    tokens, ``padding_per_cycle`` padding tokens, and a closing marker
    (markers present only when ``emit_markers``).
    """

    p: int = 2
    q: int = 8
    padding_per_cycle: int = 8
    emit_markers: bool = True
    tail_policy: TailPolicy = TailPolicy.CONTIGUOUS_REMAINDER
    mask_control_in_loss: bool = True

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.q < 1:
            raise ValueError(f"q must be >= 1, got {self.q}")
        if self.padding_per_cycle < 0:
            raise ValueError(
                f"padding_per_cycle must be >= 0, got {self.padding_per_cycle}"
            )

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "padding_per_cycle": self.padding_per_cycle,
            "emit_markers": self.emit_markers,
            "tail_policy": self.tail_policy.value,
            "mask_control_in_loss": self.mask_control_in_loss,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "InterleaveConfig":
        return cls(
            p=int(data["p"]),
            q=int(data["q"]),
            padding_per_cycle=int(data["padding_per_cycle"]),
            emit_markers=bool(data["emit_markers"]),
            tail_policy=TailPolicy(data["tail_policy"]),
            mask_control_in_loss=bool(data["mask_control_in_loss"]),
        )


def default_config() -> InterleaveConfig:
    """The default 2:8 protocol with eight padding tokens and masked markers."""
    return InterleaveConfig(
        p=2,
        q=8,
        padding_per_cycle=8,
        emit_markers=True,
        tail_policy=TailPolicy.CONTIGUOUS_REMAINDER,
        mask_control_in_loss=True,
    )


def _coerce_tokens(value, expected_role: TokenRole, name: str) -> tuple[Token, ...]:
    toks = tuple(value)
    for i, tok in enumerate(toks):
        if not isinstance(tok, Token):
            raise TypeError(f"{name}[{i}] is not a Token")
        if tok.role is not expected_role:
            raise ValueError(
                f"{name}[{i}] has role {tok.role.value}, expected {expected_role.value}"
            )
    return toks


@dataclass(frozen=True)
class StreamPair:
    """A reasoning stream and a response stream, role-pure, no control tokens."""

    reasoning: tuple[Token, ...] = field(default=())
    response: tuple[Token, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "reasoning",
            _coerce_tokens(self.reasoning, TokenRole.REASONING, "reasoning"),
        )
        object.__setattr__(
            self,
            "response",
            _coerce_tokens(self.response, TokenRole.RESPONSE, "response"),
        )


@dataclass(frozen=True)
class InterleavedSequence:
    """A flat token sequence with per-token cycle indices and loss mask."""

    tokens: tuple[Token, ...]
    cycle_index: tuple[int, ...]
    loss_mask: tuple[bool, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "cycle_index", tuple(self.cycle_index))
        object.__setattr__(self, "loss_mask", tuple(self.loss_mask))
        n = len(self.tokens)
        if len(self.cycle_index) != n or len(self.loss_mask) != n:
            raise ValueError(
                f"length mismatch: {n} tokens, {len(self.cycle_index)} cycle "
                f"indices, {len(self.loss_mask)} mask entries"
            )
        prev = 0
        for i, c in enumerate(self.cycle_index):
            if c < prev:
                raise ValueError(f"cycle_index decreases at position {i}")
            prev = c

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    @property
    def roles(self) -> tuple[TokenRole, ...]:
        return tuple(tok.role for tok in self.tokens)


def empty_sequence() -> InterleavedSequence:
    return InterleavedSequence((), (), ())
