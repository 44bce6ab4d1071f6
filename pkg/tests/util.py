"""Shared builders for randomized protocol tests."""

from __future__ import annotations

import random

from interspeak.tokens import (
    InterleaveConfig,
    StreamPair,
    TailPolicy,
    Token,
    TokenRole,
)


def make_pair(rng: random.Random, n_response: int, n_reasoning: int) -> StreamPair:
    response = tuple(
        Token(rng.randrange(50_000), f"a{i}", TokenRole.RESPONSE)
        for i in range(n_response)
    )
    reasoning = tuple(
        Token(rng.randrange(50_000), f"r{i}", TokenRole.REASONING)
        for i in range(n_reasoning)
    )
    return StreamPair(reasoning=reasoning, response=response)


def random_config(rng: random.Random) -> InterleaveConfig:
    return InterleaveConfig(
        p=rng.randint(1, 8),
        q=rng.randint(1, 32),
        padding_per_cycle=rng.randint(0, 16),
        emit_markers=rng.random() < 0.8,
        tail_policy=(
            TailPolicy.CONTIGUOUS_REMAINDER
            if rng.random() < 0.5
            else TailPolicy.PAD_TO_CYCLE
        ),
        mask_control_in_loss=rng.random() < 0.8,
    )


def response_tokens(count: int, start: int = 0) -> tuple[Token, ...]:
    return tuple(
        Token(1000 + start + i, f"a{start + i}", TokenRole.RESPONSE)
        for i in range(count)
    )


def reasoning_tokens(count: int, start: int = 0) -> tuple[Token, ...]:
    return tuple(
        Token(2000 + start + i, f"r{start + i}", TokenRole.REASONING)
        for i in range(count)
    )
