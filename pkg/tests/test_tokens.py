import pytest

from interspeak.tokens import (
    END_ID,
    PADDING_ID,
    SPLIT_MARKER_ID,
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


@pytest.mark.parametrize(
    "role,expected",
    [
        (TokenRole.SPLIT_MARKER, True),
        (TokenRole.PADDING, True),
        (TokenRole.RESPONSE, False),
        (TokenRole.REASONING, False),
        (TokenRole.PROMPT, False),
        (TokenRole.END, False),
    ],
)
def test_is_control(role, expected):
    assert is_control(role) is expected


def test_default_config_values():
    cfg = default_config()
    assert cfg.p == 2
    assert cfg.q == 8
    assert cfg.padding_per_cycle == 8
    assert cfg.emit_markers is True
    assert cfg.mask_control_in_loss is True
    assert cfg.tail_policy is TailPolicy.CONTIGUOUS_REMAINDER


@pytest.mark.parametrize("p,q", [(0, 8), (2, 0), (-1, 1)])
def test_config_rejects_degenerate_ratio(p, q):
    with pytest.raises(ValueError):
        InterleaveConfig(p=p, q=q)


def test_config_rejects_negative_padding():
    with pytest.raises(ValueError):
        InterleaveConfig(padding_per_cycle=-1)


def test_control_tokens_have_reserved_ids_and_empty_surfaces():
    assert split_marker().id == SPLIT_MARKER_ID
    assert padding_token().id == PADDING_ID
    assert end_token().id == END_ID
    for tok in (split_marker(), padding_token(), end_token()):
        assert tok.text == ""


def test_reserved_id_rejected_for_content_role():
    with pytest.raises(ValueError):
        Token(SPLIT_MARKER_ID, "hello", TokenRole.RESPONSE)
    with pytest.raises(ValueError):
        Token(PADDING_ID, None, TokenRole.REASONING)


def test_control_role_rejects_wrong_id_or_surface():
    with pytest.raises(ValueError):
        Token(5, "", TokenRole.SPLIT_MARKER)
    with pytest.raises(ValueError):
        Token(SPLIT_MARKER_ID, "x", TokenRole.SPLIT_MARKER)


def test_negative_id_rejected():
    with pytest.raises(ValueError):
        Token(-1, "x", TokenRole.RESPONSE)


def test_stream_pair_role_purity():
    good = StreamPair(
        reasoning=(Token(1, "r", TokenRole.REASONING),),
        response=(Token(2, "a", TokenRole.RESPONSE),),
    )
    assert len(good.reasoning) == 1
    with pytest.raises(ValueError):
        StreamPair(reasoning=(Token(1, "r", TokenRole.RESPONSE),), response=())
    with pytest.raises(ValueError):
        StreamPair(reasoning=(), response=(split_marker(),))


def test_interleaved_sequence_length_mismatch():
    tok = Token(1, "a", TokenRole.RESPONSE)
    with pytest.raises(ValueError):
        InterleavedSequence((tok,), (0, 0), (True,))


def test_interleaved_sequence_cycle_monotonic():
    toks = (Token(1, "a", TokenRole.RESPONSE), Token(2, "b", TokenRole.RESPONSE))
    with pytest.raises(ValueError):
        InterleavedSequence(toks, (1, 0), (True, True))
    seq = InterleavedSequence(toks, (0, 1), (True, True))
    assert len(seq) == 2
    assert seq.roles == (TokenRole.RESPONSE, TokenRole.RESPONSE)


def test_control_tokens_are_string_invisible():
    # Detokenizing with controls filtered equals detokenizing then filtering.
    toks = [
        Token(1, "hi", TokenRole.RESPONSE),
        split_marker(),
        Token(2, "there", TokenRole.REASONING),
        padding_token(),
    ]
    rendered = " ".join(t.text for t in toks if t.text)
    filtered = " ".join(t.text for t in toks if not is_control(t.role) and t.text)
    assert rendered == filtered == "hi there"
