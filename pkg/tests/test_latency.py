import math
import random
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from interspeak.latency import (
    DecodeParadigm,
    Jitter,
    RateModel,
    break_even_generation_rate,
    break_even_rate,
    closed_form_latency,
    compare_paradigms,
    simulate_events,
)
from interspeak.scheduler import CollectingSink, ScriptedProducer, run_decode
from interspeak.tokens import InterleaveConfig, default_config

from util import make_pair

TIS = DecodeParadigm.THINKING_IN_SPEAKING
SR = DecodeParadigm.SILENT_REASONING
FV = DecodeParadigm.FULL_VERBALIZATION
SWT = DecodeParadigm.SPEAKING_WITHOUT_THINKING

CFG = default_config()
RATE = RateModel()  # g=100, c=12.5, fanout 0


def test_rate_model_defaults():
    assert RATE.generation_rate_g == 100.0
    assert RATE.playback_rate_c == 12.5
    assert RATE.talker_fanout_f == 0
    assert RATE.jitter is None


def test_rate_model_validation():
    with pytest.raises(ValueError):
        RateModel(generation_rate_g=0)
    with pytest.raises(ValueError):
        RateModel(playback_rate_c=-1)
    with pytest.raises(ValueError):
        RateModel(talker_fanout_f=2, window_len_l=4, window_hop=9)


def test_emission_rate_padding_excluded_is_twenty():
    rep = closed_form_latency(TIS, 200, 40, CFG, RATE)
    assert rep.emission_rate_padding_excluded == pytest.approx(20.0, abs=1e-9)
    assert rep.emission_rate_padding_counted == pytest.approx(100 * 2 / 18, abs=1e-9)
    assert rep.response_emission_rate == rep.emission_rate_padding_excluded


def test_closed_form_first_audio_formulas():
    g = RATE.generation_rate_g
    assert closed_form_latency(TIS, 500, 40, CFG, RATE).first_audio_latency_s == 1 / g
    assert closed_form_latency(SR, 200, 40, CFG, RATE).first_audio_latency_s == 201 / g
    assert closed_form_latency(FV, 200, 40, CFG, RATE).first_audio_latency_s == 1 / g
    assert closed_form_latency(SWT, 0, 40, CFG, RATE).first_audio_latency_s == 1 / g


def test_closed_form_empty_response_sentinel():
    rep = closed_form_latency(SWT, 0, 0, CFG, RATE)
    assert math.isinf(rep.first_audio_latency_s)
    assert rep.spoken_token_count == 0
    assert rep.completion_time_s == 0.0


def test_closed_form_rejects_jitter():
    with pytest.raises(ValueError):
        closed_form_latency(TIS, 10, 10, CFG, RateModel(jitter=Jitter(sigma=0.2)))


def test_full_verbalization_speaks_all_content():
    rep = closed_form_latency(FV, 200, 40, CFG, RATE)
    assert rep.spoken_token_count == 240
    assert rep.total_generated_tokens == 240


def test_break_even_rates():
    brk = break_even_rate(CFG, RATE)
    assert brk.padding_excluded == pytest.approx(62.5, abs=1e-12)
    assert brk.padding_counted == pytest.approx(112.5, abs=1e-12)


def test_break_even_pure_response_stream():
    # With one response token per cycle and nothing else, break-even is
    # exactly the playback rate.
    brk = break_even_generation_rate(c=12.5, p=1, q=0, padding=0)
    assert brk.padding_excluded == 12.5
    assert brk.padding_counted == 12.5


def test_underrun_dichotomy_over_rate_grid():
    brk = break_even_rate(CFG, RATE).padding_excluded
    for g in (50.0, 55.0, 60.0, 62.0, 62.5, 63.0, 70.0, 100.0, 120.0):
        rate = replace(RATE, generation_rate_g=g)
        rep = simulate_events(TIS, 8000, 2000, CFG, rate, seed=0)
        if g >= brk - 1e-9:
            assert rep.underrun_events == (), f"unexpected underrun at g={g}"
        else:
            assert len(rep.underrun_events) >= 1, f"expected underrun at g={g}"


def test_no_underruns_at_default_rates_long_stream():
    rep = simulate_events(TIS, 40000, 10000, CFG, RATE, seed=0)
    assert rep.underrun_events == ()
    assert rep.spoken_token_count == 10000


def test_padding_accounting_flips_feasibility_at_default_rates():
    # At g=100 the padding-excluded emission is 20 tok/s (feasible against
    # c=12.5) while charging padding drops it to 100*2/18 ~ 11.1 (infeasible).
    excluded = simulate_events(TIS, 8000, 2000, CFG, RATE, seed=0)
    counted = simulate_events(
        TIS, 8000, 2000, CFG, replace(RATE, padding_counted=True), seed=0
    )
    assert excluded.underrun_events == ()
    assert len(counted.underrun_events) >= 1
    assert counted.response_emission_rate == pytest.approx(100 * 2 / 18)


def test_underrun_dichotomy_under_counted_accounting():
    brk = break_even_rate(CFG, RATE).padding_counted
    assert brk == pytest.approx(112.5)
    for g in (100.0, 112.0, 112.5, 113.0, 130.0):
        rate = replace(RATE, generation_rate_g=g, padding_counted=True)
        rep = simulate_events(TIS, 8000, 2000, CFG, rate, seed=0)
        if g >= brk - 1e-9:
            assert rep.underrun_events == (), f"unexpected underrun at g={g}"
        else:
            assert len(rep.underrun_events) >= 1, f"expected underrun at g={g}"


def test_simulation_matches_closed_form_without_jitter():
    rng = random.Random(2)
    for _ in range(50):
        m, n = rng.randint(0, 400), rng.randint(0, 150)
        p, q = rng.randint(1, 4), rng.randint(1, 16)
        cfg = InterleaveConfig(p=p, q=q, padding_per_cycle=rng.randint(0, 8))
        g = float(rng.randint(20, 200))
        c = float(rng.randint(5, 30))
        rate = RateModel(generation_rate_g=g, playback_rate_c=c)
        for paradigm in DecodeParadigm:
            cf = closed_form_latency(paradigm, m, n, cfg, rate)
            sim = simulate_events(paradigm, m, n, cfg, rate, seed=1)
            if math.isinf(cf.first_audio_latency_s):
                assert math.isinf(sim.first_audio_latency_s)
            else:
                assert abs(cf.first_audio_latency_s - sim.first_audio_latency_s) <= 1 / g + 1e-9
                assert abs(cf.completion_time_s - sim.completion_time_s) <= 2 / g + 1e-9


@given(m=st.integers(1, 2000), g=st.floats(10, 500))
@settings(max_examples=100, deadline=None)
def test_latency_monotonic_in_reasoning_length(m, g):
    rate = RateModel(generation_rate_g=g)
    shorter = closed_form_latency(SR, m, 10, CFG, rate).first_audio_latency_s
    longer = closed_form_latency(SR, m + 1, 10, CFG, rate).first_audio_latency_s
    assert longer > shorter
    tis_a = closed_form_latency(TIS, m, 10, CFG, rate).first_audio_latency_s
    tis_b = closed_form_latency(TIS, m + 1, 10, CFG, rate).first_audio_latency_s
    assert tis_a == tis_b


@given(m=st.integers(0, 2000), n=st.integers(1, 300))
@settings(max_examples=100, deadline=None)
def test_interleaved_dominates_silent(m, n):
    tis = closed_form_latency(TIS, m, n, CFG, RATE).first_audio_latency_s
    silent = closed_form_latency(SR, m, n, CFG, RATE).first_audio_latency_s
    assert tis <= silent
    if m == 0:
        assert tis == silent
    else:
        assert tis < silent


def test_jitter_deterministic_per_seed():
    rate = RateModel(jitter=Jitter(sigma=0.3))
    a = simulate_events(TIS, 200, 50, CFG, rate, seed=42)
    b = simulate_events(TIS, 200, 50, CFG, rate, seed=42)
    c = simulate_events(TIS, 200, 50, CFG, rate, seed=43)
    assert a == b
    assert a.completion_time_s != c.completion_time_s


def test_fanout_window_gates_playback_start():
    # 3 audio tokens per response token, 12-token window: playback starts
    # once ceil(12/3) = 4 response tokens exist.
    rate = RateModel(talker_fanout_f=3, window_len_l=12, window_hop=12)
    rep = closed_form_latency(TIS, 80, 20, CFG, rate)
    g = rate.generation_rate_g
    # Fourth response token is the second token of cycle 1: (p+q) + 2 steps.
    expected = (CFG.p + CFG.q + 2) / g
    assert rep.first_playback_s == pytest.approx(expected, abs=1e-9)
    assert rep.first_audio_latency_s == pytest.approx(1 / g, abs=1e-9)


def test_no_fanout_reports_no_playback_gate():
    rep = closed_form_latency(TIS, 80, 20, CFG, RATE)
    assert rep.first_playback_s is None


def test_compare_paradigms_rows():
    cmp = compare_paradigms(200, 100, CFG, RATE)
    tis_row = cmp.row(TIS)
    fv_row = cmp.row(FV)
    sr_row = cmp.row(SR)
    assert tis_row.report.spoken_token_count == 100
    assert fv_row.report.spoken_token_count == 300
    # With reasoning twice the response, full verbalization speaks triple.
    assert fv_row.report.spoken_token_count == 3 * tis_row.report.spoken_token_count
    assert sr_row.latency_ratio_vs_silent == pytest.approx(1.0)
    assert tis_row.latency_ratio_vs_silent == pytest.approx(1 / 201, rel=1e-9)
    assert tis_row.spoken_words_est == pytest.approx(25.0)


def test_compare_paradigms_rejects_bad_tokens_per_word():
    with pytest.raises(ValueError):
        compare_paradigms(10, 10, CFG, RATE, tokens_per_word=0)


def test_spoken_count_matches_scheduler_deliveries():
    rng = random.Random(3)
    for paradigm in DecodeParadigm:
        n, m = 12, 30
        if paradigm is SWT:
            pair = make_pair(rng, n, 0)
            m_arg = 0
        else:
            pair = make_pair(rng, n, m)
            m_arg = m
        sink = CollectingSink()
        _, decode_report = run_decode(
            ScriptedProducer.from_pair(pair), sink, CFG, paradigm, RATE
        )
        sim_report = simulate_events(paradigm, m_arg, n, CFG, RATE, seed=0)
        assert decode_report.spoken_token_count == len(sink.received)
        assert sim_report.spoken_token_count == len(sink.received)


def test_underrun_events_report_time_and_deficit():
    rate = replace(RATE, generation_rate_g=40.0)  # well below break-even
    rep = simulate_events(TIS, 400, 100, CFG, rate, seed=0)
    assert rep.underrun_events
    t, deficit = rep.underrun_events[0]
    assert t > 0
    assert deficit >= 1
