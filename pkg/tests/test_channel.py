import math
import random

import numpy as np
import pytest
from scipy import stats

from wlansim.channel import (
    BAD, FEC_ADAPTIVE, GOOD, ChannelParams, ChannelProcess, FecConfig, airtime_us,
    block_failure_prob, symbol_error_prob,
)
from wlansim.engine import us


def test_params_validation():
    with pytest.raises(ValueError):
        ChannelParams(tau_g=0)
    with pytest.raises(ValueError):
        ChannelParams(p_g=0.1, p_b=0.01)
    assert ChannelParams().bad_fraction == pytest.approx(0.0333 / 0.1333)


def test_bad_fraction_long_run():
    ch = ChannelProcess(ChannelParams(), random.Random(5))
    frac = ch.bad_time_fraction(us(10_000))
    assert abs(frac - 0.2499) < 0.01


def test_tiny_bad_sojourn_is_always_good():
    ch = ChannelProcess(ChannelParams(tau_g=1.0, tau_b=1e-9), random.Random(1))
    assert all(ch.state_at(t) == GOOD for t in range(1, 5_000_000, 997))


def test_same_seed_same_transitions():
    def trace(seed):
        ch = ChannelProcess(ChannelParams(), random.Random(seed))
        return [ch.state_at(t) for t in range(0, 5_000_000, 1000)]
    assert trace(9) == trace(9)
    assert trace(9) != trace(10)


def test_querying_the_past_is_rejected():
    ch = ChannelProcess(ChannelParams(), random.Random(0))
    ch.state_at(1000)
    with pytest.raises(ValueError):
        ch.state_at(999)


def pinned(state, **kw):
    """A channel that stays in ``state`` for the whole test."""
    if state == BAD:
        params = ChannelParams(tau_g=1e-6, tau_b=1e6, **kw)
    else:
        params = ChannelParams(tau_g=1e6, tau_b=1e-6, **kw)
    ch = ChannelProcess(params, random.Random(0), FecConfig(FEC_ADAPTIVE))
    assert ch.state == state
    return ch


@pytest.mark.parametrize("state", [GOOD, BAD])
@pytest.mark.parametrize("nbytes", [100, 1000, 2000])
def test_corruption_frequency_matches_bitwise_simulation(state, nbytes):
    # reference: draw bit-error counts directly, independent of the frame formula
    bits = nbytes * 8
    p = 1e-2 if state == BAD else 1e-6
    n = 40_000
    ref_freq = np.mean(np.random.default_rng(1).binomial(bits, p, size=n) > 0)
    ch = pinned(state)
    rng = random.Random(2)
    t = 0
    hits = 0
    for _ in range(n):
        out = ch.transmit(bits, t, 2_000_000, False, rng)
        hits += out.corrupted
        t += out.airtime_us
    analytic = 1 - (1 - p) ** bits
    sigma = math.sqrt(max(analytic * (1 - analytic), 1e-12) / n)
    assert abs(hits / n - analytic) <= 3 * sigma + 1e-12
    assert abs(ref_freq - analytic) <= 3 * sigma + 1e-12


def test_good_state_1000_bits():
    ch = pinned(GOOD)
    out = ch.transmit(1000, 0, 2_000_000, False, random.Random(0))
    assert out.error_prob == pytest.approx(9.995e-4, rel=1e-3)
    ch = pinned(BAD)
    assert ch.transmit(8000, 0, 2_000_000, False, random.Random(0)).error_prob > 0.9999


def test_errorless_never_corrupts():
    ch = ChannelProcess(ChannelParams.errorless(), random.Random(3))
    rng = random.Random(4)
    t = 0
    for _ in range(2000):
        out = ch.transmit(16000, t, 2_000_000, False, rng)
        assert not out.corrupted and out.error_prob == 0.0
        t += out.airtime_us + 777


def test_outcome_accounting():
    ch = ChannelProcess(ChannelParams(tau_g=0.001, tau_b=0.001), random.Random(8))
    rng = random.Random(1)
    t = 0
    for fec in (False, True) * 300:
        out = ch.transmit(8272, t, 2_000_000, fec, rng, overhead_us=192)
        assert sum(b for _, b in out.segments) == out.bits_on_air
        assert out.airtime_us == airtime_us(out.bits_on_air, 2_000_000, 192)
        if fec:
            ratio = out.bits_on_air / 8272
            assert abs(ratio - 1 / 0.71) <= 8 / 8272 + 1e-12
        t += out.airtime_us


def test_fec_layout():
    cfg = FecConfig(FEC_ADAPTIVE)
    assert (cfg.data_symbols, cfg.correctable) == (181, 37)
    blocks, coded = cfg.layout(100 * 8)
    assert coded == 255 and blocks == ((255, 37),)  # padded up to one block
    blocks, coded = cfg.layout(1074 * 8)
    assert coded == math.ceil(1074 / 0.71)
    assert sum(s for s, _ in blocks) == coded
    assert all(b == (255, 37) for b in blocks[:-1])
    size, t = blocks[-1]
    assert t == (size - round(size * 0.71)) // 2


def test_block_failure_prob_edges_and_monte_carlo():
    assert block_failure_prob(0.0, 255, 37) == 0.0
    assert block_failure_prob(1.0, 255, 37) == 1.0
    ps = symbol_error_prob(0.01, 8)
    assert ps == pytest.approx(1 - 0.99**8)
    analytic = block_failure_prob(ps, 255, 37)
    rng = np.random.default_rng(3)
    n = 200_000
    freq = np.mean(rng.binomial(255, ps, size=n) > 37)
    sigma = math.sqrt(analytic * (1 - analytic) / n)
    assert abs(freq - analytic) <= 3 * sigma
    with pytest.raises(ValueError):
        block_failure_prob(1.5, 255, 37)


def test_block_failure_monotone():
    ts = [block_failure_prob(0.08, 255, t) for t in range(0, 60, 5)]
    assert ts == sorted(ts, reverse=True)
    ps = [block_failure_prob(p, 255, 37) for p in np.linspace(0, 0.3, 20)]
    assert ps == sorted(ps)


@pytest.mark.parametrize("nbytes", [100, 500, 1000, 2000])
def test_fec_helps_in_bad_state(nbytes):
    ch = pinned(BAD)
    rng = random.Random(0)
    plain = ch.transmit(nbytes * 8, 0, 2_000_000, False, rng)
    coded = ch.transmit(nbytes * 8, plain.airtime_us, 2_000_000, True, rng)
    assert coded.error_prob <= plain.error_prob
    blocks, _ = FecConfig(FEC_ADAPTIVE).layout(nbytes * 8)
    ps = 1 - 0.99**8
    ok = math.prod(1 - stats.binom.sf(t, size, ps) for size, t in blocks)
    assert coded.error_prob == pytest.approx(1 - ok, rel=1e-9)


def test_fec_decision_policy_and_delay():
    ch = ChannelProcess(ChannelParams(tau_g=0.01, tau_b=0.01), random.Random(12))
    off = FecConfig()
    assert not any(ch.fec_decision(t, off) for t in range(0, 200_000, 1000))
    on = FecConfig(FEC_ADAPTIVE)
    # find a Good->Bad flip and look 1 ms after it with a 5 ms feedback delay
    t = 0
    while True:
        t = ch.next_transition_at
        before = ch.state_at(t - 1)
        after = ch.state_at(t)
        if before == GOOD and after == BAD and ch.next_transition_at > t + 1000 \
                and ch.state_seen_at(t - 5000) == GOOD:
            break
    assert ch.fec_decision(t + 1000, on)
    delayed = FecConfig(FEC_ADAPTIVE, feedback_delay=0.005)
    assert not ch.fec_decision(t + 1000, delayed)


def test_segments_cover_units():
    ch = ChannelProcess(ChannelParams(tau_g=0.0005, tau_b=0.0005), random.Random(2))
    t = 0
    for units in (1, 7, 800, 16000):
        segs = ch.segments(t, t + 5000, units)
        assert sum(n for _, n in segs) == units
        assert all(n > 0 for _, n in segs)
        t += 5000
