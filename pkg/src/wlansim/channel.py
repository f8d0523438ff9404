"""Gilbert-Elliott burst-error channel and channel-adaptive Reed-Solomon FEC.

A single two-state process (Good/Bad, exponential sojourns) governs the
whole cell. Frames are not simulated bit by bit: the transmission window
is cut into per-state segments and the frame error probability is computed
in closed form, then one uniform draw decides the outcome.
"""
from __future__ import annotations

import random
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from math import ceil, expm1, log1p
from typing import NamedTuple

from . import _kernels
from .engine import exp_draw, us

GOOD = 0
BAD = 1
STATE_NAMES = ("Good", "Bad")


@dataclass(frozen=True)
class ChannelParams:
    tau_g: float = 0.1
    tau_b: float = 0.0333
    p_g: float = 1e-6
    p_b: float = 1e-2

    def __post_init__(self):
        if not (self.tau_g > 0 and self.tau_b > 0):
            raise ValueError("channel.tau_g and channel.tau_b must be positive")
        if not (0.0 <= self.p_g <= self.p_b <= 1.0):
            raise ValueError("channel bit error rates need 0 <= p_g <= p_b <= 1")

    @property
    def bad_fraction(self) -> float:
        return self.tau_b / (self.tau_g + self.tau_b)

    @classmethod
    def errorless(cls) -> "ChannelParams":
        return cls(p_g=0.0, p_b=0.0)


FEC_OFF = "off"
FEC_ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class FecConfig:
    """Reed-Solomon parameters and the on/off policy.

    ``k = round(n * code_rate)`` data symbols per full block and
    ``t = (n - k) // 2`` correctable symbol errors.
    """

    policy: str = FEC_OFF
    code_rate: float = 0.71
    symbol_bits: int = 8
    block_symbols: int = 255
    feedback_delay: float = 0.0

    def __post_init__(self):
        if self.policy not in (FEC_OFF, FEC_ADAPTIVE):
            raise ValueError(f"fec.policy must be 'off' or 'adaptive', got {self.policy!r}")
        if not 0.0 < self.code_rate < 1.0:
            raise ValueError("fec.code_rate must be in (0, 1)")
        if self.symbol_bits < 1 or self.block_symbols < 2:
            raise ValueError("fec.symbol_bits and fec.block_symbols must be positive")
        if self.feedback_delay < 0:
            raise ValueError("fec.feedback_delay must be >= 0")

    @property
    def data_symbols(self) -> int:
        return int(round(self.block_symbols * self.code_rate))

    @property
    def correctable(self) -> int:
        return (self.block_symbols - self.data_symbols) // 2

    def layout(self, payload_bits: int) -> tuple[tuple[tuple[int, int], ...], int]:
        return _fec_layout(self.code_rate, self.symbol_bits, self.block_symbols, payload_bits)

    def coded_bits(self, payload_bits: int) -> int:
        return self.layout(payload_bits)[1] * self.symbol_bits


@lru_cache(maxsize=4096)
def _fec_layout(code_rate, symbol_bits, n, payload_bits):
    """Code blocks ``((size, t), ...)`` and total coded symbols for a frame.

    Coded length is ceil(data_symbols / code_rate), at least one full block
    (short frames are padded). Full blocks have n symbols; the remainder
    forms a shortened block with the same rate.
    """
    k = int(round(n * code_rate))
    data = -(-payload_bits // symbol_bits)
    coded = max(n, ceil(data / code_rate - 1e-9))
    full, rest = divmod(coded, n)
    t_full = (n - k) // 2
    blocks = [(n, t_full)] * full
    if rest:
        blocks.append((rest, (rest - int(round(rest * code_rate))) // 2))
    return tuple(blocks), coded


def block_failure_prob(p_symbol: float, n: int, t: int) -> float:
    """P[more than t of n symbols in error], symbols failing independently."""
    if not 0.0 <= p_symbol <= 1.0:
        raise ValueError("p_symbol must be a probability")
    return _kernels.binom_tail(n, t, p_symbol)


def symbol_error_prob(p_bit: float, symbol_bits: int) -> float:
    if p_bit >= 1.0:
        return 1.0
    return -expm1(symbol_bits * log1p(-p_bit))


class TransmissionOutcome(NamedTuple):
    corrupted: bool
    airtime_us: int
    bits_on_air: int
    segments: tuple
    error_prob: float = 0.0

    @property
    def airtime(self) -> float:
        return self.airtime_us / 1e6


def airtime_us(bits: int, rate: int, overhead_us: int = 0) -> int:
    """PHY overhead plus serialization of ``bits`` at ``rate`` bit/s, rounded up."""
    return overhead_us + -(-bits * 1_000_000 // rate)


class ChannelProcess:
    """Two-state sojourn process advanced lazily as time is queried.

    Queries must not go backwards (``state_at``); ``state_seen_at`` answers
    delayed lookups from a bounded transition history, which is what the
    FEC feedback delay needs.
    """

    def __init__(
        self,
        params: ChannelParams,
        rng: random.Random,
        fec: FecConfig | None = None,
        history_us: int = 2_000_000,
    ):
        self.params = params
        self.fec = fec or FecConfig()
        self._rng = rng
        self._mean_us = (params.tau_g * 1e6, params.tau_b * 1e6)
        self.state = BAD if rng.random() < params.bad_fraction else GOOD
        self.state_entered_at = 0
        self.next_transition_at = self._sojourn(self.state)
        self._t = 0
        self._history_us = history_us
        self._hist_t = deque([0])
        self._hist_s = deque([self.state])
        self._bad_us = 0
        self.transitions = 0
        self._ps = (
            symbol_error_prob(params.p_g, self.fec.symbol_bits),
            symbol_error_prob(params.p_b, self.fec.symbol_bits),
        )

    def _sojourn(self, state: int) -> int:
        return int(round(exp_draw(self._rng, self._mean_us[state])))

    def _flip(self) -> None:
        t = self.next_transition_at
        if self.state == BAD:
            self._bad_us += t - self.state_entered_at
        self.state ^= 1
        self.state_entered_at = t
        self.next_transition_at = t + self._sojourn(self.state)
        self.transitions += 1
        self._hist_t.append(t)
        self._hist_s.append(self.state)
        horizon = t - self._history_us
        while len(self._hist_t) > 2 and self._hist_t[1] < horizon:
            self._hist_t.popleft()
            self._hist_s.popleft()

    def state_at(self, t: int) -> int:
        if t < self._t:
            raise ValueError(f"channel queried at {t}us, already advanced to {self._t}us")
        while self.next_transition_at <= t:
            self._flip()
        self._t = t
        return self.state

    def state_seen_at(self, t: int) -> int:
        """State at ``t`` where ``t`` may lie in the recent past."""
        if t >= self._t:
            return self.state_at(t)
        if t < self._hist_t[0]:
            raise ValueError(f"channel history does not reach back to {t}us")
        return self._hist_s[bisect_right(self._hist_t, t) - 1]

    def bad_time_fraction(self, t: int) -> float:
        """Fraction of [0, t] spent in Bad; advances the process to ``t``.

        If the process has already been queried past ``t`` the window is
        extended to the latest query time.
        """
        t = max(t, self._t)
        self.state_at(t)
        bad = self._bad_us + (t - self.state_entered_at if self.state == BAD else 0)
        return bad / t if t > 0 else float(self.state == BAD)

    def fec_decision(self, start: int, cfg: FecConfig | None = None) -> bool:
        cfg = cfg or self.fec
        if cfg.policy == FEC_OFF:
            return False
        return self.state_seen_at(max(0, start - us(cfg.feedback_delay))) == BAD

    def segments(self, t0: int, t1: int, units: int) -> list[tuple[int, int]]:
        """Split ``units`` evenly spread over [t0, t1) into per-state runs."""
        state = self.state_at(t0)
        span = t1 - t0
        out = []
        done = 0
        while self.next_transition_at < t1:
            edge = self.next_transition_at
            cut = (units * (edge - t0) * 2 + span) // (2 * span)
            if cut > done:
                out.append((state, cut - done))
                done = cut
            self._flip()
            state = self.state
        if units > done:
            out.append((state, units - done))
        self.state_at(t1)
        return out

    def transmit(
        self,
        bits: int,
        start: int,
        rate: int,
        fec_applied: bool,
        rng: random.Random,
        overhead_us: int = 0,
    ) -> TransmissionOutcome:
        """Send ``bits`` starting at ``start`` and decide whether they arrive intact.

        Only the payload part of the frame (after the PHY overhead) is
        exposed to bit errors.
        """
        if bits <= 0 or rate <= 0:
            raise ValueError("transmit needs bits > 0 and rate > 0")
        p = self.params
        if fec_applied:
            blocks, symbols = self.fec.layout(bits)
            sb = self.fec.symbol_bits
            on_air = symbols * sb
            air = airtime_us(on_air, rate, overhead_us)
            segs = self.segments(start + overhead_us, start + air, symbols)
            prob = _kernels.fec_frame_error_prob(segs, blocks, self._ps[0], self._ps[1])
            segs = [(s, n * sb) for s, n in segs]
        else:
            on_air = bits
            air = airtime_us(bits, rate, overhead_us)
            segs = self.segments(start + overhead_us, start + air, bits)
            prob = _kernels.frame_error_prob(segs, p.p_g, p.p_b)
        corrupted = prob > 0.0 and rng.random() < prob
        return TransmissionOutcome(corrupted, air, on_air, tuple(segs), prob)
