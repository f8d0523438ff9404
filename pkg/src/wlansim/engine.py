"""Discrete-event core.

Time is an integer count of microseconds (802.11 slot and SIFS values are
exact in that unit). Events are ordered by ``(at, seq)``, where ``seq`` is
issued per ``schedule`` call, so ties dispatch in schedule order.
"""
from __future__ import annotations

import random
from math import log
from typing import Any, Callable

from ._kernels import EventQueue

US_PER_S = 1_000_000


def us(seconds: float) -> int:
    """Seconds -> integer microseconds (rounded)."""
    return int(round(seconds * US_PER_S))


def sec(t: int) -> float:
    return t / US_PER_S


class RngStreams:
    """Named, independent random streams derived from one master seed.

    Each name gets its own ``random.Random`` seeded with ``"<seed>/<name>"``
    (string seeds are hashed with SHA-512, independent of PYTHONHASHSEED),
    so drawing from one stream never shifts another.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._streams: dict[str, random.Random] = {}

    def get(self, name: str) -> random.Random:
        rng = self._streams.get(name)
        if rng is None:
            rng = random.Random(f"{self.seed}/{name}")
            self._streams[name] = rng
        return rng

    __getitem__ = get


def exp_from_uniform(u: float, mean: float) -> float:
    """Inverse-CDF exponential sample for ``u`` in (0, 1]."""
    return -mean * log(u)


def exp_draw(rng: random.Random, mean: float) -> float:
    """Exponential sample with the given mean (same unit as ``mean``)."""
    if not mean > 0:
        raise ValueError(f"exponential mean must be positive, got {mean}")
    return exp_from_uniform(1.0 - rng.random(), mean)


class Simulator:
    """Clock + event queue + RNG streams for one run.

    Handlers are plain callables taking a single payload argument.
    """

    def __init__(self, seed: int = 0):
        self.queue = EventQueue()
        self.rng = RngStreams(seed)

    @property
    def now(self) -> int:
        return self.queue.now

    def schedule(self, at: int, fn: Callable[[Any], None], payload: Any = None):
        return self.queue.schedule(at, fn, payload)

    def schedule_in(self, delay: int, fn: Callable[[Any], None], payload: Any = None):
        return self.queue.schedule(self.queue.now + delay, fn, payload)

    def cancel(self, handle) -> None:
        if handle is not None:
            self.queue.cancel(handle)

    def run_until(self, end: int) -> int:
        """Dispatch every event with ``at <= end``; leaves the clock at ``end``."""
        return self.queue.run_until(end)

    def record_trace(self) -> list:
        self.queue.trace = []
        return self.queue.trace
