"""Pure-Python implementation of the simulation hot paths.

Mirrors ``_core.pyx`` function for function; ``wlansim._kernels`` picks one
at import. Both must produce bit-identical results.
"""
from heapq import heappop, heappush
from math import exp, expm1, log, log1p

BACKEND = "python"


class EventQueue:
    """Time-ordered event heap keyed by ``(at, seq)`` with lazy cancellation.

    Handles are the heap entries themselves; cancelling clears the callback
    slot so the entry is skipped when popped.
    """

    __slots__ = ("_heap", "_seq", "now", "dispatched", "trace")

    def __init__(self):
        self._heap = []
        self._seq = 0
        self.now = 0
        self.dispatched = 0
        self.trace = None

    def __len__(self):
        return len(self._heap)

    def schedule(self, at, fn, arg=None):
        if at < self.now:
            raise ValueError(f"cannot schedule at t={at}us, clock is at {self.now}us")
        ev = [at, self._seq, fn, arg]
        self._seq += 1
        heappush(self._heap, ev)
        return ev

    @staticmethod
    def cancel(ev):
        ev[2] = None

    @staticmethod
    def is_pending(ev):
        return ev[2] is not None

    @staticmethod
    def time_of(ev):
        return ev[0]

    def peek_time(self):
        heap = self._heap
        while heap and heap[0][2] is None:
            heappop(heap)
        return heap[0][0] if heap else None

    def run_until(self, end):
        heap = self._heap
        trace = self.trace
        n = 0
        while heap and heap[0][0] <= end:
            ev = heappop(heap)
            fn = ev[2]
            if fn is None:
                continue
            ev[2] = None
            self.now = ev[0]
            n += 1
            if trace is not None:
                trace.append((ev[0], ev[1], getattr(fn, "__qualname__", repr(fn))))
            fn(ev[3])
        if end > self.now:
            self.now = end
        self.dispatched += n
        return n


_logfact = [0.0]


def _lf(n):
    lf = _logfact
    while len(lf) <= n:
        lf.append(lf[-1] + log(len(lf)))
    return lf[n]


def _pmf(n, p, lo, hi):
    """pmf(lo..hi) of Binomial(n, p) for 0 < p < 1."""
    lp = log(p)
    lq = log1p(-p)
    _lf(n)
    lf = _logfact
    c = lf[n]
    return [exp(c - lf[j] - lf[n - j] + j * lp + (n - j) * lq) for j in range(lo, hi + 1)]


def binom_tail(n, t, p):
    """P[X > t] for X ~ Binomial(n, p), summed term by term in log space."""
    if t < 0:
        return 1.0
    if t >= n or p <= 0.0:
        return 0.0
    if p >= 1.0:
        return 1.0
    acc = 0.0
    for x in _pmf(n, p, t + 1, n):
        acc += x
    return acc if acc < 1.0 else 1.0


_tail_cache = {}


def mixed_block_tail(a, pa, b, pb, t):
    """P[X + Y > t] for independent X ~ Bin(a, pa), Y ~ Bin(b, pb).

    Written as P[X > t] + sum_{i<=t} P[X = i] P[Y > t - i]; every term is
    nonnegative so there is no cancellation for tiny tails.
    """
    key = (a, pa, b, pb, t)
    hit = _tail_cache.get(key)
    if hit is not None:
        return hit
    if b == 0 or pb <= 0.0:
        val = binom_tail(a, t, pa)
    elif a == 0 or pa <= 0.0:
        val = binom_tail(b, t, pb)
    elif t < 0:
        val = 1.0
    else:
        val = binom_tail(a, t, pa)
        m = a if a < t else t
        if pa >= 1.0:
            head = [0.0] * (m + 1)
            if a <= t:
                head[a] = 1.0
        else:
            head = _pmf(a, pa, 0, m)
        # sf[k] = P[Y > k] for k = 0..t, by suffix sums over the Y pmf
        if pb >= 1.0:
            sf = [1.0 if k < b else 0.0 for k in range(t + 1)]
        else:
            pmf_y = _pmf(b, pb, 0, b)
            sf = [0.0] * (t + 1)
            acc = 0.0
            for k in range(b, -1, -1):
                if k <= t:
                    sf[k] = acc
                acc += pmf_y[k]
        for i in range(m + 1):
            val += head[i] * sf[t - i]
        val = min(val, 1.0)
    if len(_tail_cache) > 65536:
        _tail_cache.clear()
    _tail_cache[key] = val
    return val


def frame_error_prob(segments, p_good, p_bad):
    """1 - prod (1 - p_state)^bits over ``(state, bits)`` segments."""
    ls = 0.0
    for state, bits in segments:
        p = p_bad if state else p_good
        if p >= 1.0 and bits > 0:
            return 1.0
        if p > 0.0:
            ls += bits * log1p(-p)
    return -expm1(ls)


def fec_frame_error_prob(segments, blocks, ps_good, ps_bad):
    """Probability that any code block of the frame is undecodable.

    ``segments`` are ``(state, symbols)`` runs in transmission order and
    ``blocks`` are ``(size, correctable)`` pairs covering the same symbols.
    """
    ls = 0.0
    si = 0
    nseg = len(segments)
    seg_state, seg_left = segments[0] if nseg else (0, 0)
    for size, t in blocks:
        need = size
        a = 0
        b = 0
        while need > 0 and si < nseg:
            take = seg_left if seg_left < need else need
            if seg_state:
                b += take
            else:
                a += take
            need -= take
            seg_left -= take
            if seg_left == 0:
                si += 1
                if si < nseg:
                    seg_state, seg_left = segments[si]
        f = mixed_block_tail(a, ps_good, b, ps_bad, t)
        if f >= 1.0:
            return 1.0
        ls += log1p(-f)
    return -expm1(ls)
