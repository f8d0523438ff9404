# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation hot paths: event heap and frame-error kernels.

Same interface and bit-identical results as ``_core_py``.
"""
from libc.math cimport exp, expm1, log, log1p

BACKEND = "cython"


cdef class Event:
    cdef public long long at
    cdef public long long seq
    cdef public object fn
    cdef public object arg

    def __repr__(self):
        return f"Event(at={self.at}, seq={self.seq}, pending={self.fn is not None})"


cdef inline bint _less(Event a, Event b):
    return a.at < b.at or (a.at == b.at and a.seq < b.seq)


cdef class EventQueue:
    """Binary heap of :class:`Event` ordered by ``(at, seq)``, lazy cancellation."""

    cdef list _heap
    cdef long long _seq
    cdef public long long now
    cdef public long long dispatched
    cdef public object trace

    def __init__(self):
        self._heap = []
        self._seq = 0
        self.now = 0
        self.dispatched = 0
        self.trace = None

    def __len__(self):
        return len(self._heap)

    cdef void _push(self, Event ev):
        cdef list h = self._heap
        cdef Py_ssize_t i = len(h)
        cdef Py_ssize_t parent
        cdef Event p
        h.append(ev)
        while i > 0:
            parent = (i - 1) >> 1
            p = <Event>h[parent]
            if _less(ev, p):
                h[i] = p
                i = parent
            else:
                break
        h[i] = ev

    cdef Event _pop(self):
        cdef list h = self._heap
        cdef Event top = <Event>h[0]
        cdef Event last = <Event>h.pop()
        cdef Py_ssize_t n = len(h)
        cdef Py_ssize_t i = 0
        cdef Py_ssize_t c
        cdef Event ce, re
        if n == 0:
            return top
        while True:
            c = 2 * i + 1
            if c >= n:
                break
            ce = <Event>h[c]
            if c + 1 < n:
                re = <Event>h[c + 1]
                if _less(re, ce):
                    c += 1
                    ce = re
            if _less(ce, last):
                h[i] = ce
                i = c
            else:
                break
        h[i] = last
        return top

    def schedule(self, long long at, fn, arg=None):
        if at < self.now:
            raise ValueError(f"cannot schedule at t={at}us, clock is at {self.now}us")
        cdef Event ev = Event.__new__(Event)
        ev.at = at
        ev.seq = self._seq
        ev.fn = fn
        ev.arg = arg
        self._seq += 1
        self._push(ev)
        return ev

    @staticmethod
    def cancel(Event ev):
        ev.fn = None

    @staticmethod
    def is_pending(Event ev):
        return ev.fn is not None

    @staticmethod
    def time_of(Event ev):
        return ev.at

    def peek_time(self):
        while self._heap and (<Event>self._heap[0]).fn is None:
            self._pop()
        return (<Event>self._heap[0]).at if self._heap else None

    def run_until(self, long long end):
        cdef list heap = self._heap
        cdef object trace = self.trace
        cdef long long n = 0
        cdef Event ev
        cdef object fn
        while heap and (<Event>heap[0]).at <= end:
            ev = self._pop()
            fn = ev.fn
            if fn is None:
                continue
            ev.fn = None
            self.now = ev.at
            n += 1
            if trace is not None:
                trace.append((ev.at, ev.seq, getattr(fn, "__qualname__", repr(fn))))
            fn(ev.arg)
        if end > self.now:
            self.now = end
        self.dispatched += n
        return n


# -- error kernels ---------------------------------------------------------

cdef list _logfact = [0.0]


cdef double _lf(Py_ssize_t n):
    cdef list lf = _logfact
    while len(lf) <= n:
        lf.append(<double>lf[len(lf) - 1] + log(<double>len(lf)))
    return lf[n]


cdef list _pmf(Py_ssize_t n, double p, Py_ssize_t lo, Py_ssize_t hi):
    cdef double lp = log(p)
    cdef double lq = log1p(-p)
    cdef double c = _lf(n)
    cdef list lf = _logfact
    cdef list out = []
    cdef Py_ssize_t j
    for j in range(lo, hi + 1):
        out.append(exp(c - <double>lf[j] - <double>lf[n - j] + j * lp + (n - j) * lq))
    return out


cpdef double binom_tail(Py_ssize_t n, Py_ssize_t t, double p):
    """P[X > t] for X ~ Binomial(n, p), summed term by term in log space."""
    if t < 0:
        return 1.0
    if t >= n or p <= 0.0:
        return 0.0
    if p >= 1.0:
        return 1.0
    cdef double acc = 0.0
    cdef double x
    for x in _pmf(n, p, t + 1, n):
        acc += x
    return acc if acc < 1.0 else 1.0


cdef dict _tail_cache = {}


cpdef double mixed_block_tail(Py_ssize_t a, double pa, Py_ssize_t b, double pb, Py_ssize_t t):
    """P[X + Y > t] for independent X ~ Bin(a, pa), Y ~ Bin(b, pb)."""
    key = (a, pa, b, pb, t)
    hit = _tail_cache.get(key)
    if hit is not None:
        return hit
    cdef double val, acc
    cdef Py_ssize_t m, k, i
    cdef list head, sf, pmf_y
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
        if pb >= 1.0:
            sf = [1.0 if k < b else 0.0 for k in range(t + 1)]
        else:
            pmf_y = _pmf(b, pb, 0, b)
            sf = [0.0] * (t + 1)
            acc = 0.0
            for k in range(b, -1, -1):
                if k <= t:
                    sf[k] = acc
                acc += <double>pmf_y[k]
        for i in range(m + 1):
            val += <double>head[i] * <double>sf[t - i]
        val = min(val, 1.0)
    if len(_tail_cache) > 65536:
        _tail_cache.clear()
    _tail_cache[key] = val
    return val


cpdef double frame_error_prob(segments, double p_good, double p_bad):
    """1 - prod (1 - p_state)^bits over ``(state, bits)`` segments."""
    cdef double ls = 0.0
    cdef double p
    cdef long long bits
    for state, b in segments:
        bits = b
        p = p_bad if state else p_good
        if p >= 1.0 and bits > 0:
            return 1.0
        if p > 0.0:
            ls += bits * log1p(-p)
    return -expm1(ls)


cpdef double fec_frame_error_prob(segments, blocks, double ps_good, double ps_bad):
    """Probability that any code block of the frame is undecodable."""
    cdef double ls = 0.0
    cdef double f
    cdef Py_ssize_t si = 0
    cdef Py_ssize_t nseg = len(segments)
    cdef long long seg_state = 0, seg_left = 0, need, a, b, take, size, t
    if nseg:
        seg_state, seg_left = segments[0]
    for sz, tt in blocks:
        size = sz
        t = tt
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
