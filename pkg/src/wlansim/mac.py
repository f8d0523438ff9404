"""IEEE 802.11 DCF over a single all-hear cell.

Contention is resolved without per-slot events. While the medium is idle
every contending station counts down on a common slot grid that starts
DIFS after the medium went idle; the :class:`Medium` schedules one access
event at the earliest expiry. Stations whose counters expire in the same
slot transmit together and collide. When the medium goes busy, the others
are charged the slots that elapsed and freeze.

Any temporal overlap corrupts every frame involved (no capture, no EIFS).
"""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass

from .channel import FEC_OFF, ChannelProcess, FecConfig, airtime_us

DATA = "Data"
ACK = "Ack"
RTS = "Rts"
CTS = "Cts"

QUEUE_OVERFLOW = "QueueOverflow"
RETRY_EXHAUSTED = "RetryExhausted"

IDLE = 0
CONTEND = 1
TX = 2
WAIT_CTS = 3
WAIT_ACK = 4


def parse_rts_mode(mode: str) -> tuple[str, int]:
    mode = str(mode).strip().lower()
    if mode in ("always", "on", "true"):
        return "always", 0
    if mode in ("never", "off", "false"):
        return "never", 0
    if mode.startswith("threshold"):
        _, _, thr = mode.partition(":")
        try:
            return "threshold", int(thr)
        except ValueError:
            pass
    raise ValueError(f"mac.rts_mode must be always, never or threshold:<bytes>, got {mode!r}")


def rts_applies(payload_bytes: int, rts_mode: str) -> bool:
    kind, thr = parse_rts_mode(rts_mode)
    if kind == "always":
        return True
    if kind == "never":
        return False
    return payload_bytes > thr


@dataclass(frozen=True)
class MacParams:
    """DSSS 2 Mbps timing. Durations in microseconds, sizes in bytes."""

    rate: int = 2_000_000
    slot: int = 20
    sifs: int = 10
    difs: int = 50
    cw_min: int = 31
    cw_max: int = 1023
    phy_overhead: int = 192
    mac_header: int = 34
    ack_size: int = 14
    rts_size: int = 20
    cts_size: int = 14
    short_retry_limit: int = 7
    long_retry_limit: int = 4
    rts_mode: str = "never"
    queue_capacity: int = 50

    def __post_init__(self):
        for name in ("rate", "slot", "sifs", "difs", "phy_overhead", "mac_header",
                     "ack_size", "rts_size", "cts_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"mac.{name} must be positive")
        if not 0 < self.cw_min < self.cw_max:
            raise ValueError("mac.cw_min must be positive and below mac.cw_max")
        if self.short_retry_limit < 1 or self.long_retry_limit < 1:
            raise ValueError("mac retry limits must be >= 1")
        if self.queue_capacity < 1:
            raise ValueError("mac.queue_capacity must be >= 1")
        parse_rts_mode(self.rts_mode)

    def airtime(self, nbytes: int) -> int:
        return airtime_us(nbytes * 8, self.rate, self.phy_overhead)

    def data_airtime(self, payload_bytes: int) -> int:
        return self.airtime(self.mac_header + payload_bytes)


def cw_after_failures(j: int, cw_min: int = 31, cw_max: int = 1023) -> int:
    return min(cw_max, (cw_min + 1) * 2**j - 1)


@dataclass(slots=True)
class MacFrame:
    kind: str
    src: int
    dst: int
    payload_bytes: int = 0
    retry_count: int = 0
    duration_us: int = 0
    seq: int = -1
    packet: object = None
    fec: bool = False
    airtime_us: int = 0


@dataclass
class MacCounters:
    offered: int = 0
    acked: int = 0
    drop_queue: int = 0
    drop_retry: int = 0
    attempts: int = 0
    retries: int = 0
    collisions: int = 0
    rx_data: int = 0
    rx_duplicates: int = 0


class Station:
    """Per-station DCF state: interface queue, contention window, NAV, retries."""

    def __init__(self, sid: int, medium: "Medium", rng: random.Random):
        self.sid = sid
        self.medium = medium
        self.params = p = medium.params
        self.rng = rng
        self.queue: deque = deque()
        self.pending = None
        self.pending_dst = -1
        self.pending_seq = -1
        self.cw = p.cw_min
        self.backoff_slots = 0
        self.ready_at = 0
        self.nav_until = 0
        self.ssrc = 0
        self.slrc = 0
        self.state = IDLE
        self.counters = MacCounters()
        self.deliver = None  # deliver(packet) on good, non-duplicate Data
        self.on_done = None  # on_done(packet, delivered, cause)
        self._seq = 0
        self._last_rx: dict[int, int] = {}
        self._timeout = None
        self._uses_rts = False
        self._fec = False
        self._data_air = 0

    # -- queue --------------------------------------------------------------

    def enqueue(self, packet, dst: int) -> bool:
        """Hand a packet to the MAC; False if the 50-slot queue is full."""
        self.counters.offered += 1
        if self.state == IDLE:
            self._load(packet, dst)
            return True
        if len(self.queue) >= self.params.queue_capacity:
            self.counters.drop_queue += 1
            if self.on_done is not None:
                self.on_done(packet, False, QUEUE_OVERFLOW)
            return False
        self.queue.append((packet, dst))
        return True

    def queued(self) -> int:
        return len(self.queue) + (self.pending is not None)

    def _load(self, packet, dst: int) -> None:
        self.pending = packet
        self.pending_dst = dst
        self.pending_seq = self._seq
        self._seq += 1
        self.ssrc = 0
        self.slrc = 0
        self._contend()

    def _contend(self) -> None:
        self.backoff_slots = int(self.rng.random() * (self.cw + 1))
        self.state = CONTEND
        self.ready_at = self.medium.sim.queue.now
        self.medium.reschedule()

    def _next(self) -> None:
        self.pending = None
        self.pending_dst = -1
        if self.queue:
            packet, dst = self.queue.popleft()
            self._load(packet, dst)
        else:
            self.state = IDLE

    # -- exchange -----------------------------------------------------------

    def start_exchange(self, now: int) -> MacFrame:
        """Called by the medium when this station wins contention."""
        p = self.params
        m = self.medium
        size = p.mac_header + self.pending.wire_bytes
        self._uses_rts = rts_applies(self.pending.wire_bytes, p.rts_mode)
        self._fec = m.fec.policy != FEC_OFF and m.channel.fec_decision(now)
        bits = size * 8
        if self._fec:
            bits = m.fec.coded_bits(bits)
        self._data_air = airtime_us(bits, p.rate, p.phy_overhead)
        self.state = TX
        self.counters.attempts += 1
        if self._uses_rts:
            dur = 3 * p.sifs + m.t_cts + self._data_air + m.t_ack
            return MacFrame(RTS, self.sid, self.pending_dst, 0, self.ssrc, dur,
                            airtime_us=m.t_rts)
        return self._data_frame()

    def _data_frame(self) -> MacFrame:
        p = self.params
        m = self.medium
        retry = self.slrc if self._uses_rts else self.ssrc
        return MacFrame(DATA, self.sid, self.pending_dst, self.pending.wire_bytes, retry,
                        p.sifs + m.t_ack, self.pending_seq, self.pending, self._fec,
                        self._data_air)

    def tx_ended(self, frame: MacFrame, now: int) -> None:
        m = self.medium
        p = self.params
        if frame.kind == RTS:
            self.state = WAIT_CTS
            self._timeout = m.sim.queue.schedule(now + p.sifs + m.t_cts + p.slot, self._on_timeout)
        elif frame.kind == DATA:
            self.state = WAIT_ACK
            self._timeout = m.sim.queue.schedule(now + p.sifs + m.t_ack + p.slot, self._on_timeout)

    def _on_timeout(self, _=None) -> None:
        self._timeout = None
        p = self.params
        c = self.counters
        if self.state == WAIT_CTS or not self._uses_rts:
            self.ssrc += 1
            exhausted = self.ssrc >= p.short_retry_limit
        else:
            self.slrc += 1
            exhausted = self.slrc >= p.long_retry_limit
        if exhausted:
            c.drop_retry += 1
            packet = self.pending
            self.cw = p.cw_min
            self._next()
            if self.on_done is not None:
                self.on_done(packet, False, RETRY_EXHAUSTED)
            return
        c.retries += 1
        self.cw = min(2 * self.cw + 1, p.cw_max)
        self._contend()

    def receive(self, frame: MacFrame, now: int) -> None:
        """A frame addressed to this station arrived intact."""
        m = self.medium
        p = self.params
        kind = frame.kind
        if kind == DATA:
            self.counters.rx_data += 1
            if self._last_rx.get(frame.src) == frame.seq:
                self.counters.rx_duplicates += 1
            else:
                self._last_rx[frame.src] = frame.seq
                if self.deliver is not None:
                    self.deliver(frame.packet)
            m.respond(self, MacFrame(ACK, self.sid, frame.src, airtime_us=m.t_ack))
        elif kind == ACK:
            if self.state == WAIT_ACK and frame.src == self.pending_dst:
                m.sim.queue.cancel(self._timeout)
                self._timeout = None
                self.counters.acked += 1
                self.cw = p.cw_min
                packet = self.pending
                self._next()
                if self.on_done is not None:
                    self.on_done(packet, True, None)
        elif kind == RTS:
            if self.nav_until <= now:
                dur = frame.duration_us - p.sifs - m.t_cts
                m.respond(self, MacFrame(CTS, self.sid, frame.src, duration_us=dur,
                                         airtime_us=m.t_cts))
        elif kind == CTS:
            if self.state == WAIT_CTS and frame.src == self.pending_dst:
                m.sim.queue.cancel(self._timeout)
                self._timeout = None
                self.ssrc = 0
                self.state = TX
                m.respond(self, self._data_frame())

    def nav_update(self, until: int) -> None:
        if until > self.nav_until:
            self.nav_until = until


@dataclass
class FrameRecord:
    start: int
    end: int
    src: int
    dst: int
    kind: str
    ok: bool
    collided: bool = False
    fec: bool = False


class Medium:
    """Shared half-duplex channel plus the contention coordinator."""

    def __init__(
        self,
        sim,
        params: MacParams,
        channel: ChannelProcess,
        error_rng: random.Random,
        fec: FecConfig | None = None,
    ):
        self.sim = sim
        self.params = params
        self.channel = channel
        self.fec = fec or channel.fec
        self.error_rng = error_rng
        self.stations: list[Station] = []
        self.active = 0
        self.reserved = False
        self.idle_since = 0
        self._access = None
        self.t_ack = params.airtime(params.ack_size)
        self.t_cts = params.airtime(params.cts_size)
        self.t_rts = params.airtime(params.rts_size)
        self.busy_us = 0
        self._busy_start = 0
        self.collisions = 0
        self.log: list[FrameRecord] | None = None

    def add_station(self, rng: random.Random) -> Station:
        st = Station(len(self.stations), self, rng)
        self.stations.append(st)
        return st

    # -- contention ---------------------------------------------------------

    def _begin(self, st: Station, base: int) -> int:
        """First slot boundary at which ``st`` may count down: after DIFS of
        idle medium, DIFS after it became ready and DIFS after its NAV."""
        difs = self.params.difs
        b = base
        if st.ready_at + difs > b:
            b = st.ready_at + difs
        nav = st.nav_until + difs
        if nav > b:
            b = nav
        if b > base:
            slot = self.params.slot
            b = base + -(-(b - base) // slot) * slot
        return b

    def reschedule(self) -> None:
        q = self.sim.queue
        if self._access is not None:
            q.cancel(self._access)
            self._access = None
        if self.active or self.reserved:
            return
        base = self.idle_since + self.params.difs
        slot = self.params.slot
        best = -1
        for st in self.stations:
            if st.state == CONTEND:
                e = self._begin(st, base) + st.backoff_slots * slot
                if best < 0 or e < best:
                    best = e
        if best >= 0:
            self._access = q.schedule(best, self._on_access)

    def _on_access(self, _=None) -> None:
        self._access = None
        now = self.sim.queue.now
        base = self.idle_since + self.params.difs
        slot = self.params.slot
        winners = []
        for st in self.stations:
            if st.state != CONTEND:
                continue
            b = self._begin(st, base)
            if b + st.backoff_slots * slot == now:
                winners.append(st)
            elif b <= now:
                st.backoff_slots -= (now - b) // slot
        if not winners:
            return
        frames = [w.start_exchange(now) for w in winners]
        if len(frames) > 1:
            self.collisions += 1
            for w in winners:
                w.counters.collisions += 1
            for w, f in zip(winners, frames):
                self._start(w, f, now, ok=False, collided=True)
        else:
            self._transmit(winners[0], frames[0], now)

    # -- transmission -------------------------------------------------------

    def respond(self, st: Station, frame: MacFrame) -> None:
        """Send ``frame`` SIFS after the current frame, bypassing contention."""
        self.reserved = True
        self.sim.queue.schedule(self.sim.queue.now + self.params.sifs, self._send_reserved,
                                (st, frame))

    def _send_reserved(self, arg) -> None:
        self.reserved = False
        st, frame = arg
        self._transmit(st, frame, self.sim.queue.now)

    def _transmit(self, st: Station, frame: MacFrame, now: int) -> None:
        if self.active:
            raise RuntimeError("transmission started on a busy medium")
        p = self.params
        if frame.kind == DATA:
            bits = (p.mac_header + frame.payload_bytes) * 8
        elif frame.kind == ACK:
            bits = p.ack_size * 8
        elif frame.kind == RTS:
            bits = p.rts_size * 8
        else:
            bits = p.cts_size * 8
        out = self.channel.transmit(bits, now, p.rate, frame.fec, self.error_rng, p.phy_overhead)
        if out.airtime_us != frame.airtime_us:
            raise RuntimeError(f"{frame.kind} airtime mismatch {out.airtime_us} != {frame.airtime_us}")
        self._start(st, frame, now, ok=not out.corrupted, collided=False)

    def _start(self, st: Station, frame: MacFrame, now: int, ok: bool, collided: bool) -> None:
        if self._access is not None:
            self.sim.queue.cancel(self._access)
            self._access = None
        if not self.active:
            self._busy_start = now
        self.active += 1
        end = now + frame.airtime_us
        if self.log is not None:
            self.log.append(FrameRecord(now, end, st.sid, frame.dst, frame.kind, ok, collided,
                                        frame.fec))
        self.sim.queue.schedule(end, self._end, (st, frame, ok, now))

    def _end(self, arg) -> None:
        st, frame, ok, _start = arg
        now = self.sim.queue.now
        self.active -= 1
        if not self.active:
            self.busy_us += now - self._busy_start
            self.idle_since = now
        if ok:
            if frame.duration_us:
                until = now + frame.duration_us
                for o in self.stations:
                    if o is not st and o.sid != frame.dst:
                        o.nav_update(until)
            self.stations[frame.dst].receive(frame, now)
        st.tx_ended(frame, now)
        if not self.active and not self.reserved:
            self.reschedule()
