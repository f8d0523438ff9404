"""Packet-counted TCP Reno and UDP endpoints.

Sequence numbers count packets, not bytes. A connection object holds both
the sender and the receiver half; the topology supplies ``data_out`` and
``ack_out`` to route segments between the two end nodes.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from math import floor, inf

TCP_IP_HEADER = 40  # 20 TCP + 20 IP
UDP_IP_HEADER = 28  # 8 UDP + 20 IP

TCP_DATA = 0
TCP_ACK = 1
UDP = 2
RAW = 3


class Packet:
    __slots__ = ("flow", "kind", "seq", "wire_bytes", "payload_bytes", "created_at", "dst",
                 "hop_ok")

    def __init__(self, flow, kind, seq, wire_bytes, payload_bytes, created_at, dst):
        self.flow = flow
        self.kind = kind
        self.seq = seq
        self.wire_bytes = wire_bytes
        self.payload_bytes = payload_bytes
        self.created_at = created_at
        self.dst = dst
        self.hop_ok = False

    def __repr__(self):
        return f"Packet(kind={self.kind}, seq={self.seq}, bytes={self.wire_bytes}, dst={self.dst})"


class TcpProtocolError(RuntimeError):
    pass


@dataclass(frozen=True)
class TcpParams:
    rto_init: float = 1.0
    rto_min: float = 0.2
    rto_max: float = 60.0
    ssthresh_init: float = 64.0
    dupack_threshold: int = 3


class TcpConnection:
    """Reno sender and cumulative-ACK receiver for one direction of data.

    The sender may have at most ``min(floor(cwnd), window)`` packets in
    flight. No delayed ACKs, no SACK, no window inflation during fast
    recovery.
    """

    def __init__(self, sim, cid, mss: int, window: int, src: int, dst: int,
                 params: TcpParams | None = None):
        if mss <= 0 or window < 1:
            raise ValueError("tcp needs mss > 0 and window >= 1")
        self.sim = sim
        self.cid = cid
        self.mss = mss
        self.window = window
        self.src = src
        self.dst = dst
        self.params = params or TcpParams()
        self.data_out = None
        self.ack_out = None
        self.on_deliver = None  # on_deliver(conn, npackets)
        # sender
        self.cwnd = 1.0
        self.ssthresh = float(self.params.ssthresh_init)
        self.snd_una = 0
        self.snd_nxt = 0
        self.snd_max = 0
        self.dup_acks = 0
        self.srtt: float | None = None
        self.rttvar: float | None = None
        self.rto = self.params.rto_init
        self.timer = None
        self.available = 0
        self._sent_at: dict[int, int] = {}
        self._retx: set[int] = set()
        # receiver
        self.rcv_nxt = 0
        self._ooo: set[int] = set()
        self._messages: deque = deque()
        # counters
        self.segments_sent = 0
        self.retransmissions = 0
        self.timeouts = 0
        self.fast_retransmits = 0
        self.dup_data = 0

    # -- application side -------------------------------------------------

    def write(self, npackets, on_complete=None) -> None:
        """Queue ``npackets`` more packets; ``on_complete`` fires at the receiver
        once all of them have been delivered in order."""
        self.available += npackets
        if on_complete is not None:
            self._messages.append((self.available, on_complete))
        self.maybe_send()

    def write_forever(self) -> None:
        self.available = inf
        self.maybe_send()

    @property
    def in_flight(self) -> int:
        return self.snd_nxt - self.snd_una

    @property
    def effective_window(self) -> int:
        w = floor(self.cwnd)
        return w if w < self.window else self.window

    # -- sender -------------------------------------------------------------

    def maybe_send(self) -> None:
        win = self.effective_window
        while self.snd_nxt - self.snd_una < win and self.snd_nxt < self.available:
            self._send(self.snd_nxt)
            self.snd_nxt += 1
            if self.snd_nxt > self.snd_max:
                self.snd_max = self.snd_nxt

    def _send(self, seq: int) -> None:
        now = self.sim.queue.now
        self.segments_sent += 1
        if seq < self.snd_max:
            self.retransmissions += 1
            self._retx.add(seq)
        else:
            self._sent_at[seq] = now
        if self.timer is None:
            self._arm()
        self.data_out(Packet(self, TCP_DATA, seq, self.mss + TCP_IP_HEADER, self.mss, now,
                             self.dst))

    def _arm(self) -> None:
        q = self.sim.queue
        if self.timer is not None:
            q.cancel(self.timer)
        self.timer = q.schedule(q.now + int(round(self.rto * 1e6)), self.on_timeout)

    def _disarm(self) -> None:
        if self.timer is not None:
            self.sim.queue.cancel(self.timer)
            self.timer = None

    def rtt_update(self, sample: float) -> None:
        """Jacobson/Karels estimator; ``sample`` in seconds."""
        if not sample > 0:
            raise ValueError(f"rtt sample must be positive, got {sample}")
        if self.srtt is None:
            self.srtt = sample
            self.rttvar = sample / 2
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - sample)
            self.srtt = 0.875 * self.srtt + 0.125 * sample
        p = self.params
        self.rto = min(max(self.srtt + 4 * self.rttvar, p.rto_min), p.rto_max)

    def on_ack(self, ack_no: int) -> None:
        if ack_no > self.snd_max:
            raise TcpProtocolError(f"conn {self.cid}: ack {ack_no} beyond highest sent {self.snd_max}")
        if ack_no > self.snd_una:
            last = ack_no - 1
            sent_at = self._sent_at.get(last)
            if sent_at is not None and last not in self._retx:
                self.rtt_update((self.sim.queue.now - sent_at) / 1e6)
            for s in range(self.snd_una, ack_no):
                self._sent_at.pop(s, None)
                self._retx.discard(s)
            self.snd_una = ack_no
            if self.snd_nxt < ack_no:
                self.snd_nxt = ack_no
            self.dup_acks = 0
            if self.cwnd < self.ssthresh:
                self.cwnd += 1.0
            else:
                self.cwnd += 1.0 / floor(self.cwnd)
            if self.cwnd > self.window:
                self.cwnd = float(self.window)
            if self.snd_una < self.snd_max:
                self._arm()
            else:
                self._disarm()
            self.maybe_send()
        elif ack_no == self.snd_una and self.snd_una < self.snd_max:
            self.dup_acks += 1
            if self.dup_acks == self.params.dupack_threshold:
                self.fast_retransmits += 1
                self.ssthresh = max(2.0, floor(self.cwnd) / 2)
                self.cwnd = self.ssthresh
                self._send(self.snd_una)
                self._arm()

    def on_timeout(self, _=None) -> None:
        self.timer = None
        if self.snd_una >= self.snd_max:
            return
        self.timeouts += 1
        self.ssthresh = max(2.0, floor(self.cwnd) / 2)
        self.cwnd = 1.0
        self.dup_acks = 0
        self.rto = min(self.rto * 2, self.params.rto_max)
        self.snd_nxt = self.snd_una
        self.maybe_send()

    # -- receiver -----------------------------------------------------------

    def receive_data(self, seq: int) -> None:
        n = 0
        if seq == self.rcv_nxt:
            self.rcv_nxt += 1
            n = 1
            ooo = self._ooo
            while self.rcv_nxt in ooo:
                ooo.remove(self.rcv_nxt)
                self.rcv_nxt += 1
                n += 1
        elif seq > self.rcv_nxt:
            self._ooo.add(seq)
        else:
            self.dup_data += 1
        self.ack_out(Packet(self, TCP_ACK, self.rcv_nxt, TCP_IP_HEADER, 0, self.sim.queue.now,
                            self.src))
        if n:
            if self.on_deliver is not None:
                self.on_deliver(self, n)
            msgs = self._messages
            while msgs and msgs[0][0] <= self.rcv_nxt:
                msgs.popleft()[1]()

    # -- network side -------------------------------------------------------

    def receive(self, packet: Packet) -> None:
        if packet.kind == TCP_DATA:
            self.receive_data(packet.seq)
        else:
            self.on_ack(packet.seq)

    def mac_done(self, packet, delivered, cause) -> None:
        pass


LOST_RETRY = "LostRetry"
LOST_QUEUE = "LostQueue"
LATE = "LateDeadline"
DELIVERED = "Delivered"


class UdpFlow:
    """One-way datagram flow with deadline-aware outcome accounting.

    Only datagrams created at or after ``warmup_us`` are counted.
    """

    def __init__(self, sim, fid, payload_bytes: int, src: int, dst: int,
                 deadline_us: int = 500_000, warmup_us: int = 0):
        if payload_bytes <= 0:
            raise ValueError("udp payload must be positive")
        self.sim = sim
        self.fid = fid
        self.payload_bytes = payload_bytes
        self.src = src
        self.dst = dst
        self.deadline_us = deadline_us
        self.warmup_us = warmup_us
        self.out = None
        self.sent = 0
        self.delivered = 0
        self.late = 0
        self.lost_retry = 0
        self.lost_queue = 0
        self.delays: list[float] = []

    @property
    def wire_bytes(self) -> int:
        return self.payload_bytes + UDP_IP_HEADER

    def send(self) -> Packet:
        now = self.sim.queue.now
        pkt = Packet(self, UDP, self.sent, self.wire_bytes, self.payload_bytes, now, self.dst)
        if now >= self.warmup_us:
            self.sent += 1
        self.out(pkt)
        return pkt

    def receive(self, packet: Packet) -> None:
        if packet.created_at < self.warmup_us:
            return
        delay = self.sim.queue.now - packet.created_at
        if delay > self.deadline_us:
            self.late += 1
        else:
            self.delivered += 1
            self.delays.append(delay / 1e6)

    def mac_done(self, packet: Packet, delivered: bool, cause) -> None:
        if delivered or packet.hop_ok or packet.created_at < self.warmup_us:
            return
        if cause == "QueueOverflow":
            self.lost_queue += 1
        else:
            self.lost_retry += 1

    @property
    def resolved(self) -> int:
        return self.delivered + self.late + self.lost_retry + self.lost_queue

    @property
    def in_flight(self) -> int:
        return self.sent - self.resolved
