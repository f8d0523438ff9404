"""Workload generators (bulk, web, voice, saturated MAC source) and metrics."""
from __future__ import annotations

import random
from dataclasses import dataclass
from math import ceil

from .engine import exp_draw, us
from .transport import (
    DELIVERED, LATE, LOST_QUEUE, LOST_RETRY, RAW, Packet, TcpConnection, UdpFlow,
)

UPLINK = "uplink"
DOWNLINK = "downlink"


def jain_index(values) -> float:
    """(sum x)^2 / (n sum x^2); 1.0 when every value is equal."""
    xs = [float(v) for v in values]
    if not xs:
        raise ValueError("jain index of an empty set")
    sq = sum(x * x for x in xs)
    if sq == 0.0:
        return 1.0
    s = sum(xs)
    return s * s / (len(xs) * sq)


def jitter(delays) -> float | None:
    """Mean absolute difference of consecutive delays; None below two samples."""
    if len(delays) < 2:
        return None
    return sum(abs(b - a) for a, b in zip(delays, delays[1:])) / (len(delays) - 1)


def classify_datagram(delay: float | None = None, drop_cause: str | None = None,
                      deadline: float = 0.5) -> str:
    """Terminal outcome of a voice datagram: delivered in time, late, or dropped."""
    if drop_cause is not None:
        return LOST_QUEUE if drop_cause == "QueueOverflow" else LOST_RETRY
    if delay is None:
        raise ValueError("need either a delay or a drop cause")
    return LATE if delay > deadline else DELIVERED


class BulkSource:
    """A TCP connection that always has data to send."""

    def __init__(self, conn: TcpConnection, direction: str = UPLINK):
        self.conn = conn
        self.direction = direction

    def start(self) -> None:
        self.conn.write_forever()


@dataclass(frozen=True)
class WebParams:
    think_mean: float = 10.0
    request_bytes: int = 350
    response_mean: float = 10_000.0
    response_shape: float = 1.2
    response_cap: float = 500_000.0

    def __post_init__(self):
        if self.think_mean <= 0 or self.request_bytes <= 0:
            raise ValueError("web think time and request size must be positive")
        if self.response_shape <= 1.0:
            raise ValueError("web.response_shape must exceed 1 for a finite mean")
        if self.response_mean <= 0 or self.response_cap <= 0:
            raise ValueError("web response sizes must be positive")

    def draw_response(self, rng: random.Random) -> float:
        a = self.response_shape
        xm = self.response_mean * (a - 1.0) / a
        size = xm / (1.0 - rng.random()) ** (1.0 / a)
        return min(size, self.response_cap)


THINKING = "Thinking"
REQUESTING = "Requesting"
RECEIVING = "Receiving"


class WebSession:
    """Think, send a request upstream, wait for the whole response, repeat.

    ``up`` carries requests client->server, ``down`` carries responses.
    """

    def __init__(self, sim, sid, up: TcpConnection, down: TcpConnection, params: WebParams,
                 rng: random.Random, metrics: "MetricsStore"):
        self.sim = sim
        self.sid = sid
        self.up = up
        self.down = down
        self.params = params
        self.rng = rng
        self.metrics = metrics
        self.state = THINKING
        self.request_started_at = 0
        self.think_times: list[float] = []
        self.completed = 0

    def start(self) -> None:
        self._think()

    def _think(self) -> None:
        self.state = THINKING
        d = exp_draw(self.rng, self.params.think_mean)
        self.think_times.append(d)
        q = self.sim.queue
        q.schedule(q.now + us(d), self._request)

    def _request(self, _=None) -> None:
        self.state = REQUESTING
        self.request_started_at = self.sim.queue.now
        self.metrics.request_started(self)
        self.up.write(ceil(self.params.request_bytes / self.up.mss), self._serve)

    def _serve(self) -> None:
        self.state = RECEIVING
        size = self.params.draw_response(self.rng)
        self.down.write(max(1, ceil(size / self.down.mss)), self._done)

    def _done(self) -> None:
        self.completed += 1
        self.metrics.response_done(self, self.sim.queue.now - self.request_started_at)
        self._think()


TALK = "Talk"
SILENCE = "Silence"


class VoiceSource:
    """On/off voice: exponential talk spurts and silences, constant bit rate in talk.

    A packet is emitted each time ``packet_bytes`` of codec output has been
    accumulated; a partly filled packet carries over across a silence, so
    the long-run rate is exactly duty_cycle * codec_rate.
    """

    def __init__(self, sim, flow: UdpFlow, rng: random.Random, talk_mean: float = 1.0,
                 silence_mean: float = 1.35, codec_rate: int = 32_000):
        self.sim = sim
        self.flow = flow
        self.rng = rng
        self.talk_mean = talk_mean
        self.silence_mean = silence_mean
        self.codec_rate = codec_rate
        self.gap_us = us(flow.payload_bytes * 8 / codec_rate)
        self.state = SILENCE
        self.talk_end = 0
        self.fill = 0
        self.talk_us = 0

    @property
    def duty_cycle(self) -> float:
        return self.talk_mean / (self.talk_mean + self.silence_mean)

    def start(self) -> None:
        self.fill = 1 + int(self.rng.random() * self.gap_us)
        if self.rng.random() < self.duty_cycle:
            self._talk()
        else:
            self._silence()

    def _talk(self, _=None) -> None:
        q = self.sim.queue
        self.state = TALK
        d = us(exp_draw(self.rng, self.talk_mean))
        self.talk_us += d
        self.talk_end = q.now + d
        self._arm(q.now + self.fill)

    def _arm(self, at: int) -> None:
        q = self.sim.queue
        if at <= self.talk_end:
            q.schedule(at, self._emit)
        else:
            self.fill = at - self.talk_end
            q.schedule(self.talk_end, self._silence)

    def _emit(self, _=None) -> None:
        self.flow.send()
        self._arm(self.sim.queue.now + self.gap_us)

    def _silence(self, _=None) -> None:
        q = self.sim.queue
        self.state = SILENCE
        q.schedule(q.now + us(exp_draw(self.rng, self.silence_mean)), self._talk)


class SaturatedSource:
    """Keeps a station's MAC queue full of fixed-size MSDUs (no transport header)."""

    def __init__(self, sim, fid, payload_bytes: int, src: int, dst: int, warmup_us: int = 0):
        self.sim = sim
        self.fid = fid
        self.payload_bytes = payload_bytes
        self.src = src
        self.dst = dst
        self.warmup_us = warmup_us
        self.out = None
        self.on_deliver = None
        self.sent = 0
        self.acked = 0
        self.dropped = 0
        self.received = 0

    def start(self, backlog: int) -> None:
        for _ in range(backlog):
            self._push()

    def _push(self) -> None:
        self.sent += 1
        self.out(Packet(self, RAW, self.sent, self.payload_bytes, self.payload_bytes,
                        self.sim.queue.now, self.dst))

    def receive(self, packet: Packet) -> None:
        self.received += 1
        if self.on_deliver is not None:
            self.on_deliver(self, 1)

    def mac_done(self, packet, delivered, cause) -> None:
        if delivered:
            self.acked += 1
        else:
            self.dropped += 1
            if cause == "QueueOverflow":
                return
        self._push()


class MetricsStore:
    """Post-warm-up statistics for one run."""

    def __init__(self, warmup_us: int, end_us: int):
        if end_us <= warmup_us:
            raise ValueError("measurement window is empty")
        self.warmup_us = warmup_us
        self.end_us = end_us
        self.node_bits: dict[int, int] = {}
        self.response_times: list[float] = []
        self.requests_started = 0
        self._open: dict[object, int] = {}
        self.udp_flows: list[UdpFlow] = []
        self.summary: dict[str, float] = {}

    @property
    def duration(self) -> float:
        return (self.end_us - self.warmup_us) / 1e6

    def track_node(self, node: int) -> None:
        self.node_bits.setdefault(node, 0)

    def delivered(self, node: int, bits: int, now: int) -> None:
        if now >= self.warmup_us:
            self.node_bits[node] = self.node_bits.get(node, 0) + bits

    def request_started(self, session) -> None:
        if session.request_started_at >= self.warmup_us:
            self.requests_started += 1
            self._open[session.sid] = session.request_started_at

    def response_done(self, session, elapsed_us: int) -> None:
        if self._open.pop(session.sid, None) is not None:
            self.response_times.append(elapsed_us / 1e6)

    @property
    def unfinished_requests(self) -> int:
        return len(self._open)

    def throughput_report(self) -> tuple[dict[int, float], float]:
        """Per-node and total goodput in Kbps over the measurement window."""
        d = self.duration
        if d <= 0:
            raise ValueError("zero-duration run")
        per = {n: b / d / 1000.0 for n, b in sorted(self.node_bits.items())}
        return per, sum(per.values())

    def jain(self) -> float:
        per, _ = self.throughput_report()
        return jain_index(per.values()) if per else 1.0

    def voice_summary(self) -> dict[str, float]:
        sent = sum(f.sent for f in self.udp_flows)
        retry = sum(f.lost_retry for f in self.udp_flows)
        queue = sum(f.lost_queue for f in self.udp_flows)
        late = sum(f.late for f in self.udp_flows)
        delivered = sum(f.delivered for f in self.udp_flows)
        jit = [j for j in (jitter(f.delays) for f in self.udp_flows) if j is not None]
        delays = [x for f in self.udp_flows for x in f.delays]
        out = {
            "voice_sent": sent,
            "voice_delivered": delivered,
            "voice_lost_retry": retry,
            "voice_lost_queue": queue,
            "voice_late": late,
            "voice_in_flight": sum(f.in_flight for f in self.udp_flows),
            "voice_loss": (retry + queue + late) / sent if sent else 0.0,
            "voice_loss_retry": retry / sent if sent else 0.0,
            "voice_loss_queue": queue / sent if sent else 0.0,
            "voice_loss_late": late / sent if sent else 0.0,
        }
        if delays:
            out["voice_delay_mean"] = sum(delays) / len(delays)
        if jit:
            out["voice_jitter_mean"] = sum(jit) / len(jit)
        return out
