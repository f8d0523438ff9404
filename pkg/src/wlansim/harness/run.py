"""Topology assembly and single runs.

Station 0 is the base station, stations 1..n are mobiles, and the wired
host sits behind the base station on a fixed-rate FIFO link (one per
direction) with a constant propagation delay.
"""
from __future__ import annotations

from collections import deque

from ..channel import ChannelProcess
from ..engine import Simulator, us
from ..mac import Medium
from ..traffic import (
    DOWNLINK, UPLINK, BulkSource, MetricsStore, SaturatedSource, VoiceSource, WebSession,
)
from ..transport import TcpConnection, UdpFlow
from .config import Scenario

BS = 0
HOST = -1


class InvariantError(AssertionError):
    """A conservation or accounting check failed at the end of a run."""


class WiredLink:
    """Point-to-point FIFO link with an unbounded buffer."""

    def __init__(self, sim, rate: int, delay_us: int, deliver):
        self.sim = sim
        self.rate = rate
        self.delay_us = delay_us
        self.deliver = deliver
        self.busy_until = 0
        self.sent = 0
        self.drops = 0
        self.max_backlog_us = 0
        self.transit: deque = deque()  # packets on the wire, in delivery order

    def send(self, packet) -> None:
        q = self.sim.queue
        now = q.now
        start = self.busy_until if self.busy_until > now else now
        self.busy_until = start + -(-packet.wire_bytes * 8_000_000 // self.rate)
        backlog = self.busy_until - now
        if backlog > self.max_backlog_us:
            self.max_backlog_us = backlog
        self.sent += 1
        self.transit.append(packet)
        q.schedule(self.busy_until + self.delay_us, self._arrive, packet)

    def _arrive(self, packet) -> None:
        self.transit.popleft()
        self.deliver(packet)


class World:
    """Everything one (scenario, seed) run needs; built in a fixed order."""

    def __init__(self, scenario: Scenario, seed: int):
        s = scenario
        self.scenario = s
        self.seed = seed
        self.sim = sim = Simulator(seed)
        rng = sim.rng
        self.warmup_us = us(s.warmup)
        self.end_us = us(s.duration)
        self.channel = ChannelProcess(s.channel, rng["channel.states"], s.fec)
        self.medium = Medium(sim, s.mac, self.channel, rng["channel.errors"], s.fec)
        self.stations = [self.medium.add_station(rng[f"mac.backoff.{i}"])
                         for i in range(s.mobiles + 1)]
        for st in self.stations:
            st.deliver = self._deliver_hook(st.sid)
            st.on_done = self._mac_done
        d = us(s.wired_delay)
        self.up_link = WiredLink(sim, s.wired_rate, d, self._at_host)
        self.down_link = WiredLink(sim, s.wired_rate, d, self._at_bs)
        self.metrics = MetricsStore(self.warmup_us, self.end_us)
        self.conns: list[TcpConnection] = []
        self.flows: list[UdpFlow] = []
        self.saturated: list[SaturatedSource] = []
        self.sessions: list[WebSession] = []
        self.voice: list[VoiceSource] = []
        self._starters = []
        getattr(self, f"_build_{s.workload.kind}")()

    # -- routing ------------------------------------------------------------

    def _deliver_hook(self, sid):
        def deliver(packet):
            packet.hop_ok = True
            if sid == BS and packet.dst == HOST:
                self.up_link.send(packet)
            else:
                packet.flow.receive(packet)
        return deliver

    def _mac_done(self, packet, delivered, cause):
        packet.flow.mac_done(packet, delivered, cause)

    def _at_host(self, packet):
        packet.flow.receive(packet)

    def _at_bs(self, packet):
        self.stations[BS].enqueue(packet, packet.dst)

    def _out(self, node: int):
        """Sender function for a node: mobiles and the BS push into their MAC."""
        if node == HOST:
            return self.down_link.send
        st = self.stations[node]
        if node == BS:
            return lambda p: st.enqueue(p, p.dst)
        return lambda p: st.enqueue(p, BS)

    def _mobile(self, i: int) -> int:
        return 1 + i % self.scenario.mobiles

    def _tcp(self, cid, src, dst, mss, window) -> TcpConnection:
        c = TcpConnection(self.sim, cid, mss, window, src, dst, self.scenario.tcp)
        c.data_out = self._out(src)
        c.ack_out = self._out(dst)
        self.conns.append(c)
        return c

    def _count_goodput(self, node: int):
        m = self.metrics
        m.track_node(node)
        q = self.sim.queue

        def on_deliver(conn, n):
            m.delivered(node, n * conn.mss * 8, q.now)
        return on_deliver

    # -- workloads ----------------------------------------------------------

    def _build_bulk(self):
        w = self.scenario.workload
        for i in range(w.n):
            node = self._mobile(i)
            src, dst = (node, HOST) if w.direction == UPLINK else (HOST, node)
            c = self._tcp(f"bulk{i}", src, dst, w.mss, w.window)
            c.on_deliver = self._count_goodput(node)
            self._starters.append(BulkSource(c, w.direction).start)

    def _build_web(self):
        s = self.scenario
        w = s.workload
        for i in range(w.n):
            node = self._mobile(i)
            up = self._tcp(f"web{i}.req", node, HOST, w.mss, w.window)
            down = self._tcp(f"web{i}.resp", HOST, node, w.mss, w.window)
            down.on_deliver = self._count_goodput(node)
            sess = WebSession(self.sim, i, up, down, s.web, self.sim.rng[f"web.{i}"],
                              self.metrics)
            self.sessions.append(sess)
            self._starters.append(sess.start)

    def _build_voice(self):
        s = self.scenario
        w = s.workload
        warm = self.warmup_us
        for i in range(w.n):
            node = self._mobile(i)
            # a bidirectional call is two independent one-way talkers
            for leg, src, dst in (("up", node, HOST), ("down", HOST, node)):
                f = UdpFlow(self.sim, f"voice{i}.{leg}", w.udp_bytes, src, dst, us(w.deadline),
                            warm)
                f.out = self._out(src)
                self.flows.append(f)
                self.metrics.udp_flows.append(f)
                v = VoiceSource(self.sim, f, self.sim.rng[f"voice.{i}.{leg}"], w.talk_mean,
                                w.silence_mean, w.codec_rate)
                self.voice.append(v)
                self._starters.append(v.start)
        node = self._mobile(w.n)
        src, dst = (node, HOST) if w.bulk_direction == UPLINK else (HOST, node)
        c = self._tcp("bulk", src, dst, w.bulk_mss, w.bulk_window)
        c.on_deliver = self._count_goodput(node)
        self._starters.append(c.write_forever)

    def _build_saturated(self):
        s = self.scenario
        w = s.workload
        for i in range(w.n):
            node = self._mobile(i)
            src = SaturatedSource(self.sim, f"sat{i}", w.mss, node, BS, self.warmup_us)
            src.out = self._out(node)
            self.metrics.track_node(node)
            src.on_deliver = self._raw_goodput(node)
            self.saturated.append(src)
            self._starters.append(lambda src=src: src.start(s.mac.queue_capacity + 1))

    def _raw_goodput(self, node):
        m = self.metrics
        q = self.sim.queue

        def on_deliver(src, n):
            m.delivered(node, n * src.payload_bytes * 8, q.now)
        return on_deliver

    # -- running ------------------------------------------------------------

    def run(self) -> MetricsStore:
        for start in self._starters:
            start()
        self.sim.run_until(self.end_us)
        self.check_invariants()
        self.metrics.summary = self.summary()
        return self.metrics

    def check_invariants(self) -> None:
        problems = []
        for st in self.stations:
            c = st.counters
            if c.offered != c.acked + c.drop_queue + c.drop_retry + st.queued():
                problems.append(f"station {st.sid}: offered {c.offered} != acked {c.acked} + "
                                f"dropped {c.drop_queue}+{c.drop_retry} + queued {st.queued()}")
            if len(st.queue) > st.params.queue_capacity:
                problems.append(f"station {st.sid}: queue over capacity")
        for link in (self.up_link, self.down_link):
            if link.drops:
                problems.append("wired link dropped packets")
        for c in self.conns:
            if not c.snd_una <= c.snd_nxt <= c.snd_max:
                problems.append(f"conn {c.cid}: sequence state out of order")
            if c.rcv_nxt < c.snd_una:
                problems.append(f"conn {c.cid}: sender acked data the receiver never got")
            if c.rcv_nxt > c.snd_max:
                problems.append(f"conn {c.cid}: receiver ahead of sender")
        for f in self.flows:
            if f.in_flight < 0:
                problems.append(f"flow {f.fid}: more outcomes than datagrams")
        if problems:
            raise InvariantError("; ".join(problems))

    def summary(self) -> dict[str, float]:
        """Flat, insertion-ordered metric dict (the CSV content)."""
        m = self.metrics
        out: dict[str, float] = {}
        per, total = m.throughput_report()
        out["throughput_total_kbps"] = total
        for node, kbps in per.items():
            out[f"throughput_node{node}_kbps"] = kbps
        if per:
            out["jain"] = m.jain()
        if self.sessions:
            rt = m.response_times
            out["web_requests"] = m.requests_started
            out["web_responses"] = len(rt)
            out["web_unfinished"] = m.unfinished_requests
            if rt:
                out["web_response_mean"] = sum(rt) / len(rt)
                out["web_response_max"] = max(rt)
        if self.flows:
            out.update(m.voice_summary())
        mac = {"offered": 0, "acked": 0, "drop_queue": 0, "drop_retry": 0, "attempts": 0,
               "retries": 0, "collisions": 0}
        for st in self.stations:
            c = st.counters
            for k in mac:
                mac[k] += getattr(c, k)
        for k, v in mac.items():
            out[f"mac_{k}"] = v
        out["mac_collision_events"] = self.medium.collisions
        out["medium_busy_fraction"] = self.medium.busy_us / self.end_us if self.end_us else 0.0
        if self.conns:
            out["tcp_segments"] = sum(c.segments_sent for c in self.conns)
            out["tcp_retransmissions"] = sum(c.retransmissions for c in self.conns)
            out["tcp_timeouts"] = sum(c.timeouts for c in self.conns)
            out["tcp_fast_retransmits"] = sum(c.fast_retransmits for c in self.conns)
        out["channel_bad_fraction"] = self.channel.bad_time_fraction(self.end_us)
        out["wired_drops"] = self.up_link.drops + self.down_link.drops
        out["events"] = self.sim.queue.dispatched
        return out


def run_scenario(scenario: Scenario, seed: int) -> MetricsStore:
    """Build the world for ``(scenario, seed)``, run it, return its metrics.

    The returned store carries ``summary``, the flat metric dict written to CSV.
    """
    return World(scenario, seed).run()


def format_value(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    return f"{v:.9g}"


def summary_csv(summary: dict[str, float]) -> str:
    lines = ["metric,value"]
    lines += [f"{k},{format_value(v)}" for k, v in summary.items()]
    return "\n".join(lines) + "\n"
