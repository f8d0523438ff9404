import importlib

import pytest

from wlansim import _core_py


def _backends():
    mods = [_core_py]
    try:
        mods.append(importlib.import_module("wlansim._core"))
    except ImportError:
        pass
    return mods


BACKENDS = _backends()

# one "PASS|FAIL <criterion>: ..." line per acceptance check, shown after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture(params=BACKENDS, ids=[m.BACKEND for m in BACKENDS])
def core(request):
    """Each available kernel implementation in turn."""
    return request.param


def small_scenario(**over):
    """Short scenario for fast tests; keys as in the config file."""
    from wlansim.harness.config import load_scenario

    base = {"scenario.duration": "12", "scenario.warmup": "2"}
    base.update({k: str(v) for k, v in over.items()})
    return load_scenario("", base)


def instrument(world):
    """Wrap every UDP flow and TCP connection to record per-packet outcomes."""
    log = {"sent": {}, "resolved": {}, "tcp_delivered": {}}

    for f in world.flows:
        out, recv, done = f.out, f.receive, f.mac_done

        def o(p, out=out, f=f):
            if p.created_at >= f.warmup_us:
                log["sent"][id(p)] = p
            out(p)

        def r(p, recv=recv, f=f):
            before = f.delivered + f.late
            recv(p)
            if f.delivered + f.late != before:
                assert id(p) not in log["resolved"], "datagram resolved twice"
                log["resolved"][id(p)] = "rx"

        def d(p, ok, cause, done=done, f=f):
            before = f.lost_queue + f.lost_retry
            done(p, ok, cause)
            if f.lost_queue + f.lost_retry != before:
                assert id(p) not in log["resolved"], "datagram resolved twice"
                log["resolved"][id(p)] = cause

        f.out, f.receive, f.mac_done = o, r, d
    for c in world.conns:
        prev = c.on_deliver
        log["tcp_delivered"][c.cid] = 0

        def od(conn, n, prev=prev):
            log["tcp_delivered"][conn.cid] += n
            if prev is not None:
                prev(conn, n)

        c.on_deliver = od
    return log


def check_conservation(w, log):
    """Per-packet closure after ``w.run()`` for a world wrapped by ``instrument``."""
    for st_ in w.stations:
        c = st_.counters
        assert c.offered == c.acked + c.drop_queue + c.drop_retry + st_.queued()
    # every counted datagram is resolved once, or is still inside the network
    inside = {id(p) for st_ in w.stations for p, _ in st_.queue}
    inside |= {id(st_.pending) for st_ in w.stations if st_.pending is not None}
    inside |= {id(p) for link in (w.up_link, w.down_link) for p in link.transit}
    for f in w.flows:
        mine = {k for k, p in log["sent"].items() if p.flow is f}
        done = {k for k in mine if k in log["resolved"]}
        assert f.sent == len(mine)
        assert f.resolved == len(done)
        assert mine - done <= inside
        assert f.in_flight == len(mine - done)
    # TCP: bytes delivered in order = receiver sequence; ACKed never exceeds delivered
    for c in w.conns:
        assert log["tcp_delivered"][c.cid] == c.rcv_nxt
        assert c.snd_una * c.mss <= c.rcv_nxt * c.mss <= c.snd_max * c.mss
