import os
import subprocess
import sys

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import BACKENDS, check_conservation, instrument, small_scenario
from wlansim.harness import sweep as sweep_mod
from wlansim.harness.cli import main
from wlansim.harness.config import (
    ConfigError, load_scenario, parse_config_text, scenario_to_text,
)
from wlansim.harness.run import World, run_scenario, summary_csv
from wlansim.harness.sweep import (
    ResultRow, SweepError, SweepSpec, aggregate, parse_seeds, parse_sweep, read_rows_csv,
    rows_csv, run_cells, run_sweep, runs_csv,
)
from wlansim.harness.tables import TableError, emit_table
from wlansim.harness.trends import (
    AssertionSyntaxError, InsufficientReplications, parse_assertion, trend_check,
)

# -- config -----------------------------------------------------------------


def test_config_parse_and_roundtrip():
    s = load_scenario("""
        # comment
        workload.kind = web
        workload.n = 3   # trailing comment
        mac.rts_mode = always
        fec.policy = adaptive
        web.think_mean = 2.5
    """)
    assert s.workload.kind == "web" and s.workload.n == 3 and s.web.think_mean == 2.5
    assert s.mac.rts_mode == "always" and s.mobiles == 3
    assert load_scenario(scenario_to_text(s)) == s


@pytest.mark.parametrize("text,field", [
    ("workload.mss = big", "workload.mss"),
    ("nosuch.key = 1", "nosuch"),
    ("workload.colour = red", "workload.colour"),
    ("scenario.duration = 5\nscenario.warmup = 10", "scenario.duration"),
    ("workload.kind = ftp", "workload.kind"),
    ("mac.rts_mode = sometimes", "mac.rts_mode"),
    ("channel.tau_g = -1", "channel"),
    ("just a line", "line 1"),
])
def test_config_errors_name_the_field(text, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        load_scenario(text)


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError):
        parse_config_text("workload.n = 1\nworkload.n = 2")


# -- single runs -------------------------------------------------------------


@pytest.mark.parametrize("kind,extra", [
    ("bulk", {"workload.n": 3, "mac.rts_mode": "always", "fec.policy": "adaptive"}),
    ("web", {"workload.n": 4}),
    ("voice", {"workload.n": 2, "workload.udp_bytes": 500}),
    ("saturated", {"workload.n": 2}),
])
def test_same_seed_byte_identical(kind, extra):
    s = small_scenario(**{"workload.kind": kind}, **extra)
    a = summary_csv(run_scenario(s, 3).summary)
    b = summary_csv(run_scenario(s, 3).summary)
    assert a == b
    assert summary_csv(run_scenario(s, 4).summary) != a


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled core not built")
def test_pure_and_compiled_backends_agree(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("scenario.duration = 8\nscenario.warmup = 1\nworkload.n = 3\n"
                   "workload.mss = 500\nfec.policy = adaptive\n")
    outs = []
    for pure in ("0", "1"):
        env = dict(os.environ, WLANSIM_PURE=pure)
        out = tmp_path / f"o{pure}.csv"
        code = ("import wlansim, sys; from wlansim.harness.cli import main; "
                "print(wlansim.BACKEND, file=sys.stderr); sys.exit(main(sys.argv[1:]))")
        r = subprocess.run([sys.executable, "-c", code, "simulate", "--scenario", str(cfg),
                            "--seed", "2", "--out", str(out)], env=env, capture_output=True,
                           text=True, check=True)
        assert r.stderr.strip() == ("python" if pure == "1" else "cython")
        outs.append(out.read_text())
    assert outs[0] == outs[1]


def test_errorless_single_bulk_has_no_losses():
    s = small_scenario(**{"workload.n": 1, "workload.window": 5, "channel.p_g": 0,
                          "channel.p_b": 0})
    m = run_scenario(s, 1).summary
    assert m["tcp_retransmissions"] == 0 and m["mac_drop_retry"] == 0
    assert m["mac_collision_events"] == 0 or m["mac_retries"] > 0
    assert m["wired_drops"] == 0 and m["throughput_total_kbps"] > 1000


def test_voice_summary_reports_causes():
    s = small_scenario(**{"workload.kind": "voice", "workload.n": 7,
                          "workload.udp_bytes": 1000, "scenario.duration": 20})
    m = run_scenario(s, 1).summary
    for k in ("voice_loss", "voice_lost_retry", "voice_lost_queue", "voice_late"):
        assert k in m
    lost = m["voice_lost_retry"] + m["voice_lost_queue"] + m["voice_late"]
    assert m["voice_loss"] == pytest.approx(lost / m["voice_sent"])


# -- conservation over random small worlds ---------------------------------------


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(
    kind=st.sampled_from(["bulk", "web", "voice"]),
    n=st.integers(1, 2),
    mss=st.sampled_from([100, 500, 1000, 2000]),
    window=st.integers(1, 6),
    rts=st.sampled_from(["always", "never"]),
    fec=st.sampled_from(["adaptive", "off"]),
    duration=st.floats(2.0, 10.0),
    seed=st.integers(0, 1000),
)
def test_conservation_random_small_worlds(kind, n, mss, window, rts, fec, duration, seed):
    s = load_scenario("", {
        "workload.kind": kind, "workload.n": str(n), "workload.mss": str(mss),
        "workload.window": str(window), "workload.udp_bytes": str(mss),
        "workload.bulk_window": str(window), "mac.rts_mode": rts, "fec.policy": fec,
        "scenario.duration": f"{duration:.3f}", "scenario.warmup": "1",
        "web.think_mean": "0.5",
    })
    assert s.mobiles <= 3
    w = World(s, seed)
    log = instrument(w)
    w.run()  # raises InvariantError on MAC / sequence accounting mismatch
    check_conservation(w, log)


# -- sweeps ------------------------------------------------------------------


def fake_job(args):
    scenario, seed = args
    w = scenario.workload
    return {"throughput_total_kbps": w.mss / 10 + w.window + seed * 0.01,
            "voice_loss": w.udp_bytes / 1e5 + seed * 1e-4}


def test_table1_sweep_shape(monkeypatch):
    monkeypatch.setattr(sweep_mod, "_job", fake_job)
    spec = parse_sweep("""
        axis.workload.mss = 100, 200, 500, 1000, 2000
        axis.workload.window = 1, 2, 5, 10
        axis.mac.rts_mode = always, never
        axis.fec.policy = adaptive, off
        seeds = 1-3
        metrics = throughput_total_kbps
    """)
    rows = run_sweep(spec, small_scenario(), workers=1)
    assert len(rows) == 80 and all(r.reps == 3 for r in rows)
    csv = emit_table(rows, "table1")
    lines = csv.splitlines()
    assert lines[0] == "packet_size,window,R/F,NR/F,R/NF,NR/NF"
    assert len(lines) == 21 and lines[1].startswith("100,1,")


def test_table5_sweep_shape(monkeypatch):
    monkeypatch.setattr(sweep_mod, "_job", fake_job)
    spec = parse_sweep("axis.workload.bulk_window = 1,2,4,8,16,32\n"
                       "axis.workload.udp_bytes = 200,500,600,800,1000\nseeds = 1,2\n"
                       "metrics = voice_loss")
    rows = run_sweep(spec, small_scenario(**{"workload.kind": "voice"}), workers=1)
    assert len(rows) == 30
    lines = emit_table(rows, "table5").splitlines()
    assert lines[0] == "W,200,500,600,800,1000" and len(lines) == 7


def test_aggregate_mean_and_stderr():
    cell = (("a", "1"),)
    rows = aggregate([(cell, s, {"m": x}) for s, x in enumerate([1.0, 2.0, 3.0, 6.0])])
    (r,) = rows
    assert r.mean == 3.0 and r.reps == 4 and (r.min, r.max) == (1.0, 6.0)
    assert r.stderr == pytest.approx((14 / 3) ** 0.5 / 2)


def test_empty_seed_list_rejected():
    with pytest.raises(ConfigError):
        run_cells(SweepSpec((("workload.mss", ("100",)),), ()), small_scenario())


def test_seed_parsing():
    assert parse_seeds("1-3, 7") == (1, 2, 3, 7)
    with pytest.raises(ConfigError):
        parse_seeds("5-2")
    with pytest.raises(ConfigError):
        parse_sweep("axis.x = 1\nseeds = 1,1")


def test_failed_run_names_the_cell(monkeypatch):
    def boom(args):
        scenario, seed = args
        if scenario.workload.mss == 500 and seed == 2:
            raise RuntimeError("kaput")
        return {"x": 1.0}

    monkeypatch.setattr(sweep_mod, "_job", boom)
    spec = SweepSpec((("workload.mss", ("100", "500")),), (1, 2))
    with pytest.raises(SweepError, match=r"workload\.mss=500\] seed 2"):
        run_cells(spec, small_scenario(), workers=1)


def test_unknown_axis_rejected():
    spec = SweepSpec((("workload.nonsense", ("1",)),), (1,))
    with pytest.raises(ConfigError, match="workload.nonsense"):
        run_cells(spec, small_scenario(), workers=1)


def test_worker_count_does_not_change_output():
    spec = SweepSpec((("workload.mss", ("200", "1000")), ("mac.rts_mode", ("always", "never"))),
                     (1, 2))
    s = small_scenario(**{"scenario.duration": 5, "scenario.warmup": 1, "workload.n": 2})
    one = run_cells(spec, s, workers=1)
    two = run_cells(spec, s, workers=2)
    assert runs_csv(one) == runs_csv(two)
    assert rows_csv(aggregate(one)) == rows_csv(aggregate(two))


def test_rows_csv_roundtrip():
    rows = [ResultRow((("workload.mss", "100"),), "m", 1.5, 0.25, 10, 1.0, 2.0)]
    assert read_rows_csv(rows_csv(rows)) == rows


# -- tables -----------------------------------------------------------------


def _row(mss, win, rts, fec, v, metric="throughput_total_kbps"):
    cell = (("workload.mss", str(mss)), ("workload.window", str(win)),
            ("mac.rts_mode", rts), ("fec.policy", fec))
    return ResultRow(cell, metric, v, 0.0, 10, v, v)


def test_one_row_grid_two_lines():
    rows = [_row(100, 1, rts, fec, 1.0) for rts in ("always", "never")
            for fec in ("adaptive", "off")]
    assert len(emit_table(rows, "table1").splitlines()) == 2


def test_duplicate_and_missing_cells_rejected():
    rows = [_row(100, 1, rts, fec, 1.0) for rts in ("always", "never")
            for fec in ("adaptive", "off")]
    with pytest.raises(TableError, match="duplicate"):
        emit_table(rows + rows[:1], "table1")
    with pytest.raises(TableError, match="missing"):
        emit_table(rows[:3] + [_row(200, 1, "always", "off", 2.0)], "table1")
    with pytest.raises(TableError):
        emit_table(rows, "table9")


def test_table2_per_node_layout():
    rows = []
    for i, v in enumerate([1.25, 157.11, 0.63, 117.29, 214.5], 1):
        rows.append(_row(2000, 5, "always", "off", v, f"throughput_node{i}_kbps"))
    rows.append(_row(2000, 5, "always", "off", 490.78, "throughput_total_kbps"))
    rows.append(_row(2000, 5, "always", "off", 0.5704, "jain"))
    lines = emit_table(rows, "table2").splitlines()
    assert lines[0] == "node,2000B W5 R/NF"
    assert lines[1] == "Node 1,1.25" and lines[-1] == "Jain,0.57"


# -- trends -----------------------------------------------------------------


def _rows(mean_a, mean_b, se=1.0, reps=10):
    return [ResultRow((("k", "a"),), "m", mean_a, se, reps, 0, 0),
            ResultRow((("k", "b"),), "m", mean_b, se, reps, 0, 0)]


def test_trend_directional_tests():
    rows = _rows(110.0, 100.0)
    rep = trend_check(rows, "up: m[k=a] > m[k=b]\nnotdown: m[k=a] !< m[k=b]\n"
                            "down: m[k=a] < m[k=b]\nnotup: m[k=a] !> m[k=b]")
    got = {r.name: r.passed for r in rep.results}
    assert got == {"up": True, "notdown": True, "down": False, "notup": False}
    assert rep.text().splitlines()[0].startswith("PASS up:")
    # a small difference is not significant either way
    close = trend_check(_rows(101.0, 100.0), "a: m[k=a] > m[k=b]\nb: m[k=a] !> m[k=b]")
    assert [r.passed for r in close.results] == [False, True]


def test_trend_constants_and_aggregates():
    rows = _rows(0.01, 0.03, se=0.001)
    rep = trend_check(rows, "low: m[k=a] < 0.02\nhigh: m[k=b] > 0.02\n"
                            "tot: sum(m[]) > 0.035\navg: mean(m[]) < 0.025")
    assert rep.passed


def test_trend_requires_replications():
    with pytest.raises(InsufficientReplications):
        trend_check(_rows(1, 2, reps=5), "x: m[k=a] < m[k=b]")


def test_trend_syntax_errors():
    for bad in ("no colon", "x: m[k=a] ~ 3", "x: m[k=a > 3", "x: m[k] > 1"):
        with pytest.raises(AssertionSyntaxError):
            parse_assertion(bad)
    with pytest.raises(AssertionSyntaxError, match="matches no rows"):
        trend_check(_rows(1, 2), "x: m[k=z] > 1")
    with pytest.raises(AssertionSyntaxError, match="2 rows"):
        trend_check(_rows(1, 2), "x: m[] > 1")


# -- CLI ----------------------------------------------------------------------


def test_cli_simulate_check_table(tmp_path, capsys):
    scen = tmp_path / "s.cfg"
    scen.write_text("scenario.duration = 4\nscenario.warmup = 1\nworkload.n = 2\n")
    out = tmp_path / "m.csv"
    assert main(["simulate", "--scenario", str(scen), "--seed", "1", "--out", str(out)]) == 0
    assert out.read_text().startswith("metric,value\nthroughput_total_kbps,")

    rows = tmp_path / "rows.csv"
    rows.write_text(rows_csv(_rows(110.0, 100.0)))
    good = tmp_path / "good.txt"
    good.write_text("up: m[k=a] > m[k=b]\n")
    bad = tmp_path / "bad.txt"
    bad.write_text("down: m[k=a] < m[k=b]\n")
    assert main(["check", "--rows", str(rows), "--assertions", str(good)]) == 0
    assert main(["check", "--rows", str(rows), "--assertions", str(bad)]) == 1
    assert "FAIL down" in capsys.readouterr().out
    assert main(["check", "--rows", str(rows), "--assertions", str(good),
                 "--min-reps", "20"]) == 2


def test_cli_config_error_exit_code(tmp_path, capsys):
    scen = tmp_path / "s.cfg"
    scen.write_text("scenario.duration = 1\nscenario.warmup = 2\n")
    assert main(["simulate", "--scenario", str(scen)]) == 2
    assert "scenario.duration" in capsys.readouterr().err


def test_cli_sweep_writes_rows_and_tables(tmp_path, monkeypatch):
    monkeypatch.setattr(sweep_mod, "_job", fake_job)
    spec = tmp_path / "sw.txt"
    spec.write_text("axis.workload.mss = 100\naxis.workload.window = 1\n"
                    "axis.mac.rts_mode = always, never\naxis.fec.policy = adaptive, off\n"
                    "seeds = 1-4\n")
    tmpl = tmp_path / "t.cfg"
    tmpl.write_text("workload.n = 5\n")
    out = tmp_path / "out"
    assert main(["sweep", "--spec", str(spec), "--template", str(tmpl), "--reps", "2",
                 "--out", str(out), "--workers", "1", "--table", "table1"]) == 0
    rows = read_rows_csv((out / "rows.csv").read_text())
    assert {r.reps for r in rows} == {2}
    assert (out / "table1.csv").read_text().count("\n") == 2
    assert (out / "runs.csv").exists()


def test_console_script_entry_point():
    r = subprocess.run([sys.executable, "-m", "wlansim", "--help"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and "simulate" in r.stdout
