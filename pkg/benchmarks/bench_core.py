"""Compare the compiled kernels against the pure-Python fallback.

Micro benchmarks call each backend module directly; the end-to-end run
launches a fresh interpreter per backend (WLANSIM_PURE selects it at
import) and times one scenario.

    python benchmarks/bench_core.py --repeat 3 --duration 60
"""
import argparse
import importlib
import os
import subprocess
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def backends():
    mods = [importlib.import_module("wlansim._core_py")]
    try:
        mods.append(importlib.import_module("wlansim._core"))
    except ImportError:
        print("compiled core not built; only the fallback is timed", file=sys.stderr)
    return mods


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_queue(mod, n=200_000):
    def run():
        q = mod.EventQueue()
        sink = []
        h = None
        for i in range(n):
            h = q.schedule((i * 7919) % 100_003, sink.append, i)
            if i % 10 == 0:
                q.cancel(h)
        q.run_until(200_000)
    return run


def bench_frame_error(mod, n=50_000):
    segs = [(0, 3000), (1, 800), (0, 4472)]

    def run():
        f = mod.frame_error_prob
        for _ in range(n):
            f(segs, 1e-6, 1e-2)
    return run


def bench_fec(mod, n=5_000):
    ps = (1 - (1 - 1e-6) ** 8, 1 - 0.99**8)
    blocks = [(255, 37)] * 5 + [(160, 23)]
    profiles = [[(0, 200 + k), (1, 1235 - k - 200), (0, 200)] for k in range(40)]

    def run():
        f = mod.fec_frame_error_prob
        for i in range(n):
            f(profiles[i % 40], blocks, *ps)
    return run


def bench_scenario(pure, duration, seed):
    env = dict(os.environ, WLANSIM_PURE="1" if pure else "0")
    cfg = (f"scenario.duration = {duration}\nscenario.warmup = 1\nworkload.n = 5\n"
           "workload.mss = 1000\nworkload.window = 10\nfec.policy = adaptive\n")
    code = ("import sys, time; from wlansim.harness.config import load_scenario;"
            "from wlansim.harness.run import run_scenario; import wlansim;"
            "s = load_scenario(sys.stdin.read()); t = time.perf_counter();"
            f"run_scenario(s, {seed}); print(wlansim.BACKEND, time.perf_counter() - t)")
    out = subprocess.run([sys.executable, "-c", code], input=cfg, env=env, text=True,
                         capture_output=True, check=True, cwd=ROOT).stdout.split()
    return out[0], float(out[1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--duration", type=float, default=60.0, help="simulated seconds")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--skip-scenario", action="store_true")
    args = ap.parse_args()

    mods = backends()
    cases = [("event queue 200k", bench_queue), ("frame error 50k", bench_frame_error),
             ("fec frame error 5k", bench_fec)]
    print(f"{'case':28s}" + "".join(f"{m.BACKEND:>12s}" for m in mods) + f"{'speedup':>10s}")
    for name, make in cases:
        times = [best_of(make(m), args.repeat) for m in mods]
        speed = f"{times[0] / times[-1]:9.1f}x" if len(times) > 1 else ""
        print(f"{name:28s}" + "".join(f"{t:11.3f}s" for t in times) + speed)
    if not args.skip_scenario:
        times = []
        for pure in (True, False)[:len(mods)]:
            runs = [bench_scenario(pure, args.duration, args.seed) for _ in range(args.repeat)]
            times.append(min(t for _, t in runs))
        label = f"bulk 5x1000B {args.duration:g}s"
        speed = f"{times[0] / times[-1]:9.1f}x" if len(times) > 1 else ""
        print(f"{label:28s}" + "".join(f"{t:11.3f}s" for t in times) + speed)


if __name__ == "__main__":
    main()
