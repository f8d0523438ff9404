"""Parameter sweeps with seeded replications.

A sweep file lists axes (any config key) and seeds::

    axis.workload.mss = 100, 2000
    axis.workload.window = 1, 10
    axis.mac.rts_mode = always, never
    seeds = 1-10
    metrics = throughput_total_kbps, jain   # optional: keep only these

Cells are the cross product in declaration order (last axis fastest).
Each cell runs once per seed; rows aggregate across seeds only.
"""
from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .config import ConfigError, Scenario, scenario_to_dict, scenario_from_dict
from .run import format_value, run_scenario

WORKERS_ENV = "WLANSIM_WORKERS"


class SweepError(RuntimeError):
    def __init__(self, cell, seed, cause):
        coords = ", ".join(f"{k}={v}" for k, v in cell)
        super().__init__(f"run failed in cell [{coords}] seed {seed}: {cause!r}")
        self.cell = cell
        self.seed = seed
        self.cause = cause


@dataclass(frozen=True)
class SweepSpec:
    axes: tuple[tuple[str, tuple[str, ...]], ...]
    seeds: tuple[int, ...]
    metrics: tuple[str, ...] = ()

    def __post_init__(self):
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds: duplicate seed")
        names = [k for k, _ in self.axes]
        if len(set(names)) != len(names):
            raise ConfigError("axis: duplicate axis")
        for k, vals in self.axes:
            if not vals:
                raise ConfigError(f"axis.{k}: no values")

    @property
    def axis_names(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.axes)

    def cells(self) -> list[tuple[tuple[str, str], ...]]:
        names = self.axis_names
        return [tuple(zip(names, combo)) for combo in itertools.product(*(v for _, v in self.axes))]

    def with_seeds(self, seeds) -> "SweepSpec":
        return SweepSpec(self.axes, tuple(seeds), self.metrics)

    def with_reps(self, reps: int) -> "SweepSpec":
        """First ``reps`` listed seeds, or seeds 1..reps if none are listed."""
        if reps < 1:
            raise ConfigError("reps: must be >= 1")
        if not self.seeds:
            return self.with_seeds(range(1, reps + 1))
        if reps > len(self.seeds):
            raise ConfigError(f"reps: {reps} requested but only {len(self.seeds)} seeds listed")
        return self.with_seeds(self.seeds[:reps])


def parse_seeds(text: str) -> tuple[int, ...]:
    """``1-10``, ``1,2,5`` or a mix like ``1-3, 7``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        try:
            if sep:
                a, b = int(lo), int(hi)
                if b < a:
                    raise ValueError
                out.extend(range(a, b + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise ConfigError(f"seeds: cannot parse {part!r}") from None
    return tuple(out)


def parse_sweep(text: str) -> SweepSpec:
    axes = []
    seeds: tuple[int, ...] = ()
    metrics: tuple[str, ...] = ()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key == "seeds":
            seeds = parse_seeds(value)
        elif key == "metrics":
            metrics = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key.startswith("axis."):
            vals = tuple(v.strip() for v in value.split(",") if v.strip())
            axes.append((key[5:], vals))
        else:
            raise ConfigError(f"line {lineno}: unknown sweep key {key!r}")
    return SweepSpec(tuple(axes), seeds, metrics)


@dataclass(frozen=True)
class ResultRow:
    cell: tuple[tuple[str, str], ...]
    metric: str
    mean: float
    stderr: float
    reps: int
    min: float
    max: float

    def coord(self, key: str) -> str:
        for k, v in self.cell:
            if k == key:
                return v
        raise KeyError(key)


def cell_scenario(template: Scenario, cell) -> Scenario:
    values = scenario_to_dict(template)
    for k, v in cell:
        if k not in values:
            raise ConfigError(f"axis.{k}: unknown config key")
        values[k] = v
    return scenario_from_dict(values)


def _job(args):
    scenario, seed = args
    return run_scenario(scenario, seed).summary


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV}: not an integer: {raw!r}") from None
        return max(1, n)
    return os.cpu_count() or 1


def run_cells(spec: SweepSpec, template: Scenario, workers: int | None = None):
    """Run every (cell, seed); returns ``[(cell, seed, summary), ...]`` in
    enumeration order regardless of completion order."""
    if not spec.seeds:
        raise ConfigError("seeds: empty seed list")
    cells = spec.cells()
    scenarios = [cell_scenario(template, c) for c in cells]
    jobs = [(cell, sc, seed) for cell, sc in zip(cells, scenarios) for seed in spec.seeds]
    workers = default_workers() if workers is None else max(1, workers)
    workers = min(workers, len(jobs))
    results = []
    if workers == 1:
        for cell, sc, seed in jobs:
            try:
                results.append((cell, seed, _job((sc, seed))))
            except Exception as exc:
                raise SweepError(cell, seed, exc) from exc
        return results
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_job, (sc, seed)) for _, sc, seed in jobs]
        for (cell, _, seed), fut in zip(jobs, futures):
            try:
                results.append((cell, seed, fut.result()))
            except Exception as exc:
                for f in futures:
                    f.cancel()
                raise SweepError(cell, seed, exc) from exc
    return results


def aggregate(results, keep=()) -> list[ResultRow]:
    """Mean and standard error across replications, per cell and metric.

    ``keep`` restricts (and orders) the metrics; empty keeps all.
    """
    groups: dict = {}
    for cell, _seed, summary in results:
        metrics = groups.setdefault(cell, {k: [] for k in keep})
        for k, v in summary.items():
            if keep and k not in metrics:
                continue
            metrics.setdefault(k, []).append(float(v))
    rows = []
    for cell, metrics in groups.items():
        for name, xs in metrics.items():
            n = len(xs)
            if n == 0:
                continue
            mean = math.fsum(xs) / n
            if n > 1:
                var = math.fsum((x - mean) ** 2 for x in xs) / (n - 1)
                se = math.sqrt(var / n)
            else:
                se = 0.0
            rows.append(ResultRow(cell, name, mean, se, n, min(xs), max(xs)))
    return rows


def run_sweep(spec: SweepSpec, template: Scenario, workers: int | None = None) -> list[ResultRow]:
    return aggregate(run_cells(spec, template, workers), spec.metrics)


def rows_csv(rows: list[ResultRow]) -> str:
    if not rows:
        return ""
    keys = [k for k, _ in rows[0].cell]
    lines = [",".join(keys + ["metric", "mean", "stderr", "reps", "min", "max"])]
    for r in rows:
        vals = [v for _, v in r.cell]
        lines.append(",".join(vals + [r.metric, format_value(r.mean), format_value(r.stderr),
                                      str(r.reps), format_value(r.min), format_value(r.max)]))
    return "\n".join(lines) + "\n"


def runs_csv(results) -> str:
    if not results:
        return ""
    keys = [k for k, _ in results[0][0]]
    lines = [",".join(keys + ["seed", "metric", "value"])]
    for cell, seed, summary in results:
        vals = [v for _, v in cell]
        for k, v in summary.items():
            lines.append(",".join(vals + [str(seed), k, format_value(v)]))
    return "\n".join(lines) + "\n"


def read_rows_csv(text: str) -> list[ResultRow]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        return []
    header = lines[0].split(",")
    try:
        mi = header.index("metric")
    except ValueError:
        raise ConfigError("rows csv: no 'metric' column") from None
    if header[mi:] != ["metric", "mean", "stderr", "reps", "min", "max"]:
        raise ConfigError("rows csv: unexpected columns after 'metric'")
    keys = header[:mi]
    out = []
    for ln in lines[1:]:
        f = ln.split(",")
        if len(f) != len(header):
            raise ConfigError(f"rows csv: wrong field count in {ln!r}")
        out.append(ResultRow(tuple(zip(keys, f[:mi])), f[mi], float(f[mi + 1]), float(f[mi + 2]),
                             int(f[mi + 3]), float(f[mi + 4]), float(f[mi + 5])))
    return out
