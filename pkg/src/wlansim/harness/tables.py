"""CSV tables from aggregated sweep rows.

A layout names the metric, the keys spanning table rows and columns, and
optionally a fixed, labelled column set. The pseudo-key ``metric`` lets
the metric itself vary along an axis (per-node throughput tables).
"""
from __future__ import annotations

from dataclasses import dataclass

from .sweep import ResultRow

RTS = "mac.rts_mode"
FEC = "fec.policy"
MSS = "workload.mss"
WIN = "workload.window"


class TableError(ValueError):
    pass


@dataclass(frozen=True)
class Layout:
    name: str
    row_keys: tuple[str, ...]
    col_keys: tuple[str, ...]
    metric: str = ""
    metrics: tuple[tuple[str, str], ...] = ()  # (metric, label) when "metric" is an axis
    columns: tuple[tuple[tuple[str, ...], str], ...] = ()  # fixed (values, label) order
    row_header: tuple[str, ...] = ()
    precision: int = 2
    scale: float = 1.0

    def __post_init__(self):
        keys = self.row_keys + self.col_keys
        if len(set(keys)) != len(keys):
            raise TableError(f"{self.name}: a key appears twice")
        if ("metric" in keys) != bool(self.metrics):
            raise TableError(f"{self.name}: 'metric' axis needs a metrics list and vice versa")
        if not self.metrics and not self.metric:
            raise TableError(f"{self.name}: no metric")

    def wanted(self, metric: str) -> bool:
        if self.metrics:
            return any(metric == m for m, _ in self.metrics)
        return metric == self.metric


MODES_SHORT = (
    (("always", "adaptive"), "R/F"),
    (("never", "adaptive"), "NR/F"),
    (("always", "off"), "R/NF"),
    (("never", "off"), "NR/NF"),
)
MODES_LONG = {
    ("never", "off"): "NORTS/NOFEC",
    ("never", "adaptive"): "NORTS/FEC",
    ("always", "off"): "RTS/NOFEC",
    ("always", "adaptive"): "RTS/FEC",
}

TABLE1 = Layout(
    "table1", (MSS, WIN), (RTS, FEC), metric="throughput_total_kbps", columns=MODES_SHORT,
    row_header=("packet_size", "window"),
)
TABLE2 = Layout(
    "table2", ("metric",), (MSS, WIN, RTS, FEC),
    metrics=tuple((f"throughput_node{i}_kbps", f"Node {i}") for i in range(1, 6))
    + (("throughput_total_kbps", "Total"), ("jain", "Jain")),
    row_header=("node",),
)
TABLE3 = Layout(
    "table3", (RTS, FEC), (WIN,), metric="web_response_mean", row_header=("mode",),
)
TABLE4 = Layout(
    "table4", (RTS, FEC), (WIN,), metric="web_response_mean", row_header=("mode",),
)
TABLE5 = Layout(
    "table5", ("workload.bulk_window",), ("workload.udp_bytes",), metric="voice_loss",
    row_header=("W",), scale=100.0, precision=2,
)

LAYOUTS = {t.name: t for t in (TABLE1, TABLE2, TABLE3, TABLE4, TABLE5)}


def _coord(row: ResultRow, key: str) -> str:
    if key == "metric":
        return row.metric
    try:
        return row.coord(key)
    except KeyError:
        raise TableError(f"row for {row.metric} has no coordinate {key!r}") from None


def _row_label(layout: Layout, values: tuple[str, ...]) -> list[str]:
    if layout.row_keys == ("metric",):
        return [dict(layout.metrics)[values[0]]]
    if layout.row_keys == (RTS, FEC):
        return [MODES_LONG.get(values, "/".join(values))]
    return list(values)


def _col_label(layout: Layout, values: tuple[str, ...]) -> str:
    if layout.col_keys == (MSS, WIN, RTS, FEC):
        short = dict(MODES_SHORT).get(values[2:], "/".join(values[2:]))
        return f"{values[0]}B W{values[1]} {short}"
    return "/".join(values)


def emit_table(rows: list[ResultRow], layout: Layout | str) -> str:
    """Render ``rows`` on the layout grid; every grid cell must be covered
    exactly once."""
    if isinstance(layout, str):
        try:
            layout = LAYOUTS[layout]
        except KeyError:
            raise TableError(f"unknown layout {layout!r}") from None
    grid: dict = {}
    row_order: list = []
    col_order: list = []
    for r in rows:
        if not layout.wanted(r.metric):
            continue
        rk = tuple(_coord(r, k) for k in layout.row_keys)
        ck = tuple(_coord(r, k) for k in layout.col_keys)
        if (rk, ck) in grid:
            raise TableError(f"{layout.name}: duplicate cell {rk} x {ck}")
        grid[rk, ck] = r.mean
        if rk not in row_order:
            row_order.append(rk)
        if ck not in col_order:
            col_order.append(ck)
    if not grid:
        raise TableError(f"{layout.name}: no rows for this layout")
    if layout.metrics:
        order = {m: i for i, (m, _) in enumerate(layout.metrics)}
        mi = layout.row_keys.index("metric") if "metric" in layout.row_keys else None
        if mi is not None:
            row_order.sort(key=lambda rk: order[rk[mi]])
    if layout.columns:
        fixed = [v for v, _ in layout.columns]
        extra = [c for c in col_order if c not in fixed]
        if extra:
            raise TableError(f"{layout.name}: unexpected column {extra[0]}")
        col_order = fixed
        labels = [lab for _, lab in layout.columns]
    else:
        labels = [_col_label(layout, c) for c in col_order]
    header = list(layout.row_header or layout.row_keys) + labels
    lines = [",".join(header)]
    fmt = f"{{:.{layout.precision}f}}"
    for rk in row_order:
        cells = []
        for ck in col_order:
            if (rk, ck) not in grid:
                raise TableError(f"{layout.name}: missing cell {rk} x {ck}")
            cells.append(fmt.format(grid[rk, ck] * layout.scale))
        lines.append(",".join(_row_label(layout, rk) + cells))
    return "\n".join(lines) + "\n"
