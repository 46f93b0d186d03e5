"""CSV -> figure rendering, one job per call.

Each kind declares the columns it needs; a missing column is a schema
error naming the offending column. Rendering never alters or reorders
the data: rows are plotted in file order, and the raw input lines are
kept verbatim for --dump-table.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


class SchemaError(Exception):
    pass


# columns each kind reads, in addition to the grouping column for sweeps
REQUIRED_COLUMNS = {
    "curve": ("batch", "throughput_rps", "latency_per_item_us"),
    "latency_sweep": ("axis", "value", "avg_latency_us_mean",
                      "avg_latency_us_p25", "avg_latency_us_p75"),
    "throughput_sweep": ("axis", "value", "throughput_rps_mean",
                         "throughput_rps_p25", "throughput_rps_p75"),
    "sla_sweep": ("axis", "value", "sla_violation_rate_mean",
                  "sla_violation_rate_p25", "sla_violation_rate_p75"),
    "cdf": ("latency_us", "cum_fraction"),
}

SWEEP_KINDS = ("latency_sweep", "throughput_sweep", "sla_sweep")

AXIS_LABELS = {
    "rate_qps": "arrival rate (requests/s)",
    "sla_target_us": "SLA target (µs)",
    "window_us": "batching window (µs)",
}


@dataclass
class Table:
    header: list[str]
    rows: list[dict]
    raw_lines: list[str]


def read_table(path: str, kind: str, group: str | None) -> Table:
    if kind not in REQUIRED_COLUMNS:
        raise SchemaError(f"unknown kind {kind!r}; expected one of "
                          f"{', '.join(sorted(REQUIRED_COLUMNS))}")
    with open(path, "r", encoding="utf-8", newline="") as f:
        text = f.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError(f"{path}: empty file") from None
    needed = list(REQUIRED_COLUMNS[kind])
    if kind in SWEEP_KINDS:
        needed.append(group or "policy")
    for col in needed:
        if col not in header:
            raise SchemaError(f"{path}: missing required column {col!r}")
    rows = [dict(zip(header, row)) for row in reader]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    raw_lines = [l for l in text.splitlines() if l.strip()]
    return Table(header=header, rows=rows, raw_lines=raw_lines)


def _num(row: dict, col: str, lineno: int):
    try:
        return float(row[col])
    except ValueError:
        raise SchemaError(
            f"row {lineno}: column {col!r} is not numeric: {row[col]!r}"
        ) from None


def _sweep_series(table: Table, group: str):
    """Group rows by the grouping column, preserving first-seen order and
    the row order within each group."""
    series: dict[str, list[dict]] = {}
    for row in table.rows:
        series.setdefault(row[group], []).append(row)
    return series


def render(table: Table, kind: str, out: str, group: str | None) -> None:
    group = group or "policy"
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    if kind == "curve":
        xs = [_num(r, "batch", i) for i, r in enumerate(table.rows, start=2)]
        thr = [_num(r, "throughput_rps", i) for i, r in enumerate(table.rows, start=2)]
        lat = [_num(r, "latency_per_item_us", i) for i, r in enumerate(table.rows, start=2)]
        ax.plot(xs, thr, marker="o", label="throughput")
        ax.set_xlabel("batch size")
        ax.set_ylabel("throughput (requests/s)")
        ax2 = ax.twinx()
        ax2.plot(xs, lat, marker="s", color="tab:red", label="latency per input")
        ax2.set_ylabel("latency per input (µs)")
        h1, l1 = ax.get_legend_handles_labels()
        h2, l2 = ax2.get_legend_handles_labels()
        ax.legend(h1 + h2, l1 + l2, loc="center right")
    elif kind == "cdf":
        xs = [_num(r, "latency_us", i) for i, r in enumerate(table.rows, start=2)]
        ys = [_num(r, "cum_fraction", i) for i, r in enumerate(table.rows, start=2)]
        ax.step(xs, ys, where="post")
        ax.set_xlabel("latency (µs)")
        ax.set_ylabel("cumulative fraction")
        ax.set_ylim(0, 1.05)
    else:
        metric = {
            "latency_sweep": ("avg_latency_us", "average latency (µs)"),
            "throughput_sweep": ("throughput_rps", "throughput (requests/s)"),
            "sla_sweep": ("sla_violation_rate", "SLA violation rate"),
        }[kind]
        stem, ylabel = metric
        axis_col = table.rows[0]["axis"]
        for label, rows in _sweep_series(table, group).items():
            xs = [_num(r, "value", i) for i, r in enumerate(rows, start=2)]
            mean = [_num(r, f"{stem}_mean", i) for i, r in enumerate(rows, start=2)]
            lo = [_num(r, f"{stem}_p25", i) for i, r in enumerate(rows, start=2)]
            hi = [_num(r, f"{stem}_p75", i) for i, r in enumerate(rows, start=2)]
            err = [[m - l for m, l in zip(mean, lo)],
                   [h - m for m, h in zip(mean, hi)]]
            ax.errorbar(xs, mean, yerr=err, marker="o", capsize=3, label=label)
        ax.set_xlabel(AXIS_LABELS.get(axis_col, axis_col))
        ax.set_ylabel(ylabel)
        ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)
