"""Methods x metrics tables, competition ranks and their average.

Ranking is descending (all seven metrics are higher-is-better) with
minimum-rank tie handling: tied values share the best position, so a
two-way tie at the top yields two rank-1 rows. The average rank is the
mean of the seven per-metric ranks (lower is better).

Published benchmark score tables ship with the package for demos and
regression tests; load them with ``load_benchmark``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .metrics import METRIC_NAMES

BENCHMARKS = ("msrs", "m3fd", "fmb", "mri_ct", "mri_pet", "mri_spect")


@dataclass
class MetricTable:
    """Scores of several methods on one test set."""

    methods: list[str]
    metrics: list[str]
    values: np.ndarray  # [n_methods, n_metrics]
    printed_avg_rank: np.ndarray | None = None  # as published, if known

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.methods), len(self.metrics)):
            raise ValueError("values shape does not match methods x metrics")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("metric table contains non-numeric cells")


def competition_ranks(values: np.ndarray) -> np.ndarray:
    """Per-column descending ranks; ties get the minimum (best) rank."""
    values = np.asarray(values, dtype=np.float64)
    ranks = np.empty(values.shape, dtype=np.int64)
    for j in range(values.shape[1]):
        col = values[:, j]
        ranks[:, j] = 1 + (col[None, :] > col[:, None]).sum(axis=1)
    return ranks


def avg_rank(table: MetricTable) -> np.ndarray:
    """Mean of the per-metric competition ranks for every method."""
    return competition_ranks(table.values).mean(axis=1)


def rank_report(table: MetricTable) -> list[dict]:
    """Row dicts with per-metric ranks and the average, best first."""
    ranks = competition_ranks(table.values)
    avg = ranks.mean(axis=1)
    rows = []
    for i, name in enumerate(table.methods):
        row = {"method": name}
        row.update({m: int(r) for m, r in zip(table.metrics, ranks[i])})
        row["avg_rank"] = round(float(avg[i]), 6)
        rows.append(row)
    rows.sort(key=lambda r: r["avg_rank"])
    return rows


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------


def load_table_csv(path) -> MetricTable:
    """Read a methods x metrics CSV (header row, method names first).

    A trailing ``AvgRank`` column, when present, is kept aside as the
    published average rank rather than treated as a metric.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    metric_cols = header[1:]
    printed = None
    if metric_cols and metric_cols[-1].lower().replace(".", "").replace("_", "") == "avgrank":
        metric_cols = metric_cols[:-1]
        printed = []
    methods, values = [], []
    for row in rows:
        methods.append(row[0])
        cells = row[1:]
        try:
            nums = [float(c) for c in cells]
        except ValueError as exc:
            raise ValueError(f"{path}: non-numeric cell in row {row[0]!r}: {exc}") from None
        if printed is not None:
            values.append(nums[:-1])
            printed.append(nums[-1])
        else:
            values.append(nums)
    return MetricTable(
        methods,
        metric_cols,
        np.array(values),
        printed_avg_rank=None if printed is None else np.array(printed),
    )


def save_rank_csv(path, table: MetricTable):
    rows = rank_report(table)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", *table.metrics, "avg_rank"])
        for row in rows:
            writer.writerow([row["method"], *(row[m] for m in table.metrics), f"{row['avg_rank']:.2f}"])


def load_benchmark(name: str) -> MetricTable:
    """One of the bundled published score tables (see BENCHMARKS)."""
    if name not in BENCHMARKS:
        raise ValueError(f"unknown benchmark {name!r}; choose from {BENCHMARKS}")
    ref = resources.files("mambafusion").joinpath(f"benchdata/{name}.csv")
    with resources.as_file(ref) as p:
        table = load_table_csv(p)
    if list(table.metrics) != list(METRIC_NAMES):
        raise ValueError(f"benchmark {name} has unexpected metric columns {table.metrics}")
    return table
