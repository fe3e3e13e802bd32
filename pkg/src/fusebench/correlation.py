"""Kendall-tau consistency analysis between SEA and the metric columns.

tau-b (tie corrected) is the default because rounded score tables tie
often; tau-a stays available for comparison. Lower-better columns (QCV)
are negated before correlating so that positive tau always reads as
"agrees with SEA". Baseline rows (visible/infrared sources) are excluded
from the correlation vectors unless explicitly included.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError
from .metrics import LOWER_BETTER, METRIC_ORDER

BASELINE_ROW_NAMES = frozenset({"visible", "infrared"})


@dataclass(frozen=True)
class ScoreTable:
    """Methods x columns matrix; every column aligned with the method list."""

    methods: tuple
    columns: dict

    def __post_init__(self):
        methods = tuple(str(m) for m in self.methods)
        if not methods:
            raise ContractError("ScoreTable needs at least one method row")
        if len(set(methods)) != len(methods):
            raise ContractError("ScoreTable method names must be unique")
        columns = {}
        for name, values in self.columns.items():
            values = tuple(float(v) for v in values)
            if len(values) != len(methods):
                raise ContractError(
                    f"column {name!r} has {len(values)} entries for {len(methods)} methods")
            if not all(math.isfinite(v) for v in values):
                raise ContractError(f"column {name!r} contains non-finite entries")
            columns[str(name)] = values
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "columns", columns)

    def column(self, name: str) -> tuple:
        if name not in self.columns:
            raise ContractError(f"score table has no column {name!r}")
        return self.columns[name]

    def select_rows(self, keep) -> "ScoreTable":
        index = [i for i, m in enumerate(self.methods) if keep(m)]
        if not index:
            raise ContractError("row selection left the score table empty")
        return ScoreTable(
            tuple(self.methods[i] for i in index),
            {name: tuple(values[i] for i in index) for name, values in self.columns.items()})

    def to_csv(self, path) -> None:
        """Full-precision CSV (repr floats round-trip exactly)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method"] + list(self.columns))
            for i, method in enumerate(self.methods):
                writer.writerow([method] + [repr(values[i]) for values in self.columns.values()])

    @classmethod
    def from_csv(cls, path) -> "ScoreTable":
        path = Path(path)
        if not path.is_file():
            raise ContractError(f"no such scores file: {path}")
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or not rows[0] or rows[0][0] != "method":
            raise ContractError(f"scores CSV must start with a 'method' column: {path}")
        header = rows[0][1:]
        methods, data = [], {name: [] for name in header}
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != len(header) + 1:
                raise ContractError(f"{path}:{lineno}: expected {len(header) + 1} fields")
            methods.append(row[0])
            for name, cell in zip(header, row[1:]):
                try:
                    data[name].append(float(cell))
                except ValueError as exc:
                    raise ContractError(f"{path}:{lineno}: bad number {cell!r}") from exc
        return cls(tuple(methods), {name: tuple(vals) for name, vals in data.items()})


@dataclass(frozen=True)
class CorrelationRow:
    """One dataset's tau per metric, plus the best-agreeing metric."""

    dataset: str
    taus: dict
    best_metric: str


def kendall_tau(x, y, variant: str = "b") -> float | None:
    """Kendall rank correlation.

    tau-b: (C-D)/sqrt((C+D+Tx)(C+D+Ty)) with Tx/Ty the pairs tied in x
    only / y only; returns None when all x or all y are tied (undefined).
    tau-a: (C-D)/(n(n-1)/2), no tie correction.
    """
    x = np.asarray([float(v) for v in x])
    y = np.asarray([float(v) for v in y])
    if x.shape != y.shape:
        raise ContractError(f"kendall_tau length mismatch: {x.size} vs {y.size}")
    n = x.size
    if n < 2:
        raise ContractError("kendall_tau needs at least 2 observations")
    if variant not in ("a", "b"):
        raise ContractError(f"unknown tau variant {variant!r}")

    upper = np.triu_indices(n, k=1)
    sx = np.sign(x[:, None] - x[None, :])[upper]
    sy = np.sign(y[:, None] - y[None, :])[upper]
    product = sx * sy
    concordant = int(np.count_nonzero(product > 0))
    discordant = int(np.count_nonzero(product < 0))
    ties_x = int(np.count_nonzero((sx == 0) & (sy != 0)))
    ties_y = int(np.count_nonzero((sy == 0) & (sx != 0)))

    if variant == "a":
        return (concordant - discordant) / (n * (n - 1) / 2.0)
    den_x = concordant + discordant + ties_x
    den_y = concordant + discordant + ties_y
    if den_x == 0 or den_y == 0:
        return None
    return (concordant - discordant) / math.sqrt(den_x * den_y)


def metric_direction_adjust(metric: str, values):
    """Negate lower-better columns so positive tau always means agreement."""
    if metric in LOWER_BETTER:
        return tuple(-float(v) for v in values)
    return tuple(float(v) for v in values)


def _is_baseline(method: str) -> bool:
    return method.strip().lower() in BASELINE_ROW_NAMES


def correlation_table(datasets, sea_column: str, metrics=METRIC_ORDER,
                      variant: str = "b", include_baselines: bool = False):
    """Per-dataset tau between the SEA column and each metric column, plus
    the cross-dataset mean row.

    `datasets` is a list of (name, ScoreTable). Returns a list of
    CorrelationRow ending with the "Mean" row.
    """
    if not datasets:
        raise ContractError("correlation_table needs at least one dataset")
    rows = []
    for name, table in datasets:
        if not include_baselines:
            table = table.select_rows(lambda m: not _is_baseline(m))
        sea = table.column(sea_column)
        taus = {}
        for metric in metrics:
            adjusted = metric_direction_adjust(metric, table.column(metric))
            tau = kendall_tau(sea, adjusted, variant=variant)
            if tau is None:
                raise ContractError(
                    f"dataset {name!r}: tau undefined for column {metric!r} "
                    "(all values tied)")
            taus[metric] = tau
        rows.append(CorrelationRow(name, taus, _argmax_metric(taus, metrics)))
    mean_taus = {m: sum(r.taus[m] for r in rows) / len(rows) for m in metrics}
    rows.append(CorrelationRow("Mean", mean_taus, _argmax_metric(mean_taus, metrics)))
    return rows


def _argmax_metric(taus: dict, metrics) -> str:
    """Largest tau; ties resolve to the earliest metric in canonical order."""
    best = max(taus.values())
    tied = [m for m in metrics if taus[m] == best]
    rank = {m: i for i, m in enumerate(METRIC_ORDER)}
    return min(tied, key=lambda m: (rank.get(m, len(rank)), m))
