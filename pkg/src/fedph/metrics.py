"""Per-round metrics rows, CSV emission, and run summaries.

Every column except the wall-time ones is deterministic given (config,
seed).  Floats are written with repr() so CSVs round-trip exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields

import numpy as np

CSV_COLUMNS = (
    "method",
    "seed",
    "round",
    "mean_accuracy",
    "client_accuracies",
    "mean_supervised_loss",
    "mean_contrastive_loss",
    "uplink_values_per_client",
    "uplink_bytes_per_client",
    "downlink_bytes_per_client",
    "round_wall_ms",
    "encrypt_ms",
)

# nondeterministic columns, excluded from reproducibility comparisons
TIMING_COLUMNS = ("round_wall_ms", "encrypt_ms")


@dataclass(frozen=True)
class MetricsRow:
    method: str
    seed: int
    round: int
    mean_accuracy: float
    client_accuracies: tuple[float, ...]
    mean_supervised_loss: float
    mean_contrastive_loss: float
    uplink_values_per_client: float
    uplink_bytes_per_client: float
    downlink_bytes_per_client: float
    round_wall_ms: float
    encrypt_ms: float

    def __post_init__(self):
        for a in self.client_accuracies:
            if not math.isnan(a) and not 0.0 <= a <= 1.0:
                raise ValueError(f"accuracy {a} outside [0, 1]")


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def row_to_csv_fields(row: MetricsRow) -> list[str]:
    out = []
    for name in CSV_COLUMNS:
        value = getattr(row, name)
        if name == "client_accuracies":
            out.append(";".join(repr(float(a)) for a in value))
        else:
            out.append(_fmt(value))
    return out


def write_metrics_csv(rows: list[MetricsRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row_to_csv_fields(row))


def strip_timing_columns(csv_text: str) -> str:
    """Blank the wall-time columns so two runs can be compared byte-wise."""
    lines = csv_text.splitlines()
    reader = csv.reader(lines)
    header = next(reader)
    drop = [header.index(c) for c in TIMING_COLUMNS if c in header]
    out = [",".join(header)]
    for fields_ in reader:
        for i in drop:
            fields_[i] = ""
        out.append(",".join(fields_))
    return "\n".join(out) + "\n"


def final_round_accuracies(rows: list[MetricsRow]) -> dict[str, list[float]]:
    """Per method, last-round mean accuracy of each seed (seed-sorted)."""
    last: dict[tuple[str, int], MetricsRow] = {}
    for row in rows:
        key = (row.method, row.seed)
        if key not in last or row.round > last[key].round:
            last[key] = row
    by_method: dict[str, list[tuple[int, float]]] = {}
    for (method, seed), row in last.items():
        by_method.setdefault(method, []).append((seed, row.mean_accuracy))
    return {
        m: [acc for _, acc in sorted(pairs)] for m, pairs in by_method.items()
    }


def summarize(rows: list[MetricsRow]) -> str:
    """Mean +/- std of final-round accuracy per method, one line each."""
    lines = []
    for method, accs in sorted(final_round_accuracies(rows).items()):
        mean = float(np.mean(accs))
        std = float(np.std(accs))  # population std: a single seed reports 0
        lines.append(
            f"{method:10s} {mean * 100:.1f}% ± {std * 100:.2f}%  "
            f"({len(accs)} seed{'s' if len(accs) != 1 else ''})"
        )
    return "\n".join(lines)


def _values_equal(va, vb) -> bool:
    if isinstance(va, float) and isinstance(vb, float):
        return (math.isnan(va) and math.isnan(vb)) or va == vb
    if isinstance(va, tuple) and isinstance(vb, tuple):
        return len(va) == len(vb) and all(
            _values_equal(x, y) for x, y in zip(va, vb)
        )
    return va == vb


def rows_equal_ignoring_time(a: list[MetricsRow], b: list[MetricsRow]) -> bool:
    if len(a) != len(b):
        return False
    skip = set(TIMING_COLUMNS)
    return all(
        _values_equal(getattr(ra, f.name), getattr(rb, f.name))
        for ra, rb in zip(a, b)
        for f in fields(MetricsRow)
        if f.name not in skip
    )
