"""CSV and JSON writers with versioned, stable schemas.

Every CSV starts with a ``#schema=farboot.<kind>/<version>`` line followed by
the column header. Floats use 17 significant digits so files round-trip
exactly; JSON is written with sorted keys. Identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from farboot.function_space import Grid, make_grid
from farboot.process_models import FunctionalSeries

__all__ = [
    "SCHEMA_VERSION",
    "fmt_float",
    "schema_line",
    "write_csv",
    "write_json",
    "write_series_csv",
    "read_series_csv",
    "write_predictions_csv",
    "write_draw",
    "write_distribution_samples",
    "write_mallows_csv",
    "write_consistency_csv",
]

SCHEMA_VERSION = 1


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    return str(v)


def schema_line(kind: str) -> str:
    return f"#schema=farboot.{kind}/{SCHEMA_VERSION}"


def write_csv(path: str | Path, kind: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(schema_line(kind) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n")
    return path


def _value_columns(m: int) -> list[str]:
    return [f"v{i}" for i in range(m)]


def write_series_csv(path: str | Path, values: NDArray, kind: str = "series") -> Path:
    """One row per time index t = 0..n+1, one column per grid point."""
    values = np.asarray(values)
    return write_csv(path, kind, ["t", *_value_columns(values.shape[1])], ([t, *row] for t, row in enumerate(values)))


def read_series_csv(path: str | Path) -> FunctionalSeries:
    """Read a series written by :func:`write_series_csv` (or the same layout without the schema line)."""
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln and not ln.startswith("#")]
    if len(lines) < 2:
        raise ValueError(f"{path}: no data rows")
    reader = csv.reader(lines)
    header = next(reader)
    if header[0] != "t":
        raise ValueError(f"{path}: first column must be 't'")
    rows = [[float(v) for v in r[1:]] for r in reader]
    values = np.array(rows)
    grid: Grid = make_grid(values.shape[1])
    return FunctionalSeries(grid, values)


def write_predictions_csv(path: str | Path, ids: Sequence[str], predictions: Sequence) -> Path:
    """Columns: target id, fallback flag, weight sum, neighbour count, then prediction values."""
    m = predictions[0].value.grid.m
    header = ["target", "fallback", "weight_sum", "neighbor_count", *_value_columns(m)]
    rows = (
        [tid, p.fallback, p.weight_sum, p.neighbor_count, *p.value.values] for tid, p in zip(ids, predictions)
    )
    return write_csv(path, "predictions", header, rows)


def write_draw(directory: str | Path, index: int, draw, seed: int) -> tuple[Path, Path]:
    """Pseudo-series CSV plus sidecar JSON with kappa, the index set and fallback counts."""
    directory = Path(directory)
    stem = f"draw_{index:04d}"
    csv_path = write_series_csv(directory / f"{stem}.csv", draw.values, kind="draw")
    meta = {
        "seed": seed,
        "draw": index,
        "n": draw.n,
        "kappa": draw.kappa,
        "index_set": draw.pool.index_set,
        "fallback_count": draw.fallback_count,
    }
    return csv_path, write_json(directory / f"{stem}.json", meta)


def write_distribution_samples(path: str | Path, report) -> Path:
    names = list(report.direction_names)
    header = ["n", "side", "index", "fhat", "fallback", *[f"stat_{d}" for d in names]]

    def rows():
        for rec in report.records:
            for side, stats, fhat, fb in (
                ("mc", rec.mc_stats, rec.mc_fhat, rec.mc_fallback),
                ("boot", rec.boot_stats, rec.boot_fhat, rec.boot_fallback),
            ):
                for i in range(stats.shape[0]):
                    yield [rec.n, side, i, fhat[i], fb[i], *stats[i]]

    return write_csv(path, "distribution_samples", header, rows())


def write_mallows_csv(path: str | Path, report) -> Path:
    rows = (
        [n, s, int(report.atoms[i]), report.d2[i, s]]
        for i, n in enumerate(report.n)
        for s in range(report.d2.shape[1])
    )
    return write_csv(path, "mallows", ["n", "seed_index", "atoms", "d2"], rows)


def write_consistency_csv(path: str | Path, report) -> Path:
    rows = (
        [n, s, int(report.probe_counts[i]), report.errors[i, s]]
        for i, n in enumerate(report.n)
        for s in range(report.errors.shape[1])
    )
    return write_csv(path, "consistency", ["n", "seed_index", "probes_used", "uniform_error"], rows)
