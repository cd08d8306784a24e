"""Speed/accuracy sweeps over particles, samples and training-set size."""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..config import RunConfig
from .pipeline import Environment, flight_frames, lockstep_experiments

log = logging.getLogger(__name__)

AXES = {"particles": "n_particles", "samples": "n_samples", "training_size": "training_frames"}
SUMMARY_COLUMNS = [
    "mean_abs_error_x", "mean_abs_error_y", "std_abs_error_x", "std_abs_error_y", "rmse",
    "mean_loop_ms", "median_loop_ms", "mean_histogram_ms", "mean_knn_ms", "mean_filter_ms", "mean_map_ms", "frequency_hz",
]


def training_subset(n_total: int, size: int) -> np.ndarray:
    """``size`` indices spread evenly over ``range(n_total)``."""
    if not 1 <= size <= n_total:
        raise ValueError(f"training size must lie in [1, {n_total}], got {size}")
    return np.unique(np.round(np.linspace(0, n_total - 1, size)).astype(int))


def _point_config(base: RunConfig, axis: str, value, n_available: int) -> RunConfig:
    if axis == "training_size" and value > n_available:
        raise ValueError(f"training size {value} exceeds the {n_available} recorded frames")
    return base.with_(**{AXES[axis]: value})


def benchmark_sweep(env: Environment, base_config: RunConfig, axis: str, values: Sequence,
                    seeds: Iterable[int] = range(5), flights_cache: dict | None = None) -> list[dict]:
    """One summary row per value, each statistic averaged over ``seeds``.

    Every seed renders its calibration and test flights once; all values
    along the axis see the same images and run in lockstep, frame by frame,
    so their loop times are measured under the same conditions.  Training-size points use evenly
    spaced subsets of the recorded map and recalibrate on them.
    ``flights_cache`` (seed -> flights) can be shared between sweeps.
    """
    if axis not in AXES:
        raise ValueError(f"axis must be one of {sorted(AXES)}, got {axis!r}")
    values = list(values)
    if not values:
        raise ValueError("no sweep values given")
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    n_available = len(env.training_set)
    configs = [_point_config(base_config, axis, v, n_available) for v in values]
    cache = {} if flights_cache is None else flights_cache
    per_point = [[] for _ in values]
    for seed in seeds:
        if seed not in cache:
            cache[seed] = flight_frames(env, base_config.with_(seed=seed))
        seeded = [cfg.with_(seed=seed) for cfg in configs]
        sets = None
        if axis == "training_size":
            sets = [env.training_set.subset(training_subset(n_available, c.training_frames)) for c in seeded]
        results = lockstep_experiments(env, seeded, sets, cache[seed])
        for i, result in enumerate(results):
            per_point[i].append(result.summary)
            log.info("%s=%s seed=%d: %.1f Hz", axis, values[i], seed, result.summary["frequency_hz"])
    rows = []
    for value, summaries in zip(values, per_point):
        row = {"axis": axis, "value": value, "seeds": len(summaries)}
        for col in SUMMARY_COLUMNS:
            row[col] = float(np.mean([s[col] for s in summaries]))
        # frequency of the averaged loop time, not the mean of per-seed rates
        row["frequency_hz"] = 1e3 / row["mean_loop_ms"]
        row["mean_abs_error"] = 0.5 * (row["mean_abs_error_x"] + row["mean_abs_error_y"])
        rows.append(row)
    return rows


def write_benchmark_csv(path, rows: Sequence[dict], header_lines=()) -> None:
    cols = ["axis", "value", "seeds", "mean_abs_error", *SUMMARY_COLUMNS]
    with open(Path(path), "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)
