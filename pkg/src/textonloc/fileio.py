"""File formats: dictionary JSON, dataset CSV, loss-field exports and run logs.

CSV files may open with ``# key: value`` comment lines; readers skip them.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .images import write_pgm
from .knn import TrainingSet
from .mapeval import LossField, LossParams
from .textons import N_CHANNELS, TextonDictionary

SCHEMA_VERSION = 1


class FormatError(ValueError):
    """A file exists but does not hold what its reader expects."""


def header_lines(command: str, flags: dict) -> list[str]:
    """Comment lines recording the schema and the exact flags behind a file."""
    return [
        f"schema_version: {SCHEMA_VERSION}",
        f"command: {command}",
        "flags: " + json.dumps(flags, sort_keys=True, default=str),
    ]


def read_header(path) -> dict:
    """``key: value`` pairs from the leading comment lines of a CSV."""
    out = {}
    with open(Path(path)) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition(":")
            out[key.strip()] = value.strip()
    if "flags" in out:
        out["flags"] = json.loads(out["flags"])
    return out


def _data_rows(path) -> list[list[str]]:
    with open(Path(path), newline="") as fh:
        return list(csv.reader(line for line in fh if not line.startswith("#")))


def _write_comments(fh, lines) -> None:
    for line in lines:
        fh.write(f"# {line}\n")


def save_dictionary(path, dictionary: TextonDictionary, flags: dict | None = None) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "patch_width": dictionary.patch_width,
        "patch_height": dictionary.patch_height,
        "channels": N_CHANNELS,
        "textons": dictionary.textons.tolist(),
    }
    if flags is not None:
        doc["flags"] = flags
    Path(path).write_text(json.dumps(doc) + "\n")


def load_dictionary(path) -> TextonDictionary:
    try:
        doc = json.loads(Path(path).read_text())
        if doc.get("channels", N_CHANNELS) != N_CHANNELS:
            raise FormatError(f"{path}: expected {N_CHANNELS} channels, got {doc['channels']}")
        return TextonDictionary(np.array(doc["textons"], dtype=float),
                                int(doc["patch_width"]), int(doc["patch_height"]))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: not a texton dictionary ({exc})") from exc


def write_dataset_csv(path, ts: TrainingSet, comments: Sequence[str] = ()) -> None:
    with open(Path(path), "w", newline="") as fh:
        _write_comments(fh, comments)
        w = csv.writer(fh)
        w.writerow(["x", "y", *(f"h_{i}" for i in range(ts.n_bins))])
        for (x, y), h in zip(ts.positions, ts.histograms):
            w.writerow([repr(float(x)), repr(float(y)), *(repr(float(v)) for v in h)])


def read_dataset_csv(path) -> TrainingSet:
    rows = _data_rows(path)
    if not rows:
        raise FormatError(f"{path}: empty dataset file")
    header, body = rows[0], rows[1:]
    bins = [c for c in header if c.startswith("h_")]
    if header[:2] != ["x", "y"] or bins != [f"h_{i}" for i in range(len(bins))] or not bins:
        raise FormatError(f"{path}: expected columns x,y,h_0,...; got {','.join(header)}")
    if not body:
        raise FormatError(f"{path}: dataset has no rows")
    try:
        data = np.array([[float(v) for v in r] for r in body])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != len(header):
        raise FormatError(f"{path}: ragged rows")
    return TrainingSet(data[:, 2:], data[:, :2])


def write_loss_field(prefix, field: LossField, params: LossParams, comments: Sequence[str] = ()) -> list[Path]:
    """``<prefix>.csv`` (one row per y cell, NaN for no data), ``.json`` sidecar and ``.pgm`` heatmap."""
    prefix = Path(prefix)
    csv_path, json_path, pgm_path = (prefix.with_suffix(s) for s in (".csv", ".json", ".pgm"))
    with open(csv_path, "w", newline="") as fh:
        _write_comments(fh, comments)
        w = csv.writer(fh)
        for row in field.grid:
            w.writerow([repr(float(v)) for v in row])
    sidecar = {
        "schema_version": SCHEMA_VERSION,
        "bounds": asdict(field.bounds),
        "cell_size": field.cell_size,
        "smoothing_sigma": field.smoothing_sigma,
        "sigma_x": params.sigma_x,
        "sigma_y": params.sigma_y,
        "shape": list(field.grid.shape),
        "rows": "y ascending from bounds.y_min",
    }
    json_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    # the image's top row is the largest y so the heatmap reads like a map
    write_pgm(pgm_path, field.grid[::-1])
    return [csv_path, json_path, pgm_path]


def write_frames_csv(path, records, comments: Sequence[str] = ()) -> None:
    """Per-frame log of a localization run."""
    with open(Path(path), "w", newline="") as fh:
        _write_comments(fh, comments)
        w = csv.writer(fh)
        k = len(records[0].z) if records else 0
        w.writerow(["tick", "truth_x", "truth_y", "estimate_x", "estimate_y", "std_x", "std_y",
                    *(f"z{j}_{a}" for j in range(k) for a in "xy"), *(f"d{j}" for j in range(k)),
                    "t_histogram_ms", "t_knn_ms", "t_filter_ms", "t_map_ms"])
        for r in records:
            w.writerow([r.tick, *r.truth, *r.estimate, *r.uncertainty, *np.ravel(r.z), *r.z_distances,
                        *(1e3 * t for t in (r.t_histogram, r.t_knn, r.t_filter, r.t_map))])


def read_frames_csv(path) -> list[dict]:
    rows = _data_rows(path)
    header, body = rows[0], rows[1:]
    return [dict(zip(header, map(float, r))) for r in body]


def write_summary_csv(path, summary: dict, comments: Sequence[str] = ()) -> None:
    with open(Path(path), "w", newline="") as fh:
        _write_comments(fh, comments)
        w = csv.writer(fh)
        w.writerow(list(summary))
        w.writerow(list(summary.values()))
