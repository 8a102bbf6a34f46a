"""JSON/CSV artifact I/O: datasets, estimation reports, run manifests."""

from __future__ import annotations

import csv
import json
import platform
import time
from pathlib import Path

import numpy as np

from .hardware import Dataset


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


def save_dataset(dataset: Dataset, path) -> None:
    """Dataset schema: {meta: {...}, pulses: [[...]], counts|probs: [[...]]}."""
    payload = {"meta": dataset.meta, "pulses": dataset.pulses.tolist()}
    if dataset.exact:
        payload["probs"] = dataset.observations.tolist()
    else:
        payload["counts"] = dataset.observations.astype(int).tolist()
    Path(path).write_text(json.dumps(payload))


def load_dataset(path) -> Dataset:
    payload = json.loads(Path(path).read_text())
    unknown = set(payload) - {"meta", "pulses", "counts", "probs"}
    if unknown:
        raise ConfigError(f"unknown dataset fields: {sorted(unknown)}")
    pulses = np.asarray(payload["pulses"], dtype=float)
    meta = payload.get("meta", {})
    if "probs" in payload:
        return Dataset(pulses, np.asarray(payload["probs"], dtype=float), 0, meta)
    counts = np.asarray(payload["counts"], dtype=np.int64)
    return Dataset(pulses, counts, int(meta.get("S", counts[0].sum())), meta)


def save_json(obj: dict, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, default=_coerce))


def _coerce(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    raise TypeError(f"not JSON-serializable: {type(value)}")


def write_csv(path, header: list[str], rows: list[tuple]) -> None:
    """Every scenario CSV has a header row; rows are written in grid order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_manifest(out_dir, scenario: str, config: dict, seed: int, wall_time: float) -> None:
    save_json(
        {
            "scenario": scenario,
            "seed": seed,
            "config": config,
            "wall_time_s": wall_time,
            "finished_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        Path(out_dir) / "run_manifest.json",
    )
