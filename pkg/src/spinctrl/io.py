"""Result serialization: CSV data files, JSON sidecars, and output manifests.

CSV files hold only the numeric series (fixed x,y,y_stderr column order,
'.' decimal point, repr round-trip precision) so reruns with the same config
and seed are byte-identical. Everything environment-dependent, including
timestamps, lives in the JSON sidecar.
"""
from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .experiments import ExperimentResult

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1


def result_to_csv(result: ExperimentResult) -> str:
    """Render the numeric series with full float round-trip precision."""
    lines = ["x,y,y_stderr"]
    stderr = result.y_stderr
    for i in range(len(result.x)):
        s = repr(float(stderr[i])) if stderr is not None else ""
        lines.append(f"{repr(float(result.x[i]))},{repr(float(result.y[i]))},{s}")
    return "\n".join(lines) + "\n"


def result_sidecar(result: ExperimentResult) -> dict:
    """JSON-serializable snapshot of everything but the numeric series."""
    return {
        "label": result.label,
        "x_unit": result.x_unit,
        "y_unit": result.y_unit,
        "metadata": result.metadata,
        "created": result.created,
    }


def write_result(result: ExperimentResult, out_dir, stem: str,
                 force: bool = False) -> tuple[Path, Path]:
    """Write {stem}.csv and {stem}.json under out_dir; returns both paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    json_path = out_dir / f"{stem}.json"
    for path in (csv_path, json_path):
        if path.exists() and not force:
            raise FileExistsError(f"{path} exists; pass force=True to overwrite")
    csv_path.write_text(result_to_csv(result), encoding="utf-8", newline="")
    json_path.write_text(
        json.dumps(result_sidecar(result), indent=2, sort_keys=True) + "\n",
        encoding="utf-8", newline="")
    return csv_path, json_path


def read_result_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Load an x,y,y_stderr CSV back into arrays (stderr None if blank)."""
    raw = Path(path).read_text(encoding="utf-8").strip().split("\n")
    if raw[0] != "x,y,y_stderr":
        raise ValueError(f"unexpected CSV header {raw[0]!r} in {path}")
    x, y, err = [], [], []
    blank = False
    for line in raw[1:]:
        fields = line.split(",")
        x.append(float(fields[0]))
        y.append(float(fields[1]))
        if fields[2] == "":
            blank = True
        else:
            err.append(float(fields[2]))
    stderr = None if blank else np.asarray(err)
    return np.asarray(x), np.asarray(y), stderr


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def update_manifest(out_dir, command: str, inputs: dict, outputs) -> Path:
    """Append a manifest entry hashing the run's input and output files.

    inputs maps logical names to paths of files consumed (configs); entries
    for missing paths record a null hash. outputs is an iterable of paths
    produced by the run. Rewrites manifest.json in sorted-key form.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / MANIFEST_NAME
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    else:
        manifest = {"version": MANIFEST_VERSION, "entries": []}
    entry = {
        "command": command,
        "created": datetime.now(timezone.utc).isoformat(),
        "inputs": {
            name: (sha256_file(p) if p is not None and Path(p).exists() else None)
            for name, p in inputs.items()
        },
        "outputs": {Path(p).name: sha256_file(p) for p in outputs},
    }
    manifest["entries"].append(entry)
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
        encoding="utf-8", newline="")
    return manifest_path
