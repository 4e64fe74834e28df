"""Artifact writing: CSV/JSON files, config hashing and run manifests."""
from __future__ import annotations

import csv
import hashlib
import json
import platform
from importlib import metadata
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
# keys that change how a run executes but not what it produces
EXECUTION_KEYS = ("jobs", "out", "assert", "config")


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_plain)


def _plain(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialise {type(v).__name__}")


def config_hash(config):
    kept = {k: v for k, v in config.items() if k not in EXECUTION_KEYS}
    return hashlib.sha256(canonical_json(kept).encode()).hexdigest()


def fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, header, rows, chash):
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# config_hash={chash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_json(path, obj, chash=None):
    path = Path(path)
    if chash is not None:
        obj = {"config_hash": chash, **obj}
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, default=_plain) + "\n")
    return path


def read_csv(path):
    """Header and float rows of an artifact CSV (comment lines skipped)."""
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, np.array([[float(v) for v in row] for row in reader])


def versions():
    out = {"python": platform.python_version(), "numpy": np.__version__}
    for pkg in ("scipy", "artifact"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


def write_manifest(out_dir, command, config, artifacts):
    chash = config_hash(config)
    kept = {k: v for k, v in config.items() if k not in EXECUTION_KEYS}
    manifest = {"schema_version": SCHEMA_VERSION, "command": command, "config": kept,
                "config_hash": chash, "versions": versions(), "artifacts": sorted(artifacts)}
    return write_json(Path(out_dir) / "manifest.json", manifest)


def read_manifest(path):
    data = json.loads(Path(path).read_text())
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported manifest schema {data.get('schema_version')!r}")
    return data
