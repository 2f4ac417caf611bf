"""Run-directory output: tables, trajectories and the content-hash manifest."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError

MANIFEST = "manifest.json"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _num(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def _json_clean(obj):
    if isinstance(obj, dict):
        return {str(k): _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_json_clean(v) for v in obj]
    obj = _num(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps(obj) -> str:
    return json.dumps(_json_clean(obj), indent=2, sort_keys=True) + "\n"


def _cell(v):
    v = _num(v)
    if isinstance(v, bool):
        return str(int(v))
    return repr(v) if isinstance(v, float) else str(v)


class OutputWriter:
    """Writes every artifact of one run and records it for the manifest.

    All writes go through this object so the manifest stays consistent.
    """

    def __init__(self, root, fmt: str = "csv"):
        if fmt not in ("csv", "json"):
            raise ConfigError("format must be csv or json", "outputs.format")
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.fmt = fmt
        self.artifacts: list[str] = []

    def _register(self, path: Path) -> Path:
        self.artifacts.append(path.relative_to(self.root).as_posix())
        return path

    def table(self, name: str, columns, rows, fmt: str | None = None) -> Path:
        fmt = fmt or self.fmt
        rows = [list(r) for r in rows]
        if fmt == "csv":
            path = self.root / f"{name}.csv"
            with path.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(columns)
                for r in rows:
                    w.writerow([_cell(v) for v in r])
        else:
            path = self.root / f"{name}.json"
            path.write_text(dumps([dict(zip(columns, r)) for r in rows]))
        return self._register(path)

    def json(self, name: str, obj) -> Path:
        path = self.root / f"{name}.json"
        path.write_text(dumps(obj))
        return self._register(path)

    def text(self, name: str, content: str) -> Path:
        path = self.root / name
        path.write_text(content)
        return self._register(path)

    def trajectory(self, name: str, traj, binary: bool = False) -> list:
        out = []
        a = traj.cavity_amplitude
        cols = ["t", "re_a", "im_a", "n", "p", "s_minus_abs"]
        rows = zip(traj.times, a.real, a.imag, np.abs(a) ** 2, traj.inversion, traj.transverse_magnitude)
        out.append(self.table(name, cols, rows))
        if binary:
            out.append(self._register(traj.to_binary(self.root / f"{name}.bin")))
        return out

    def waveform(self, name: str, wf) -> Path:
        return self.table(name, ["t", "I", "Q"], zip(wf.times, wf.i, wf.q), fmt="csv")

    def figure(self, name: str, fig) -> Path:
        path = self.root / f"{name}.png"
        # fixed metadata keeps the PNG bytes reproducible
        fig.savefig(path, dpi=120, metadata={"Software": None})
        return self._register(path)

    def manifest(self, meta: dict) -> Path:
        entries = []
        for rel in sorted(set(self.artifacts)):
            p = self.root / rel
            entries.append({"path": rel, "sha256": sha256_file(p), "bytes": p.stat().st_size})
        path = self.root / MANIFEST
        path.write_text(dumps({**meta, "artifacts": entries}))
        return path


def read_table(path) -> dict:
    """Load a table written by :class:`OutputWriter` into column arrays."""
    path = Path(path)
    if path.suffix == ".json":
        records = json.loads(path.read_text())
        if not records:
            return {}
        cols = list(records[0].keys())
        return {c: np.array([np.nan if r[c] is None else r[c] for r in records], dtype=float) for c in cols}
    with path.open() as fh:
        reader = csv.reader(fh)
        cols = next(reader)
        data = [row for row in reader]
    return {c: np.array([float(r[k]) for r in data]) for k, c in enumerate(cols)}


def load_manifest(run_dir) -> dict:
    path = Path(run_dir) / MANIFEST
    if not path.is_file():
        raise ConfigError(f"missing manifest: {path}")
    return json.loads(path.read_text())


def find_table(run_dir, name: str) -> Path:
    for suffix in (".csv", ".json"):
        p = Path(run_dir) / f"{name}{suffix}"
        if p.is_file():
            return p
    raise ConfigError(f"run output {name!r} not found in {run_dir}")
