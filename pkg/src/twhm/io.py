"""Snapshot and model file formats.

Snapshot files list present edges only::

    # twhm-snapshots v1 p=<p> n=<n>
    <t> <i> <j>

with 0-based ids, ``i < j``, rows sorted by ``(t, i, j)``.  Model files are
JSON; floats are written with ``repr`` (shortest round-trip form), so
parameters survive a write/read cycle bit for bit.
"""
from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import ParamVector, SnapshotSeries, pair_index

SNAPSHOT_MAGIC = "twhm-snapshots v1"
MODEL_FORMAT = "twhm-model v1"

_HEADER = re.compile(r"#\s*twhm-snapshots v1\s+p=(\d+)\s+n=(\d+)\s*")


class FormatError(ValueError):
    pass


def format_snapshots(series: SnapshotSeries) -> str:
    iu, ju = pair_index(series.p)
    lines = [f"# {SNAPSHOT_MAGIC} p={series.p} n={series.n}"]
    t_idx, pos = np.nonzero(series.edges)  # row-major: sorted by t, then pair order = (i, j)
    lines.extend(f"{t} {i} {j}" for t, i, j in zip(t_idx.tolist(), iu[pos].tolist(), ju[pos].tolist()))
    return "\n".join(lines) + "\n"


def parse_snapshots(text: str) -> SnapshotSeries:
    lines = text.splitlines()
    header = None
    rows = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if header is None:
                m = _HEADER.fullmatch(line)
                if m:
                    header = int(m.group(1)), int(m.group(2))
            continue
        if header is None:
            raise FormatError(f"line {lineno}: edge before the '# {SNAPSHOT_MAGIC}' header")
        parts = line.split()
        if len(parts) != 3:
            raise FormatError(f"line {lineno}: expected '<t> <i> <j>'")
        try:
            rows.append(tuple(int(x) for x in parts))
        except ValueError:
            raise FormatError(f"line {lineno}: non-integer field") from None
    if header is None:
        raise FormatError(f"missing '# {SNAPSHOT_MAGIC} p=<int> n=<int>' header")
    p, n = header
    if p < 2:
        raise FormatError("p must be at least 2")
    edges = np.zeros((n + 1, p * (p - 1) // 2), dtype=bool)
    for t, i, j in rows:
        if not (0 <= t <= n and 0 <= i < j < p):
            raise FormatError(f"edge ({t}, {i}, {j}) out of range or not i < j")
        pos = i * (2 * p - i - 1) // 2 + (j - i - 1)
        if edges[t, pos]:
            raise FormatError(f"duplicate edge ({t}, {i}, {j})")
        edges[t, pos] = True
    return SnapshotSeries(p, edges)


def write_snapshots(path: str | os.PathLike, series: SnapshotSeries) -> None:
    Path(path).write_text(format_snapshots(series), encoding="utf-8")


def read_snapshots(path: str | os.PathLike) -> SnapshotSeries:
    return parse_snapshots(Path(path).read_text(encoding="utf-8"))


@dataclass
class ModelFile:
    theta: ParamVector
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "format": MODEL_FORMAT,
            "p": self.theta.p,
            "beta0": [float(x) for x in self.theta.beta0],
            "beta1": [float(x) for x in self.theta.beta1],
            "meta": self.meta,
        }
        # json uses float.__repr__, the shortest string that round-trips
        return json.dumps(doc, indent=1, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ModelFile":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"model file is not valid JSON: {exc}") from None
        if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
            raise FormatError(f"not a '{MODEL_FORMAT}' document")
        try:
            theta = ParamVector(np.array(doc["beta0"], dtype=float), np.array(doc["beta1"], dtype=float))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad parameter arrays: {exc}") from None
        if doc.get("p") != theta.p:
            raise FormatError("p does not match the parameter arrays")
        return cls(theta, dict(doc.get("meta") or {}))


def write_model(path: str | os.PathLike, model: ModelFile) -> None:
    Path(path).write_text(model.to_json(), encoding="utf-8")


def read_model(path: str | os.PathLike) -> ModelFile:
    return ModelFile.from_json(Path(path).read_text(encoding="utf-8"))


def fit_timestamp() -> str | None:
    """ISO time from ``SOURCE_DATE_EPOCH`` if set, else ``None`` (keeps outputs reproducible)."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is None:
        return None
    from datetime import datetime, timezone

    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()


def write_csv(path: str | os.PathLike, rows: list[dict]) -> None:
    import csv

    keys: list[str] = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(v) for k, v in r.items()})


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer, np.bool_)):
        return v.item()
    return v
