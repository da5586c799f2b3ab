"""File formats: spike trains (packed binary and sparse CSV), configs, atomic writes.

Binary spike layout (little-endian)::

    offset  size  field
    0       4     magic b"SPKT"
    4       1     format version (1)
    5       3     reserved, zero
    8       4     height   (uint32)
    12      4     width    (uint32)
    16      4     steps    (uint32)
    20      ...   events, step-major then row then column, packed 8 per byte
                  most significant bit first; trailing pad bits are zero

Sparse CSV layout: a ``# spikes height=H width=W steps=T`` line, a
``site,step`` header, then one row per spike with ``site = row * W + col``,
ordered by step then site.
"""

from __future__ import annotations

import csv
import io
import json
import os
import re
import struct
import tempfile
from dataclasses import fields
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, ParseError
from .plasticity import PatternExperimentConfig, StdpParams
from .spikes import NeuronParams, SpikeTrainGrid

MAGIC = b"SPKT"
VERSION = 1
_HEADER = struct.Struct("<4sB3xIII")
_CSV_META = re.compile(r"#\s*spikes\s+height=(\d+)\s+width=(\d+)\s+steps=(\d+)\s*$")


def spikes_to_bytes(grid: SpikeTrainGrid) -> bytes:
    h, w = grid.shape
    header = _HEADER.pack(MAGIC, VERSION, h, w, grid.steps)
    return header + np.packbits(grid.events.reshape(-1)).tobytes()


def spikes_from_bytes(data: bytes) -> SpikeTrainGrid:
    if len(data) < _HEADER.size:
        raise ParseError("truncated spike file header")
    magic, version, h, w, steps = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ParseError(f"unsupported spike format version {version}")
    n = h * w * steps
    body = np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size)
    if body.size != (n + 7) // 8:
        raise ParseError(f"expected {(n + 7) // 8} event bytes, found {body.size}")
    bits = np.unpackbits(body)
    if bits[n:].any():
        raise ParseError("nonzero padding bits")
    return SpikeTrainGrid(bits[:n].reshape(steps, h, w))


def spikes_to_csv(grid: SpikeTrainGrid) -> str:
    h, w = grid.shape
    buf = io.StringIO()
    buf.write(f"# spikes height={h} width={w} steps={grid.steps}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["site", "step"])
    steps, sites = np.nonzero(grid.flat())
    writer.writerows(zip(sites.tolist(), steps.tolist()))
    return buf.getvalue()


def spikes_from_csv(text: str) -> SpikeTrainGrid:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty spike CSV")
    meta = _CSV_META.match(lines[0].strip())
    if not meta:
        raise ParseError("first line must be '# spikes height=H width=W steps=T'", 1)
    h, w, steps = (int(x) for x in meta.groups())
    if len(lines) < 2 or lines[1].strip().replace(" ", "") != "site,step":
        raise ParseError("expected header 'site,step'", 2)
    events = np.zeros((steps, h * w), dtype=np.uint8)
    for lineno, line in enumerate(lines[2:], 3):
        if not line.strip():
            continue
        try:
            site, step = (int(x) for x in line.split(","))
        except ValueError:
            raise ParseError(f"malformed event row {line!r}", lineno) from None
        if not (0 <= site < h * w and 0 <= step < steps):
            raise ParseError(f"event ({site}, {step}) out of range", lineno)
        if events[step, site]:
            raise ParseError(f"duplicate event ({site}, {step})", lineno)
        events[step, site] = 1
    return SpikeTrainGrid(events.reshape(steps, h, w))


def load_spikes(path) -> SpikeTrainGrid:
    """Read a spike train, choosing the format from the file's first bytes."""
    data = Path(path).read_bytes()
    if data.startswith(MAGIC):
        return spikes_from_bytes(data)
    try:
        return spikes_from_csv(data.decode("utf-8"))
    except UnicodeDecodeError:
        raise ParseError(f"{path}: neither a binary spike file nor UTF-8 CSV") from None


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg})", exc.lineno) from None


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _section(data, cls, name):
    raw = data.get(name, {})
    if not isinstance(raw, dict):
        raise ConfigError(f"'{name}' must be a table")
    allowed = {f.name for f in fields(cls)}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in '{name}': {sorted(unknown)}")
    return cls(**raw)


PATTERN_CONFIG_KEYS = {
    "n_afferents", "pattern_steps", "pattern_fraction", "background_rate",
    "background_steps", "presentations", "eval_presentations", "seed",
    "neuron", "stdp", "pattern_file",
}


def pattern_config_from_dict(data, base_dir=None, seed=None) -> PatternExperimentConfig:
    """Build a :class:`PatternExperimentConfig` from a parsed config document.

    Every key is optional; ``pattern_file`` (relative to ``base_dir``) loads
    a fixed pattern instead of drawing one. ``seed`` overrides the file.
    """
    if not isinstance(data, dict):
        raise ConfigError("config must be a table of key-value pairs")
    unknown = set(data) - PATTERN_CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {k: v for k, v in data.items() if k not in ("neuron", "stdp", "pattern_file")}
    kwargs["neuron"] = _section(data, NeuronParams, "neuron")
    kwargs["stdp"] = _section(data, StdpParams, "stdp")
    if "pattern_file" in data:
        path = Path(base_dir or ".") / data["pattern_file"]
        kwargs["pattern"] = load_spikes(path)
    if seed is not None:
        kwargs["seed"] = seed
    return PatternExperimentConfig(**kwargs)


def load_pattern_config(path, seed=None) -> PatternExperimentConfig:
    return pattern_config_from_dict(load_json(path), Path(path).parent, seed=seed)


def rows_to_csv(rows, columns) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(row.get(k, "")) for k in columns})
    return buf.getvalue()


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def rows_to_text(rows, columns) -> str:
    """Aligned-column plain-text table."""
    table = [list(columns)] + [[str(_cell(r.get(c, ""))) for c in columns] for r in rows]
    widths = [max(len(line[i]) for line in table) for i in range(len(columns))]
    return "".join(
        "  ".join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip() + "\n"
        for line in table
    )


class ArtifactWriter:
    """Stage artifacts in memory, then write them all via temp file + rename.

    If any write fails, files already renamed by this commit are removed so
    that no partial set of artifacts is left behind.
    """

    def __init__(self):
        self._staged = []

    def stage(self, path, data):
        self._staged.append((Path(path), data.encode() if isinstance(data, str) else data))

    def commit(self):
        written, temps = [], []
        try:
            for path, data in self._staged:
                path.parent.mkdir(parents=True, exist_ok=True)
                fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
                temps.append(tmp)
                os.chmod(tmp, 0o644)
                with os.fdopen(fd, "wb") as fh:
                    fh.write(data)
            for (path, _), tmp in zip(self._staged, temps):
                os.replace(tmp, path)
                written.append(path)
        except BaseException:
            for tmp in temps:
                if os.path.exists(tmp):
                    os.unlink(tmp)
            for path in written:
                path.unlink(missing_ok=True)
            raise
        return [str(p) for p in written]
