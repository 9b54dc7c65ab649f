"""Deterministic CSV/JSON output with atomic writes and a run manifest."""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path

__all__ = ["fmt", "atomic_write", "write_table", "Manifest", "sha256_file"]

_UMASK = os.umask(0)
os.umask(_UMASK)


def fmt(x) -> str:
    """Stable text form: shortest round-trip repr for floats, ``nan``/``inf`` spelled out."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    try:
        f = float(x)
    except (TypeError, ValueError):
        return str(x)
    if math.isnan(f):
        return "nan"
    if math.isinf(f):
        return "inf" if f > 0 else "-inf"
    return repr(f)


def atomic_write(path: Path, data: bytes):
    """Write to a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _json_value(x):
    if isinstance(x, float) and not math.isfinite(x):
        return fmt(x)
    return x


def write_table(path: Path, columns: list[str], units: list[str], rows, header: dict,
                json_mirror: bool = False) -> list[Path]:
    """CSV with a ``#`` header (metadata, then one ``# units:`` line) and optional JSON mirror.

    Returns the written paths.  Content depends only on the arguments, so
    identical inputs give byte-identical files.
    """
    if len(units) != len(columns):
        raise ValueError("one unit per column")
    rows = [list(r) for r in rows]
    lines = [f"# {k}: {v}" for k, v in header.items()]
    lines.append("# units: " + ",".join(units))
    lines.append(",".join(columns))
    lines += [",".join(fmt(x) for x in r) for r in rows]
    path = Path(path)
    atomic_write(path, ("\n".join(lines) + "\n").encode())
    written = [path]
    if json_mirror:
        doc = {
            "header": header,
            "columns": columns,
            "units": units,
            "rows": [[_json_value(x) for x in r] for r in rows],
        }
        jp = path.with_suffix(".json")
        atomic_write(jp, (json.dumps(doc, indent=1, sort_keys=False, default=fmt) + "\n").encode())
        written.append(jp)
    return written


class Manifest:
    """Record of one CLI run: fingerprint, version, timing and output checksums."""

    def __init__(self, command: str, fingerprint: str, version: str, config: dict):
        self.command = command
        self.fingerprint = fingerprint
        self.version = version
        self.config = config
        self.started = datetime.now(timezone.utc).isoformat()
        self.outputs: dict[str, str] = {}
        self.notes: dict = {}

    def add(self, paths):
        for p in paths:
            self.outputs[Path(p).name] = sha256_file(p)

    def write(self, out_dir: Path) -> Path:
        doc = {
            "command": self.command,
            "fingerprint": self.fingerprint,
            "version": self.version,
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "outputs": dict(sorted(self.outputs.items())),
            "notes": self.notes,
            "config": self.config,
        }
        path = Path(out_dir) / f"manifest_{self.command}.json"
        atomic_write(path, (json.dumps(doc, indent=1, default=fmt) + "\n").encode())
        return path
