"""CSV and key=value config handling for the command line."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .restore import ObservedSample

__all__ = ["fmt", "read_observed_csv", "write_csv", "read_keyvalue", "config_lines"]


def fmt(v) -> str:
    """17 significant digits for floats so values round-trip exactly."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def _data_lines(path: Path):
    with path.open(newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.startswith("#") or not line.strip():
                continue
            yield lineno, line


def read_observed_csv(path) -> ObservedSample:
    """Read ``u,x1..xq,y`` (observed, distorted values) into an ObservedSample."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"{path}: no such file")
    lines = list(_data_lines(path))
    if not lines:
        raise ValidationError(f"{path}: empty file")
    rows = list(csv.reader([ln for _, ln in lines]))
    header = [h.strip() for h in rows[0]]
    if "u" not in header:
        raise ValidationError(f"{path}: missing column 'u' (header must be u,x1..xq,y)")
    if "y" not in header:
        raise ValidationError(f"{path}: missing column 'y' (header must be u,x1..xq,y)")
    xcols = sorted((h for h in header if h.startswith("x") and h[1:].isdigit()), key=lambda h: int(h[1:]))
    if not xcols:
        raise ValidationError(f"{path}: missing column 'x1' (header must be u,x1..xq,y)")
    for r in range(1, len(xcols) + 1):
        if f"x{r}" not in header:
            raise ValidationError(f"{path}: missing column 'x{r}'")
    idx = [header.index("u")] + [header.index(c) for c in xcols] + [header.index("y")]
    data = np.empty((len(rows) - 1, len(idx)))
    for i, row in enumerate(rows[1:]):
        lineno = lines[i + 1][0]
        if len(row) != len(header):
            raise ValidationError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        for j, col in enumerate(idx):
            try:
                val = float(row[col])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: column {header[col]!r} is not a number: {row[col]!r}") from None
            if not math.isfinite(val):
                raise ValidationError(f"{path}:{lineno}: column {header[col]!r} is not finite")
            data[i, j] = val
    return ObservedSample(data[:, 0], data[:, 1:-1], data[:, -1])


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], config: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for line in config_lines(config or {}):
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_keyvalue(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; keys use dashes or underscores."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"{path}: no such file")
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def _cfg_value(v) -> str:
    # settings are echoed as typed, so the shortest round-trip form reads better
    if isinstance(v, (float, np.floating)) and math.isfinite(v):
        return repr(float(v))
    return fmt(v)


def config_lines(config: dict) -> list[str]:
    return [f"{k}={_cfg_value(v) if not isinstance(v, (list, tuple)) else ','.join(_cfg_value(x) for x in v)}"
            for k, v in sorted(config.items()) if v is not None]
