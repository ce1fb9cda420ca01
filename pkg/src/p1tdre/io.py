"""Edge lists, parameter files and report serialisation."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import DataError, DuplicateEdge, ParseError, SelfLoop
from .model import Digraph, ParamVector

__all__ = [
    "parse_edge_list",
    "read_edge_list",
    "write_edge_list",
    "read_params",
    "write_params",
    "to_jsonable",
    "dump_json",
    "write_csv",
]

_HEADERS = {("src", "dst"), ("source", "target"), ("from", "to")}


def parse_edge_list(lines, n_nodes: int | None = None) -> Digraph:
    """Parse ``src,dst`` lines into a :class:`Digraph`.

    Blank lines and lines starting with ``#`` are skipped, and a first
    data line naming the columns (``src,dst``) is treated as a header.
    Node labels are non-negative integers; ``n`` is ``1 + max label``
    unless ``n_nodes`` is given.

    Raises
    ------
    ParseError, SelfLoop, DuplicateEdge
        Carrying the 1-based line number of the first offending line.
    """
    src, dst, seen = [], [], {}
    first = True
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if first and len(parts) == 2 and (parts[0].lower(), parts[1].lower()) in _HEADERS:
            first = False
            continue
        first = False
        if len(parts) != 2:
            raise ParseError(lineno, f"expected 'src,dst', got {line!r}")
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(lineno, f"non-integer node label in {line!r}") from None
        if a < 0 or b < 0:
            raise ParseError(lineno, "negative node label")
        if n_nodes is not None and max(a, b) >= n_nodes:
            raise ParseError(lineno, f"node label exceeds --nodes {n_nodes}")
        if a == b:
            raise SelfLoop(lineno)
        if (a, b) in seen:
            raise DuplicateEdge(lineno)
        seen[(a, b)] = lineno
        src.append(a)
        dst.append(b)
    n = n_nodes if n_nodes is not None else (1 + max(max(src), max(dst)) if src else 0)
    if n < 2:
        raise DataError("graph needs at least two nodes")
    return Digraph(n, np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64))


def read_edge_list(path, n_nodes: int | None = None) -> Digraph:
    with open(path, encoding="utf-8") as fh:
        return parse_edge_list(fh, n_nodes)


def write_edge_list(g: Digraph, path, header: bool = False) -> None:
    """Write edges in sorted order, one ``src,dst`` per line.

    The node count is not stored; isolated trailing nodes need ``--nodes``
    on the way back in.
    """
    src, dst = g.src, g.dst
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write("src,dst\n")
        fh.writelines(f"{a},{b}\n" for a, b in zip(src.tolist(), dst.tolist()))


def read_params(path) -> ParamVector:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc.msg})") from None
    try:
        return ParamVector.from_dict(data)
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: not a parameter file ({exc})") from None


def write_params(p: ParamVector, path) -> None:
    dump_json(p.to_dict(), path)


def to_jsonable(obj):
    """Recursively convert numpy values; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dump_json(obj, path=None) -> str:
    """Serialise with sorted keys; write to ``path`` when given."""
    text = json.dumps(to_jsonable(obj), indent=2, sort_keys=True)
    if path is not None:
        Path(path).write_text(text + "\n", encoding="utf-8")
    return text


def write_csv(rows: list[dict], path, columns=None) -> None:
    """Write dict rows; columns default to every key, in first-seen order."""
    if columns is None:
        columns = list(dict.fromkeys(k for row in rows for k in row))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _csv_cell(row.get(k)) for k in columns})


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else ""
    return v
