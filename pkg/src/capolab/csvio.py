"""CSV emission. Floats are written with ``repr`` so reruns are byte-identical."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_table(path, table) -> Path:
    """A [S, A] table (theta or q) as ``s,a,value`` rows."""
    table = np.asarray(table, dtype=float)
    return write_csv(path, ["s", "a", "value"],
                     ([s, a, table[s, a]] for s in range(table.shape[0])
                      for a in range(table.shape[1])))


def read_table(path) -> np.ndarray:
    _, rows = read_csv(path)
    S = 1 + max(int(r[0]) for r in rows)
    A = 1 + max(int(r[1]) for r in rows)
    out = np.zeros((S, A))
    for s, a, v in rows:
        out[int(s), int(a)] = float(v)
    return out


def write_params(path, params: dict) -> Path:
    """Named parameter blocks as ``block,index,value`` rows (row-major flat index)."""
    def rows():
        for name, arr in params.items():
            for i, v in enumerate(np.asarray(arr, dtype=float).ravel()):
                yield [name, i, v]
    return write_csv(path, ["block", "index", "value"], rows())


def read_params(path, shapes: dict) -> dict:
    _, rows = read_csv(path)
    flat = {k: np.zeros(int(np.prod(s))) for k, s in shapes.items()}
    for name, i, v in rows:
        flat[name][int(i)] = float(v)
    return {k: flat[k].reshape(s) for k, s in shapes.items()}
