"""Plain-text and binary formats for matrices and tensors.

Text matrix: first line ``rows cols``, then the entries in row-major order.
Text tensor: first line ``n N_1 ... N_n``, then the entries mode-1-fastest.
Whitespace or commas separate values in text files.

Binary matrix (``.bin``): two little-endian int64 values ``rows cols``
followed by float64 entries in column-major order.
"""

from pathlib import Path

import numpy as np

from .exceptions import ShapeError
from .tensor import devectorize, vectorize


def _numbers(path):
    text = Path(path).read_text().replace(",", " ")
    return text.split()


def _fmt(v):
    return repr(float(v))


def read_matrix(path):
    path = Path(path)
    if path.suffix == ".bin":
        raw = path.read_bytes()
        rows, cols = np.frombuffer(raw[:16], dtype="<i8")
        vals = np.frombuffer(raw[16:], dtype="<f8")
        if vals.size != rows * cols:
            raise ShapeError(f"{path}: expected {rows * cols} values, found {vals.size}")
        return vals.reshape((int(rows), int(cols)), order="F").copy()
    tok = _numbers(path)
    if len(tok) < 2:
        raise ShapeError(f"{path}: missing header")
    rows, cols = int(tok[0]), int(tok[1])
    vals = np.array([float(t) for t in tok[2:]])
    if vals.size != rows * cols:
        raise ShapeError(f"{path}: expected {rows * cols} values, found {vals.size}")
    return vals.reshape(rows, cols)


def write_matrix(path, m):
    path = Path(path)
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError("expected a 2-D array")
    if path.suffix == ".bin":
        header = np.array(m.shape, dtype="<i8").tobytes()
        path.write_bytes(header + np.ravel(m, order="F").astype("<f8").tobytes())
        return
    lines = [f"{m.shape[0]} {m.shape[1]}"]
    lines += [" ".join(_fmt(v) for v in row) for row in m]
    path.write_text("\n".join(lines) + "\n")


def read_tensor(path):
    tok = _numbers(path)
    if not tok:
        raise ShapeError(f"{path}: missing header")
    n = int(tok[0])
    shape = tuple(int(t) for t in tok[1:1 + n])
    vals = np.array([float(t) for t in tok[1 + n:]])
    return devectorize(vals, shape)


def write_tensor(path, x):
    x = np.asarray(x, dtype=np.float64)
    head = " ".join(str(v) for v in (x.ndim,) + x.shape)
    body = " ".join(_fmt(v) for v in vectorize(x))
    Path(path).write_text(head + "\n" + body + "\n")
