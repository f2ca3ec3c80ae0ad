"""JSON encoding of matrices, colligations, row contractions and reports.

A matrix is ``{"rows": r, "cols": c, "data": [[re, im], ...]}`` with ``r * c``
entries in row-major order.  A colligation file is
``{"d", "n", "p", "q", "A": [...], "B": [...], "C", "D"}`` and a row
contraction file is ``{"d", "n", "T": [...]}``.  Reports are written with
sorted keys, ``-0.0`` folded to ``0.0`` and non-finite floats as strings, so
identical inputs give byte-identical output.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .colligation import Colligation
from .errors import BallModelError, InputError
from .rowmodel import RowContraction
from .series import CommSeries, NcSeries


# ---------------------------------------------------------------------------
# encoding


def _real(x: float) -> float | str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return 0.0 if x == 0.0 else x


def encode_matrix(M) -> dict:
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2:
        A = A.reshape(1, -1) if A.ndim < 2 else A
    return {
        "rows": int(A.shape[0]),
        "cols": int(A.shape[1]),
        "data": [[_real(z.real), _real(z.imag)] for z in A.reshape(-1)],
    }


def encode_colligation(U: Colligation) -> dict:
    return {
        "d": U.d, "n": U.n, "p": U.p, "q": U.q,
        "A": [encode_matrix(a) for a in U.A],
        "B": [encode_matrix(b) for b in U.B],
        "C": encode_matrix(U.C),
        "D": encode_matrix(U.D),
    }


def encode_row_contraction(T: RowContraction) -> dict:
    return {"d": T.d, "n": T.n, "T": [encode_matrix(t) for t in T.T]}


def _key(k) -> str:
    if isinstance(k, tuple):
        return ",".join(str(x) for x in k)
    return str(k)


def encode_comm_series(f: CommSeries) -> dict:
    return {"d": f.d, "order": f.order,
            "coeffs": [{"index": list(m), "value": encode_matrix(c)} for m, c in f.items()]}


def encode_nc_series(f: NcSeries) -> dict:
    return {"d": f.d, "order": f.order,
            "coeffs": [{"word": "".join(str(x) for x in v), "value": encode_matrix(c)} for v, c in f.items()]}


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy values, matrices and tuples to plain JSON types."""
    if isinstance(obj, dict):
        return {_key(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if obj.ndim == 2:
            return encode_matrix(obj)
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _real(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_real(obj.real), _real(obj.imag)]
    if isinstance(obj, Colligation):
        return encode_colligation(obj)
    if isinstance(obj, RowContraction):
        return encode_row_contraction(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# decoding


def _fail(where: str, msg: str):
    raise InputError(f"{where}: {msg}")


def _count(obj: dict, key: str, where: str) -> int:
    if key not in obj:
        _fail(where, f"missing key '{key}'")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        _fail(f"{where}.{key}", "expected a nonnegative integer")
    return v


def _number(x, where: str) -> complex:
    if isinstance(x, bool):
        _fail(where, "expected a number or [re, im] pair")
    if isinstance(x, (int, float)):
        z = complex(x)
    elif isinstance(x, list) and len(x) == 2 and all(isinstance(t, (int, float)) and not isinstance(t, bool)
                                                     for t in x):
        z = complex(x[0], x[1])
    else:
        _fail(where, "expected a number or [re, im] pair")
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        _fail(where, "entry is not finite")
    return z


def decode_matrix(obj, where: str = "$", rows: int | None = None, cols: int | None = None) -> np.ndarray:
    if not isinstance(obj, dict):
        _fail(where, "expected a matrix object {rows, cols, data}")
    r = _count(obj, "rows", where)
    c = _count(obj, "cols", where)
    data = obj.get("data")
    if not isinstance(data, list):
        _fail(f"{where}.data", "expected a list")
    if len(data) != r * c:
        _fail(f"{where}.data", f"expected {r * c} entries, got {len(data)}")
    vals = [_number(x, f"{where}.data[{i}]") for i, x in enumerate(data)]
    M = np.array(vals, dtype=complex).reshape(r, c)
    if rows is not None and r != rows:
        _fail(where, f"expected {rows} rows, got {r}")
    if cols is not None and c != cols:
        _fail(where, f"expected {cols} columns, got {c}")
    return M


def _matrix_list(obj: dict, key: str, count: int, where: str, rows: int, cols: int) -> list[np.ndarray]:
    items = obj.get(key)
    if not isinstance(items, list):
        _fail(f"{where}.{key}", "expected a list of matrices")
    if len(items) != count:
        _fail(f"{where}.{key}", f"expected {count} matrices, got {len(items)}")
    return [decode_matrix(m, f"{where}.{key}[{i}]", rows, cols) for i, m in enumerate(items)]


def decode_colligation(obj, where: str = "$") -> Colligation:
    if not isinstance(obj, dict):
        _fail(where, "expected a colligation object")
    d = _count(obj, "d", where)
    if d == 0:
        _fail(f"{where}.d", "must be at least 1")
    n, p, q = (_count(obj, k, where) for k in ("n", "p", "q"))
    A = _matrix_list(obj, "A", d, where, n, n)
    B = _matrix_list(obj, "B", d, where, n, p)
    C = decode_matrix(obj.get("C"), f"{where}.C", q, n)
    D = decode_matrix(obj.get("D"), f"{where}.D", q, p)
    return Colligation(tuple(A), tuple(B), C, D)


def decode_row_contraction(obj, where: str = "$") -> RowContraction:
    if not isinstance(obj, dict):
        _fail(where, "expected a row contraction object")
    d = _count(obj, "d", where)
    if d == 0:
        _fail(f"{where}.d", "must be at least 1")
    n = _count(obj, "n", where)
    return RowContraction(tuple(_matrix_list(obj, "T", d, where, n, n)))


def load_json(path: str | Path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _with_file(path, decoder):
    obj = load_json(path)
    try:
        return decoder(obj, f"{path}: $")
    except InputError:
        raise
    except BallModelError as exc:
        raise InputError(f"{path}: {exc}") from None


def load_colligation(path: str | Path) -> Colligation:
    return _with_file(path, decode_colligation)


def load_row_contraction(path: str | Path) -> RowContraction:
    return _with_file(path, decode_row_contraction)


def parse_points(source: str, d: int) -> np.ndarray:
    """Points from a file (JSON list of points) or inline text.

    Inline form: points separated by ``;`` and coordinates by ``,``, each
    coordinate a Python complex literal such as ``0.3-0.1j``.  In a file each
    point is a list of numbers or ``[re, im]`` pairs.
    """
    if Path(source).is_file():
        obj = load_json(source)
        if isinstance(obj, dict):
            obj = obj.get("points")
        if not isinstance(obj, list):
            _fail(source, "expected a list of points or {\"points\": [...]}")
        pts = []
        for i, pt in enumerate(obj):
            if not isinstance(pt, list):
                _fail(f"{source}: $[{i}]", "expected a list of coordinates")
            pts.append([_number(x, f"{source}: $[{i}][{k}]") for k, x in enumerate(pt)])
    else:
        pts = []
        for i, chunk in enumerate(source.split(";")):
            if not chunk.strip():
                continue
            row = []
            for k, tok in enumerate(chunk.split(",")):
                try:
                    row.append(complex(tok.strip().replace(" ", "")))
                except ValueError:
                    _fail(f"--points: point {i} coordinate {k}", f"cannot parse {tok.strip()!r}")
            pts.append(row)
    for i, pt in enumerate(pts):
        if len(pt) != d:
            _fail(f"--points: point {i}", f"expected {d} coordinates, got {len(pt)}")
    return np.array(pts, dtype=complex).reshape(len(pts), d)
