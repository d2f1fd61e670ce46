"""Reading matrices from Matrix Market and headerless CSV files.

Square inputs whose entries are exactly symmetric come back as
:class:`SymmetricMatrix`; everything else is a :class:`RectMatrix` and is
meant to go through the symmetric dilation.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import ParseError
from .matrix import RectMatrix, SymmetricMatrix

FORMATS = ("matrix-market", "csv")
_FIELDS = {"real", "integer"}
_SYMMETRIES = {"general", "symmetric"}


def guess_format(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix in (".mtx", ".mm"):
        return "matrix-market"
    if suffix in (".csv", ".txt"):
        return "csv"
    with open(path, encoding="utf-8") as fh:
        head = fh.read(14)
    return "matrix-market" if head.startswith("%%MatrixMarket") else "csv"


def _number(tok, lineno, path):
    try:
        val = float(tok)
    except ValueError:
        raise ParseError(f"not a number: {tok!r}", lineno, path) from None
    if not math.isfinite(val):
        raise ParseError(f"non-finite entry {tok!r}", lineno, path)
    return val


def _index(tok, bound, lineno, path):
    try:
        i = int(tok)
    except ValueError:
        raise ParseError(f"bad index {tok!r}", lineno, path) from None
    if not 1 <= i <= bound:
        raise ParseError(f"index {i} outside 1..{bound}", lineno, path)
    return i - 1


def _data_lines(lines, start):
    for lineno, raw in enumerate(lines[start:], start=start + 1):
        s = raw.strip()
        if s and not s.startswith("%"):
            yield lineno, s.split()


def _finish(dense, symmetric_tag, path, coo=None):
    m, n = dense.shape
    if m == n and np.array_equal(dense, dense.T):
        if coo is not None:
            return SymmetricMatrix.from_coordinates(n, *coo)
        return SymmetricMatrix(dense)
    if symmetric_tag:
        raise ParseError("matrix tagged symmetric is not exactly symmetric", None, path)
    return RectMatrix(dense)


def read_matrix_market(path):
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", 1, path)
    header = lines[0].split()
    if len(header) != 5 or header[0] != "%%MatrixMarket" or header[1].lower() != "matrix":
        raise ParseError("expected '%%MatrixMarket matrix <format> <field> <symmetry>'", 1, path)
    fmt, fld, sym = (h.lower() for h in header[2:])
    if fmt not in ("coordinate", "array"):
        raise ParseError(f"unsupported format {fmt!r}", 1, path)
    if fld not in _FIELDS:
        raise ParseError(f"unsupported field {fld!r}; only real and integer", 1, path)
    if sym not in _SYMMETRIES:
        raise ParseError(f"unsupported symmetry {sym!r}; only general and symmetric", 1, path)
    symmetric = sym == "symmetric"
    body = _data_lines(lines, 1)
    try:
        lineno, size = next(body)
    except StopIteration:
        raise ParseError("missing size line", len(lines), path) from None
    want = 3 if fmt == "coordinate" else 2
    if len(size) != want:
        raise ParseError(f"size line needs {want} integers", lineno, path)
    try:
        dims = [int(tok) for tok in size]
    except ValueError:
        raise ParseError("size line needs integers", lineno, path) from None
    m, n = dims[:2]
    if m < 1 or n < 1 or min(dims) < 0:
        raise ParseError("dimensions must be positive", lineno, path)
    if symmetric and m != n:
        raise ParseError("symmetric matrix must be square", lineno, path)
    dense = np.zeros((m, n))

    if fmt == "coordinate":
        nnz = dims[2]
        given = {}
        count = 0
        for lineno, toks in body:
            if len(toks) != 3:
                raise ParseError("coordinate entry needs 'row col value'", lineno, path)
            i = _index(toks[0], m, lineno, path)
            j = _index(toks[1], n, lineno, path)
            v = _number(toks[2], lineno, path)
            count += 1
            given[(i, j)] = given.get((i, j), 0.0) + v
        if count != nnz:
            raise ParseError(f"header declares {nnz} entries, found {count}", len(lines), path)
        rows, cols, vals = [], [], []
        for (i, j), v in given.items():
            rows.append(i)
            cols.append(j)
            vals.append(v)
            if symmetric and i != j:
                # Usually one triangle is stored; if both are, they must agree.
                if (j, i) in given:
                    if given[(j, i)] != v:
                        raise ParseError(f"entry ({i + 1},{j + 1}) disagrees with its mirror", None, path)
                    continue
                rows.append(j)
                cols.append(i)
                vals.append(v)
        np.add.at(dense, (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64)), vals)
        return _finish(dense, symmetric, path, coo=(rows, cols, vals))

    # Array format: column-major; symmetric stores the lower triangle only.
    slots = [(i, j) for j in range(n) for i in range(j if symmetric else 0, m)]
    k = 0
    for lineno, toks in body:
        for tok in toks:
            if k >= len(slots):
                raise ParseError("more values than the declared size", lineno, path)
            i, j = slots[k]
            v = _number(tok, lineno, path)
            dense[i, j] = v
            if symmetric:
                dense[j, i] = v
            k += 1
    if k != len(slots):
        raise ParseError(f"expected {len(slots)} values, found {k}", len(lines), path)
    return _finish(dense, symmetric, path)


def read_csv(path):
    path = str(path)
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            row = [_number(c.strip(), lineno, path) for c in rec]
            if rows and len(row) != len(rows[0]):
                raise ParseError(f"row has {len(row)} fields, expected {len(rows[0])}", lineno, path)
            rows.append(row)
    if not rows:
        raise ParseError("no data rows", None, path)
    return _finish(np.array(rows), False, path)


def ingest(path, fmt=None):
    """Load a matrix; ``fmt`` is ``"matrix-market"``, ``"csv"`` or None to guess."""
    fmt = guess_format(path) if fmt is None else fmt
    if fmt == "matrix-market":
        return read_matrix_market(path)
    if fmt == "csv":
        return read_csv(path)
    raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def write_matrix_market(path, A, comment=None):
    """Write a dense array-format file (symmetric matrices store one triangle)."""
    a = np.asarray(A, dtype=np.float64)
    sym = isinstance(A, SymmetricMatrix)
    m, n = a.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"%%MatrixMarket matrix array real {'symmetric' if sym else 'general'}\n")
        if comment:
            fh.write(f"% {comment}\n")
        fh.write(f"{m} {n}\n")
        for j in range(n):
            for i in range(j if sym else 0, m):
                fh.write(f"{float(a[i, j])!r}\n")
