"""Reading and writing matrix records.

Text format, one record per matrix::

    # comments and blank lines are ignored
    d=2
    0.5 0.1
    0.1 0.25

CSV format, long form with header ``dim,i,j,value``; each record is a
block of ``dim*dim`` rows in row-major order. An optional leading
``record`` column is accepted and must be constant within a block.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Iterator, TextIO

import numpy as np

from .errors import FormatError
from .symmat import SymMat, as_array, sym_from_dense


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def iter_text_records(lines: Iterable[str], atol: float = 1e-9) -> Iterator[SymMat]:
    """Yield matrices from text lines as soon as each record is complete."""
    d = None
    rows: list[list[float]] = []
    lineno = 0
    for lineno, raw in enumerate(lines, 1):
        line = _strip(raw)
        if not line:
            continue
        if d is None:
            if not line.startswith("d="):
                raise FormatError(f"line {lineno}: expected 'd=<int>', got {line!r}")
            try:
                d = int(line[2:])
            except ValueError:
                raise FormatError(f"line {lineno}: bad dimension {line!r}") from None
            if d < 1:
                raise FormatError(f"line {lineno}: dimension must be positive")
            continue
        try:
            row = [float(tok) for tok in line.split()]
        except ValueError:
            raise FormatError(f"line {lineno}: non-numeric entry in {line!r}") from None
        if len(row) != d:
            raise FormatError(f"line {lineno}: expected {d} entries, got {len(row)}")
        rows.append(row)
        if len(rows) == d:
            yield sym_from_dense(np.array(rows), atol)
            d, rows = None, []
    if d is not None:
        raise FormatError(f"line {lineno}: truncated record (d={d}, {len(rows)} rows)")


def iter_csv_records(lines: Iterable[str], atol: float = 1e-9) -> Iterator[SymMat]:
    reader = csv.reader(line for line in lines if _strip(line))
    header = [h.strip() for h in next(reader, [])]
    if header[-4:] != ["dim", "i", "j", "value"] or len(header) not in (4, 5):
        raise FormatError(f"bad CSV header {header!r}; expected [record,]dim,i,j,value")
    offset = len(header) - 4
    block: np.ndarray | None = None
    filled = 0
    record = None
    for rowno, row in enumerate(reader, 2):
        try:
            dim, i, j = (int(x) for x in row[offset:offset + 3])
            value = float(row[offset + 3])
        except (ValueError, IndexError):
            raise FormatError(f"CSV row {rowno}: cannot parse {row!r}") from None
        rec = row[0] if offset else None
        if block is None:
            if dim < 1:
                raise FormatError(f"CSV row {rowno}: dimension must be positive")
            block = np.full((dim, dim), np.nan)
            record = rec
        elif dim != block.shape[0] or rec != record:
            raise FormatError(f"CSV row {rowno}: record changed before it was complete")
        if not (0 <= i < dim and 0 <= j < dim) or i * dim + j != filled:
            raise FormatError(f"CSV row {rowno}: expected entry {divmod(filled, dim)}, got ({i}, {j})")
        block[i, j] = value
        filled += 1
        if filled == dim * dim:
            yield sym_from_dense(block, atol)
            block, filled = None, 0
    if block is not None:
        raise FormatError("CSV input ends inside a record")


def iter_records(lines: Iterable[str], atol: float = 1e-9) -> Iterator[SymMat]:
    """Dispatch on the first meaningful line: CSV header or text record."""
    it = iter(lines)
    head: list[str] = []
    for line in it:
        head.append(line)
        if _strip(line):
            break
    first = _strip(head[-1]) if head else ""

    def chained():
        yield from head
        yield from it

    if first.replace(" ", "").endswith("dim,i,j,value"):
        return iter_csv_records(chained(), atol)
    return iter_text_records(chained(), atol)


def read_matrices(path: str | Path, atol: float = 1e-9) -> list[SymMat]:
    with open(path) as fh:
        return list(iter_records(fh, atol))


def format_text(mats: Iterable) -> str:
    buf = io.StringIO()
    write_text(mats, buf)
    return buf.getvalue()


def write_text(mats: Iterable, fh: TextIO) -> None:
    for m in mats:
        a = as_array(m)
        fh.write(f"d={a.shape[0]}\n")
        for row in a:
            fh.write(" ".join(repr(float(x)) for x in row))
            fh.write("\n")


def write_csv(mats: Iterable, fh: TextIO, with_record: bool = False) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow((["record"] if with_record else []) + ["dim", "i", "j", "value"])
    for r, m in enumerate(mats):
        a = as_array(m)
        d = a.shape[0]
        for i in range(d):
            for j in range(d):
                w.writerow(([r] if with_record else []) + [d, i, j, repr(float(a[i, j]))])
