"""Flat-file exchange of measurement streams and result traces."""

from __future__ import annotations

import csv
import io
import os
from decimal import Decimal, localcontext
from typing import Iterable, Sequence

import numpy as np

from .model import MeasurementSeries, Sample

HEADER = ("t", "f_av", "p_pfc_tot", "p_e_pfc")
_SPACING_TOL = 1e-9
_PU_RANGE = (0.5, 1.5)
_DEC_PREC = 800


class CsvFormatError(ValueError):
    """Malformed measurement file. ``line`` is 1-based when known."""

    def __init__(self, message: str, path=None, line: int | None = None):
        where = f"{path}:" if path is not None else ""
        where += f"{line}: " if line is not None else (" " if where else "")
        super().__init__(f"{where}{message}")
        self.path = path
        self.line = line


def _fmt(v: float) -> str:
    # repr is the shortest string that parses back to the same double
    return repr(float(v))


def _hz_text(omega: float, f_nom: float) -> str:
    # exact decimal product, so Hz -> pu conversion recovers the double bit for bit
    with localcontext() as ctx:
        ctx.prec = _DEC_PREC
        return format((Decimal(float(omega)) * Decimal(float(f_nom))).normalize(), "f")


def _hz_to_pu(text: str, f_nom: float) -> float:
    # correctly rounded quotient of the decimal text, not of its double
    with localcontext() as ctx:
        ctx.prec = _DEC_PREC
        return float(Decimal(text.strip()) / Decimal(float(f_nom)))


def infer_unit(f: np.ndarray, f_nom: float = 50.0) -> str:
    """Return ``"pu"`` or ``"hz"`` from the value range, or raise if unclear."""
    lo, hi = _PU_RANGE
    if len(f) == 0:
        raise CsvFormatError("cannot infer frequency unit of an empty file; pass a unit")
    fmin, fmax = float(np.min(f)), float(np.max(f))
    in_pu = lo <= fmin and fmax <= hi
    in_hz = lo * f_nom <= fmin and fmax <= hi * f_nom
    if in_pu == in_hz:
        raise CsvFormatError(
            f"frequency column spans [{fmin}, {fmax}]; unit is ambiguous, pass unit='pu' or 'hz'")
    return "pu" if in_pu else "hz"


def ingest_csv(path, unit: str | None = None, f_nom: float = 50.0) -> MeasurementSeries:
    """Read a measurement file into a :class:`MeasurementSeries` in pu.

    The header must be exactly ``t,f_av,p_pfc_tot,p_e_pfc``. ``unit`` is
    ``"pu"``, ``"hz"`` or ``None`` to infer it from the value range.
    """
    if unit not in (None, "pu", "hz"):
        raise ValueError(f"unknown unit {unit!r}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"empty file, expected header {','.join(HEADER)}", path, 1)
        if tuple(h.strip() for h in header) != HEADER:
            raise CsvFormatError(
                f"header {','.join(header)!r} does not match expected {','.join(HEADER)}", path, 1)
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise CsvFormatError(f"expected 4 fields, got {len(row)}", path, line)
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise CsvFormatError(f"non-numeric field ({exc})", path, line) from None
            if not all(np.isfinite(vals)):
                raise CsvFormatError("non-finite value", path, line)
            rows.append((line, vals, row[1]))
    data = np.array([v for _, v, _ in rows], dtype=float).reshape(-1, 4)
    t = data[:, 0]
    if len(t) >= 2:
        steps = np.diff(t)
        dt = float(steps[0])
        if not dt > 0:
            raise CsvFormatError("time must be strictly increasing", path, rows[1][0])
        expected = t[0] + dt * np.arange(len(t))
        bad = np.flatnonzero(np.abs(t - expected) > _SPACING_TOL * np.maximum(1.0, np.abs(expected)))
        if bad.size:
            raise CsvFormatError(f"non-uniform time spacing (dt={dt!r})", path, rows[bad[0]][0])
    f = data[:, 1]
    if unit is None:
        unit = infer_unit(f, f_nom)
    if unit == "hz":
        omega = np.array([_hz_to_pu(r[2], f_nom) for r in rows], dtype=float)
    else:
        omega = f
    return MeasurementSeries(t, omega, data[:, 2], data[:, 3])


def emit_csv(series: MeasurementSeries, path, unit: str = "pu", f_nom: float = 50.0) -> None:
    """Write a measurement stream with the ingest header, full precision."""
    if unit not in ("pu", "hz"):
        raise ValueError(f"unknown unit {unit!r}")
    if unit == "pu":
        write_table(path, HEADER, [series.t, series.omega_av, series.p_pfc_tot, series.p_e_pfc])
        return
    f = [_hz_text(w, f_nom) for w in series.omega_av]
    write_table(path, HEADER, [series.t, f, series.p_pfc_tot, series.p_e_pfc])


def _is_text(col) -> bool:
    return isinstance(col, (list, tuple)) and len(col) > 0 and isinstance(col[0], str)


def write_table(path, header: Sequence[str], columns: Sequence, decimate: int = 1) -> None:
    """Write equally long numeric columns as CSV.

    With ``decimate > 1`` every n-th row is kept, plus the last one. A column
    given as a list of strings is written verbatim.
    """
    cols = [np.asarray(c) if _is_text(c) else np.asarray(c, dtype=float) for c in columns]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("columns differ in length")
    if decimate < 1:
        raise ValueError("decimate must be >= 1")
    idx = np.arange(0, n, decimate)
    if n and idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    lists = [c[idx].tolist() if c.dtype.kind == "U" else list(map(_fmt, c[idx].tolist()))
             for c in cols]
    for row in zip(*lists):
        buf.write(",".join(row) + "\n")
    d = os.path.dirname(os.fspath(path))
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Read a numeric CSV written by :func:`write_table`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(c) for c in r] for r in reader if r]
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def samples_to_series(samples: Iterable[Sample]) -> MeasurementSeries:
    return MeasurementSeries.from_samples(samples)
