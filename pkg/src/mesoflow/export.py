"""Deterministic CSV serialization of flow lines and density maps.

Floats are written with ``%.17g`` so every value round-trips exactly.
Rows end in ``\\n`` regardless of platform.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

FLOW_HEADER = ("line_id", "step", "x", "y", "z", "s", "t", "Sx", "Sy", "Sz",
               "rho_cl", "Q", "rho_mes", "terminal")
DENSITY_HEADER = ("coupling", "x", "y", "z", "rho_cl", "Q", "rho_mes")

_INT_COLS = {"line_id", "step"}
_STR_COLS = {"terminal"}


class NonFiniteError(ValueError):
    """A value about to be written is NaN or infinite."""


def fmt(v):
    return "%.17g" % v


def _check_finite(values, what):
    for name, v in values:
        if not math.isfinite(v):
            raise NonFiniteError(f"non-finite {name} = {v} in {what}")


def flowline_rows(lines, ids=None):
    """Yield one tuple per point, ordered by (line_id, step).

    ``lines`` is a sequence of FlowLine; ``ids`` defaults to their positions.
    """
    ids = range(len(lines)) if ids is None else ids
    for lid, line in sorted(zip(ids, lines), key=lambda p: p[0]):
        for i in range(len(line.points)):
            x, y, z = line.points[i]
            Sx, Sy, Sz = line.S[i]
            row = (int(lid), i, float(x), float(y), float(z), float(line.arc_s[i]),
                   float(line.time_t[i]), float(Sx), float(Sy), float(Sz),
                   float(line.rho_cl[i]), float(line.Q[i]), float(line.rho_mes[i]),
                   line.terminal)
            _check_finite(zip(FLOW_HEADER[2:13], row[2:13]),
                          f"flow line {lid} step {i} at point ({x!r}, {y!r}, {z!r})")
            yield row


def _format_row(row, header):
    out = []
    for name, v in zip(header, row):
        if name in _INT_COLS:
            out.append(str(int(v)))
        elif name in _STR_COLS:
            out.append(str(v))
        else:
            out.append(fmt(v))
    return ",".join(out)


def format_rows(rows, header=FLOW_HEADER):
    return "".join(_format_row(r, header) + "\n" for r in rows)


def _write(path, header, body):
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            fh.write(body)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
    return path


def export_flowlines(lines, path, ids=None):
    """Write flow lines to ``path``; an empty sequence gives a header-only file."""
    return _write(path, FLOW_HEADER, format_rows(flowline_rows(lines, ids)))


def parse_csv(path, header=FLOW_HEADER):
    """Parse a file written by this module back into typed row tuples."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read {path}: {exc.strerror}") from exc
    lines = text.split("\n")
    if lines[0] != ",".join(header):
        raise ValueError(f"{path}: unexpected header {lines[0]!r}")
    rows = []
    for ln in lines[1:]:
        if not ln:
            continue
        parts = ln.split(",")
        if len(parts) != len(header):
            raise ValueError(f"{path}: malformed row {ln!r}")
        row = []
        for name, p in zip(header, parts):
            if name in _INT_COLS:
                row.append(int(p))
            elif name in _STR_COLS:
                row.append(p)
            else:
                row.append(float(p))
        rows.append(tuple(row))
    return rows


def density_rows(fld, couplings, lo, hi, nx, ny):
    """Sample rho_cl, Q and rho_mes on an ``nx`` x ``ny`` grid.

    The grid spans ``lo``..``hi`` in the first two coordinates with the third
    fixed at ``lo[2]``. Points where Q is undefined (amplitude nodes) are
    skipped; their count is returned alongside the rows.
    """
    from .errors import NodeError

    xs = np.linspace(lo[0], hi[0], nx) if nx > 1 else np.array([lo[0]])
    ys = np.linspace(lo[1], hi[1], ny) if ny > 1 else np.array([lo[1]])
    pts = np.array([(x, y, lo[2]) for y in ys for x in xs], dtype=float)
    rho = fld.classical_density(pts)
    Qs = []
    skipped = 0
    for r in pts:
        try:
            Qs.append(fld.Q(r))
        except NodeError:
            Qs.append(None)
            skipped += 1
    rows = []
    for c in couplings:
        for r, rc, Q in zip(pts, rho, Qs):
            if Q is None:
                continue
            row = (float(c), float(r[0]), float(r[1]), float(r[2]), float(rc), float(Q),
                   float(rc + (1 - c) * Q))
            _check_finite(zip(DENSITY_HEADER[4:], row[4:]), f"density map at point {tuple(r)}")
            rows.append(row)
    return rows, skipped


def export_density(rows, path):
    return _write(path, DENSITY_HEADER, format_rows(rows, DENSITY_HEADER))
