"""Structured grids of deformation gradients and their compatibility diagnostics."""

from __future__ import annotations

import io
import json
import math
import os
import re
import tempfile
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from . import kernels, lin3
from .config import DEFAULT
from .errors import DimensionMismatch, FieldTooSmall, ParseError

HEADER_KEYS = ("nx", "ny", "nz", "hx", "hy", "hz", "ox", "oy", "oz")
CELL_KEYS = ("i", "j", "k", "F11", "F12", "F13", "F21", "F22", "F23", "F31", "F32", "F33", "phase")


class Phase(IntEnum):
    A = 0
    M = 1
    U = 2


_PHASE_CODES = {"A": Phase.A, "M": Phase.M, "U": Phase.U}


@dataclass
class GradientField:
    """Cell-wise deformation gradients on a regular grid.

    ``F`` has shape ``(nx, ny, nz, 3, 3)``; ``phase`` holds :class:`Phase`
    codes. Cells with non-finite entries are relabelled ``U`` on construction.
    """

    F: np.ndarray
    spacing: np.ndarray = field(default_factory=lambda: np.ones(3))
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    phase: np.ndarray | None = None

    def __post_init__(self):
        self.F = np.asarray(self.F, dtype=float)
        if self.F.ndim != 5 or self.F.shape[3:] != (3, 3) or min(self.F.shape[:3]) < 1:
            raise DimensionMismatch(f"F must have shape (nx, ny, nz, 3, 3), got {self.F.shape}")
        self.spacing = np.asarray(self.spacing, dtype=float).reshape(3)
        self.origin = np.asarray(self.origin, dtype=float).reshape(3)
        if not np.all(self.spacing > 0) or not np.all(np.isfinite(self.spacing)):
            raise ParseError("spacing must be positive and finite")
        if not np.all(np.isfinite(self.origin)):
            raise ParseError("origin must be finite")
        if self.phase is None:
            self.phase = np.full(self.dims, Phase.M, dtype=np.int8)
        else:
            self.phase = np.asarray(self.phase, dtype=np.int8)
            if self.phase.shape != self.dims:
                raise DimensionMismatch("phase array does not match the grid")
        bad = ~np.all(np.isfinite(self.F), axis=(3, 4))
        self.phase = np.where(bad, np.int8(Phase.U), self.phase).astype(np.int8)

    @property
    def dims(self) -> tuple:
        return tuple(int(d) for d in self.F.shape[:3])

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.dims))

    @property
    def known(self) -> np.ndarray:
        return self.phase != Phase.U

    def cell_centers(self) -> np.ndarray:
        axes = [self.origin[d] + (np.arange(self.dims[d]) + 0.5) * self.spacing[d] for d in range(3)]
        X, Y, Z = np.meshgrid(*axes, indexing="ij")
        return np.stack([X, Y, Z], axis=-1)

    def flat_F(self) -> np.ndarray:
        return self.F.reshape(-1, 3, 3)

    def max_norm(self) -> float:
        good = self.F[self.known]
        return float(np.sqrt(np.einsum("nij,nij->n", good, good)).max()) if good.size else 0.0

    def equals(self, other: "GradientField") -> bool:
        return (
            self.dims == other.dims
            and np.array_equal(self.spacing, other.spacing)
            and np.array_equal(self.origin, other.origin)
            and np.array_equal(self.phase, other.phase)
            and np.array_equal(self.F, other.F, equal_nan=True)
        )


# -- serialisation ------------------------------------------------------------

def _num(x: float) -> str:
    return format(float(x), ".17g")


def _header_values(fld: GradientField):
    return [str(d) for d in fld.dims] + [_num(v) for v in fld.spacing] + [_num(v) for v in fld.origin]


def _cells_in_order(fld: GradientField):
    nx, ny, nz = fld.dims
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                yield i, j, k


def field_to_csv(fld: GradientField) -> str:
    out = io.StringIO()
    out.write(",".join(_header_values(fld)) + "\n")
    names = {int(v): k for k, v in _PHASE_CODES.items()}
    for i, j, k in _cells_in_order(fld):
        vals = ",".join(_num(v) for v in fld.F[i, j, k].ravel())
        out.write(f"{i},{j},{k},{vals},{names[int(fld.phase[i, j, k])]}\n")
    return out.getvalue()


def _json_num(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return _num(x)


def field_to_json(fld: GradientField) -> str:
    head = ", ".join(f'"{k}": {v}' for k, v in zip(HEADER_KEYS, _header_values(fld)))
    names = {int(v): k for k, v in _PHASE_CODES.items()}
    rows = []
    for i, j, k in _cells_in_order(fld):
        F = ", ".join(_json_num(v) for v in fld.F[i, j, k].ravel())
        rows.append(f'  {{"i": {i}, "j": {j}, "k": {k}, "F": [{F}], "phase": "{names[int(fld.phase[i, j, k])]}"}}')
    return "{" + head + ', "cells": [\n' + ",\n".join(rows) + "\n]}\n"


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and an atomic rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=str(path.parent or "."))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _format_of(path, fmt):
    if fmt is not None:
        fmt = fmt.lower()
        if fmt not in ("csv", "json"):
            raise ParseError(f"unknown field format {fmt!r}")
        return fmt
    return "json" if str(path).lower().endswith(".json") else "csv"


def save_field(fld: GradientField, path, fmt: str | None = None) -> None:
    fmt = _format_of(path, fmt)
    atomic_write(path, field_to_json(fld) if fmt == "json" else field_to_csv(fld))


_INT = re.compile(r"[+-]?\d+\Z")
_FLOAT = re.compile(r"[+-]?(?:(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|nan|inf|infinity)\Z", re.IGNORECASE)


def _parse_int(tok, line, col, what):
    if not _INT.match(tok):
        raise ParseError(f"expected an integer for {what}, got {tok!r}", line, col)
    return int(tok)


def _parse_float(tok, line, col, what):
    if not _FLOAT.match(tok):
        raise ParseError(f"expected a number for {what}, got {tok!r}", line, col)
    return float(tok)


def _check_header(vals, line):
    nx, ny, nz = vals[:3]
    for name, v in zip(HEADER_KEYS[:3], (nx, ny, nz)):
        if v < 1:
            raise ParseError(f"{name} must be a positive integer", line)
    for name, v in zip(HEADER_KEYS[3:6], vals[3:6]):
        if not (v > 0 and math.isfinite(v)):
            raise ParseError(f"{name} must be positive and finite", line)
    for name, v in zip(HEADER_KEYS[6:], vals[6:]):
        if not math.isfinite(v):
            raise ParseError(f"{name} must be finite", line)


class _Builder:
    def __init__(self, header, line):
        _check_header(header, line)
        self.dims = tuple(int(v) for v in header[:3])
        self.spacing = np.array(header[3:6], dtype=float)
        self.origin = np.array(header[6:], dtype=float)
        self.F = np.zeros(self.dims + (3, 3))
        self.phase = np.zeros(self.dims, dtype=np.int8)
        self.filled = np.zeros(self.dims, dtype=bool)
        self.count = 0

    def add(self, ijk, F, phase, line):
        for name, v, n in zip("ijk", ijk, self.dims):
            if not 0 <= v < n:
                raise DimensionMismatch(f"index {name}={v} outside 0..{n - 1}", line)
        if self.filled[ijk]:
            raise ParseError(f"duplicate cell {ijk}", line)
        self.filled[ijk] = True
        self.F[ijk] = np.asarray(F, dtype=float).reshape(3, 3)
        self.phase[ijk] = phase
        self.count += 1

    def finish(self, line):
        expected = int(np.prod(self.dims))
        if self.count != expected:
            raise DimensionMismatch(f"expected {expected} cells, found {self.count}", line)
        return GradientField(self.F, self.spacing, self.origin, self.phase)


def _split(text_line):
    """Fields of a CSV line with their 1-based starting columns."""
    toks, cols, pos = [], [], 0
    for tok in text_line.split(","):
        toks.append(tok.strip())
        cols.append(pos + 1 + (len(tok) - len(tok.lstrip())))
        pos += len(tok) + 1
    return toks, cols


def parse_field_csv(text: str) -> GradientField:
    """Parse the field CSV format.

    Raises:
        ParseError: with 1-based line and column of the offending token.
        DimensionMismatch: when the rows do not fill the declared grid.
    """
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    lines = [ln[:-1] if ln.endswith("\r") else ln for ln in lines]
    if not lines:
        raise ParseError("empty field file", 1, 1)
    idx = 0
    toks, cols = _split(lines[0])
    if [t.lower() for t in toks] == list(HEADER_KEYS):
        idx = 1
        if len(lines) < 2:
            raise ParseError("missing header values", 2, 1)
        toks, cols = _split(lines[1])
    lineno = idx + 1
    if len(toks) != len(HEADER_KEYS):
        raise ParseError(f"header needs {len(HEADER_KEYS)} values, found {len(toks)}", lineno, 1)
    header = [_parse_int(t, lineno, c, n) for t, c, n in zip(toks[:3], cols[:3], HEADER_KEYS[:3])]
    header += [_parse_float(t, lineno, c, n) for t, c, n in zip(toks[3:], cols[3:], HEADER_KEYS[3:])]
    builder = _Builder(header, lineno)
    for off, ln in enumerate(lines[idx + 1:], start=idx + 2):
        if not ln.strip():
            raise ParseError("blank line inside cell data", off, 1)
        toks, cols = _split(ln)
        if len(toks) != len(CELL_KEYS):
            raise ParseError(f"cell row needs {len(CELL_KEYS)} fields, found {len(toks)}", off, 1)
        ijk = tuple(_parse_int(t, off, c, n) for t, c, n in zip(toks[:3], cols[:3], "ijk"))
        F = [_parse_float(t, off, c, n) for t, c, n in zip(toks[3:12], cols[3:12], CELL_KEYS[3:12])]
        code = toks[12]
        if code not in _PHASE_CODES:
            raise ParseError(f"phase must be one of A, M, U, got {code!r}", off, cols[12])
        builder.add(ijk, F, _PHASE_CODES[code], off)
    return builder.finish(len(lines) + 1)


def _line_col(text, pos):
    line = text.count("\n", 0, pos) + 1
    return line, pos - (text.rfind("\n", 0, pos) + 1) + 1


def _cell_offsets(text):
    """Character offsets of each element of the ``cells`` array."""
    dec = json.JSONDecoder()
    m = re.search(r'"cells"\s*:\s*\[', text)
    if m is None:
        return []
    pos, out = m.end(), []
    ws = re.compile(r"[\s,]*")
    while True:
        pos = ws.match(text, pos).end()
        if pos >= len(text) or text[pos] == "]":
            return out
        out.append(pos)
        try:
            _, pos = dec.raw_decode(text, pos)
        except json.JSONDecodeError:
            return out


def parse_field_json(text: str) -> GradientField:
    """Parse the JSON field format (same keys as the CSV header plus ``cells``)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", 1, 1)
    missing = [k for k in HEADER_KEYS + ("cells",) if k not in doc]
    if missing:
        raise ParseError(f"missing keys {missing}", 1, 1)
    header = []
    for k in HEADER_KEYS:
        v = doc[k]
        want_int = k in ("nx", "ny", "nz")
        ok = isinstance(v, int) and not isinstance(v, bool) if want_int else isinstance(v, (int, float)) and not isinstance(v, bool)
        if not ok:
            raise ParseError(f"{k} must be {'an integer' if want_int else 'a number'}", 1, 1)
        header.append(v)
    builder = _Builder(header, 1)
    cells = doc["cells"]
    if not isinstance(cells, list):
        raise ParseError("cells must be a list", 1, 1)
    offsets = None
    for n, cell in enumerate(cells):
        try:
            if not isinstance(cell, dict) or set(cell) != {"i", "j", "k", "F", "phase"}:
                raise ValueError("cell needs exactly the keys i, j, k, F, phase")
            ijk = tuple(cell[c] for c in "ijk")
            if not all(isinstance(v, int) and not isinstance(v, bool) for v in ijk):
                raise ValueError("cell indices must be integers")
            F = cell["F"]
            if not isinstance(F, list) or len(F) != 9 or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in F
            ):
                raise ValueError("F must be a list of 9 numbers")
            if cell["phase"] not in _PHASE_CODES:
                raise ValueError("phase must be one of A, M, U")
            builder.add(ijk, F, _PHASE_CODES[cell["phase"]], None)
        except (ValueError, ParseError) as exc:
            if offsets is None:
                offsets = _cell_offsets(text)
            line, col = _line_col(text, offsets[n]) if n < len(offsets) else (None, None)
            msg = exc.message if isinstance(exc, ParseError) else str(exc)
            kind = DimensionMismatch if isinstance(exc, DimensionMismatch) else ParseError
            raise kind(f"cell {n}: {msg}", line, col) from None
    return builder.finish(text.rstrip().count("\n") + 1)


def load_field(path, fmt: str | None = None) -> GradientField:
    """Read a field file (CSV unless ``fmt`` or a ``.json`` suffix says otherwise).

    Raises:
        ParseError, DimensionMismatch, FileNotFoundError
    """
    fmt = _format_of(path, fmt)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        text = fh.read()
    return parse_field_json(text) if fmt == "json" else parse_field_csv(text)


# -- per-cell diagnostics -----------------------------------------------------

@dataclass
class CellDiagnostics:
    """Per-cell rank-one diagnostics, stored as arrays over the grid."""

    cof_deviation: np.ndarray
    a: np.ndarray
    n: np.ndarray
    det: np.ndarray
    det_residual: np.ndarray
    bounds_ok: np.ndarray
    flagged: np.ndarray
    active: np.ndarray
    D_ref: float
    threshold: float

    def summary(self) -> dict:
        act = self.active
        cof = self.cof_deviation[act]
        return {
            "n_cells": int(self.active.size),
            "n_active": int(act.sum()),
            "n_holes": int((~act).sum()),
            "n_flagged": int(self.flagged.sum()),
            "max_cof_deviation": float(cof.max()) if cof.size else 0.0,
            "max_det_residual": float(self.det_residual[act].max()) if cof.size else 0.0,
            "n_bounds_violations": int((~self.bounds_ok & act).sum()),
            "D_ref": self.D_ref,
            "threshold": self.threshold,
        }

    def to_csv(self, fld: GradientField) -> str:
        names = {int(v): k for k, v in _PHASE_CODES.items()}
        out = io.StringIO()
        out.write("i,j,k,phase,cof_deviation,a1,a2,a3,n1,n2,n3,det,det_residual,bounds_ok,flagged\n")
        for i, j, k in _cells_in_order(fld):
            c = (i, j, k)
            vals = [self.cof_deviation[c], *self.a[c], *self.n[c], self.det[c], self.det_residual[c]]
            out.write(
                f"{i},{j},{k},{names[int(fld.phase[c])]},"
                + ",".join(_num(v) for v in vals)
                + f",{int(self.bounds_ok[c])},{int(self.flagged[c])}\n"
            )
        return out.getvalue()


def analyze_cells(
    fld: GradientField,
    D_ref: float | None = None,
    threshold: float = DEFAULT.cof_threshold,
    stretches=None,
    tol=DEFAULT,
) -> CellDiagnostics:
    """Rank-one factorisation ``F - 1 = a ⊗ n`` and related checks for every cell.

    ``D_ref`` defaults to the median determinant of the known martensite
    cells (of all known cells when none is labelled ``M``). ``stretches``
    optionally supplies reference eigenvalues for the upper bound on ``|a|``.
    Unknown cells get NaN diagnostics and are never flagged.
    """
    dims = fld.dims
    known = fld.known.ravel()
    M = fld.flat_F() - np.eye(3)
    M = np.where(known[:, None, None], M, 0.0)
    a, n, dev = kernels.rank_one_fit_batch(np.ascontiguousarray(M))
    det = kernels.det_batch(np.ascontiguousarray(np.where(known[:, None, None], fld.flat_F(), np.eye(3))))
    mart = known & (fld.phase.ravel() == Phase.M)
    if D_ref is None:
        pool = det[mart] if mart.any() else det[known]
        D_ref = float(np.median(pool)) if pool.size else 1.0
    a_norm = np.linalg.norm(a, axis=1)
    lo_ok = a_norm >= abs(D_ref - 1.0) - tol.bounds
    if stretches is not None:
        s = np.asarray(stretches, dtype=float)
        hi_ok = a_norm <= float(s.max() - s.min()) + tol.bounds
    else:
        hi_ok = np.ones_like(lo_ok)
    bounds_ok = ~mart | (lo_ok & hi_ok)

    active = a_norm > 0.0
    signs = kernels.orient_signs(np.ascontiguousarray(n.reshape(dims + (3,))), (known & active).reshape(dims))
    s = signs.reshape(-1).astype(float)
    n = n * s[:, None]
    a = a * s[:, None]

    nan = ~known
    for arr in (a, n):
        arr[nan] = np.nan
    dev = np.where(nan, np.nan, dev)
    det = np.where(nan, np.nan, det)
    det_res = np.abs(det - D_ref)
    flagged = known & (dev > threshold)
    shape3 = dims + (3,)
    return CellDiagnostics(
        dev.reshape(dims),
        a.reshape(shape3),
        n.reshape(shape3),
        det.reshape(dims),
        det_res.reshape(dims),
        bounds_ok.reshape(dims),
        flagged.reshape(dims),
        known.reshape(dims),
        float(D_ref),
        float(threshold),
    )


# -- face jumps ---------------------------------------------------------------

@dataclass
class FaceJumps:
    """Best rank-one fits ``F⁺ - F⁻ ≈ b ⊗ m`` on interior faces with a jump."""

    axis: np.ndarray
    lower: np.ndarray
    b: np.ndarray
    m: np.ndarray
    residual: np.ndarray
    scenario: np.ndarray

    def __len__(self):
        return int(self.axis.size)

    def rows(self):
        for idx in range(len(self)):
            yield {
                "axis": int(self.axis[idx]),
                "cell": tuple(int(v) for v in self.lower[idx]),
                "b": self.b[idx],
                "m": self.m[idx],
                "residual": float(self.residual[idx]),
                "scenario": str(self.scenario[idx]),
            }


def jump_threshold(fld: GradientField, rel: float = DEFAULT.jump_rel) -> float:
    return rel * max(fld.max_norm(), 1.0)


def _jump_masks(fld: GradientField, threshold: float, contrast: float | None = None):
    """Per axis: boolean array over faces (cell c to c+e_d) that carry a jump.

    With ``contrast`` a face must also beat the larger of its two neighbouring
    face differences along the same axis by that factor, which separates
    genuine discontinuities from the cell-to-cell change of a smooth field.
    """
    out = []
    for d in range(3):
        if fld.dims[d] < 2:
            out.append(None)
            continue
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[d] = slice(0, -1)
        hi[d] = slice(1, None)
        dF = fld.F[tuple(hi)] - fld.F[tuple(lo)]
        mag = np.sqrt(np.einsum("...ij,...ij->...", dF, dF))
        both = fld.known[tuple(lo)] & fld.known[tuple(hi)]
        mask = both & (mag > threshold)
        if contrast is not None:
            mag = np.where(both, mag, 0.0)
            pad = [(0, 0)] * 3
            pad[d] = (1, 1)
            padded = np.pad(mag, pad)
            before = [slice(None)] * 3
            after = [slice(None)] * 3
            before[d], after[d] = slice(0, -2), slice(2, None)
            neighbour = np.maximum(padded[tuple(before)], padded[tuple(after)])
            mask &= mag > contrast * neighbour
        out.append(mask)
    return out


def face_jump_fit(fld: GradientField, threshold: float | None = None, tol=DEFAULT) -> FaceJumps:
    """Fit every interior jump ``F⁺ - F⁻`` by its best rank-one approximation.

    Scenario ``a``: ``m`` parallel to the normals on both sides; ``b``: the
    shear vectors on both sides parallel; otherwise ``unclassified``.
    Sides with ``F = 1`` have no normal and do not constrain the test.
    """
    if all(d < 2 for d in fld.dims):
        return FaceJumps(*(np.zeros((0,) + s) for s in [(), (3,), (3,), (3,), ()]), np.zeros(0, dtype="<U12"))
    thr = jump_threshold(fld) if threshold is None else threshold
    M = fld.flat_F() - np.eye(3)
    a, n, _ = kernels.rank_one_fit_batch(np.ascontiguousarray(np.where(fld.known.ravel()[:, None, None], M, 0.0)))
    a = a.reshape(fld.dims + (3,))
    n = n.reshape(fld.dims + (3,))
    axes, lowers, bs, ms, res, scen = [], [], [], [], [], []
    for d, mask in enumerate(_jump_masks(fld, thr)):
        if mask is None:
            continue
        for c in zip(*np.nonzero(mask)):
            c2 = list(c)
            c2[d] += 1
            c2 = tuple(c2)
            dF = fld.F[c2] - fld.F[c]
            U, S, Vt = np.linalg.svd(dF)
            m = Vt[0]
            b = S[0] * U[:, 0]
            lead = m[np.argmax(np.abs(m) > 1e-12)]
            if lead < 0:
                m, b = -m, -b
            r = float(np.sqrt(S[1] ** 2 + S[2] ** 2))
            sides = [(a[c], n[c]), (a[c2], n[c2])]
            live = [(av, nv) for av, nv in sides if np.linalg.norm(av) > tol.parallel]
            par = lambda u, v: np.linalg.norm(np.cross(u, v)) <= tol.parallel * np.linalg.norm(u) * np.linalg.norm(v)
            if all(par(m, nv) for _, nv in live):
                kind = "a"
            elif len(live) == 2 and par(live[0][0], live[1][0]):
                kind = "b"
            else:
                kind = "unclassified"
            axes.append(d)
            lowers.append(c)
            bs.append(lin3.clean(b))
            ms.append(lin3.clean(m))
            res.append(r)
            scen.append(kind)
    if not axes:
        return FaceJumps(*(np.zeros((0,) + s) for s in [(), (3,), (3,), (3,), ()]), np.zeros(0, dtype="<U12"))
    return FaceJumps(
        np.array(axes, dtype=int),
        np.array(lowers, dtype=int),
        np.array(bs),
        np.array(ms),
        np.array(res),
        np.array(scen),
    )


# -- discrete compatibility ---------------------------------------------------

@dataclass
class CompatibilityResult:
    """Centered-difference residual fields (NaN where no valid stencil) and L² norms."""

    curl: np.ndarray
    div_na: np.ndarray
    div_a: np.ndarray
    valid: np.ndarray
    spacing: np.ndarray

    def l2(self, arr) -> float:
        vol = float(np.prod(self.spacing))
        v = arr[self.valid]
        return float(np.sqrt(np.sum(v * v) * vol))

    def summary(self) -> dict:
        return {
            "curl_l2": [self.l2(self.curl[..., i, :]) for i in range(3)],
            "div_na_l2": self.l2(self.div_na),
            "div_a_l2": self.l2(self.div_a),
            "n_valid": int(self.valid.sum()),
        }


def _centered(arr, d, h, ok):
    """Centered difference of ``arr`` along axis ``d``; ``ok`` marks valid stencils."""
    out = np.zeros_like(arr)
    lo = [slice(None)] * arr.ndim
    hi = [slice(None)] * arr.ndim
    mid = [slice(None)] * arr.ndim
    lo[d], hi[d], mid[d] = slice(0, -2), slice(2, None), slice(1, -1)
    out[tuple(mid)] = (arr[tuple(hi)] - arr[tuple(lo)]) / (2.0 * h)
    return out


def _stencil_ok(fld, d, jumps, weak):
    n = fld.dims[d]
    ok = np.zeros(fld.dims, dtype=bool)
    if n < 3:
        return ok
    idx = [slice(None)] * 3
    lo, hi = list(idx), list(idx)
    mid = list(idx)
    lo[d], hi[d], mid[d] = slice(0, -2), slice(2, None), slice(1, -1)
    good = fld.known[tuple(lo)] & fld.known[tuple(hi)] & fld.known[tuple(mid)]
    if not weak and jumps[d] is not None:
        jl = [slice(None)] * 3
        jh = [slice(None)] * 3
        jl[d], jh[d] = slice(0, -1), slice(1, None)
        good &= ~jumps[d][tuple(jl)] & ~jumps[d][tuple(jh)]
    ok[tuple(mid)] = good
    return ok


def discrete_compatibility(
    fld: GradientField,
    a=None,
    n=None,
    weak: bool = False,
    threshold: float | None = None,
) -> CompatibilityResult:
    """Residuals of ``curl(a_i n) = 0``, ``div(n⊗a) = 0`` and ``div a = 0``.

    Without explicit ``a, n`` the rows of ``F - 1`` serve for the first two
    identities and the sign-oriented factorisation for ``div a``. Axes of
    length one are treated as invariant directions.

    Raises:
        FieldTooSmall: an axis has 2 cells, or no axis has at least 3.
    """
    dims = fld.dims
    if any(n_ == 2 for n_ in dims) or all(n_ < 3 for n_ in dims):
        raise FieldTooSmall(f"need at least 3 cells along every differenced axis, got {dims}")
    if (a is None) != (n is None):
        raise ValueError("pass both a and n, or neither")
    if a is None:
        M = fld.F - np.eye(3)
        diag = analyze_cells(fld)
        a_vec = np.nan_to_num(diag.a)
    else:
        a_vec = np.asarray(a, dtype=float).reshape(dims + (3,))
        n_vec = np.asarray(n, dtype=float).reshape(dims + (3,))
        M = np.einsum("...i,...j->...ij", a_vec, n_vec)
    M = np.where(fld.known[..., None, None], M, 0.0)
    thr = jump_threshold(fld) if threshold is None else threshold
    jumps = _jump_masks(fld, thr, DEFAULT.jump_contrast)
    diff = [d for d in range(3) if dims[d] >= 3]
    ok = {d: _stencil_ok(fld, d, jumps, weak) for d in diff}
    valid = fld.known.copy()
    for d in diff:
        valid &= ok[d]
    h = fld.spacing

    def D(arr, d):
        if d not in ok:
            return np.zeros_like(arr)
        return _centered(arr, d, h[d], ok[d])

    # dM[d][..., i, j] = ∂_d M_ij
    dM = [D(M, d) for d in range(3)]
    curl = np.empty(dims + (3, 3))
    for i in range(3):
        curl[..., i, 0] = dM[1][..., i, 2] - dM[2][..., i, 1]
        curl[..., i, 1] = dM[2][..., i, 0] - dM[0][..., i, 2]
        curl[..., i, 2] = dM[0][..., i, 1] - dM[1][..., i, 0]
    div_na = sum(dM[j][..., j, :] for j in range(3))
    da = [D(a_vec, d) for d in range(3)]
    div_a = da[0][..., 0] + da[1][..., 1] + da[2][..., 2]
    nanmask = ~valid
    curl[nanmask] = np.nan
    div_na[nanmask] = np.nan
    div_a = np.where(nanmask, np.nan, div_a)
    return CompatibilityResult(curl, div_na, div_a, valid, h.copy())
