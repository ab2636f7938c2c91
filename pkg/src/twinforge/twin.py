"""Twinning between two martensite variants.

Two variants ``U1, U2`` are twin-related when ``U2 = Q U1 Q`` for a half turn
``Q = -1 + 2 ê⊗ê``. Each such axis gives two solutions of
``R̂ U2 = U1 + b ⊗ m`` in closed form (type I and type II).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache

import numpy as np

from . import lin3
from .config import DEFAULT
from .errors import (
    DegenerateFamily,
    IdenticalVariants,
    InconsistentClassification,
    InputError,
    SingularU1,
    SpectrumMismatch,
)

MAX_AXES = 8


class TwinType(str, Enum):
    TYPE_I = "TypeI"
    TYPE_II = "TypeII"
    COMPOUND_BRANCH = "CompoundBranch"


class TwinClass(str, Enum):
    COMPOUND = "Compound"
    TYPE_I_AND_II = "TypeIandII"


@dataclass(frozen=True)
class TwinSystem:
    """One solution ``R̂ U2 = U1 + b ⊗ m`` attached to the axis ``e_hat``.

    ``formula`` records which closed form produced it ("I" or "II"); ``type``
    becomes ``CompoundBranch`` when the pair is compound.
    """

    e_hat: np.ndarray
    type: TwinType
    b: np.ndarray
    m: np.ndarray
    R_hat: np.ndarray
    U2: np.ndarray
    residual: float
    formula: str = "I"

    def shear(self) -> np.ndarray:
        return np.outer(self.b, self.m)


def _check_variant(U, name):
    U = lin3.as_mat3(U)
    if not lin3.is_spd(U):
        raise InputError(f"{name} must be symmetric positive definite")
    return 0.5 * (U + U.T)


def conjugate(U1, e) -> np.ndarray:
    Q = lin3.half_turn(e)
    return Q @ U1 @ Q


def axis_residual(U1, U2, e) -> float:
    return lin3.norm(conjugate(U1, e) - U2)


@lru_cache(maxsize=4)
def icosphere(subdivisions: int = 4) -> np.ndarray:
    """Unit vectors on a subdivided icosahedron (2562 points at level 4)."""
    t = (1.0 + 5.0 ** 0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    pts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}
        new_faces = []

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                p = pts[i] + pts[j]
                pts.append(p / np.linalg.norm(p))
                cache[key] = len(pts) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return np.array(pts)


def _grid_residuals(U1, U2, E):
    """Squared residual of the axis equation for every row of ``E``."""
    U1e = E @ U1
    eUe = np.einsum("ni,ni->n", U1e, E)
    conj = (U1[None]
            - 2.0 * np.einsum("ni,nj->nij", E, U1e)
            - 2.0 * np.einsum("ni,nj->nij", U1e, E)
            + 4.0 * eUe[:, None, None] * np.einsum("ni,nj->nij", E, E))
    diff = conj - U2[None]
    return np.einsum("nij,nij->n", diff, diff)


def _refine_axis(U1, U2, e, iterations: int = 30):
    """Gauss-Newton on the sphere for ``‖Q U1 Q - U2‖²``."""
    e = lin3.unit(e)
    for _ in range(iterations):
        helper = np.eye(3)[np.argmin(np.abs(e))]
        t1 = lin3.unit(np.cross(e, helper))
        t2 = np.cross(e, t1)
        Q = lin3.half_turn(e)
        r = (Q @ U1 @ Q - U2).ravel()
        J = np.empty((9, 2))
        for col, t in enumerate((t1, t2)):
            dQ = 2.0 * (np.outer(t, e) + np.outer(e, t))
            J[:, col] = (dQ @ U1 @ Q + Q @ U1 @ dQ).ravel()
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        e_new = lin3.unit(e + step[0] * t1 + step[1] * t2)
        if np.linalg.norm(e_new - e) < 1e-16:
            e = e_new
            break
        e = e_new
    return e


def _frame_candidates(U1, U2):
    """Half-turn axes among the rotations mapping the eigenframe of U1 to that of U2."""
    _, V = np.linalg.eigh(U1)
    _, W = np.linalg.eigh(U2)
    out = []
    for s in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1),
              (-1, -1, -1), (-1, 1, 1), (1, -1, 1), (1, 1, -1)):
        R = W @ np.diag(s) @ V.T
        if np.linalg.det(R) < 0:
            continue
        P = R + np.eye(3)
        col = P[:, np.argmax(np.linalg.norm(P, axis=0))]
        if np.linalg.norm(col) > 1e-12:
            out.append(lin3.unit(col))
    return out


def _grid_candidates(U1, U2, keep: int = 16, separation: float = np.radians(8.0)):
    E = icosphere()
    res = _grid_residuals(U1, U2, E)
    order = np.argsort(res, kind="stable")
    chosen: list[np.ndarray] = []
    cos_sep = np.cos(separation)
    for idx in order:
        e = E[idx]
        if all(abs(e @ c) < cos_sep for c in chosen):
            chosen.append(e)
            if len(chosen) == keep:
                break
    return chosen


def _same_axis(e, f, angle_tol):
    return abs(float(e @ f)) >= np.cos(angle_tol) or np.linalg.norm(np.cross(e, f)) <= angle_tol


def _sort_key(e):
    return tuple(-np.round(e, 12))


def twin_axes(U1, U2, tol=DEFAULT):
    """All twin axes ``ê`` with ``(-1+2ê⊗ê) U1 (-1+2ê⊗ê) = U2``.

    Candidates come from eigenframe matching and an icosphere scan, each
    polished by Gauss-Newton and kept only if the residual is below
    ``tol.twin_residual``. Axes are returned with canonical sign, sorted in
    descending lexicographic order. More than two axes means a continuum of
    solutions; the first eight are returned and :class:`DegenerateFamily` is
    warned.
    """
    U1 = _check_variant(U1, "U1")
    U2 = _check_variant(U2, "U2")
    scale = max(1.0, lin3.norm(U1))
    if lin3.norm(U1 - U2) <= tol.identical * scale:
        raise IdenticalVariants("U1 and U2 coincide; every axis is a twin axis")
    w1 = np.linalg.eigvalsh(U1)
    w2 = np.linalg.eigvalsh(U2)
    gap = float(np.max(np.abs(w1 - w2)))
    if gap > tol.spectrum * max(1.0, float(np.max(np.abs(w1)))):
        raise SpectrumMismatch(f"eigenvalues differ by {gap:.3e}")

    candidates = _frame_candidates(U1, U2) + _grid_candidates(U1, U2)
    accepted: list[np.ndarray] = []
    for c in candidates:
        e = _refine_axis(U1, U2, c)
        if axis_residual(U1, U2, e) > tol.twin_residual * scale:
            continue
        e = lin3.clean(lin3.canonical_sign(e))
        if any(_same_axis(e, f, tol.axis_angle) for f in accepted):
            continue
        accepted.append(e)
    accepted.sort(key=_sort_key)
    if len(accepted) > 2:
        warnings.warn(
            f"{len(accepted)} twin axes found; the pair admits a continuum of half turns",
            DegenerateFamily,
            stacklevel=2,
        )
        accepted = accepted[:MAX_AXES]
    return accepted


def twin_solutions(U1, e_hat, tol=DEFAULT):
    """Type I and type II solutions for the axis ``e_hat``.

    Returns:
        (TwinSystem, TwinSystem) for the type I and type II formulas.
    """
    U1 = lin3.as_mat3(U1)
    if not lin3.det(U1) > 0.0:
        raise SingularU1("det U1 must be positive")
    U1 = _check_variant(U1, "U1")
    e = lin3.unit(lin3.as_vec3(e_hat))
    U2 = conjugate(U1, e)

    U1e = U1 @ e
    U1inv_e = np.linalg.solve(U1, e)
    b1 = 2.0 * (U1inv_e / (U1inv_e @ U1inv_e) - U1e)
    m1 = e.copy()
    b2 = U1e.copy()
    m2 = 2.0 * (e - (U1 @ U1e) / (U1e @ U1e))

    out = []
    for kind, formula, b, m in ((TwinType.TYPE_I, "I", b1, m1), (TwinType.TYPE_II, "II", b2, m2)):
        F = U1 + np.outer(b, m)
        R, _ = lin3.polar(F @ np.linalg.inv(U2))
        res = lin3.norm(R @ U2 - F)
        out.append(TwinSystem(lin3.clean(e), kind, lin3.clean(b), lin3.clean(m), lin3.clean(R), U2, res, formula))
    return out[0], out[1]


def _perpendicular_to_eigenvector(U1, e, tol):
    w, V = np.linalg.eigh(U1)
    spread = max(1.0, float(np.max(np.abs(w))))
    for i in range(3):
        others = [j for j in range(3) if j != i]
        if any(abs(w[i] - w[j]) <= 1e-10 * spread for j in others):
            return True
        if abs(float(V[:, i] @ e)) <= tol:
            return True
    return False


def classify(U1, U2, axes, tol=DEFAULT):
    """Compound when two non-parallel axes exist, else type I/II.

    The count test is cross-checked against the perpendicularity test (some
    axis orthogonal to an eigenvector of U1); disagreement raises
    :class:`InconsistentClassification`.
    """
    U1 = lin3.as_mat3(U1)
    axes = [lin3.unit(a) for a in axes]
    if not axes:
        raise InputError("classify needs at least one axis")
    by_count = any(
        not _same_axis(axes[i], axes[j], tol.axis_angle)
        for i in range(len(axes)) for j in range(i + 1, len(axes))
    )
    by_perp = any(_perpendicular_to_eigenvector(U1, e, tol.compound_perp) for e in axes)
    if len(axes) == 1 and by_perp:
        # a single supplied axis can still be compound if the partner was not
        # passed in; look for it before declaring a disagreement
        U2m = lin3.as_mat3(U2)
        try:
            by_count = len(twin_axes(U1, U2m, tol)) >= 2
        except Exception:
            by_count = False
    if by_count != by_perp:
        raise InconsistentClassification(
            f"axis count says compound={by_count}, eigenvector test says {by_perp}"
        )
    return TwinClass.COMPOUND if by_count else TwinClass.TYPE_I_AND_II


@dataclass(frozen=True)
class TwinAnalysis:
    axes: list
    classification: TwinClass
    systems: list = field(default_factory=list)


def analyze_pair(U1, U2, tol=DEFAULT) -> TwinAnalysis:
    """Axes, classification and all solutions for a pair of variants."""
    axes = twin_axes(U1, U2, tol)
    if not axes:
        return TwinAnalysis([], TwinClass.TYPE_I_AND_II, [])
    cls = classify(U1, U2, axes, tol)
    systems = []
    for e in axes:
        for s in twin_solutions(U1, e, tol):
            if cls is TwinClass.COMPOUND:
                s = replace(s, type=TwinType.COMPOUND_BRANCH)
            systems.append(s)
    return TwinAnalysis(axes, cls, systems)


def compound_pair(lambda_m: float = 0.9, lambda_M: float = 1.1):
    """The two-variant compound pair sharing the eigenvector e3 with eigenvalue 1.

    ``U1`` has in-plane eigenvalues ``lambda_m, lambda_M`` along
    ``(e1 ± e2)/√2``; ``U2`` is its mirror image.
    """
    s, d = 0.5 * (lambda_m + lambda_M), 0.5 * (lambda_m - lambda_M)
    U1 = np.array([[s, d, 0.0], [d, s, 0.0], [0.0, 0.0, 1.0]])
    U2 = np.array([[s, -d, 0.0], [-d, s, 0.0], [0.0, 0.0, 1.0]])
    return U1, U2
