"""Dense 3x3 linear algebra used throughout the package.

Matrices are plain ``numpy`` arrays of shape ``(3, 3)``; vectors have shape
``(3,)``. Predicates take an explicit tolerance; everything else falls back
on :data:`twinforge.config.DEFAULT`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .config import DEFAULT
from .errors import InputError, NonPositiveDeterminant, NotSymmetric

IDENTITY = np.eye(3)
_SIGN_TOL = 1e-12


def as_mat3(M) -> np.ndarray:
    """Validate and convert to a finite float ``(3, 3)`` array.

    A flat sequence of nine numbers is read row-major.
    """
    A = np.asarray(M, dtype=float)
    if A.shape == (9,):
        A = A.reshape(3, 3)
    if A.shape != (3, 3):
        raise InputError(f"expected a 3x3 matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError("matrix has non-finite entries")
    return A


def as_vec3(v) -> np.ndarray:
    x = np.asarray(v, dtype=float)
    if x.shape != (3,):
        raise InputError(f"expected a 3-vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InputError("vector has non-finite entries")
    return x


def norm(M) -> float:
    """Frobenius norm (Euclidean norm for vectors)."""
    return float(np.linalg.norm(M))


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    length = np.linalg.norm(v)
    if length == 0.0:
        raise InputError("cannot normalise the zero vector")
    return v / length


def canonical_sign(v, tol: float = _SIGN_TOL) -> np.ndarray:
    """Flip ``v`` so that its first component above ``tol`` is positive."""
    v = np.asarray(v, dtype=float)
    for c in v:
        if abs(c) > tol:
            return v if c > 0 else -v
    return v


def clean(x) -> np.ndarray:
    """Copy of ``x`` with negative zeros turned into positive zeros."""
    return np.asarray(x, dtype=float) + 0.0


def outer(a, b) -> np.ndarray:
    return np.outer(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def det(M) -> float:
    return float(kernels.det_batch(np.asarray(M, dtype=float)[None])[0])


def is_symmetric(M, tol: float = DEFAULT.symmetric) -> bool:
    M = np.asarray(M, dtype=float)
    return bool(np.max(np.abs(M - M.T)) <= tol * max(1.0, norm(M)))


def is_rotation(Q, tol: float = DEFAULT.rotation) -> bool:
    Q = np.asarray(Q, dtype=float)
    return bool(np.max(np.abs(Q.T @ Q - IDENTITY)) <= tol and abs(det(Q) - 1.0) <= tol)


def is_spd(M, tol: float = DEFAULT.spd) -> bool:
    M = np.asarray(M, dtype=float)
    if not is_symmetric(M):
        return False
    return bool(np.linalg.eigvalsh(0.5 * (M + M.T))[0] > tol)


def cofactor(M) -> np.ndarray:
    """Cofactor matrix, so that ``M @ cofactor(M).T == det(M) * I``."""
    return kernels.cofactor_batch(np.asarray(M, dtype=float)[None])[0]


def eigen_sym(M, tol: float = DEFAULT.symmetric):
    """Eigenvalues (ascending) and eigenvectors (columns) of a symmetric matrix.

    Each eigenvector has its first non-negligible component positive.
    """
    M = np.asarray(M, dtype=float)
    if not is_symmetric(M, tol):
        raise NotSymmetric("matrix is not symmetric within tolerance")
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    for i in range(3):
        V[:, i] = canonical_sign(V[:, i])
    return w, V


def sym_sqrt(C) -> np.ndarray:
    w, V = eigen_sym(C)
    if w[0] <= 0.0:
        raise NonPositiveDeterminant("matrix is not positive definite")
    return (V * np.sqrt(w)) @ V.T


def polar(F):
    """Right polar decomposition ``F = R U``.

    Raises:
        NonPositiveDeterminant: if ``det F <= 0``.
    """
    F = np.asarray(F, dtype=float)
    if not det(F) > 0.0:
        raise NonPositiveDeterminant("polar decomposition needs det F > 0")
    W, s, Vt = np.linalg.svd(F)
    R = W @ Vt
    U = (Vt.T * s) @ Vt
    return R, 0.5 * (U + U.T)


@dataclass(frozen=True)
class RankOnePair:
    """``a ⊗ n`` with ``|n| = 1``."""

    a: np.ndarray
    n: np.ndarray

    def matrix(self) -> np.ndarray:
        return np.outer(self.a, self.n)


def rank_one_fit(M):
    """Factor ``M ≈ a ⊗ n`` and report ``‖cof M‖`` as the distance to rank one.

    ``n`` is built from the pivot row of ``MᵀM`` (its largest diagonal entry),
    normalised, and signed so that its first non-negligible component is
    positive; ``a = M n``. The zero matrix maps to ``a = 0, n = e1``.

    Returns:
        (RankOnePair, deviation)
    """
    a, n, dev = kernels.rank_one_fit_batch(np.asarray(M, dtype=float)[None])
    return RankOnePair(a[0], n[0]), float(dev[0])


def rotation_about(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about ``axis`` by ``angle`` radians."""
    k = unit(axis)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return IDENTITY + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def rotation_taking(u, v) -> np.ndarray:
    """Smallest rotation mapping direction ``u`` onto direction ``v``."""
    u, v = unit(u), unit(v)
    axis = np.cross(u, v)
    s = np.linalg.norm(axis)
    c = float(np.clip(u @ v, -1.0, 1.0))
    if s < 1e-15:
        if c > 0:
            return IDENTITY.copy()
        helper = np.eye(3)[np.argmin(np.abs(u))]
        return rotation_about(np.cross(u, helper), np.pi)
    return rotation_about(axis, np.arctan2(s, c))


def half_turn(e) -> np.ndarray:
    """The 180 degree rotation ``-1 + 2 e ⊗ e`` about unit ``e``."""
    e = unit(e)
    return -IDENTITY + 2.0 * np.outer(e, e)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_spd(rng: np.random.Generator, low: float = 0.85, high: float = 1.15) -> np.ndarray:
    Q = random_rotation(rng)
    lam = rng.uniform(low, high, size=3)
    return (Q * lam) @ Q.T
