"""Compound-well hull membership, compound rigidity closed forms, two-well polynomial."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lin3
from .config import DEFAULT
from .errors import (
    DEqualsMuSquared,
    Infeasible,
    InvalidWellSet,
    MuEqualsOne,
    NotQuadratic,
    TwinforgeError,
)

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


@dataclass(frozen=True)
class CompoundWellSet:
    """Wells sharing the eigenvector ``v`` (eigenvalue ``mu``) and determinant ``D``."""

    wells: tuple
    v: np.ndarray
    mu: float
    D: float

    @classmethod
    def from_wells(cls, wells, tol: float = DEFAULT.hull) -> "CompoundWellSet":
        """Detect the shared eigenvector and determinant of ``wells``.

        Raises:
            InvalidWellSet: empty list, a non-spd well, unequal determinants,
                or no common eigenvector with a common eigenvalue.
        """
        Us = tuple(lin3.as_mat3(U) for U in wells)
        if not Us:
            raise InvalidWellSet("well set is empty")
        for U in Us:
            if not lin3.is_spd(U):
                raise InvalidWellSet("every well must be symmetric positive definite")
        D = lin3.det(Us[0])
        if any(abs(lin3.det(U) - D) > tol * max(1.0, abs(D)) for U in Us):
            raise InvalidWellSet("wells do not share a determinant")
        scale = max(lin3.norm(U) for U in Us)
        _, vecs = lin3.eigen_sym(Us[0])
        for k in range(3):
            v = vecs[:, k]
            mu = float(v @ Us[0] @ v)
            if all(np.linalg.norm(U @ v - mu * v) <= tol * scale for U in Us):
                return cls(Us, lin3.canonical_sign(v), mu, D)
        raise InvalidWellSet("wells do not share an eigenvector with a common eigenvalue")

    def validate(self, tol: float = DEFAULT.hull) -> None:
        for U in self.wells:
            if np.linalg.norm(U @ self.v - self.mu * self.v) > tol * max(1.0, lin3.norm(U)):
                raise InvalidWellSet("shared eigenvector relation U v = mu v fails")
            if abs(lin3.det(U) - self.D) > tol * max(1.0, abs(self.D)):
                raise InvalidWellSet("well determinant differs from D")

    def as_dict(self) -> dict:
        return {"wells": [U for U in self.wells], "v": self.v, "mu": self.mu, "D": self.D}


def compound_wells(D: float, mu: float, lambda_m: float, axis=(0.0, 0.0, 1.0)) -> CompoundWellSet:
    """Two mirror-image wells with shared eigenpair ``(axis, mu)`` and determinant ``D``.

    In the plane normal to ``axis`` the wells stretch by ``lambda_m`` and
    ``D/(mu lambda_m)`` along the diagonals, like the classic compound pair.
    """
    lam_M = D / (mu * lambda_m)
    s, d = 0.5 * (lambda_m + lam_M), 0.5 * (lambda_m - lam_M)
    U1 = np.array([[s, d, 0.0], [d, s, 0.0], [0.0, 0.0, mu]])
    U2 = np.array([[s, -d, 0.0], [-d, s, 0.0], [0.0, 0.0, mu]])
    R = lin3.rotation_taking((0.0, 0.0, 1.0), axis)
    return CompoundWellSet.from_wells([R @ U1 @ R.T, R @ U2 @ R.T])


def _plane_basis(v):
    v = lin3.unit(v)
    helper = np.eye(3)[int(np.argmin(np.abs(v)))]
    u = lin3.unit(np.cross(v, helper))
    return u, np.cross(v, u)


def default_w_dirs(wells: CompoundWellSet, n_plane: int = 64) -> np.ndarray:
    """Test directions: well eigenvectors, pairwise twin normals, golden-angle plane samples."""
    from .twin import twin_axes, twin_solutions

    dirs = []
    for U in wells.wells:
        _, vecs = lin3.eigen_sym(U)
        dirs.extend(vecs.T)
    for i, Ui in enumerate(wells.wells):
        for Uj in wells.wells[i + 1:]:
            try:
                for e in twin_axes(Ui, Uj):
                    for s in twin_solutions(Ui, e):
                        dirs.append(lin3.unit(s.m))
            except TwinforgeError:
                continue
    u, w = _plane_basis(wells.v)
    k = np.arange(n_plane)
    phi = k * GOLDEN_ANGLE
    dirs.extend(np.cos(phi)[:, None] * u + np.sin(phi)[:, None] * w)
    return np.array(dirs)


@dataclass(frozen=True)
class HullResult:
    member: bool
    violations: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"member": self.member, "violations": self.violations}


def hull_membership(F, wells: CompoundWellSet, w_dirs=None, tol: float = DEFAULT.hull) -> HullResult:
    """Necessary conditions for ``F`` to lie in the quasiconvex hull of ``wells``.

    ``member`` is an outer approximation: ``True`` means no checked
    constraint excludes ``F``.

    Raises:
        InvalidWellSet: when ``wells`` breaks its own invariants or no
            direction is supplied.
    """
    wells.validate()
    F = lin3.as_mat3(F)
    W = default_w_dirs(wells) if w_dirs is None else np.atleast_2d(np.asarray(w_dirs, dtype=float))
    if W.size == 0:
        raise InvalidWellSet("at least one test direction is required")
    W = W / np.linalg.norm(W, axis=1, keepdims=True)
    scale = max(1.0, lin3.norm(F))
    violations = []

    d = lin3.det(F)
    if abs(d - wells.D) > tol * scale ** 3:
        violations.append({"constraint": "det", "value": d, "bound": wells.D})

    C = F.T @ F
    r = float(np.linalg.norm(C @ wells.v - wells.mu ** 2 * wells.v))
    if r > tol * scale ** 2:
        violations.append({"constraint": "shared_axis", "value": r, "bound": 0.0})

    lhs = np.einsum("ij,jk,ik->i", W, C, W)
    bound = np.max([np.einsum("ij,ij->i", W @ U.T, W @ U.T) for U in wells.wells], axis=0)
    for idx in np.flatnonzero(lhs > bound + tol * scale ** 2):
        violations.append({"constraint": "direction", "w": W[idx], "value": float(lhs[idx]), "bound": float(bound[idx])})
    return HullResult(not violations, violations)


@dataclass(frozen=True)
class RigidityData:
    a_norm: float
    n3_sq: float
    feasible: bool

    def as_dict(self) -> dict:
        return {"a_norm": self.a_norm, "n3_sq": self.n3_sq, "feasible": self.feasible}


def rigidity_data(D: float, mu: float, tol: float = DEFAULT.mu_one) -> RigidityData:
    """Forced shear length and normal component for rank-one maps into a compound hull.

    Raises:
        MuEqualsOne, DEqualsMuSquared
    """
    D, mu = float(D), float(mu)
    if abs(mu - 1.0) <= tol:
        raise MuEqualsOne("rigidity does not hold for mu = 1")
    if abs(D - mu * mu) <= tol:
        raise DEqualsMuSquared("D = mu^2 forces a⊗n = 0")
    a_norm = abs(D - mu * mu) / mu
    n3_sq = mu * mu * (1.0 - mu * mu) / (D * D - mu ** 4)
    return RigidityData(a_norm, n3_sq, bool(0.0 < n3_sq <= 1.0))


@dataclass(frozen=True)
class SistemoneSolution:
    a: np.ndarray
    n: np.ndarray
    residuals: np.ndarray
    constraint_residual: float
    det_residual: float

    @property
    def gradient(self) -> np.ndarray:
        return np.eye(3) + np.outer(self.a, self.n)

    @property
    def max_residual(self) -> float:
        return float(max(np.max(np.abs(self.residuals)), abs(self.constraint_residual), self.det_residual))


def sistemone_residuals(a, n, mu: float, D: float):
    """Residuals of the six component equations for ``F = 1 + a⊗n``.

    The right-hand sides ``alpha, beta, gamma`` of the in-plane equations are
    taken from ``FᵀF`` itself, so those three check the closed forms of the
    left-hand sides; the in-plane constraint ``alpha beta - gamma^2 = D^2/mu^2``
    is returned separately.

    Returns:
        ``(residuals, constraint_residual)``
    """
    a, n = lin3.as_vec3(a), lin3.as_vec3(n)
    aa = float(a @ a)
    C = (np.eye(3) + np.outer(n, a)) @ (np.eye(3) + np.outer(a, n))
    res = np.array([
        1.0 + 2.0 * a[0] * n[0] + aa * n[0] ** 2 - C[0, 0],
        1.0 + 2.0 * a[1] * n[1] + aa * n[1] ** 2 - C[1, 1],
        a[0] * n[1] + a[1] * n[0] + aa * n[0] * n[1] - C[0, 1],
        a[2] * n[0] + a[0] * n[2] + aa * n[0] * n[2],
        a[2] * n[1] + a[1] * n[2] + aa * n[1] * n[2],
        1.0 + 2.0 * a[2] * n[2] + aa * n[2] ** 2 - mu * mu,
    ])
    constraint = C[0, 0] * C[1, 1] - C[0, 1] ** 2 - D * D / (mu * mu)
    return res, float(constraint)


def solve_sistemone(D: float, mu: float, phase: float = 0.0) -> SistemoneSolution:
    """One point of the circle of rank-one solutions in the compound hull.

    ``phase`` rotates the in-plane part of ``n`` about ``e3``; ``phase = 0``
    gives the canonical ``n2 = 0`` representative.

    Raises:
        Infeasible, MuEqualsOne, DEqualsMuSquared
    """
    data = rigidity_data(D, mu)
    if not data.feasible:
        raise Infeasible(f"n3^2 = {data.n3_sq:.6g} lies outside (0, 1]")
    n3 = np.sqrt(data.n3_sq)
    rho = np.sqrt(max(0.0, 1.0 - data.n3_sq))
    n = np.array([rho * np.cos(phase), rho * np.sin(phase), n3])
    a = (D - mu * mu) * n - (1.0 - mu * mu) / n3 * np.array([0.0, 0.0, 1.0])
    res, con = sistemone_residuals(a, n, mu, D)
    return SistemoneSolution(lin3.clean(a), lin3.clean(n), res, con, abs(float(a @ n) - (D - 1.0)))


@dataclass(frozen=True)
class TwoWellPolynomial:
    c0: float
    c1: float
    c2: float
    quadratic_deviation: float
    symmetry_residual: float

    def __call__(self, mu):
        return self.c0 + self.c1 * mu + self.c2 * mu * mu

    def derivative(self, mu=0.0):
        return self.c1 + 2.0 * self.c2 * mu

    def as_dict(self) -> dict:
        return {
            "c0": self.c0,
            "c1": self.c1,
            "c2": self.c2,
            "quadratic_deviation": self.quadratic_deviation,
            "symmetry_residual": self.symmetry_residual,
        }


def _f(U, S, mu):
    F = U + mu * S
    return lin3.det(F.T @ F - np.eye(3))


def two_well_polynomial(U, b, m, tol: float = DEFAULT.quadratic) -> TwoWellPolynomial:
    """Fit ``f(mu) = det((U+mu b⊗m)ᵀ(U+mu b⊗m) - 1)`` from ``mu = 0, 1/2, 1``.

    Raises:
        NotQuadratic: when ``f(0.3)`` misses the fitted parabola by more than ``tol``.
    """
    U = lin3.as_mat3(U)
    S = np.outer(lin3.as_vec3(b), lin3.as_vec3(m))
    f0, fh, f1 = (_f(U, S, t) for t in (0.0, 0.5, 1.0))
    c2 = 2.0 * f1 - 4.0 * fh + 2.0 * f0
    c1 = f1 - f0 - c2
    poly = TwoWellPolynomial(f0, c1, c2, 0.0, 0.0)
    dev = abs(_f(U, S, 0.3) - poly(0.3))
    grid = np.linspace(0.0, 1.0, 5)
    sym = max(abs(_f(U, S, t) - _f(U, S, 1.0 - t)) for t in grid)
    if dev > tol:
        raise NotQuadratic(f"fourth sample deviates by {dev:.3e}")
    return TwoWellPolynomial(f0, c1, c2, dev, sym)
