"""Cofactor conditions and the zero-energy twin/austenite families they enable."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import lin3
from .config import DEFAULT
from .errors import (
    CofactorNotSatisfied,
    DegenerateF,
    MiddleEigenvalueNotOne,
    MultipleFamilies,
    NoSharedNormal,
    NoSharedShearVector,
    NotATwinSolution,
)
from .habit import solve_habit

FAMILY_LAMBDAS = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class CofactorReport:
    cc1_residual: float
    cc2_value: float
    cc3_value: float
    tol: float

    @property
    def cc1_ok(self) -> bool:
        return self.cc1_residual <= self.tol

    @property
    def cc2_ok(self) -> bool:
        return abs(self.cc2_value) <= self.tol

    @property
    def cc3_ok(self) -> bool:
        return self.cc3_value >= -self.tol

    @property
    def satisfied(self) -> bool:
        return self.cc1_ok and self.cc2_ok and self.cc3_ok

    def as_dict(self) -> dict:
        return {
            "cc1_residual": self.cc1_residual,
            "cc2_value": self.cc2_value,
            "cc3_value": self.cc3_value,
            "cc1_ok": self.cc1_ok,
            "cc2_ok": self.cc2_ok,
            "cc3_ok": self.cc3_ok,
            "satisfied": self.satisfied,
            "tol": self.tol,
        }


def twin_compatibility_residual(U1, b, m) -> float:
    """How far ``U1 + b⊗m`` is from being a rotated variant of ``U1``.

    Compares the spectra of ``(U1+b⊗m)ᵀ(U1+b⊗m)`` and ``U1²``; infinite when
    the shear vanishes or the determinant is not positive.
    """
    U1 = lin3.as_mat3(U1)
    S = np.outer(lin3.as_vec3(b), lin3.as_vec3(m))
    if lin3.norm(S) <= 1e-14 * max(1.0, lin3.norm(U1)):
        return float("inf")
    F = U1 + S
    if not lin3.det(F) > 0.0:
        return float("inf")
    w_f = np.linalg.eigvalsh(F.T @ F)
    w_u = np.linalg.eigvalsh(U1 @ U1)
    return float(np.max(np.abs(w_f - w_u)))


def _require_twin(U1, b, m, compat_tol):
    res = twin_compatibility_residual(U1, b, m)
    if not res <= compat_tol:
        raise NotATwinSolution(f"(b, m) does not solve the twinning equation (residual {res:.3e})")


def check_cofactor(U1, b, m, tol: float = DEFAULT.cofactor, compat_tol: float | None = None) -> CofactorReport:
    """Evaluate the three cofactor conditions for a twin solution ``(b, m)``.

    Raises:
        NotATwinSolution: if ``(b, m)`` fails the twinning compatibility check.
    """
    U1 = lin3.as_mat3(U1)
    b = lin3.as_vec3(b)
    m = lin3.as_vec3(m)
    _require_twin(U1, b, m, max(DEFAULT.twin_compat, tol) if compat_tol is None else compat_tol)
    w = np.linalg.eigvalsh(0.5 * (U1 + U1.T))
    cc1 = abs(float(w[1]) - 1.0)
    U1sq = U1 @ U1
    cc2 = float(b @ U1 @ lin3.cofactor(U1sq - np.eye(3)) @ m)
    cc3 = float(np.trace(U1sq) - lin3.det(U1sq) - 0.25 * (b @ b) * (m @ m) - 2.0)
    return CofactorReport(cc1, cc2, cc3, float(tol))


def degeneracy_metric(U1, b, m) -> float:
    """Scalar distance to the cofactor conditions (0 when all hold)."""
    r = check_cofactor(U1, b, m)
    return max(r.cc1_residual, abs(r.cc2_value), max(0.0, -r.cc3_value))


@dataclass(frozen=True)
class TypeIFamily:
    """``R0 (U1 + λ b⊗m) = 1 + a0 ⊗ (λ ξ n1 + (1-λ) n0)``."""

    R0: np.ndarray
    a0: np.ndarray
    n0: np.ndarray
    n1: np.ndarray
    xi: float

    def normal(self, lam) -> np.ndarray:
        return lam * self.xi * self.n1 + (1.0 - lam) * self.n0

    def gradient(self, lam) -> np.ndarray:
        return np.eye(3) + np.outer(self.a0, self.normal(lam))

    @property
    def mhat(self) -> np.ndarray:
        """Direction along which λ may vary: ``ξ n1 - n0``."""
        return self.xi * self.n1 - self.n0

    def residual(self, U1, b, m, lambdas=FAMILY_LAMBDAS) -> float:
        S = np.outer(b, m)
        return max(lin3.norm(self.R0 @ (U1 + lam * S) - self.gradient(lam)) for lam in lambdas)

    def orthogonality(self) -> float:
        return abs(float(self.a0 @ self.mhat))

    def as_dict(self) -> dict:
        return {"R0": self.R0, "a0": self.a0, "n0": self.n0, "n1": self.n1, "xi": self.xi}


@dataclass(frozen=True)
class TypeIIFamily:
    """``R0 (U1 + λ b⊗m) = 1 + (λ ξ a1 + (1-λ) a0) ⊗ n0``.

    Only the product ``ξ a1`` is determined; it is stored with ``ξ = 1``.
    """

    R0: np.ndarray
    a0: np.ndarray
    a1: np.ndarray
    n0: np.ndarray
    xi: float

    def shear(self, lam) -> np.ndarray:
        return lam * self.xi * self.a1 + (1.0 - lam) * self.a0

    def gradient(self, lam) -> np.ndarray:
        return np.eye(3) + np.outer(self.shear(lam), self.n0)

    def residual(self, U1, b, m, lambdas=FAMILY_LAMBDAS) -> float:
        S = np.outer(b, m)
        return max(lin3.norm(self.R0 @ (U1 + lam * S) - self.gradient(lam)) for lam in lambdas)

    def as_dict(self) -> dict:
        return {"R0": self.R0, "a0": self.a0, "a1": self.a1, "n0": self.n0, "xi": self.xi}


def _endpoint_solutions(U1, b, m, tol):
    try:
        return solve_habit(U1, b, m, 0.0, tol), solve_habit(U1, b, m, 1.0, tol)
    except (MiddleEigenvalueNotOne, DegenerateF) as exc:
        raise CofactorNotSatisfied(f"habit equation unsolvable at an endpoint: {exc}") from exc


def _parallel(u, v, tol):
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return False
    return np.linalg.norm(np.cross(u, v)) <= tol * nu * nv


def _require_cofactor(U1, b, m, tol):
    report = check_cofactor(U1, b, m, tol)
    if not report.satisfied:
        raise CofactorNotSatisfied(
            f"cofactor conditions fail: cc1={report.cc1_residual:.3e}, "
            f"cc2={report.cc2_value:.3e}, cc3={report.cc3_value:.3e}"
        )


def _dedupe(families, key):
    out = []
    for f in families:
        if all(lin3.norm(key(f) - key(g)) > DEFAULT.habit_dedupe for g in out):
            out.append(f)
    return out


def typeI_families(U1, b, m, tol: float = DEFAULT.cofactor, shared_tol: float = DEFAULT.shared):
    """Every type I family obtainable by pairing the λ=0 and λ=1 habit solutions.

    A pairing is admissible when both endpoints use the same rotation and
    parallel shear vectors ``a``.
    """
    U1, b, m = lin3.as_mat3(U1), lin3.as_vec3(b), lin3.as_vec3(m)
    _require_cofactor(U1, b, m, tol)
    sols0, sols1 = _endpoint_solutions(U1, b, m, tol)
    families = []
    for s0 in sols0:
        for s1 in sols1:
            if lin3.norm(s0.R - s1.R) > shared_tol or not _parallel(s0.a, s1.a, shared_tol):
                continue
            kappa = float(s1.a @ s0.a) / float(s0.a @ s0.a)
            xi_n1 = kappa * s1.n
            xi = float(np.linalg.norm(xi_n1))
            fam = TypeIFamily(s0.R, s0.a, s0.n, lin3.clean(xi_n1 / xi), xi)
            if fam.residual(U1, b, m) <= DEFAULT.family and fam.orthogonality() <= DEFAULT.family:
                families.append(fam)
    return _dedupe(families, lambda f: np.concatenate([np.outer(f.a0, f.n0).ravel(), f.xi * f.n1]))


def typeII_families(U1, b, m, tol: float = DEFAULT.cofactor, shared_tol: float = DEFAULT.shared):
    """Every type II family: endpoints sharing the rotation and the normal ``n0``."""
    U1, b, m = lin3.as_mat3(U1), lin3.as_vec3(b), lin3.as_vec3(m)
    _require_cofactor(U1, b, m, tol)
    sols0, sols1 = _endpoint_solutions(U1, b, m, tol)
    families = []
    for s0 in sols0:
        for s1 in sols1:
            if lin3.norm(s0.R - s1.R) > shared_tol or not _parallel(s0.n, s1.n, shared_tol):
                continue
            sign = 1.0 if float(s0.n @ s1.n) > 0 else -1.0
            fam = TypeIIFamily(s0.R, s0.a, lin3.clean(sign * s1.a), s0.n, 1.0)
            if fam.residual(U1, b, m) <= DEFAULT.family:
                families.append(fam)
    return _dedupe(families, lambda f: np.concatenate([np.outer(f.a0, f.n0).ravel(), f.a1]))


def build_typeI_family(U1, b, m, tol: float = DEFAULT.cofactor) -> TypeIFamily:
    """First type I family; warns :class:`MultipleFamilies` when there are several.

    Raises:
        CofactorNotSatisfied, NoSharedShearVector
    """
    fams = typeI_families(U1, b, m, tol)
    if not fams:
        raise NoSharedShearVector("no pairing of λ=0 and λ=1 habit solutions shares the shear vector")
    if len(fams) > 1:
        warnings.warn(f"{len(fams)} type I families found", MultipleFamilies, stacklevel=2)
    return fams[0]


def build_typeII_family(U1, b, m, tol: float = DEFAULT.cofactor) -> TypeIIFamily:
    """First type II family; warns :class:`MultipleFamilies` when there are several.

    Raises:
        CofactorNotSatisfied, NoSharedNormal
    """
    fams = typeII_families(U1, b, m, tol)
    if not fams:
        raise NoSharedNormal("no pairing of λ=0 and λ=1 habit solutions shares the normal")
    if len(fams) > 1:
        warnings.warn(f"{len(fams)} type II families found", MultipleFamilies, stacklevel=2)
    return fams[0]


_EXAMPLE_AXIS = (1.0, 2.0, 3.0)
_EXAMPLE_TILT = (0.3, -0.5, 0.8)


def supercompatible_example(kind: str = "I", stretches=(0.9, 1.0, 1.1)):
    """A non-compound twin that satisfies the cofactor conditions exactly.

    ``U1 = R(θ) diag(stretches) R(θ)ᵀ`` with a fixed generic twin axis; θ is
    the first root of CC2 for the requested solution type (``"I"`` or
    ``"II"``). CC1 holds by construction when the middle stretch is 1.

    Returns:
        ``(U1, U2, system)`` where ``system`` is the chosen twin solution.
    """
    from scipy.optimize import brentq

    from .twin import conjugate, twin_solutions

    if kind not in ("I", "II"):
        raise ValueError("kind must be 'I' or 'II'")
    e = lin3.unit(_EXAMPLE_AXIS)
    D = np.diag(np.asarray(stretches, dtype=float))

    def build(theta):
        R = lin3.rotation_about(_EXAMPLE_TILT, theta)
        U1 = R @ D @ R.T
        U1 = 0.5 * (U1 + U1.T)
        s1, s2 = twin_solutions(U1, e)
        return U1, (s1 if kind == "I" else s2)

    def cc2(theta):
        U1, s = build(theta)
        return float(s.b @ U1 @ lin3.cofactor(U1 @ U1 - np.eye(3)) @ s.m)

    grid = np.linspace(0.0, np.pi, 721)
    vals = [cc2(t) for t in grid]
    for t0, t1, v0, v1 in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if v0 * v1 < 0.0:
            theta = brentq(cc2, t0, t1, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            U1, s = build(theta)
            return U1, conjugate(U1, e), s
    raise CofactorNotSatisfied("no root of CC2 in the scanned rotation range")
