"""Austenite/martensite habit planes ``R (U1 + λ b⊗m) - 1 = a ⊗ n``."""

from __future__ import annotations

import statistics
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import lin3
from .config import DEFAULT, max_threads
from .errors import BranchDiscontinuity, DegenerateF, InputError, MiddleEigenvalueNotOne


@dataclass(frozen=True)
class HabitSolution:
    R: np.ndarray
    lam: float
    a: np.ndarray
    n: np.ndarray
    residual: float

    def shear(self) -> np.ndarray:
        return np.outer(self.a, self.n)


def mixture(U1, b, m, lam) -> np.ndarray:
    """``F(λ) = U1 + λ b ⊗ m``."""
    return lin3.as_mat3(U1) + float(lam) * np.outer(lin3.as_vec3(b), lin3.as_vec3(m))


def singular_values(F) -> np.ndarray:
    """Ascending singular values of ``F``."""
    return np.sort(np.linalg.svd(np.asarray(F, dtype=float), compute_uv=False))


def middle_eigenvalue(U1, b, m, lam) -> float:
    """Middle singular value of ``F(λ)``.

    Raises:
        DegenerateF: if ``det F(λ) <= 0``.
    """
    F = mixture(U1, b, m, lam)
    if not lin3.det(F) > 0.0:
        raise DegenerateF(f"det F({lam}) is not positive")
    return float(singular_values(F)[1])


def rank_one_from_identity(F, tol: float = DEFAULT.habit, lam: float = 0.0):
    """All ``(R, a, n)`` with ``R F = 1 + a ⊗ n`` for an invertible ``F``.

    The plane ``n⊥`` has to be mapped isometrically by ``F``; with
    ``FᵀF = Σ λ_i e_i⊗e_i`` and ``λ_2 = 1`` this forces
    ``n ∝ -√(1-λ1) e1 ± √(λ3-1) e3``. The rotation is then fixed by sending
    the image of an orthonormal basis of ``n⊥`` back onto that basis, and
    ``a = R F n - n``.

    Raises:
        MiddleEigenvalueNotOne: if the middle singular value misses 1 by more
            than ``tol``.
    """
    F = lin3.as_mat3(F)
    if not lin3.det(F) > 0.0:
        raise DegenerateF("det F is not positive")
    C = F.T @ F
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    sigma_mid = float(np.sqrt(max(w[1], 0.0)))
    deviation = abs(sigma_mid - 1.0)
    if deviation > tol:
        raise MiddleEigenvalueNotOne(deviation, sigma_mid)

    if w[2] - w[0] <= 1e-14:
        R, _ = lin3.polar(F)
        R = R.T
        a = np.zeros(3)
        n = np.array([1.0, 0.0, 0.0])
        residual = lin3.norm(R @ F - np.eye(3))
        return [HabitSolution(R, float(lam), a, n, residual)]

    l1 = min(w[0], 1.0)
    l3 = max(w[2], 1.0)
    e1, e2, e3 = V[:, 0], V[:, 1], V[:, 2]
    solutions: list[HabitSolution] = []
    for kappa in (1.0, -1.0):
        n = (-np.sqrt(1.0 - l1) * e1 + kappa * np.sqrt(l3 - 1.0) * e3) / np.sqrt(l3 - l1)
        n = lin3.unit(n)
        u1 = e2 - (e2 @ n) * n
        u1 = lin3.unit(u1)
        u2 = np.cross(n, u1)
        f1 = lin3.unit(F @ u1)
        f2 = F @ u2
        f2 = lin3.unit(f2 - (f2 @ f1) * f1)
        f3 = np.cross(f1, f2)
        R = np.outer(u1, f1) + np.outer(u2, f2) + np.outer(n, f3)
        a = R @ F @ n - n
        n_c = lin3.canonical_sign(n)
        if n_c[0] != n[0] or n_c[1] != n[1] or n_c[2] != n[2]:
            a, n = -a, n_c
        residual = lin3.norm(R @ F - np.eye(3) - np.outer(a, n))
        candidate = HabitSolution(lin3.clean(R), float(lam), lin3.clean(a), lin3.clean(n), residual)
        if all(lin3.norm(candidate.shear() - s.shear()) > DEFAULT.habit_dedupe for s in solutions):
            solutions.append(candidate)
    solutions.sort(key=lambda s: tuple(np.round(s.n, 12)))
    return solutions


def solve_habit(U1, b, m, lam, tol: float = DEFAULT.habit):
    """Habit-plane solutions at twin fraction ``lam``.

    Returns a list sorted by ``n``. For a fixed ``λ`` there are at most two
    distinct solutions (one for a rotation ``F``).

    Raises:
        MiddleEigenvalueNotOne: no solution exists; carries the deviation.
        DegenerateF: ``det F(λ) <= 0``.
    """
    return rank_one_from_identity(mixture(U1, b, m, lam), tol, lam)


@dataclass(frozen=True)
class ScanRecord:
    lam: float
    sigma_mid: float
    solvable: bool
    best_residual: float
    n_solutions: int
    branch_step: float = float("nan")
    branch_jump: bool = False

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "sigma_mid": self.sigma_mid,
            "solvable": self.solvable,
            "best_residual": self.best_residual,
            "n_solutions": self.n_solutions,
            "branch_step": self.branch_step,
            "branch_jump": self.branch_jump,
        }


def lambda_scan(U1, b, m, grid_size: int, tol: float = DEFAULT.habit, jump_factor: float = 5.0):
    """Solvability of the habit-plane equation on a uniform λ grid over [0, 1].

    The first solution at the first solvable λ is followed by nearest-neighbour
    continuation in ``a ⊗ n``; steps more than ``jump_factor`` times the median
    step are flagged as branch jumps (and warned).
    """
    if int(grid_size) < 2:
        raise InputError("grid_size must be at least 2")
    lams = np.linspace(0.0, 1.0, int(grid_size))

    def one(lam):
        try:
            sig = middle_eigenvalue(U1, b, m, lam)
        except DegenerateF:
            return float(lam), float("nan"), []
        try:
            sols = solve_habit(U1, b, m, lam, tol)
        except MiddleEigenvalueNotOne:
            sols = []
        return float(lam), sig, sols

    threads = max_threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, lams))
    else:
        rows = [one(lam) for lam in lams]

    tracked = None
    steps: list[float] = []
    for _, _, sols in rows:
        if not sols:
            steps.append(float("nan"))
            tracked = None
            continue
        if tracked is None:
            tracked = sols[0].shear()
            steps.append(float("nan"))
            continue
        dists = [lin3.norm(s.shear() - tracked) for s in sols]
        k = int(np.argmin(dists))
        steps.append(dists[k])
        tracked = sols[k].shear()

    finite = [s for s in steps if np.isfinite(s)]
    median = statistics.median(finite) if len(finite) >= 2 else float("nan")
    records = []
    any_jump = False
    for (lam, sig, sols), step in zip(rows, steps):
        jump = bool(np.isfinite(median) and np.isfinite(step) and step > jump_factor * max(median, 1e-12))
        any_jump |= jump
        best = min((s.residual for s in sols), default=float("nan"))
        records.append(ScanRecord(lam, sig, bool(sols), best, len(sols), step, jump))
    if any_jump:
        warnings.warn("habit-plane branch jumps between neighbouring λ", BranchDiscontinuity, stacklevel=2)
    return records
