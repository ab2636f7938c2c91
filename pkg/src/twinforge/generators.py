"""Synthetic moving-mask microstructures with known interfaces.

Every generator builds an analytic displacement ``z(x) = A G(x) + B Φ(G(x))``
with ``G(x) = p·x + κ Φ(q·x)`` and ``Φ`` the antiderivative of a profile.
Cell gradients are exact forward differences of ``z`` between neighbouring
cell centres, so the emitted field is a discrete gradient to round-off and
each cell is exactly of the form ``1 + a ⊗ g``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import lin3
from .config import DEFAULT
from .errors import FieldTooSmall, ProfileOutOfRange
from .field import GradientField, Phase
from .profiles import Profile

MU1_STRETCHES = (0.9, 1.1)


@dataclass
class GroundTruth:
    """Analytic description of a generated field, expressed in the field frame.

    ``frame`` maps laboratory coordinates to field coordinates; ``params``
    keeps the laboratory-frame inputs for the sidecar.
    """

    kind: str
    p: np.ndarray
    q: np.ndarray
    kappa: float
    A: np.ndarray
    B: np.ndarray
    profile: Profile
    frame: np.ndarray = field(default_factory=lambda: np.eye(3))
    params: dict = field(default_factory=dict)
    _table: tuple | None = field(default=None, repr=False, compare=False)

    def potential(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        G = x @ self.p
        if self.kappa:
            G = G + self.kappa * self.profile.antiderivative(x @ self.q)
        return G

    def grad_potential(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = np.broadcast_to(self.p, x.shape).copy()
        if self.kappa:
            g = g + self.kappa * self.profile(x @ self.q)[..., None] * self.q
        return g

    def _image(self, G):
        G = np.asarray(G, dtype=float)
        out = G[..., None] * self.A
        if self.B.any():
            out = out + self.profile.antiderivative(G)[..., None] * self.B
        return out

    def z(self, x) -> np.ndarray:
        return self._image(self.potential(x))

    def set_range(self, lo: float, hi: float, samples: int = 20001):
        G = np.linspace(lo, hi, samples)
        self._table = (G, self._image(G))

    def level_of(self, points) -> np.ndarray:
        """Potential value whose image point is nearest to each of ``points``."""
        G, Z = self._table
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        from scipy.spatial import cKDTree

        _, idx = cKDTree(Z).query(pts)
        out = G[idx].copy()
        for side in (-1, 1):
            j = np.clip(idx + side, 0, len(G) - 1)
            seg = Z[j] - Z[idx]
            L2 = np.einsum("ij,ij->i", seg, seg)
            w = np.where(L2 > 0, np.einsum("ij,ij->i", pts - Z[idx], seg) / np.where(L2 > 0, L2, 1.0), 0.0)
            use = (w > 0) & (w <= 1)
            out = np.where(use, G[idx] + w * (G[j] - G[idx]), out)
        return out

    def level_distance(self, x, level: float) -> np.ndarray:
        """First-order distance from ``x`` to the level set ``G = level``."""
        x = np.asarray(x, dtype=float)
        g = np.linalg.norm(self.grad_potential(x), axis=-1)
        return np.abs(self.potential(x) - level) / np.where(g > 0, g, np.inf)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "potential": {"p": self.p, "q": self.q, "kappa": self.kappa},
            "image": {"A": self.A, "B": self.B},
            "profile": self.profile.to_dict(),
            "frame": self.frame,
            "params": self.params,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        pot, img = d["potential"], d["image"]
        vec = lambda v: np.asarray(v, dtype=float)
        return cls(
            d["kind"],
            vec(pot["p"]),
            vec(pot["q"]),
            float(pot["kappa"]),
            vec(img["A"]),
            vec(img["B"]),
            Profile.from_dict(d["profile"]),
            vec(d["frame"]),
            dict(d.get("params", {})),
        )


class Generated(NamedTuple):
    field: GradientField
    truth: GroundTruth


def make_grid(dims, spacing=None, origin=None):
    dims = tuple(int(v) for v in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise FieldTooSmall(f"grid must have three positive sizes, got {dims}")
    if max(dims) < 3:
        raise FieldTooSmall(f"grid {dims} is too small: need at least 3 cells along some axis")
    spacing = np.array([1.0 / n for n in dims]) if spacing is None else np.asarray(spacing, dtype=float).reshape(3)
    origin = np.zeros(3) if origin is None else np.asarray(origin, dtype=float).reshape(3)
    return dims, spacing, origin


def _centers(dims, spacing, origin):
    axes = [origin[d] + (np.arange(dims[d]) + 0.5) * spacing[d] for d in range(3)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def _extent(dims, spacing, origin, direction):
    """Range of ``direction·x`` over the cell-centre lattice (one step beyond for the forward edges)."""
    lo = origin + 0.5 * spacing
    hi = origin + (np.asarray(dims) + 0.5) * spacing
    corners = np.array([[(lo, hi)[a][0], (lo, hi)[b][1], (lo, hi)[c][2]] for a in (0, 1) for b in (0, 1) for c in (0, 1)])
    v = corners @ np.asarray(direction, dtype=float)
    return float(v.min()), float(v.max())


def _sample(truth: GroundTruth, dims, spacing, origin, phase=Phase.M) -> GradientField:
    x = _centers(dims, spacing, origin)
    z0 = truth.z(x)
    F = np.empty(dims + (3, 3))
    for d in range(3):
        step = np.zeros(3)
        step[d] = spacing[d]
        F[..., :, d] = (truth.z(x + step) - z0) / spacing[d]
    F += np.eye(3)
    G = truth.potential(x)
    pad = float(np.max(spacing)) * 2.0 * (1.0 + np.linalg.norm(truth.p) + abs(truth.kappa))
    truth.set_range(float(G.min()) - pad, float(G.max()) + pad)
    return GradientField(F, spacing, origin, np.full(dims, phase, dtype=np.int8))


def _check_range(profile: Profile, lo: float, hi: float, vmin: float, vmax: float, what: str):
    fmin, fmax = profile.bounds(lo, hi)
    if fmin < vmin - 1e-12 or fmax > vmax + 1e-12:
        raise ProfileOutOfRange(f"{what} profile spans [{fmin:.6g}, {fmax:.6g}], outside [{vmin:.6g}, {vmax:.6g}]")


def gen_planar_laminate(n, profile: Profile, dims, a_dir=(1.0, 0.0, 0.0), spacing=None, origin=None) -> Generated:
    """``z = a_dir Φ(x·n)``: a laminate with planar interfaces normal to ``n``."""
    dims, spacing, origin = make_grid(dims, spacing, origin)
    n = lin3.unit(n)
    a_dir = lin3.as_vec3(a_dir)
    truth = GroundTruth(
        "planar", n, np.zeros(3), 0.0, np.zeros(3), a_dir, profile,
        params={"n": n, "a_dir": a_dir},
    )
    return Generated(_sample(truth, dims, spacing, origin), truth)


def _frame_for(normal, frame):
    if frame == "lab":
        return np.eye(3)
    if frame == "aligned":
        return lin3.rotation_taking(normal, (1.0, 0.0, 0.0))
    raise ValueError("frame must be 'lab' or 'aligned'")


def gen_typeI_curved(family, profile: Profile, dims, spacing=None, origin=None, frame: str = "lab") -> Generated:
    """Type I moving mask: ``λ(x) = f(x·m̂)``, ``∇y = 1 + a0 ⊗ (λ ξ n1 + (1-λ) n0)``.

    Raises:
        ProfileOutOfRange: ``f`` leaves ``[0, 1]`` on the domain.
    """
    dims, spacing, origin = make_grid(dims, spacing, origin)
    P = _frame_for(family.n0, frame)
    a0, n0, mhat = P @ family.a0, P @ family.n0, P @ family.mhat
    _check_range(profile, *_extent(dims, spacing, origin, mhat), 0.0, 1.0, "lambda")
    truth = GroundTruth(
        "type1", n0, mhat, 1.0, a0, np.zeros(3), profile, P,
        params={"family": family.as_dict(), "frame": frame},
    )
    gen = Generated(_sample(truth, dims, spacing, origin), truth)
    truth.params["segment_deviation"] = _segment_deviation(gen.field, a0, n0, mhat)
    return gen


def _segment_deviation(fld, a0, n0, mhat):
    """Largest distance of a cell from the segment ``{1 + a0⊗(n0 + λ m̂): λ ∈ [0,1]}``."""
    M = fld.F - np.eye(3)
    g = np.einsum("...ij,i->...j", M, a0) / float(a0 @ a0)
    lam = np.clip(np.einsum("...j,j->...", g - n0, mhat) / float(mhat @ mhat), 0.0, 1.0)
    target = np.einsum("i,...j->...ij", a0, n0 + lam[..., None] * mhat)
    diff = M - target
    return float(np.sqrt(np.einsum("...ij,...ij->...", diff, diff)).max())


def gen_typeII_planar(family, profile: Profile, dims, spacing=None, origin=None, frame: str = "aligned") -> Generated:
    """Type II moving mask: ``λ(x) = f(x·n0)``, ``∇y = 1 + (λ ξ a1 + (1-λ) a0) ⊗ n0``.

    The default ``aligned`` frame rotates ``n0`` onto ``e1`` so the discrete
    gradient stays exactly rank one.

    Raises:
        ProfileOutOfRange
    """
    dims, spacing, origin = make_grid(dims, spacing, origin)
    P = _frame_for(family.n0, frame)
    a0, a1, n0 = P @ family.a0, P @ (family.xi * family.a1), P @ family.n0
    _check_range(profile, *_extent(dims, spacing, origin, n0), 0.0, 1.0, "lambda")
    truth = GroundTruth(
        "type2", n0, np.zeros(3), 0.0, a0, a1 - a0, profile, P,
        params={"family": family.as_dict(), "frame": frame},
    )
    return Generated(_sample(truth, dims, spacing, origin), truth)


def mu1_wells():
    from .twin import compound_pair

    return compound_pair(*MU1_STRETCHES)


def mu1_gradient(s, D: float | None = None) -> np.ndarray:
    """``1 + a(s) ⊗ n`` with ``n = e1``, ``n⊥ = -e2`` and ``a(s) = (D-1) n + s n⊥``."""
    if D is None:
        D = MU1_STRETCHES[0] * MU1_STRETCHES[1]
    n, n_perp = np.array([1.0, 0.0, 0.0]), np.array([0.0, -1.0, 0.0])
    return np.eye(3) + np.outer((D - 1.0) * n + s * n_perp, n)


def mu1_epsilon(iterations: int = 200) -> float:
    """Largest ``|s|`` keeping ``1 + a(s)⊗n`` inside the μ = 1 compound hull.

    Found by bisection on ``max(α, β) ≤ (λm² + λM²)/2`` and
    ``αβ - γ² ≥ (λm λM)²``.
    """
    lm, lM = MU1_STRETCHES
    cap = 0.5 * (lm * lm + lM * lM)
    floor = (lm * lM) ** 2

    def ok(s):
        for sgn in (1.0, -1.0):
            C = mu1_gradient(sgn * s).T @ mu1_gradient(sgn * s)
            alpha, beta, gamma = C[0, 0], C[1, 1], C[0, 1]
            if max(alpha, beta) > cap or alpha * beta - gamma * gamma < floor * (1.0 - 1e-12):
                return False
        return True

    lo, hi = 0.0, 1.0
    if not ok(lo):
        return 0.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
        if hi - lo <= 1e-15:
            break
    return lo


def gen_mu1_compound(profile: Profile, dims, spacing=None, origin=None) -> Generated:
    """Non-constant rank-one field inside the μ = 1 compound hull.

    ``∇y = 1 + a(s(x·n)) ⊗ n`` with ``a(s) = (D-1) n + s n⊥``.

    Raises:
        ProfileOutOfRange: ``|s|`` exceeds the bisected bound ``ε``.
    """
    from .hull import CompoundWellSet, hull_membership

    dims, spacing, origin = make_grid(dims, spacing, origin)
    eps = mu1_epsilon()
    n, n_perp = np.array([1.0, 0.0, 0.0]), np.array([0.0, -1.0, 0.0])
    _check_range(profile, *_extent(dims, spacing, origin, n), -eps, eps, "s")
    D = MU1_STRETCHES[0] * MU1_STRETCHES[1]
    truth = GroundTruth(
        "mu1", n, np.zeros(3), 0.0, (D - 1.0) * n, n_perp, profile,
        params={"epsilon": eps, "D": D, "stretches": list(MU1_STRETCHES)},
    )
    gen = Generated(_sample(truth, dims, spacing, origin), truth)
    wells = CompoundWellSet.from_wells(mu1_wells())
    uniq = np.unique(np.round(gen.field.flat_F(), 14), axis=0)
    bad = sum(not hull_membership(F, wells, tol=DEFAULT.hull).member for F in uniq)
    truth.params["hull_violations"] = int(bad)
    truth.params["distinct_gradients"] = int(len(uniq))
    return gen


class Counterexample(NamedTuple):
    field: GradientField
    a: np.ndarray
    n: np.ndarray
    plane: float


def gen_opposing_interfaces(dims, e=(1.0, 0.0, 0.0), c: float | None = None, spacing=None, origin=None) -> Counterexample:
    """``z = e (x·e)`` written with ``a = n = e`` below ``x·e = c`` and ``-e`` above.

    The gradient ``1 + e⊗e`` is constant; only the factorisation flips.
    """
    dims, spacing, origin = make_grid(dims, spacing, origin)
    e = lin3.unit(e)
    x = _centers(dims, spacing, origin)
    s = x @ e
    if c is None:
        c = 0.5 * (float(s.min()) + float(s.max()))
    sign = np.where(s < c, 1.0, -1.0)[..., None]
    F = np.broadcast_to(np.eye(3) + np.outer(e, e), dims + (3, 3)).copy()
    fld = GradientField(F, spacing, origin)
    return Counterexample(fld, sign * e, sign * e, float(c))
