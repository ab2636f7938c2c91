"""Moving-mask reconstruction: displacement, image curve, level-set interfaces, velocities."""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra, minimum_spanning_tree
from scipy.spatial import cKDTree

from . import kernels, lin3
from .config import DEFAULT
from .errors import (
    DegenerateInterface,
    InputError,
    MuEqualsOne,
    NotAGradient,
    NotOneDimensional,
    StationaryInterval,
    TheoremViolation,
    ZeroShearOnInterface,
)
from .field import GradientField, Phase
from .generators import (  # noqa: F401  (re-exported)
    Counterexample,
    Generated,
    GroundTruth,
    gen_mu1_compound,
    gen_opposing_interfaces,
    gen_planar_laminate,
    gen_typeI_curved,
    gen_typeII_planar,
    mu1_epsilon,
    mu1_wells,
)

DEFAULT_T_SAMPLES = 64
MAX_CURVE_VERTICES = 20000
KNN = 8


# -- displacement -------------------------------------------------------------

@dataclass
class Displacement:
    """``z = y - Qx`` on the cell-centre lattice."""

    z: np.ndarray
    x: np.ndarray
    Q: np.ndarray
    closure_residual: float
    diameter: float


def _edge_increments(fld, Q):
    M = fld.F - Q
    return [M[..., :, d] * fld.spacing[d] for d in range(3)]


def closure_residual(fld: GradientField, Q=None) -> float:
    """Largest circulation of ``F - Q`` around an elementary plaquette."""
    Q = np.eye(3) if Q is None else lin3.as_mat3(Q)
    E = _edge_increments(fld, Q)
    worst = 0.0
    for d, e in ((0, 1), (1, 2), (0, 2)):
        if fld.dims[d] < 2 or fld.dims[e] < 2:
            continue
        base = [slice(None)] * 3
        base[d], base[e] = slice(0, -1), slice(0, -1)
        sd = list(base)
        sd[d] = slice(1, None)
        se = list(base)
        se[e] = slice(1, None)
        loop = E[d][tuple(base)] + E[e][tuple(sd)] - E[d][tuple(se)] - E[e][tuple(base)]
        worst = max(worst, float(np.linalg.norm(loop, axis=-1).max()))
    return worst


def displacement_field(fld: GradientField, Q=None, tol=DEFAULT) -> Displacement:
    """Integrate ``F - Q`` along x, then y, then z from the first cell centre.

    Raises:
        NotAGradient: unknown cells, or a plaquette circulation above
            ``closure_rel`` times the domain diameter.
    """
    Q = np.eye(3) if Q is None else lin3.as_mat3(Q)
    if not lin3.is_rotation(Q):
        raise InputError("Q must be a rotation")
    if not fld.known.all():
        raise NotAGradient("field has unknown cells; the displacement is undefined there", float("inf"))
    diameter = float(np.linalg.norm(np.asarray(fld.dims) * fld.spacing))
    res = closure_residual(fld, Q)
    if res > tol.closure_rel * diameter:
        raise NotAGradient(f"loop closure residual {res:.3e} exceeds {tol.closure_rel * diameter:.3e}", res)
    Ex, Ey, Ez = _edge_increments(fld, Q)
    z = np.zeros(fld.dims + (3,))
    z[1:, 0, 0] = np.cumsum(Ex[:-1, 0, 0], axis=0)
    z[:, 1:, 0] = z[:, :1, 0] + np.cumsum(Ey[:, :-1, 0], axis=1)
    z[:, :, 1:] = z[:, :, :1] + np.cumsum(Ez[:, :, :-1], axis=2)
    return Displacement(z, fld.cell_centers(), Q, res, diameter)


# -- image curve --------------------------------------------------------------

@dataclass
class Curve:
    """Ordered polyline with cumulative arc length ``s``."""

    vertices: np.ndarray
    s: np.ndarray
    residual: float
    diameter: float

    @property
    def length(self) -> float:
        return float(self.s[-1]) if self.s.size else 0.0

    @property
    def degenerate(self) -> bool:
        return len(self.vertices) < 2 or self.length == 0.0

    def point(self, t) -> np.ndarray:
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.length)
        return np.stack([np.interp(t, self.s, self.vertices[:, d]) for d in range(3)], axis=-1)

    def tangent(self, t) -> np.ndarray:
        """Unit tangent ``ċ`` of the segment containing each ``t``."""
        if self.degenerate:
            return np.zeros(np.shape(t) + (3,))
        seg = np.clip(np.searchsorted(self.s, t, side="right") - 1, 0, len(self.s) - 2)
        d = self.vertices[seg + 1] - self.vertices[seg]
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def project(self, points, tree=None):
        """Arc-length parameter of the nearest curve point and the distance to it."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if self.degenerate:
            return np.zeros(len(pts)), np.linalg.norm(pts - self.vertices[0], axis=1)
        tree = cKDTree(self.vertices) if tree is None else tree
        _, idx = tree.query(pts)
        nseg = len(self.vertices) - 1
        best_d = np.full(len(pts), np.inf)
        best_t = np.zeros(len(pts))
        for off in (-2, -1, 0, 1):
            seg = np.clip(idx + off, 0, nseg - 1)
            p0, p1 = self.vertices[seg], self.vertices[seg + 1]
            d = p1 - p0
            L2 = np.einsum("ij,ij->i", d, d)
            w = np.clip(np.einsum("ij,ij->i", pts - p0, d) / L2, 0.0, 1.0)
            foot = p0 + w[:, None] * d
            dist = np.linalg.norm(pts - foot, axis=1)
            better = dist < best_d
            best_d = np.where(better, dist, best_d)
            best_t = np.where(better, self.s[seg] + w * np.sqrt(L2), best_t)
        return best_t, best_d


def _downsample(pts, target):
    """Voxel-grid representatives: in each occupied voxel the point nearest the voxel mean."""
    lo = pts.min(axis=0)
    extent = float(np.max(pts.max(axis=0) - lo))
    voxel = extent / target
    while True:
        keys = np.floor((pts - lo) / voxel).astype(np.int64)
        _, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        nbins = int(inv.max()) + 1
        if nbins <= target:
            break
        voxel *= 1.5
    counts = np.bincount(inv, minlength=nbins).astype(float)
    mean = np.stack([np.bincount(inv, weights=pts[:, d], minlength=nbins) for d in range(3)], axis=1) / counts[:, None]
    dist = np.linalg.norm(pts - mean[inv], axis=1)
    order = np.lexsort((np.arange(len(pts)), dist, inv))
    first = np.ones(len(order), dtype=bool)
    first[1:] = inv[order][1:] != inv[order][:-1]
    return np.sort(order[first])


def _spanning_path(pts):
    """Longest path of a k-nearest-neighbour minimum spanning tree."""
    n = len(pts)
    if n == 1:
        return np.array([0])
    tree = cKDTree(pts)
    k = min(KNN, n - 1)
    while True:
        dist, idx = tree.query(pts, k=k + 1)
        rows = np.repeat(np.arange(n), k)
        G = coo_matrix((dist[:, 1:].ravel(), (rows, idx[:, 1:].ravel())), shape=(n, n)).tocsr()
        G = G.maximum(G.T)
        ncomp, _ = connected_components(G, directed=False)
        if ncomp == 1 or k >= n - 1:
            break
        k = min(2 * k, n - 1)
    T = minimum_spanning_tree(G)
    T = T.maximum(T.T)
    d0 = dijkstra(T, directed=False, indices=0)
    u = int(np.argmax(np.where(np.isfinite(d0), d0, -1)))
    du, pred = dijkstra(T, directed=False, indices=u, return_predecessors=True)
    v = int(np.argmax(np.where(np.isfinite(du), du, -1)))
    path = [v]
    while path[-1] != u:
        path.append(int(pred[path[-1]]))
    return np.array(path[::-1])


def extract_curve(points, dim_threshold: float | None = None, tol=DEFAULT, max_vertices: int = MAX_CURVE_VERTICES) -> Curve:
    """Fit an ordered polyline through a point cloud assumed to lie on a simple curve.

    The polyline starts at the end nearer the origin of displacement space.

    Raises:
        NotOneDimensional: when some point lies farther than ``dim_threshold``
            (default ``dim_rel`` times the cloud diameter) from the polyline.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    pts = pts[np.all(np.isfinite(pts), axis=1)]
    if pts.size == 0:
        raise NotOneDimensional("no finite points", float("inf"))
    diameter = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    if diameter == 0.0:
        return Curve(pts[:1].copy(), np.zeros(1), 0.0, 0.0)
    quant = np.round((pts - pts.min(axis=0)) / (1e-9 * diameter)).astype(np.int64)
    _, keep = np.unique(quant, axis=0, return_index=True)
    reps = pts[np.sort(keep)]
    if len(reps) > max_vertices:
        reps = reps[_downsample(reps, max_vertices)]
    verts = reps[_spanning_path(reps)]
    if np.linalg.norm(verts[-1]) < np.linalg.norm(verts[0]):
        verts = verts[::-1]
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(verts, axis=0), axis=1))])
    curve = Curve(verts, s, 0.0, diameter)
    _, dist = curve.project(pts)
    residual = float(dist.max())
    thr = tol.dim_rel * diameter if dim_threshold is None else dim_threshold
    if residual > thr:
        raise NotOneDimensional(f"image is not a simple curve: residual {residual:.3e} > {thr:.3e}", residual)
    return Curve(verts, s, residual, diameter)


# -- interfaces ---------------------------------------------------------------

@dataclass
class Surface:
    """Triangulated level set ``Γ(t)``."""

    t: float
    vertices: np.ndarray
    faces: np.ndarray

    def __len__(self):
        return int(len(self.faces))

    def centroids(self) -> np.ndarray:
        return self.vertices[self.faces].mean(axis=1)

    def areas(self) -> np.ndarray:
        v = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)

    def area(self) -> float:
        return float(self.areas().sum())


@dataclass
class InterfaceFamily:
    curve: Curve
    t_value: np.ndarray
    t_samples: np.ndarray
    gamma: list
    field: GradientField
    displacement: Displacement
    grad_t: np.ndarray = field(repr=False, default=None)

    @property
    def curve_fit_residual(self) -> float:
        return self.curve.residual

    def region(self, t) -> np.ndarray:
        """Cells of ``Ω_M(t)`` (already transformed at parameter ``t``)."""
        return self.t_value < t

    @property
    def regions(self) -> np.ndarray:
        return np.stack([self.region(t) for t in self.t_samples])

    def surface(self, t) -> Surface:
        for g in self.gamma:
            if g.t == t:
                return g
        return _iso_surface(self.t_value, float(t), self.field.spacing, self.field.origin)

    def summary(self) -> dict:
        return {
            "curve_length": self.curve.length,
            "curve_vertices": int(len(self.curve.vertices)),
            "curve_fit_residual": self.curve.residual,
            "closure_residual": self.displacement.closure_residual,
            "t_samples": int(len(self.t_samples)),
            "facets": [len(g) for g in self.gamma],
        }


def _pad_to_faces(volume):
    """Append nodes on the domain faces, linearly extrapolated from the first two centres."""
    vol = volume
    for d in range(3):
        first = np.take(vol, [0], axis=d)
        last = np.take(vol, [-1], axis=d)
        if vol.shape[d] > 1:
            first = 1.5 * first - 0.5 * np.take(vol, [1], axis=d)
            last = 1.5 * last - 0.5 * np.take(vol, [-2], axis=d)
        vol = np.concatenate([first, vol, last], axis=d)
    return vol


def _refine_vertices(vol, verts, level):
    """Redo the edge interpolation in double precision (marching cubes works in float32)."""
    base = np.floor(verts).astype(int)
    frac = verts - base
    axis = np.argmax(frac, axis=1)
    on_edge = frac[np.arange(len(verts)), axis] > 0
    hi = base.copy()
    hi[np.arange(len(verts)), axis] += on_edge
    hi = np.minimum(hi, np.array(vol.shape) - 1)
    v0 = vol[tuple(base.T)]
    v1 = vol[tuple(hi.T)]
    denom = v1 - v0
    w = np.where(on_edge & (denom != 0), (level - v0) / np.where(denom != 0, denom, 1.0), 0.0)
    out = base.astype(float)
    out[np.arange(len(verts)), axis] += np.clip(w, 0.0, 1.0)
    return out


def _iso_surface(volume, level, spacing, origin) -> Surface:
    """Level set of a cell-centred scalar, closed off at the domain faces."""
    from skimage.measure import marching_cubes

    vol = _pad_to_faces(volume)
    lo, hi = float(np.min(vol)), float(np.max(vol))
    if not lo < level < hi:
        return Surface(level, np.zeros((0, 3)), np.zeros((0, 3), dtype=int))
    verts, faces, _, _ = marching_cubes(vol, level=level, allow_degenerate=False)
    verts = _refine_vertices(vol, verts.astype(float), level)
    out = np.empty_like(verts)
    for d in range(3):
        n = volume.shape[d]
        nodes = np.concatenate([[0.0], (np.arange(n) + 0.5), [float(n)]]) * spacing[d] + origin[d]
        out[:, d] = np.interp(verts[:, d], np.arange(n + 2), nodes)
    return Surface(level, out, faces.astype(int))


def reconstruct_interfaces(
    fld: GradientField,
    Q=None,
    t_samples: int = DEFAULT_T_SAMPLES,
    curve: Curve | None = None,
    disp: Displacement | None = None,
    tol=DEFAULT,
) -> InterfaceFamily:
    """Level-set interfaces ``Γ(t)`` of the curve parameter of ``z(x)``.

    ``t`` samples are the midpoints ``L(k + 1/2)/N`` of the curve length.

    Raises:
        NotAGradient, NotOneDimensional: from the upstream steps.
    """
    disp = displacement_field(fld, Q, tol) if disp is None else disp
    curve = extract_curve(disp.z, tol=tol) if curve is None else curve
    t_val, _ = curve.project(disp.z.reshape(-1, 3))
    t_val = t_val.reshape(fld.dims)
    if curve.degenerate:
        warnings.warn("constant displacement image: a single degenerate interface", DegenerateInterface, stacklevel=2)
        return InterfaceFamily(curve, t_val, np.zeros(1), [Surface(0.0, np.zeros((0, 3)), np.zeros((0, 3), dtype=int))], fld, disp, np.zeros(fld.dims + (3,)))
    N = int(t_samples)
    if N < 1:
        raise InputError("t_samples must be positive")
    ts = curve.length * (np.arange(N) + 0.5) / N
    gamma = [_iso_surface(t_val, float(t), fld.spacing, fld.origin) for t in ts]
    return InterfaceFamily(curve, t_val, ts, gamma, fld, disp, _gradient(t_val, fld.spacing))


def _gradient(vol, spacing):
    out = np.zeros(vol.shape + (3,))
    for d in range(3):
        if vol.shape[d] > 1:
            out[..., d] = np.gradient(vol, spacing[d], axis=d, edge_order=1)
    return out


def _interp(values, pts, fld):
    """Trilinear interpolation of a cell-centred array at physical points."""
    coords = ((pts - fld.origin) / fld.spacing - 0.5).T
    if values.ndim == 3:
        return ndimage.map_coordinates(values, coords, order=1, mode="nearest")
    return np.stack([ndimage.map_coordinates(values[..., c], coords, order=1, mode="nearest") for c in range(values.shape[-1])], axis=-1)


def _cells_at(pts, fld):
    idx = np.floor((pts - fld.origin) / fld.spacing).astype(int)
    return tuple(np.clip(idx[:, d], 0, fld.dims[d] - 1) for d in range(3))


@dataclass
class VelocityRecord:
    """Per-facet normal speeds on ``Γ(t)``.

    ``v_n`` is the algebraic speed ``a·ċ/|a|²``; ``v_n_kinematic`` is the
    level-set speed ``1/|∇t|``. Both come with ``‖a v_n - ċ‖`` residuals.
    """

    t: float
    tangent: np.ndarray
    centroids: np.ndarray
    normals: np.ndarray
    areas: np.ndarray
    a: np.ndarray
    v_n: np.ndarray
    residual: np.ndarray
    v_n_kinematic: np.ndarray
    residual_kinematic: np.ndarray
    direction_spread: float
    stationary: int = 0

    @property
    def consistency_residual(self) -> float:
        return float(self.residual.max()) if self.residual.size else 0.0

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "facets": int(len(self.v_n)),
            "tangent": self.tangent,
            "v_n_mean": float(self.v_n.mean()) if self.v_n.size else 0.0,
            "v_n_kinematic_mean": float(self.v_n_kinematic.mean()) if self.v_n.size else 0.0,
            "consistency_residual": self.consistency_residual,
            "kinematic_residual": float(self.residual_kinematic.max()) if self.v_n.size else 0.0,
            "direction_spread": self.direction_spread,
            "stationary_facets": self.stationary,
        }


def _facet_shear(family, cells, normals, a_field, n_field):
    if a_field is None:
        M = family.field.F[cells] - family.displacement.Q
        return np.einsum("nij,nj->ni", M, normals)
    a = np.asarray(a_field, dtype=float)[cells]
    if n_field is None:
        return a
    sign = np.sign(np.einsum("ni,ni->n", np.asarray(n_field, dtype=float)[cells], normals))
    return a * np.where(sign == 0, 1.0, sign)[:, None]


def _velocity(family, surf, a_field=None, n_field=None) -> VelocityRecord:
    fld = family.field
    cen = surf.centroids()
    grad = _interp(family.grad_t, cen, fld)
    gnorm = np.linalg.norm(grad, axis=1)
    moving = gnorm > 0
    normals = np.where(moving[:, None], grad / np.where(moving, gnorm, 1.0)[:, None], 0.0)
    cells = _cells_at(cen, fld)
    a = _facet_shear(family, cells, normals, a_field, n_field)
    an = np.linalg.norm(a, axis=1)
    scale = max(1.0, fld.max_norm())
    if np.any(an[moving] <= 1e-12 * scale):
        raise ZeroShearOnInterface(f"a = 0 on a facet of the interface at t = {surf.t:.6g}")
    cdot = family.curve.tangent(surf.t)
    v_alg = np.where(moving, a @ cdot / np.where(an > 0, an * an, 1.0), 0.0)
    v_kin = np.where(moving, 1.0 / np.where(moving, gnorm, 1.0), 0.0)
    res_alg = np.linalg.norm(a * v_alg[:, None] - cdot, axis=1)
    res_kin = np.linalg.norm(a * v_kin[:, None] - cdot, axis=1)
    spread = 0.0
    if moving.any():
        dirs = a[moving] / an[moving, None]
        mean = lin3.unit(dirs.sum(axis=0)) if np.linalg.norm(dirs.sum(axis=0)) > 0 else dirs[0]
        spread = float(np.arccos(np.clip(dirs @ mean, -1.0, 1.0)).max())
    stationary = int((~moving).sum())
    if stationary:
        warnings.warn(f"{stationary} stationary facets at t = {surf.t:.6g}", StationaryInterval, stacklevel=3)
    return VelocityRecord(
        float(surf.t), cdot, cen, normals, surf.areas(), a, v_alg, res_alg, v_kin, res_kin, spread, stationary
    )


def interface_velocity(family: InterfaceFamily, a_field=None, n_field=None) -> list:
    """Normal speeds on every sampled interface.

    ``a_field`` (with optional ``n_field`` for orientation) overrides the
    shear recovered from ``(F - Q) n`` at each facet.

    Raises:
        ZeroShearOnInterface
    """
    return [_velocity(family, g, a_field, n_field) for g in family.gamma if len(g)]


def chi_dot(family: InterfaceFamily, xi, t: float, a_field=None, n_field=None) -> float:
    """Facet quadrature of ``|ċ(t)| ∫_Γ(t) ξ / |a| dH²``.

    ``xi`` is either a cell-centred array or a callable of positions.

    Raises:
        ZeroShearOnInterface
    """
    surf = family.surface(t)
    if not len(surf):
        return 0.0
    rec = _velocity(family, surf, a_field, n_field)
    cen = rec.centroids
    w = xi(cen) if callable(xi) else _interp(np.asarray(xi, dtype=float), cen, family.field)
    an = np.linalg.norm(rec.a, axis=1)
    speed = float(np.linalg.norm(rec.tangent))
    return float(np.sum(rec.areas * w / an) * speed)


def masked_integral(family: InterfaceFamily, xi, t: float) -> float:
    """``∫_{Ω_M(t)} ξ dx`` with cells cut by ``Γ(t)`` counted fractionally."""
    fld = family.field
    vals = xi(fld.cell_centers()) if callable(xi) else np.asarray(xi, dtype=float)
    half = 0.5 * np.sqrt(np.einsum("...i,i->...", family.grad_t ** 2, fld.spacing ** 2))
    frac = np.where(half > 0, np.clip(0.5 + (t - family.t_value) / np.where(half > 0, 2 * half, 1.0), 0.0, 1.0), (family.t_value < t).astype(float))
    return float(np.sum(vals * frac) * np.prod(fld.spacing))


# -- rigidity -----------------------------------------------------------------

@dataclass
class RigidityReport:
    is_constant: bool
    max_deviation: float
    rank_one_form: bool
    in_hull: bool
    theorem_violation: bool

    def as_dict(self) -> dict:
        return {
            "is_constant": self.is_constant,
            "max_deviation": self.max_deviation,
            "rank_one_form": self.rank_one_form,
            "in_hull": self.in_hull,
            "theorem_violation": self.theorem_violation,
        }


def rigidity_check(fld: GradientField, wells, rank_one_tol: float = DEFAULT.family, tol=DEFAULT) -> RigidityReport:
    """Test a martensite field against compound rigidity for ``mu != 1`` wells.

    A non-constant field of rank-one form inside the hull contradicts the
    rigidity theorem; this is reported and warned as :class:`TheoremViolation`.

    Raises:
        MuEqualsOne
    """
    from .hull import hull_membership

    if abs(wells.mu - 1.0) <= tol.mu_one:
        raise MuEqualsOne("compound rigidity needs mu != 1")
    cells = fld.known & (fld.phase == Phase.M)
    Fs = fld.F[cells]
    if not len(Fs):
        return RigidityReport(True, 0.0, True, True, False)
    ref = Fs.mean(axis=0)
    dev = float(np.sqrt(np.einsum("nij,nij->n", Fs - ref, Fs - ref)).max())
    constant = dev <= tol.constant_rel * max(1.0, fld.max_norm())
    _, _, cof = kernels.rank_one_fit_batch(np.ascontiguousarray(Fs - np.eye(3)))
    rank_one = bool(cof.max() <= rank_one_tol)
    uniq = np.unique(np.round(Fs.reshape(-1, 9), 13), axis=0).reshape(-1, 3, 3)
    in_hull = all(hull_membership(F, wells).member for F in uniq)
    violation = (not constant) and rank_one and in_hull
    if violation:
        warnings.warn("non-constant rank-one field inside a compound hull with mu != 1", TheoremViolation, stacklevel=2)
    return RigidityReport(bool(constant), dev, rank_one, bool(in_hull), bool(violation))


# -- output -------------------------------------------------------------------

def interfaces_to_csv(family: InterfaceFamily) -> str:
    out = io.StringIO()
    out.write("t,facet_id,v1x,v1y,v1z,v2x,v2y,v2z,v3x,v3y,v3z\n")
    for g in family.gamma:
        tri = g.vertices[g.faces]
        tt = format(g.t, ".17g")
        for fid, v in enumerate(tri):
            out.write(f"{tt},{fid}," + ",".join(format(float(c), ".17g") for c in v.ravel()) + "\n")
    return out.getvalue()
