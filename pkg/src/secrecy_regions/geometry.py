"""Linear-inequality rate regions: Fourier-Motzkin elimination, vertices, hulls, frontiers.

A region is a union of polytopes ("pieces") living in the nonnegative orthant.
All pieces of a :class:`RateRegion` share one coefficient matrix ``A``; a piece
is a row of the bound matrix ``B`` (``np.inf`` marks a row the piece does not
use), so unions produced by sweeping a distribution family stay compact.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DimensionMismatch, EmptyRegion, ValidationError

SLACK = 1e-9
_BIG = 1e12
_COEF_TOL = 1e-12


@dataclass(frozen=True)
class LinearInequality:
    """sum(coeffs[v] * v) <= bound.

    A row with no coefficients only arises from elimination and certifies an
    empty system when its bound is negative.
    """

    coeffs: Mapping[str, float]
    bound: float

    def __post_init__(self):
        clean = {k: float(v) for k, v in self.coeffs.items() if abs(v) > _COEF_TOL}
        object.__setattr__(self, "coeffs", clean)
        object.__setattr__(self, "bound", float(self.bound))

    def coeff(self, var: str) -> float:
        return self.coeffs.get(var, 0.0)

    def evaluate(self, point: Mapping[str, float]) -> float:
        return sum(c * point[v] for v, c in self.coeffs.items())

    def satisfied(self, point: Mapping[str, float], tol: float = SLACK) -> bool:
        return self.evaluate(point) <= self.bound + tol

    def to_json(self) -> dict:
        return {"coeffs": dict(self.coeffs), "bound": self.bound}

    @classmethod
    def from_json(cls, obj: Mapping) -> "LinearInequality":
        try:
            ineq = cls(dict(obj["coeffs"]), float(obj["bound"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad inequality object {obj!r}: {exc}") from None
        if not ineq.coeffs:
            raise ValidationError(f"inequality {obj!r} has no nonzero coefficient")
        return ineq

    def __str__(self):
        terms = " ".join(f"{'+' if c > 0 else '-'} {abs(c):g}*{v}" for v, c in sorted(self.coeffs.items()))
        return f"{terms.lstrip('+ ')} <= {self.bound:g}"


def _normalized(ineq: LinearInequality):
    scale = max(abs(c) for c in ineq.coeffs.values())
    return {k: v / scale for k, v in ineq.coeffs.items()}, ineq.bound / scale


def _dominates(ci, bi, cj, bj, keys) -> bool:
    """Row i implies row j on the nonnegative orthant."""
    return bi <= bj + _COEF_TOL and all(ci.get(k, 0.0) >= cj.get(k, 0.0) - _COEF_TOL for k in keys)


def remove_redundant(system: Sequence[LinearInequality], nonnegative: bool = True) -> list[LinearInequality]:
    """Pairwise-dominance pruning (no LP redundancy pass)."""
    rows = []
    for ineq in system:
        if not ineq.coeffs:
            if ineq.bound < -_COEF_TOL:
                rows.append((None, ineq))
            continue
        if nonnegative and ineq.bound >= -_COEF_TOL and all(c < 0 for c in ineq.coeffs.values()):
            continue  # implied by the orthant
        rows.append((_normalized(ineq), ineq))
    keep = []
    for j, (nj, ij) in enumerate(rows):
        if nj is None:
            keep.append(ij)
            continue
        cj, bj = nj
        redundant = False
        for i, (ni, _) in enumerate(rows):
            if i == j or ni is None:
                continue
            ci, bi = ni
            keys = set(ci) | set(cj)
            if nonnegative:
                dom = _dominates(ci, bi, cj, bj, keys)
                back = _dominates(cj, bj, ci, bi, keys)
            else:
                same = all(abs(ci.get(k, 0.0) - cj.get(k, 0.0)) <= _COEF_TOL for k in keys)
                dom = same and bi <= bj + _COEF_TOL
                back = same and bj <= bi + _COEF_TOL
            # on mutual dominance keep the earlier row
            if dom and (not back or i < j):
                redundant = True
                break
        if not redundant:
            keep.append(ij)
    return keep


def eliminate(system: Sequence[LinearInequality], var: str, nonnegative: bool = True) -> list[LinearInequality]:
    """Exact Fourier-Motzkin projection of ``system`` along ``var``.

    With ``nonnegative`` (the default for rate regions) every variable is
    implicitly >= 0: ``var >= 0`` takes part in the pairing and rows implied by
    the orthant are dropped.
    """
    system = list(system)
    if not any(var in s.coeffs for s in system):
        return system
    pos, neg, rest = [], [], []
    for s in system:
        c = s.coeff(var)
        (pos if c > 0 else neg if c < 0 else rest).append(s)
    if nonnegative:
        neg.append(LinearInequality({var: -1.0}, 0.0))
    out = list(rest)
    for p in pos:
        cp = p.coeff(var)
        for n in neg:
            cn = -n.coeff(var)
            coeffs: dict[str, float] = {}
            for k in set(p.coeffs) | set(n.coeffs):
                if k == var:
                    continue
                coeffs[k] = p.coeff(k) / cp + n.coeff(k) / cn
            out.append(LinearInequality(coeffs, p.bound / cp + n.bound / cn))
    return remove_redundant(out, nonnegative=nonnegative)


def eliminate_all(system, variables: Iterable[str], nonnegative: bool = True) -> list[LinearInequality]:
    for v in variables:
        system = eliminate(system, v, nonnegative=nonnegative)
    return system


def system_to_json(system: Sequence[LinearInequality]) -> list[dict]:
    return [s.to_json() for s in system]


def system_from_json(obj) -> list[LinearInequality]:
    if isinstance(obj, Mapping):
        obj = obj.get("system", obj.get("inequalities"))
    if not isinstance(obj, list):
        raise ValidationError("an inequality system is a JSON list of {coeffs, bound} objects")
    return [LinearInequality.from_json(o) for o in obj]


# ---------------------------------------------------------------------------
# vertex enumeration


class VertexMap:
    """Vertices of {x >= 0, A x <= b} as a linear function of b.

    Every candidate vertex solves a square subsystem of d active rows drawn
    from ``[A; -I]``; since the nonnegativity right-hand sides are zero, each
    candidate is ``M_S @ b``.  Stacking all bases gives one matrix product per
    batch of bound vectors, followed by a feasibility filter.
    """

    def __init__(self, A: np.ndarray):
        A = np.asarray(A, dtype=float)
        m, d = A.shape
        if d > 4:
            raise ValidationError("vertex enumeration is limited to 4 rate variables")
        G = np.vstack([A, -np.eye(d)])
        maps = []
        for S in itertools.combinations(range(m + d), d):
            GS = G[list(S)]
            if abs(np.linalg.det(GS)) < 1e-12:
                continue
            inv = np.linalg.inv(GS)
            M = np.zeros((d, m))
            for col, r in enumerate(S):
                if r < m:
                    M[:, r] += inv[:, col]
            maps.append(M)
        self.A = A
        self.T = np.stack(maps) if maps else np.zeros((0, d, m))
        self.d = d

    def candidates(self, B: np.ndarray) -> np.ndarray:
        """All basic solutions, shape (P, nbases, d)."""
        return np.einsum("sdm,pm->psd", self.T, B)

    def _feasible(self, Bf: np.ndarray, tol: float):
        X = self.candidates(Bf)
        lhs = np.einsum("md,psd->psm", self.A, X)
        ok = (lhs <= Bf[:, None, :] + tol * (1 + np.abs(Bf[:, None, :]))).all(axis=2)
        ok &= (X >= -tol).all(axis=2) & (X < _BIG / 10).all(axis=2)
        return X, ok

    def _chunks(self, B: np.ndarray):
        B = np.atleast_2d(np.asarray(B, dtype=float))
        Bf = np.where(np.isfinite(B), B, _BIG)
        step = max(1, 2_000_000 // max(1, self.T.shape[0] * self.d * max(1, self.A.shape[0])))
        for start in range(0, len(Bf), step):
            yield start, Bf[start:start + step]

    def vertices(self, B: np.ndarray, tol: float = SLACK):
        """Feasible vertices for every bound row of ``B``.

        Returns ``(points, piece_index)``; pieces with an empty polytope
        contribute nothing.
        """
        pts, idx = [], []
        for start, Bc in self._chunks(B):
            X, ok = self._feasible(Bc, tol)
            p_idx, s_idx = np.nonzero(ok)
            pts.append(np.clip(X[p_idx, s_idx], 0.0, None))
            idx.append(p_idx + start)
        if not pts:
            return np.zeros((0, self.d)), np.zeros(0, dtype=int)
        return np.concatenate(pts), np.concatenate(idx)

    def support(self, B: np.ndarray, w: np.ndarray, tol: float = SLACK) -> np.ndarray:
        """max w.x over each piece; -inf for empty pieces.  ``w`` may be (d,) or (k, d)."""
        W = np.atleast_2d(w)
        out = []
        for _, Bc in self._chunks(B):
            X, ok = self._feasible(Bc, tol)
            vals = np.einsum("psd,kd->pks", X, W)
            vals = np.where(ok[:, None, :], vals, -np.inf)
            out.append(vals.max(axis=2))
        res = np.concatenate(out) if out else np.zeros((0, len(W)))
        return res[:, 0] if np.ndim(w) == 1 else res

    def support_rows(self, B: np.ndarray, W: np.ndarray, tol: float = SLACK) -> np.ndarray:
        """max W[i].x over piece i (one direction per bound row)."""
        out = []
        for start, Bc in self._chunks(B):
            X, ok = self._feasible(Bc, tol)
            vals = np.einsum("psd,pd->ps", X, W[start:start + len(Bc)])
            out.append(np.where(ok, vals, -np.inf).max(axis=1))
        return np.concatenate(out) if out else np.zeros(0)


_VMAP_CACHE: dict[bytes, VertexMap] = {}


def vertex_map(A: np.ndarray) -> VertexMap:
    A = np.ascontiguousarray(A, dtype=float)
    key = A.shape.__repr__().encode() + A.tobytes()
    vm = _VMAP_CACHE.get(key)
    if vm is None:
        vm = _VMAP_CACHE[key] = VertexMap(A)
    return vm


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class Hull:
    """Convex hull of a down-closed point set in the orthant."""

    vertices: np.ndarray
    piece_ids: np.ndarray
    active: np.ndarray                 # coordinates that are not identically zero
    equations: np.ndarray | None       # qhull facets over the active coordinates

    def contains(self, points: np.ndarray, tol: float = SLACK) -> np.ndarray:
        P = np.atleast_2d(points)
        ok = (P >= -tol).all(axis=1) & (P[:, ~self.active] <= tol).all(axis=1)
        Pa = P[:, self.active]
        if self.equations is None:
            if Pa.shape[1] == 1:
                ok &= Pa[:, 0] <= self.vertices[:, self.active].max() + tol
            return ok
        vals = Pa @ self.equations[:, :-1].T + self.equations[:, -1]
        return ok & (vals <= tol).all(axis=1)


def _down_closed_hull(points: np.ndarray, piece_ids: np.ndarray, d: int) -> Hull:
    if len(points) == 0:
        raise EmptyRegion("no feasible vertex in any piece")
    active = points.max(axis=0) > SLACK
    pts = np.vstack([np.zeros((1, d)), points])
    ids = np.concatenate([[-1], piece_ids])
    na = int(active.sum())
    if na == 0:
        return Hull(np.zeros((1, d)), np.array([ids[1] if len(ids) > 1 else -1]), active, None)
    Pa = pts[:, active]
    if na == 1:
        top = int(np.argmax(Pa[:, 0]))
        keep = np.array([0, top]) if top != 0 else np.array([0])
        return Hull(pts[keep], ids[keep], active, None)
    # deduplicate before qhull
    _, uniq = np.unique(np.round(Pa, 12), axis=0, return_index=True)
    uniq = np.sort(uniq)
    try:
        hull = ConvexHull(Pa[uniq])
    except QhullError:
        hull = ConvexHull(Pa[uniq], qhull_options="QJ")
    keep = uniq[hull.vertices]
    keep = keep[np.lexsort(pts[keep].T[::-1])]
    return Hull(pts[keep], ids[keep], active, hull.equations)


@dataclass(frozen=True)
class RateRegion:
    variables: tuple[str, ...]
    A: np.ndarray
    B: np.ndarray
    labels: tuple = ()
    hull: Hull | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float)) if np.size(self.B) else np.zeros((0, A.shape[0]))
        if A.shape[1] != len(self.variables):
            raise DimensionMismatch("coefficient matrix width must equal the number of variables")
        if B.shape[1] != A.shape[0]:
            raise DimensionMismatch("bound matrix must have one column per inequality row")
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def dim(self) -> int:
        return len(self.variables)

    @property
    def num_pieces(self) -> int:
        return self.B.shape[0]

    @classmethod
    def from_systems(cls, variables: Sequence[str], systems: Sequence[Sequence[LinearInequality]],
                     labels: Sequence = ()) -> "RateRegion":
        variables = tuple(variables)
        rows: dict[tuple, int] = {}
        entries = []
        for sys_ in systems:
            bounds = {}
            for ineq in sys_:
                unknown = set(ineq.coeffs) - set(variables)
                if unknown:
                    raise ValidationError(f"inequality uses undeclared variables {sorted(unknown)}")
                key = tuple(round(ineq.coeff(v), 12) for v in variables)
                if key not in rows:
                    rows[key] = len(rows)
                r = rows[key]
                bounds[r] = min(bounds.get(r, np.inf), ineq.bound)
            entries.append(bounds)
        A = np.array(list(rows), dtype=float).reshape(len(rows), len(variables))
        B = np.full((len(systems), len(rows)), np.inf)
        for i, bounds in enumerate(entries):
            for r, b in bounds.items():
                B[i, r] = b
        return cls(variables, A, B, tuple(labels))

    def piece(self, i: int) -> list[LinearInequality]:
        return [LinearInequality(dict(zip(self.variables, self.A[r])), self.B[i, r])
                for r in range(self.A.shape[0]) if np.isfinite(self.B[i, r])]

    @property
    def pieces(self) -> list[list[LinearInequality]]:
        return [self.piece(i) for i in range(self.num_pieces)]

    def vertices(self):
        return vertex_map(self.A).vertices(self.B)

    def compute_hull(self) -> Hull:
        pts, ids = self.vertices()
        return _down_closed_hull(pts, ids, self.dim)

    def _point_array(self, point) -> np.ndarray:
        if isinstance(point, Mapping):
            point = [point[v] for v in self.variables]
        P = np.atleast_2d(np.asarray(point, dtype=float))
        if P.shape[1] != self.dim:
            raise DimensionMismatch(f"point dimension {P.shape[1]} != region dimension {self.dim}")
        return P

    def union(self, other: "RateRegion") -> "RateRegion":
        if other.variables != self.variables:
            raise DimensionMismatch("regions over different variables")
        if other.A.shape == self.A.shape and np.array_equal(other.A, self.A):
            return RateRegion(self.variables, self.A, np.vstack([self.B, other.B]),
                              self.labels + other.labels, meta=dict(self.meta))
        return RateRegion.from_systems(self.variables, self.pieces + other.pieces,
                                       self.labels + other.labels)

    def supporting(self) -> "RateRegion":
        """Only the pieces that own a hull vertex (same hull, much smaller)."""
        hull = self.hull or self.compute_hull()
        ids = np.unique(hull.piece_ids[hull.piece_ids >= 0])
        labels = tuple(self.labels[i] for i in ids) if self.labels else ()
        remap = {old: new for new, old in enumerate(ids)}
        new_hull = replace(hull, piece_ids=np.array([remap.get(i, -1) for i in hull.piece_ids]))
        return RateRegion(self.variables, self.A, self.B[ids], labels, new_hull, dict(self.meta))


def contains(region: RateRegion, point, mode: str = "union", tol: float = SLACK):
    """Membership of one point (bool) or a batch of points (bool array)."""
    P = region._point_array(point)
    if mode == "hull":
        hull = region.hull or region.compute_hull()
        res = hull.contains(P, tol)
    elif mode == "union":
        res = np.zeros(len(P), dtype=bool)
        Bf = np.where(np.isfinite(region.B), region.B, np.inf)
        nonneg = (P >= -tol).all(axis=1)
        step = max(1, 4_000_000 // max(1, Bf.size))
        for start in range(0, len(P), step):
            lhs = P[start:start + step] @ region.A.T                     # (n, m)
            ok = (lhs[:, None, :] <= Bf[None, :, :] + tol).all(axis=2)   # (n, pieces)
            res[start:start + step] = ok.any(axis=1)
        res &= nonneg
    else:
        raise ValueError(f"unknown membership mode {mode!r}")
    return bool(res[0]) if np.ndim(point) == 1 or isinstance(point, Mapping) else res


def hull_accumulate(region: RateRegion) -> RateRegion:
    if region.num_pieces == 0:
        raise EmptyRegion("region has no pieces")
    if region.hull is not None:
        return region
    return replace(region, hull=region.compute_hull())


def weight_grid(d: int, resolution: int) -> np.ndarray:
    """All nonzero nonnegative weight vectors with entries k/resolution summing to 1."""
    out = []
    for comp in itertools.product(range(resolution + 1), repeat=d - 1):
        s = sum(comp)
        if s <= resolution:
            out.append(comp + (resolution - s,))
    return np.array(out, dtype=float) / resolution


def pareto_frontier(region: RateRegion, directions, tol: float = SLACK, with_ids: bool = False):
    """Maximizer of each weighted rate sum over the hull, sorted lexicographically.

    Ties among optimal vertices are broken toward the lexicographically
    largest vertex.
    """
    W = np.atleast_2d(np.asarray(directions, dtype=float))
    if W.shape[1] != region.dim:
        raise DimensionMismatch("weight vectors must match the region dimension")
    if (W < 0).any() or (W.sum(axis=1) <= 0).any():
        raise ValidationError("weights must be nonnegative and not all zero")
    if region.num_pieces == 0:
        raise EmptyRegion("region has no pieces")
    hull = region.hull or region.compute_hull()
    V = hull.vertices
    # lexicographic rank of each vertex (vertices are stored lexsorted)
    rank = np.arange(len(V))
    scores = W @ V.T
    best = scores.max(axis=1, keepdims=True)
    cand = scores >= best - tol * (1 + np.abs(best))
    pick = np.where(cand, rank[None, :], -1).max(axis=1)
    uniq = np.unique(pick)
    pts = V[uniq]
    order = np.lexsort(pts.T[::-1])
    if with_ids:
        return pts[order], hull.piece_ids[uniq][order]
    return pts[order]


def support(region: RateRegion, directions) -> np.ndarray:
    hull = region.hull or region.compute_hull()
    return (np.atleast_2d(directions) @ hull.vertices.T).max(axis=1)


def hausdorff(P: np.ndarray, Q: np.ndarray) -> float:
    P, Q = np.atleast_2d(P), np.atleast_2d(Q)
    D = np.sqrt(((P[:, None, :] - Q[None, :, :]) ** 2).sum(axis=2))
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


def frontier_csv(region: RateRegion, directions) -> str:
    pts, ids = pareto_frontier(region, directions, with_ids=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(region.variables) + ["piece_id"])
    for p, i in zip(pts, ids):
        w.writerow([repr(float(x)) for x in p] + [int(i)])
    return buf.getvalue()


def region_to_json(region: RateRegion) -> dict:
    reg = region.supporting() if region.num_pieces else region
    hull = reg.hull
    out = {
        "variables": list(reg.variables),
        "coefficients": reg.A.tolist(),
        "bounds": [[None if not np.isfinite(b) else float(b) for b in row] for row in reg.B],
        "piece_labels": [str(x) for x in reg.labels],
        "pieces_evaluated": region.num_pieces,
    }
    if hull is not None:
        out["hull_vertices"] = hull.vertices.tolist()
    return out


def region_from_json(obj: Mapping) -> RateRegion:
    try:
        B = np.array([[np.inf if b is None else b for b in row] for row in obj["bounds"]], dtype=float)
        A = np.array(obj["coefficients"], dtype=float)
        variables = tuple(obj["variables"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad region object: {exc}") from None
    if B.size == 0:
        B = np.zeros((0, A.shape[0]))
    return RateRegion(variables, A, B, tuple(obj.get("piece_labels", ())))
