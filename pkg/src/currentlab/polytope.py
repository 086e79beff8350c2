"""Convex polytopes in halfspace form, clipping, and triangulation.

Integration domains are always convex: a cell's parameter domain (simplex or
cube) cut by the supports of the forms being integrated, each of which is a
box or a general halfspace intersection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import Delaunay, HalfspaceIntersection, QhullError

__all__ = ["Halfspaces", "Region", "NonCompactError", "decompose", "simplex_volume"]

_EPS = 1e-12


class NonCompactError(ValueError):
    """An integration domain turned out to be unbounded."""


@dataclass(frozen=True, eq=False)
class Halfspaces:
    """The polytope {x in R^d : H x <= h}; no rows means all of R^d."""

    H: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        if H.ndim == 1:
            H = H.reshape(1, -1)
        h = np.asarray(self.h, dtype=float).reshape(-1)
        if H.shape[0] != h.shape[0]:
            raise ValueError("H and h disagree on the number of constraints")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "h", h)

    @property
    def dim(self) -> int:
        return self.H.shape[1]

    @classmethod
    def whole(cls, d: int) -> "Halfspaces":
        return cls(np.zeros((0, d)), np.zeros(0))

    @classmethod
    def box(cls, lo: Sequence[float], hi: Sequence[float]) -> "Halfspaces":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        d = lo.size
        eye = np.eye(d)
        return cls(np.vstack([eye, -eye]), np.concatenate([hi, -lo]))

    @classmethod
    def standard_simplex(cls, d: int) -> "Halfspaces":
        H = np.vstack([-np.eye(d), np.ones((1, d))])
        return cls(H, np.concatenate([np.zeros(d), [1.0]]))

    def intersect(self, other: "Halfspaces | None") -> "Halfspaces":
        if other is None:
            return self
        if other.dim != self.dim:
            raise ValueError("dimension mismatch in polytope intersection")
        return Halfspaces(np.vstack([self.H, other.H]), np.concatenate([self.h, other.h]))

    def pullback(self, M: np.ndarray, c: np.ndarray) -> "Halfspaces":
        """{u : M u + c in self}."""
        M = np.asarray(M, dtype=float).reshape(self.dim, -1)
        return Halfspaces(self.H @ M, self.h - self.H @ np.asarray(c, dtype=float))

    def expand_cube(self, eps: float) -> "Halfspaces":
        """Superset of the Minkowski sum with the cube [-eps, eps]^d (exact for boxes)."""
        return Halfspaces(self.H, self.h + eps * np.abs(self.H).sum(axis=1))

    def contains(self, X: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        X = np.atleast_2d(X)
        if not len(self.h):
            return np.ones(len(X), dtype=bool)
        return np.all(X @ self.H.T <= self.h + tol, axis=1)

    def box_bounds(self) -> tuple[np.ndarray, np.ndarray] | None:
        """(lo, hi) if every constraint is axis-aligned, else None."""
        d = self.dim
        lo = np.full(d, -np.inf)
        hi = np.full(d, np.inf)
        for row, b in zip(self.H, self.h):
            nz = np.flatnonzero(np.abs(row) > 0)
            if len(nz) == 0:
                if b < -_EPS:
                    return np.zeros(d), np.zeros(d) - 1.0  # infeasible
                continue
            if len(nz) > 1:
                return None
            k = nz[0]
            if row[k] > 0:
                hi[k] = min(hi[k], b / row[k])
            else:
                lo[k] = max(lo[k], b / row[k])
        return lo, hi

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Tight bounding box, None if empty; raises NonCompactError if unbounded."""
        bb = self.box_bounds()
        if bb is not None:
            lo, hi = bb
            if np.any(hi < lo):
                return None
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                raise NonCompactError("integration domain is unbounded")
            return lo, hi
        d = self.dim
        lo = np.empty(d)
        hi = np.empty(d)
        for k in range(d):
            for sgn, store in ((1.0, lo), (-1.0, hi)):
                c = np.zeros(d)
                c[k] = sgn
                res = linprog(c, A_ub=self.H, b_ub=self.h, bounds=[(None, None)] * d, method="highs")
                if res.status == 2:
                    return None
                if res.status == 3:
                    raise NonCompactError("integration domain is unbounded")
                store[k] = res.x[k]
        return lo, hi


@dataclass(frozen=True, eq=False)
class Region:
    """A decomposed integration domain.

    kind is 'empty', 'point' (d = 0), 'box' (data = (lo, hi)) or
    'simplices' (data = array of shape (K, d+1, d)).
    """

    kind: str
    dim: int
    data: object = None


def simplex_volume(S: np.ndarray) -> np.ndarray:
    """Volumes of simplices with vertex array of shape (K, d+1, d)."""
    S = np.asarray(S)
    d = S.shape[-1]
    if d == 0:
        return np.ones(S.shape[0])
    E = S[:, 1:, :] - S[:, :1, :]
    return np.abs(np.linalg.det(E)) / math.factorial(d)


def _clip_polygon(poly: np.ndarray, a: np.ndarray, b: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a CCW polygon by a.x <= b."""
    if len(poly) == 0:
        return poly
    s = poly @ a - b
    out = []
    n = len(poly)
    for k in range(n):
        p, q = poly[k], poly[(k + 1) % n]
        sp, sq = s[k], s[(k + 1) % n]
        if sp <= 0:
            out.append(p)
        if (sp < 0 < sq) or (sq < 0 < sp):
            t = sp / (sp - sq)
            out.append(p + t * (q - p))
    return np.array(out).reshape(-1, 2)


def _polygon_region(P: Halfspaces, hint: np.ndarray | None) -> Region:
    if hint is not None:
        poly = np.asarray(hint, dtype=float)
    else:
        bb = P.bounding_box()
        if bb is None:
            return Region("empty", 2)
        lo, hi = bb
        poly = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    for a, b in zip(P.H, P.h):
        if not np.any(a):
            if b < 0:
                return Region("empty", 2)
            continue
        poly = _clip_polygon(poly, a, b)
        if len(poly) < 3:
            return Region("empty", 2)
    tris = np.stack([np.stack([poly[0], poly[k], poly[k + 1]]) for k in range(1, len(poly) - 1)])
    vol = simplex_volume(tris)
    tris = tris[vol > _EPS * max(vol.max(), 1e-300)]
    if len(tris) == 0:
        return Region("empty", 2)
    return Region("simplices", 2, tris)


def _general_region(P: Halfspaces) -> Region:
    d = P.dim
    bb = P.bounding_box()
    if bb is None:
        return Region("empty", d)
    lo, hi = bb
    if np.any(hi - lo <= _EPS * max(1.0, float(np.max(np.abs(hi))))):
        return Region("empty", d)
    # Chebyshev centre gives the interior point qhull needs
    norms = np.linalg.norm(P.H, axis=1)
    keep = norms > 0
    H, h, norms = P.H[keep], P.h[keep], norms[keep]
    c = np.zeros(d + 1)
    c[-1] = -1.0
    A = np.hstack([H, norms[:, None]])
    res = linprog(c, A_ub=A, b_ub=h, bounds=[(None, None)] * d + [(0, None)], method="highs")
    if res.status != 0 or res.x[-1] <= 1e-10 * max(1.0, float(np.max(hi - lo))):
        return Region("empty", d)
    centre = res.x[:d]
    try:
        hs = HalfspaceIntersection(np.hstack([H, -h[:, None]]), centre)
        verts = hs.intersections
        tri = Delaunay(verts)
    except QhullError:
        return Region("empty", d)
    simp = verts[tri.simplices]
    vol = simplex_volume(simp)
    simp = simp[vol > 1e-14 * vol.sum()]
    if len(simp) == 0:
        return Region("empty", d)
    return Region("simplices", d, simp)


def decompose(P: Halfspaces, hint_vertices: np.ndarray | None = None) -> Region:
    """Split a bounded convex polytope into a box or a list of simplices.

    ``hint_vertices`` (2-D only) is a CCW polygon known to contain P, which
    avoids the bounding-box linear programs.
    """
    d = P.dim
    if d == 0:
        ok = np.all(P.h >= -_EPS) if len(P.h) else True
        return Region("point", 0) if ok else Region("empty", 0)
    bb = P.box_bounds()
    if bb is not None or d == 1:
        if bb is None:
            # d == 1 with general rows is still an interval
            a = P.H[:, 0]
            lo = np.max(P.h[a < 0] / a[a < 0], initial=-np.inf)
            hi = np.min(P.h[a > 0] / a[a > 0], initial=np.inf)
            if np.any(P.h[a == 0] < -_EPS):
                return Region("empty", d)
            bb = (np.array([lo]), np.array([hi]))
        lo, hi = bb
        if np.any(hi <= lo):
            return Region("empty", d)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise NonCompactError("integration domain is unbounded")
        return Region("box", d, (lo, hi))
    if d == 2:
        return _polygon_region(P, hint_vertices)
    return _general_region(P)
