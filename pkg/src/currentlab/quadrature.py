"""Gauss rules on boxes and simplices with adaptive bisection."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi

from .polytope import Region, simplex_volume

__all__ = ["QuadratureConfig", "gauss_legendre", "box_rule", "simplex_rule", "region_rule", "integrate_region"]

Integrand = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class QuadratureConfig:
    """Accuracy controls shared by every integration in the package.

    n is the per-axis Gauss order; ``simplex_order`` overrides it on simplices.
    Per-cell rules are capped at ``max_cell_nodes`` points, so high-dimensional
    cells use lower orders. Adaptive bisection stops once every cell agrees
    with its two children to within its share of ``tol + rtol*|I|``.
    """

    n: int = 16
    simplex_order: int | None = None
    tol: float = 1e-10
    rtol: float = 1e-9
    max_rounds: int = 30
    max_cells: int = 4096
    max_cell_nodes: int = 4096

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("grid resolution n must be at least 2")
        if self.tol < 0 or self.rtol < 0:
            raise ValueError("tolerances must be nonnegative")

    def order(self, d: int, simplex: bool = False) -> int:
        n = self.simplex_order if (simplex and self.simplex_order) else self.n
        if d <= 1:
            return n
        cap = int(math.floor(self.max_cell_nodes ** (1.0 / d) + 1e-9))
        return max(2, min(n, cap))

    def fiber_order(self, d: int) -> int:
        """Order for fixed fiber rules nested inside adaptive integrals: twice n, capped."""
        if d <= 1:
            return 2 * self.n
        cap = int(math.floor(self.max_cell_nodes ** (1.0 / d) + 1e-9))
        return max(2, min(2 * self.n, cap))

    def refined(self) -> "QuadratureConfig":
        """Twice the grid resolution, tolerances tightened by 16."""
        so = None if self.simplex_order is None else 2 * self.simplex_order
        return replace(self, n=2 * self.n, simplex_order=so, tol=self.tol / 16, rtol=self.rtol / 16,
                       max_cell_nodes=self.max_cell_nodes * 4)


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def box_rule(d: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss rule on [0, 1]^d."""
    x, w = gauss_legendre(n)
    if d == 0:
        return np.zeros((1, 0)), np.ones(1)
    grids = np.meshgrid(*([x] * d), indexing="ij")
    wgrids = np.meshgrid(*([w] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return nodes, weights


@lru_cache(maxsize=None)
def _jacobi01(n: int, alpha: int) -> tuple[np.ndarray, np.ndarray]:
    # weight (1 - s)^alpha on [0, 1]
    x, w = roots_jacobi(n, alpha, 0)
    return 0.5 * (x + 1.0), w * 0.5 ** (alpha + 1)


@lru_cache(maxsize=None)
def simplex_rule(d: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed (Duffy) Gauss-Jacobi rule on {u >= 0, sum u <= 1}; weights sum to 1/d!."""
    if d == 0:
        return np.zeros((1, 0)), np.ones(1)
    axes = [_jacobi01(n, d - 1 - k) for k in range(d)]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    xi = np.stack([g.ravel() for g in grids], axis=1)
    w = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    u = np.empty_like(xi)
    rest = np.ones(len(xi))
    for k in range(d):
        u[:, k] = rest * xi[:, k]
        rest = rest * (1.0 - xi[:, k])
    return u, w


def _box_values(lo: np.ndarray, hi: np.ndarray, f: Integrand, n: int) -> np.ndarray:
    d = lo.shape[1]
    nodes, w = box_rule(d, n)
    span = hi - lo
    U = lo[:, None, :] + span[:, None, :] * nodes[None, :, :]
    vals = np.asarray(f(U.reshape(-1, d)), dtype=float).reshape(len(lo), len(w))
    return (vals @ w) * np.prod(span, axis=1)


def _simplex_values(S: np.ndarray, f: Integrand, n: int) -> np.ndarray:
    K, _, d = S.shape
    u, w = simplex_rule(d, n)
    E = S[:, 1:, :] - S[:, :1, :]
    U = S[:, :1, :] + np.einsum("qj,kjd->kqd", u, E)
    vals = np.asarray(f(U.reshape(-1, d)), dtype=float).reshape(K, len(w))
    jac = np.abs(np.linalg.det(E)) if d else np.ones(K)
    return (vals @ w) * jac


def _split_boxes(lo, hi, axis):
    idx = np.arange(len(lo))
    mid = 0.5 * (lo[idx, axis] + hi[idx, axis])
    hi1 = hi.copy()
    hi1[idx, axis] = mid
    lo2 = lo.copy()
    lo2[idx, axis] = mid
    # children interleaved: [c1 of cell 0, c2 of cell 0, c1 of cell 1, ...]
    new_lo = np.stack([lo, lo2], axis=1).reshape(-1, lo.shape[1])
    new_hi = np.stack([hi1, hi], axis=1).reshape(-1, hi.shape[1])
    return new_lo, new_hi


def _split_simplices(S, edge):
    K, v, d = S.shape
    ii, jj = np.triu_indices(v, 1)
    a, b = ii[edge], jj[edge]
    idx = np.arange(K)
    mid = 0.5 * (S[idx, a, :] + S[idx, b, :])
    c1 = S.copy()
    c1[idx, b, :] = mid
    c2 = S.copy()
    c2[idx, a, :] = mid
    return np.stack([c1, c2], axis=1).reshape(-1, v, d)


def integrate_region(region: Region, f: Integrand, cfg: QuadratureConfig) -> float:
    """Integrate ``f`` (vectorised over rows of an (N, d) array) over ``region``.

    Every round bisects each open cell in all candidate directions (box axes
    or simplex edges) and keeps the split that disagrees most with the parent:
    that disagreement is the cell's error estimate. Probing all directions
    catches features across thin cells that longest-edge bisection would
    never resolve.
    """
    if region.kind == "empty":
        return 0.0
    if region.kind == "point":
        return float(np.asarray(f(np.zeros((1, 0))), dtype=float).reshape(-1)[0])
    d = region.dim
    if region.kind == "box":
        lo, hi = region.data
        cells = (np.atleast_2d(lo).astype(float), np.atleast_2d(hi).astype(float))
        n = cfg.order(d)
        values = lambda c: _box_values(c[0], c[1], f, n)
        n_dirs = d
        split = lambda c, k: _split_boxes(c[0], c[1], np.full(len(c[0]), k))
        take = lambda c, mask: (c[0][mask], c[1][mask])
        volume = lambda c: np.prod(c[1] - c[0], axis=1)
        count = lambda c: len(c[0])
    else:
        cells = np.asarray(region.data, dtype=float)
        n = cfg.order(d, simplex=True)
        values = lambda c: _simplex_values(c, f, n)
        n_dirs = (d + 1) * d // 2
        split = lambda c, k: _split_simplices(c, np.full(len(c), k))
        take = lambda c, mask: c[mask]
        volume = simplex_volume
        count = len
    vol_total = float(volume(cells).sum())
    parent = values(cells)
    total = 0.0
    prev_err, stalled = math.inf, 0
    for _ in range(cfg.max_rounds):
        K = count(cells)
        probes = [split(cells, k) for k in range(n_dirs)]
        pvals = [values(c).reshape(K, 2) for c in probes]
        errs = np.stack([np.abs(v.sum(axis=1) - parent) for v in pvals], axis=1)
        best = np.argmax(errs, axis=1)
        err = errs[np.arange(K), best]
        child_vals = np.stack(pvals, axis=0)[best, np.arange(K)]
        sums = child_vals.sum(axis=1)
        estimate = total + float(sums.sum())
        budget = (cfg.tol + cfg.rtol * abs(estimate)) * volume(cells) / vol_total
        ok = err <= budget
        total += float(sums[ok].sum())
        open_cells = np.flatnonzero(~ok)
        if len(open_cells) == 0:
            return total
        # children of the open cells along their chosen direction
        kids = []
        for k in range(n_dirs):
            sel = open_cells[best[open_cells] == k]
            if len(sel):
                mask = np.zeros(2 * K, dtype=bool)
                mask[2 * sel] = True
                mask[2 * sel + 1] = True
                kids.append((take(probes[k], mask), child_vals[sel].reshape(-1)))
        cells = _concat([c for c, _ in kids], region.kind)
        parent = np.concatenate([v for _, v in kids])
        if count(cells) > cfg.max_cells:
            break
        # the error estimate of smooth or kinked integrands shrinks every
        # round; if it stops shrinking we are resolving noise (e.g. a nested
        # fixed-order rule), so further bisection is wasted
        open_err = float(err[~ok].sum())
        stalled = stalled + 1 if open_err > 0.5 * prev_err else 0
        prev_err = open_err
        if stalled >= 3:
            break
    return total + float(parent.sum())


def _concat(parts, kind):
    if kind == "box":
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])
    return np.concatenate(parts)


def region_rule(region: Region, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Fixed (non-adaptive) nodes and weights covering a whole region."""
    d = region.dim
    if region.kind == "empty":
        return np.zeros((0, d)), np.zeros(0)
    if region.kind == "point":
        return np.zeros((1, 0)), np.ones(1)
    if region.kind == "box":
        lo, hi = (np.asarray(a, dtype=float) for a in region.data)
        nodes, w = box_rule(d, n)
        return lo + (hi - lo) * nodes, w * float(np.prod(hi - lo))
    S = np.asarray(region.data, dtype=float)
    u, w = simplex_rule(d, n)
    E = S[:, 1:, :] - S[:, :1, :]
    U = S[:, :1, :] + np.einsum("qj,kjd->kqd", u, E)
    jac = np.abs(np.linalg.det(E))
    return U.reshape(-1, d), (jac[:, None] * w[None, :]).ravel()
