"""Translation smoothing of currents and its homotopy operator on R^m.

The kernel is a product of one-dimensional normalised bumps
f(x) = prod_i f1(x_i), f1(u) = exp(-a / (1 - u^2)) / c_a on |u| < 1, and
f_eps(x) = eps^-m f(x / eps). For a current T:

* r_eps T is the smooth form obtained by averaging translates of T against
  f_eps; pointwise it is a fiber integral over T of the shifted kernel.
* On test forms the dual operators are
  r*phi(y) = int phi(y + x) f_eps(x) dx and
  a*phi(y) = int int_0^1 i_x phi(y + t x) dt f_eps(x) dx,
  and r*phi - phi = d a*phi + a* d phi.

Dual operators are returned as ``AveragedForm`` objects: coefficient
expressions in (y, x, t) averaged over a fixed kernel rule. Their exterior
derivative is symbolic in y, so the homotopy identity is checked without
finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline
from scipy.special import roots_legendre

from . import expr as E
from .currents import Current, DEFAULT_QUADRATURE, SmoothFormCurrent
from .forms import DifferentialForm, SumForm, complement, exterior_derivative, multiindices, perm_sign
from .polytope import Halfspaces, decompose
from .quadrature import QuadratureConfig, box_rule, gauss_legendre, region_rule

__all__ = [
    "PROFILES", "KernelConstants", "kernel_constants", "Kernel", "ScaledKernelForm", "AveragedForm",
    "MollifiedForm", "SmoothingConfig", "r_eps_form", "r_eps_dual", "a_eps_dual", "r_eps", "a_eps",
    "homotopy_residual", "HomotopyCurrent",
]

# profile name -> steepness a in exp(-a / (1 - u^2))
PROFILES = {"bump-product": 1.0, "bump-product-wide": 0.5}

_CHUNK = 1 << 21  # max evaluation points per vectorised batch


@dataclass(frozen=True)
class KernelConstants:
    c: float        # int_{-1}^{1} exp(-a/(1-u^2)) du
    m2: float       # int u^2 f1(u) du
    f1_zero: float  # f1(0)


def _profile(u, a):
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) < 1.0
    s = np.where(inside, 1.0 - u * u, 1.0)
    return np.where(inside, np.exp(-a / s), 0.0)


@lru_cache(maxsize=None)
def _cdf_spline(a: float, c: float, knots: int = 4097) -> CubicHermiteSpline:
    # cumulative integral of f1 on a fine grid (Gauss per cell), Hermite
    # interpolation with the exact derivative f1: error far below 1e-12
    t = np.linspace(-1.0, 1.0, knots)
    x, w = np.polynomial.legendre.leggauss(8)
    h = t[1] - t[0]
    mids = 0.5 * (t[:-1] + t[1:])
    cell = (_profile(mids[:, None] + 0.5 * h * x[None, :], a) @ w) * 0.5 * h / c
    F = np.concatenate([[0.0], np.cumsum(cell)])
    F /= F[-1]
    return CubicHermiteSpline(t, F, _profile(t, a) / c)


@lru_cache(maxsize=None)
def _gauss_for_weight(a: float, c: float, n: int, fine: int = 4000) -> tuple[np.ndarray, np.ndarray]:
    """Golub-Welsch rule for the weight f1, via the discretised Stieltjes procedure."""
    x, w = roots_legendre(fine)
    w = w * _profile(x, a) / c
    keep = w > 0
    x, w = x[keep], w[keep] / w[keep].sum()
    alpha, beta = np.zeros(n), np.zeros(n)
    p_prev, p = np.zeros_like(x), np.ones_like(x)
    norm_prev = 1.0
    for k in range(n):
        norm = float(w @ (p * p))
        alpha[k] = float(w @ (x * p * p)) / norm
        beta[k] = norm / norm_prev if k else 0.0
        p_prev, p = p, (x - alpha[k]) * p - (beta[k] * p_prev if k else 0.0)
        norm_prev = norm
        # rescale to keep the recurrence in floating-point range
        scale = np.sqrt(float(w @ (p * p))) or 1.0
        p, p_prev = p / scale, p_prev / scale
        norm_prev /= scale * scale
    J = np.diag(alpha) + np.diag(np.sqrt(beta[1:]), 1) + np.diag(np.sqrt(beta[1:]), -1)
    nodes, vecs = np.linalg.eigh(J)
    weights = vecs[0] ** 2
    nodes = 0.5 * (nodes - nodes[::-1])  # exact symmetry
    weights = 0.5 * (weights + weights[::-1])
    return nodes, weights / weights.sum()


@lru_cache(maxsize=None)
def kernel_constants(a: float = 1.0) -> KernelConstants:
    """1-D kernel integrals by adaptive quadrature to 1e-10 (computed once)."""
    c, _ = quad(lambda u: float(_profile(u, a)), -1.0, 1.0, epsabs=1e-14, epsrel=1e-12, limit=200)
    m2, _ = quad(lambda u: u * u * float(_profile(u, a)), -1.0, 1.0, epsabs=1e-14, epsrel=1e-12, limit=200)
    return KernelConstants(c=c, m2=m2 / c, f1_zero=math.exp(-a) / c)


class Kernel:
    """Normalised product bump on R^m."""

    def __init__(self, m: int, profile: str = "bump-product", check: bool = True):
        if profile not in PROFILES:
            raise ValueError(f"unknown kernel profile {profile!r}; choose from {sorted(PROFILES)}")
        if m < 1:
            raise ValueError("kernel needs m >= 1")
        self.m = m
        self.profile = profile
        self.a = PROFILES[profile]
        self.constants = kernel_constants(self.a)
        self.support_radius = math.sqrt(m)  # support is the cube [-1, 1]^m
        if check:
            total = self.normalization()
            if abs(total - 1.0) > 1e-6:
                raise ArithmeticError(f"kernel normalisation check failed: {total!r}")

    def f1(self, u) -> np.ndarray:
        return _profile(u, self.a) / self.constants.c

    def cdf(self, t) -> np.ndarray:
        """int_{-1}^{t} f1(u) du."""
        t = np.asarray(t, dtype=float)
        spline = _cdf_spline(self.a, self.constants.c)
        return np.where(t <= -1.0, 0.0, np.where(t >= 1.0, 1.0, spline(np.clip(t, -1.0, 1.0))))

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.prod(self.f1(X), axis=1)

    def scaled(self, X, eps: float) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.prod(self.f1(X / eps), axis=1) / eps ** self.m

    def normalization(self, eps: float = 1.0, order: int = 64) -> float:
        """Tensor Gauss value of int f_eps over its support cube."""
        if self.m <= 3:
            nodes, w = box_rule(self.m, order)
            X = (2.0 * nodes - 1.0) * eps
            return float(self.scaled(X, eps) @ w * (2.0 * eps) ** self.m)
        x, w = gauss_legendre(order)
        one = float(self.f1(2.0 * x - 1.0) @ w * 2.0)
        return one ** self.m

    def f1_expr(self, arg: E.Expr) -> E.Expr:
        s = E.add(E.ONE, E.neg(E.mul(arg, arg)))
        return E.mul(E.Const(1.0 / self.constants.c), E.flat(E.mul(E.Const(1.0 / self.a), s)))

    def expression(self, z: list[E.Expr], eps: float) -> E.Expr:
        """f_eps(z) as an expression in the given coordinate expressions."""
        inv = E.Const(1.0 / eps)
        return E.mul(E.Const(eps ** -self.m), *[self.f1_expr(E.mul(inv, zi)) for zi in z])

    @lru_cache(maxsize=64)
    def rule(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Tensor Gauss rule for averaging against f on [-1,1]^m; weights sum to exactly 1.

        The 1-D factor is the n-point Gauss rule for the weight f1, exact for
        polynomials of degree 2n - 1 (so every moment of f below that order).
        """
        u, w1 = _gauss_for_weight(self.a, self.constants.c, n)
        grids = np.meshgrid(*([u] * self.m), indexing="ij")
        wgrids = np.meshgrid(*([w1] * self.m), indexing="ij")
        nodes = np.stack([g.ravel() for g in grids], axis=1)
        weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
        return nodes, weights


class ScaledKernelForm:
    """theta_eps = f_eps vol as a top-degree form."""

    def __init__(self, kernel: Kernel, eps: float):
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.kernel, self.eps = kernel, float(eps)
        self.m = kernel.m
        self.degree = kernel.m
        self.support = Halfspaces.box([-eps] * self.m, [eps] * self.m)

    def coefficients(self, X, indices=None):
        idx = tuple(range(1, self.m + 1))
        if indices is not None and idx not in set(indices):
            return {}
        return {idx: self.kernel.scaled(X, self.eps)}

    def integral(self, order: int = 64) -> float:
        return self.kernel.normalization(self.eps, order)

    def d(self):
        return DifferentialForm.zero(self.m, self.m)


@dataclass(frozen=True)
class SmoothingConfig:
    """Quadrature orders of the dual operators.

    kernel_order: Gauss points per axis for averaging against f_eps.
    t_order: Gauss points for the homotopy parameter t in [0, 1].
    None ties them to the current grid (n and max(4, n // 4)).
    """

    kernel_order: int | None = None
    t_order: int | None = None

    def resolve(self, q: QuadratureConfig) -> tuple[int, int]:
        k = self.kernel_order or q.n
        t = self.t_order or max(4, q.n // 4)
        if t < 4:
            raise ValueError("t-quadrature order must be at least 4")
        return k, t


class AveragedForm:
    """Form with coefficients  sum_q w_q c_I(y, x_q, t_q).

    ``template`` holds the coefficient expressions: variables 0..m-1 are y,
    m..2m-1 the kernel variable x and 2m the homotopy parameter t.
    """

    def __init__(self, template: DifferentialForm, nodes: np.ndarray, weights: np.ndarray,
                 support: Halfspaces | None):
        self.template = template
        self.m = template.m
        self.degree = template.degree
        self.nodes = np.asarray(nodes, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.support = support

    def coefficients(self, X, indices=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        terms = self.template.terms
        wanted = [i for i in (terms if indices is None else indices) if i in terms]
        if not wanted:
            return {}
        out = {i: np.empty(len(X)) for i in wanted}
        Q = len(self.weights)
        step = max(1, _CHUNK // max(Q, 1))
        node_env = [self.nodes[None, :, j] for j in range(self.nodes.shape[1])]
        for s in range(0, len(X), step):
            Xc = X[s:s + step]
            env = [Xc[:, i, None] for i in range(self.m)] + node_env
            memo: dict = {}
            for i in wanted:
                v = np.broadcast_to(np.asarray(E.evaluate(terms[i], env, memo), dtype=float), (len(Xc), Q))
                out[i][s:s + step] = v @ self.weights
        return out

    def d(self) -> "AveragedForm":
        if self.degree >= self.m:
            return AveragedForm(DifferentialForm.zero(self.m, self.m), self.nodes, self.weights, self.support)
        return AveragedForm(exterior_derivative(self.template), self.nodes, self.weights, self.support)


def _shift_subs(m: int, with_t: bool) -> dict[int, E.Expr]:
    t = E.Var(2 * m)
    return {i: E.add(E.Var(i), E.mul(t, E.Var(m + i)) if with_t else E.Var(m + i)) for i in range(m)}


def _check_eps(eps: float):
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")


def r_eps_dual(phi: DifferentialForm, eps: float, kernel: Kernel | None = None,
               q: QuadratureConfig | None = None, cfg: SmoothingConfig = SmoothingConfig()) -> AveragedForm:
    """r_eps^* phi: coefficients convolved with f_eps."""
    _check_eps(eps)
    q = q or DEFAULT_QUADRATURE
    kernel = kernel or Kernel(phi.m)
    n, _ = cfg.resolve(q)
    nodes, w = kernel.rule(n)
    subs = _shift_subs(phi.m, with_t=False)
    template = DifferentialForm(phi.m, phi.degree, {i: E.substitute(c, subs) for i, c in phi.terms.items()})
    support = None if phi.support is None else phi.support.expand_cube(eps)
    return AveragedForm(template, eps * nodes, w, support)


def a_eps_dual(phi: DifferentialForm, eps: float, kernel: Kernel | None = None,
               q: QuadratureConfig | None = None, cfg: SmoothingConfig = SmoothingConfig()):
    """a_eps^* phi, of degree deg phi - 1; the zero 0-form when phi is a 0-form."""
    _check_eps(eps)
    m = phi.m
    if phi.degree == 0:
        return DifferentialForm.zero(m, 0)
    q = q or DEFAULT_QUADRATURE
    kernel = kernel or Kernel(m)
    n, nt = cfg.resolve(q)
    xn, xw = kernel.rule(n)
    tn, tw = gauss_legendre(nt)
    nodes = np.hstack([np.repeat(eps * xn, nt, axis=0), np.tile(tn, len(xw))[:, None]])
    weights = np.repeat(xw, nt) * np.tile(tw, len(xw))
    subs = _shift_subs(m, with_t=True)
    acc: dict[tuple, list] = {}
    for I, c in phi.terms.items():
        cs = E.substitute(c, subs)
        for k, i in enumerate(I):
            J = I[:k] + I[k + 1:]
            term = E.mul(E.Var(m + i - 1), cs)
            acc.setdefault(J, []).append(term if k % 2 == 0 else E.neg(term))
    template = DifferentialForm(m, phi.degree - 1, {J: E.add(*ts) for J, ts in acc.items()})
    support = None if phi.support is None else phi.support.expand_cube(eps)
    return AveragedForm(template, nodes, weights, support)


# ---------------------------------------------------------------- r_eps T as a smooth form


def _fiber_box(piece, Z, eps, kernel, n):
    """Fiber integrals for pieces whose clipped domains are boxes; None if not applicable."""
    d = piece.dim
    M, c = piece.amap.matrix, piece.amap.translation
    bb = piece.base.box_bounds()
    if bb is None:
        return None
    nz = np.abs(M) > 0
    if np.any(nz.sum(axis=1) > 1):
        return None
    N = len(Z)
    lo = np.broadcast_to(bb[0], (N, d)).copy()
    hi = np.broadcast_to(bb[1], (N, d)).copy()
    alive = np.ones(N, dtype=bool)
    D = Z - c
    for k in range(M.shape[0]):
        cols = np.flatnonzero(nz[k])
        if len(cols) == 0:
            alive &= np.abs(D[:, k]) <= eps
            continue
        j = cols[0]
        a = M[k, j]
        b1, b2 = (D[:, k] - eps) / a, (D[:, k] + eps) / a
        lo[:, j] = np.maximum(lo[:, j], np.minimum(b1, b2))
        hi[:, j] = np.minimum(hi[:, j], np.maximum(b1, b2))
    if not (np.all(np.isfinite(lo[alive])) and np.all(np.isfinite(hi[alive]))):
        return None
    alive &= np.all(hi > lo, axis=1)
    out: dict[tuple, np.ndarray] = {}
    idx = np.flatnonzero(alive)
    if len(idx) == 0:
        return out
    if piece.constant is not None:
        # constant weights: the product kernel makes the fiber integral a
        # product of 1-D integrals, one per parameter axis
        prod = np.ones(len(idx))
        x, w = gauss_legendre(n)
        for k in np.flatnonzero(~nz.any(axis=1)):
            prod *= kernel.f1(D[idx, k] / eps) / eps
        for j in range(d):
            rows = np.flatnonzero(nz[:, j])
            span = hi[idx, j] - lo[idx, j]
            if len(rows) == 0:
                prod *= span
                continue
            if len(rows) == 1:
                # one coordinate moves with u_j: the integral is a CDF difference
                k = rows[0]
                a = M[k, j]
                s_lo, s_hi = (D[idx, k] - a * lo[idx, j]) / eps, (D[idx, k] - a * hi[idx, j]) / eps
                prod *= np.abs(kernel.cdf(s_lo) - kernel.cdf(s_hi)) / abs(a)
                continue
            u = lo[idx, j, None] + span[:, None] * x[None, :]
            vals = np.ones_like(u)
            for k in rows:
                vals *= kernel.f1((D[idx, k, None] - M[k, j] * u) / eps) / eps
            prod *= (vals @ w) * span
        for L, wv in piece.constant.items():
            out[L] = np.zeros(N)
            out[L][idx] = wv * prod
        return out
    nodes, w = box_rule(d, n)
    Q = len(w)
    step = max(1, _CHUNK // Q)
    for s in range(0, len(idx), step):
        sel = idx[s:s + step]
        span = hi[sel] - lo[sel]
        U = lo[sel, None, :] + span[:, None, :] * nodes[None, :, :]
        Uf = U.reshape(-1, d)
        X = piece.amap(Uf)
        kern = kernel.scaled(np.repeat(Z[sel], Q, axis=0) - X, eps)
        vol = np.prod(span, axis=1)
        for L, wv in piece.weights(Uf, X).items():
            val = ((wv * kern).reshape(len(sel), Q) @ w) * vol
            if L not in out:
                out[L] = np.zeros(N)
            out[L][sel] += val
    return out


def _fiber_planar(piece, Z, eps, kernel, n):
    """Constant-weight 2-cells in R^2: slice along y1, integrate y2 exactly with the kernel CDF.

    The y1-integral is split at the cell's vertices, where the slice bounds
    have kinks, and where a slice bound crosses z2 +- eps (there the CDF
    factor switches on; the switch is C-infinity but steep).
    """
    M, c = piece.amap.matrix, piece.amap.translation
    if piece.constant is None or M.shape != (2, 2) or piece.hint is None:
        return None
    det = float(np.linalg.det(M))
    if abs(det) < 1e-14:
        return None
    Minv = np.linalg.inv(M)
    H = piece.base.H @ Minv
    h = piece.base.h + H @ c
    V = piece.amap(np.asarray(piece.hint, dtype=float))
    upper, lower = H[:, 1] > 1e-14, H[:, 1] < -1e-14
    N = len(Z)
    A = np.maximum(V[:, 0].min(), Z[:, 0] - eps)
    B = np.minimum(V[:, 0].max(), Z[:, 0] + eps)
    alive = B > A
    out: dict[tuple, np.ndarray] = {}
    idx = np.flatnonzero(alive)
    if len(idx) == 0:
        return out
    z1, z2, A, B = Z[idx, 0], Z[idx, 1], A[idx], B[idx]
    # also break where a slice bound crosses z2 +- eps: the CDF factor
    # switches on across the whole segment there instead of inside it
    slanted = (upper | lower) & (np.abs(H[:, 0]) > 1e-14)
    Hs, hs = H[slanted], h[slanted]
    cross = [(hs[None, :] - Hs[None, :, 1] * (z2 + s * eps)[:, None]) / Hs[None, :, 0] for s in (-1.0, 1.0)]
    cand = np.concatenate([np.broadcast_to(V[None, :, 0], (len(idx), len(V)))] + cross, axis=1)
    brk = np.sort(np.column_stack([A, np.clip(cand, A[:, None], B[:, None]), B]), axis=1)
    x, w = gauss_legendre(2 * n)  # 1-D rule, so doubling is cheap
    lo, span = brk[:, :-1], np.diff(brk, axis=1)                      # (N, S)
    y1 = lo[:, :, None] + span[:, :, None] * x[None, None, :]         # (N, S, Q)
    H1 = H[:, 0][:, None, None, None]
    bound = (h[:, None, None, None] - H1 * y1[None]) / np.where(upper | lower, H[:, 1], 1.0)[:, None, None, None]
    hi2 = np.min(np.where(upper[:, None, None, None], bound, np.inf), axis=0)
    lo2 = np.max(np.where(lower[:, None, None, None], bound, -np.inf), axis=0)
    a = np.maximum(lo2, (z2 - eps)[:, None, None])
    b = np.minimum(hi2, (z2 + eps)[:, None, None])
    inner = np.where(b > a, kernel.cdf((z2[:, None, None] - a) / eps) - kernel.cdf((z2[:, None, None] - b) / eps), 0.0)
    vals = kernel.f1((z1[:, None, None] - y1) / eps) / eps * inner
    g = np.einsum("nsq,q,ns->n", vals, w, span) / abs(det)
    for L, wv in piece.constant.items():
        out[L] = np.zeros(N)
        out[L][idx] = wv * g
    return out


def _fiber_general(piece, Z, eps, kernel, n):
    """Per-point clipping for pieces with slanted parametrisations."""
    M, c = piece.amap.matrix, piece.amap.translation
    H = np.vstack([piece.base.H, M, -M])
    out: dict[tuple, np.ndarray] = {}
    for p, z in enumerate(Z):
        h = np.concatenate([piece.base.h, z - c + eps, -(z - c) + eps])
        U, w = region_rule(decompose(Halfspaces(H, h), piece.hint), n)
        if not len(w):
            continue
        X = piece.amap(U)
        kern = kernel.scaled(z - X, eps) * w
        for L, wv in piece.weights(U, X).items():
            if L not in out:
                out[L] = np.zeros(len(Z))
            out[L][p] += float(wv @ kern)
    return out


def _fiber_generic_current(T: Current, Z, eps, kernel, q):
    """Fallback through duality: rho_K(z) = sign * T(f_eps(z - .) dx_{K^c})."""
    m, k = T.m, T.degree
    out: dict[tuple, np.ndarray] = {}
    for K in multiindices(m, k):
        L = complement(K, m)
        s = perm_sign(K, L)
        vals = np.zeros(len(Z))
        for p, z in enumerate(Z):
            coef = kernel.expression([E.add(E.Const(z[i]), E.neg(E.Var(i))) for i in range(m)], eps)
            box = Halfspaces.box(z - eps, z + eps)
            vals[p] = s * T.evaluate(DifferentialForm(m, m - k, {L: coef}, box), q)
        out[K] = vals
    return out


def r_eps_form(T: Current, eps: float, X, kernel: Kernel | None = None,
               q: QuadratureConfig | None = None) -> dict[tuple, np.ndarray]:
    """Coefficients of the smooth form r_eps T at the points X (shape (N, m) or (m,))."""
    _check_eps(eps)
    q = q or DEFAULT_QUADRATURE
    kernel = kernel or Kernel(T.m)
    Z = np.atleast_2d(np.asarray(X, dtype=float))
    if Z.shape[1] != T.m:
        raise ValueError(f"points must have {T.m} coordinates")
    m, k = T.m, T.degree
    if T.support_box() is None:
        raise ValueError("r_eps needs a compactly supported current")
    pieces = T.pieces()
    if pieces is None:
        return _fiber_generic_current(T, Z, eps, kernel, q)
    g: dict[tuple, np.ndarray] = {}
    for piece in pieces:
        if piece.dim == 0:
            c = piece.amap.translation
            W = piece.weights(np.zeros((1, 0)), c[None, :])
            kern = kernel.scaled(Z - c, eps)
            part = {L: float(w[0]) * kern for L, w in W.items()}
        else:
            n = q.fiber_order(piece.dim)
            part = _fiber_box(piece, Z, eps, kernel, n)
            if part is None:
                part = _fiber_planar(piece, Z, eps, kernel, n)
            if part is None:
                part = _fiber_general(piece, Z, eps, kernel, n)
        for L, v in part.items():
            g[L] = g[L] + v if L in g else v
    out = {}
    for L, v in g.items():
        K = complement(L, m)
        out[K] = perm_sign(K, L) * v
    return out


def _layer_knots(T: Current, box, eps: float) -> tuple:
    """Per-axis coordinates where r_eps T has eps-wide transition layers.

    Splitting the integration box there keeps adaptive bisection from
    accepting a coarse cell whose parent and children agree by accident.
    """
    coords = [box[0], box[1]]
    for _, cell in getattr(T, "cells", []):
        coords.extend(cell.vertices())
    C = np.vstack(coords)
    return tuple(np.unique(np.concatenate([C[:, k] - eps, C[:, k], C[:, k] + eps])) for k in range(T.m))


class MollifiedForm:
    """The smooth form r_eps T, evaluated lazily through fiber integrals.

    Coefficients come from fixed-order fiber rules, accurate to roughly
    1e-8 relative; integrals of this form are only refined to ``rtol_floor``.
    """

    rtol_floor = 1e-7

    def __init__(self, T: Current, eps: float, kernel: Kernel | None = None, q: QuadratureConfig | None = None):
        _check_eps(eps)
        box = T.support_box()
        if box is None:
            raise ValueError("r_eps needs a compactly supported current")
        self.T, self.eps = T, float(eps)
        self.kernel = kernel or Kernel(T.m)
        self.q = q or DEFAULT_QUADRATURE
        self.m = T.m
        self.degree = T.degree
        self.support = Halfspaces.box(box[0] - eps, box[1] + eps)
        self.knots = _layer_knots(T, box, self.eps)

    def coefficients(self, X, indices=None):
        out = r_eps_form(self.T, self.eps, X, self.kernel, self.q)
        if indices is not None:
            wanted = set(indices)
            out = {K: v for K, v in out.items() if K in wanted}
        return out

    def d(self):
        # d(r_eps T) = (-1)^(k+1) r_eps(bT) because r_eps commutes with b
        if self.degree >= self.m:
            return DifferentialForm.zero(self.m, self.m)
        bT = self.T.boundary()
        if bT.dim < 0:
            return SumForm(self.m, self.degree + 1, [])
        return SumForm(self.m, self.degree + 1,
                       [((-1.0) ** (self.degree + 1), MollifiedForm(bT, self.eps, self.kernel, self.q))])


def r_eps(T: Current, eps: float, kernel: Kernel | None = None, q: QuadratureConfig | None = None) -> Current:
    """r_eps T as a smooth-form current."""
    return SmoothFormCurrent(MollifiedForm(T, eps, kernel, q))


class HomotopyCurrent(Current):
    """a_eps T, defined by duality: (a_eps T)(phi) = T(a_eps^* phi)."""

    def __init__(self, T: Current, eps: float, kernel: Kernel | None = None, cfg: SmoothingConfig = SmoothingConfig()):
        _check_eps(eps)
        if T.degree == 0:
            raise ValueError("a_eps lowers the degree; T has degree 0")
        self.T, self.eps, self.cfg = T, float(eps), cfg
        self.kernel = kernel or Kernel(T.m)
        self.m = T.m
        self.degree = T.degree - 1

    def support_box(self):
        b = self.T.support_box()
        return None if b is None else (b[0] - self.eps, b[1] + self.eps)

    def _evaluate(self, phi, q):
        return self.T._evaluate(a_eps_dual(phi, self.eps, self.kernel, q, self.cfg), q)


def a_eps(T: Current, eps: float, kernel: Kernel | None = None) -> Current:
    return HomotopyCurrent(T, eps, kernel)


def homotopy_residual(T: Current, phi: DifferentialForm, eps: float, q: QuadratureConfig | None = None,
                      kernel: Kernel | None = None, cfg: SmoothingConfig = SmoothingConfig()) -> float:
    """|(r_eps T - T)(phi) - (b a_eps T + a_eps b T)(phi)|, every term by duality.

    (b a T)(phi) = T(a^* d phi) and (a b T)(phi) = (bT)(a^* phi), with bT the
    geometric boundary for chains.
    """
    _check_eps(eps)
    q = q or DEFAULT_QUADRATURE
    kernel = kernel or Kernel(T.m)
    lhs = T.evaluate(r_eps_dual(phi, eps, kernel, q, cfg), q) - T.evaluate(phi, q)
    rhs = 0.0
    if phi.degree < phi.m:
        dphi = phi.d()
        if not dphi.is_zero():
            rhs += T.evaluate(a_eps_dual(dphi, eps, kernel, q, cfg), q)
    if phi.degree >= 1 and T.dim >= 1:
        rhs += T.boundary().evaluate(a_eps_dual(phi, eps, kernel, q, cfg), q)
    return abs(lhs - rhs)
