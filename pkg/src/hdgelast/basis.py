"""Nodal Lagrange bases and Gauss quadrature on reference simplices.

The reference domains are the unit simplices: the segment [0, 1], the
triangle {x, y >= 0, x + y <= 1} and the tetrahedron {x >= 0, sum(x) <= 1}.
Modal evaluation goes through the orthonormal Koornwinder basis in collapsed
coordinates; nodal bases are obtained by inverting the generalized
Vandermonde matrix at warped (Gauss-Lobatto-blended) node sets.

Quadrature uses collapsed Gauss-Legendre x Gauss-Jacobi product rules that
are exact for the requested total polynomial degree with positive weights.
"""

from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np
from scipy.special import eval_jacobi, gammaln, roots_jacobi, roots_legendre

from .exceptions import ConfigError

_EPS_COLLAPSE = 1e-13


def space_dim(order: int, dim: int) -> int:
    """Dimension of P^order on a dim-simplex."""
    return comb(order + dim, dim)


# ---------------------------------------------------------------------------
# Normalized Jacobi polynomials


def _jacobi_sqnorm(n: int, a: float, b: float) -> float:
    ln = (
        (a + b + 1) * np.log(2.0)
        + gammaln(n + a + 1)
        + gammaln(n + b + 1)
        - gammaln(n + a + b + 1)
        - gammaln(n + 1)
        - np.log(2 * n + a + b + 1)
    )
    return float(np.exp(ln))


def jacobi_normalized(n: int, a: float, b: float, x: np.ndarray) -> np.ndarray:
    """Jacobi polynomial orthonormal on [-1, 1] with weight (1-x)^a (1+x)^b."""
    return eval_jacobi(n, a, b, x) / np.sqrt(_jacobi_sqnorm(n, a, b))


def grad_jacobi_normalized(n: int, a: float, b: float, x: np.ndarray) -> np.ndarray:
    if n == 0:
        return np.zeros_like(np.asarray(x, dtype=float))
    return np.sqrt(n * (n + a + b + 1)) * jacobi_normalized(n - 1, a + 1, b + 1, x)


def gauss_lobatto(n: int) -> np.ndarray:
    """n+1 Gauss-Lobatto-Legendre points on [-1, 1]."""
    if n == 0:
        return np.array([0.0])
    if n == 1:
        return np.array([-1.0, 1.0])
    interior = roots_jacobi(n - 1, 1.0, 1.0)[0]
    return np.concatenate(([-1.0], np.sort(interior), [1.0]))


# ---------------------------------------------------------------------------
# Collapsed-coordinate modal bases (values and gradients on unit simplices)


def _modal_1d(order, pts):
    x = 2.0 * np.asarray(pts, dtype=float).reshape(-1) - 1.0
    m = order + 1
    vals = np.empty((len(x), m))
    grads = np.empty((len(x), m, 1))
    for n in range(m):
        # orthonormal on [0,1]: extra sqrt(2) from the affine map
        vals[:, n] = jacobi_normalized(n, 0, 0, x) * np.sqrt(2.0)
        grads[:, n, 0] = grad_jacobi_normalized(n, 0, 0, x) * 2.0 * np.sqrt(2.0)
    return vals, grads


def _collapse_2d(r, s):
    a = np.where(np.abs(1.0 - s) > _EPS_COLLAPSE, 2.0 * (1.0 + r) / np.where(np.abs(1.0 - s) > _EPS_COLLAPSE, 1.0 - s, 1.0) - 1.0, -1.0)
    return a, s


def _modal_2d(order, pts):
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    r = 2.0 * pts[:, 0] - 1.0
    s = 2.0 * pts[:, 1] - 1.0
    a, b = _collapse_2d(r, s)
    m = space_dim(order, 2)
    vals = np.empty((len(r), m))
    grads = np.empty((len(r), m, 2))
    idx = 0
    for i in range(order + 1):
        fa = jacobi_normalized(i, 0, 0, a)
        dfa = grad_jacobi_normalized(i, 0, 0, a)
        for j in range(order - i + 1):
            gb = jacobi_normalized(j, 2 * i + 1, 0, b)
            dgb = grad_jacobi_normalized(j, 2 * i + 1, 0, b)
            vals[:, idx] = np.sqrt(2.0) * fa * gb * (1.0 - b) ** i

            dmodedr = dfa * gb
            if i > 0:
                dmodedr = dmodedr * (0.5 * (1.0 - b)) ** (i - 1)
            dmodeds = dfa * (gb * (0.5 * (1.0 + a)))
            if i > 0:
                dmodeds = dmodeds * (0.5 * (1.0 - b)) ** (i - 1)
            tmp = dgb * (0.5 * (1.0 - b)) ** i
            if i > 0:
                tmp = tmp - 0.5 * i * gb * (0.5 * (1.0 - b)) ** (i - 1)
            dmodeds = dmodeds + fa * tmp
            scale = 2.0 ** (i + 0.5)
            # factor 2: unit simplex -> bi-unit map
            grads[:, idx, 0] = scale * dmodedr * 2.0
            grads[:, idx, 1] = scale * dmodeds * 2.0
            idx += 1
    return vals, grads


def _collapse_3d(r, s, t):
    st = s + t
    a = np.where(np.abs(st) > _EPS_COLLAPSE, -2.0 * (1.0 + r) / np.where(np.abs(st) > _EPS_COLLAPSE, st, 1.0) - 1.0, -1.0)
    tt = 1.0 - t
    b = np.where(np.abs(tt) > _EPS_COLLAPSE, 2.0 * (1.0 + s) / np.where(np.abs(tt) > _EPS_COLLAPSE, tt, 1.0) - 1.0, -1.0)
    return a, b, t


def _modal_3d(order, pts):
    pts = np.asarray(pts, dtype=float).reshape(-1, 3)
    r = 2.0 * pts[:, 0] - 1.0
    s = 2.0 * pts[:, 1] - 1.0
    t = 2.0 * pts[:, 2] - 1.0
    a, b, c = _collapse_3d(r, s, t)
    m = space_dim(order, 3)
    vals = np.empty((len(r), m))
    grads = np.empty((len(r), m, 3))
    idx = 0
    for i in range(order + 1):
        fa = jacobi_normalized(i, 0, 0, a)
        dfa = grad_jacobi_normalized(i, 0, 0, a)
        for j in range(order - i + 1):
            gb = jacobi_normalized(j, 2 * i + 1, 0, b)
            dgb = grad_jacobi_normalized(j, 2 * i + 1, 0, b)
            for k in range(order - i - j + 1):
                hc = jacobi_normalized(k, 2 * (i + j) + 2, 0, c)
                dhc = grad_jacobi_normalized(k, 2 * (i + j) + 2, 0, c)
                vals[:, idx] = (
                    2.0 * np.sqrt(2.0) * fa * gb * hc
                    * (1.0 - b) ** i * (1.0 - c) ** (i + j)
                )

                v3dr = dfa * (gb * hc)
                if i > 0:
                    v3dr = v3dr * (0.5 * (1.0 - b)) ** (i - 1)
                if i + j > 0:
                    v3dr = v3dr * (0.5 * (1.0 - c)) ** (i + j - 1)

                v3ds = 0.5 * (1.0 + a) * v3dr
                tmp = dgb * (0.5 * (1.0 - b)) ** i
                if i > 0:
                    tmp = tmp - 0.5 * i * gb * (0.5 * (1.0 - b)) ** (i - 1)
                if i + j > 0:
                    tmp = tmp * (0.5 * (1.0 - c)) ** (i + j - 1)
                tmp = fa * (tmp * hc)
                v3ds = v3ds + tmp

                v3dt = 0.5 * (1.0 + a) * v3dr + 0.5 * (1.0 + b) * tmp
                tmp2 = dhc * (0.5 * (1.0 - c)) ** (i + j)
                if i + j > 0:
                    tmp2 = tmp2 - 0.5 * (i + j) * hc * (0.5 * (1.0 - c)) ** (i + j - 1)
                tmp2 = fa * (gb * tmp2) * (0.5 * (1.0 - b)) ** i
                v3dt = v3dt + tmp2

                scale = 2.0 ** (2 * i + j + 1.5)
                grads[:, idx, 0] = scale * v3dr * 2.0
                grads[:, idx, 1] = scale * v3ds * 2.0
                grads[:, idx, 2] = scale * v3dt * 2.0
                idx += 1
    return vals, grads


def modal_basis(order: int, dim: int, pts: np.ndarray):
    """Orthonormal modal values and gradients at unit-simplex points."""
    if dim == 1:
        return _modal_1d(order, pts)
    if dim == 2:
        return _modal_2d(order, pts)
    if dim == 3:
        return _modal_3d(order, pts)
    raise ConfigError(f"unsupported dimension {dim}")


# ---------------------------------------------------------------------------
# Warped nodal sets (Gauss-Lobatto edge distribution, barycentric blending)


def _multi_indices(order, dim):
    out = []
    if dim == 1:
        for i in range(order + 1):
            out.append((order - i, i))
    elif dim == 2:
        for i in range(order + 1):
            for j in range(order - i + 1):
                out.append((order - i - j, i, j))
    else:
        for i in range(order + 1):
            for j in range(order - i + 1):
                for k in range(order - i - j + 1):
                    out.append((order - i - j - k, i, j, k))
    return out


def _warped_barycentric(m, zeta):
    """Warped barycentric coordinates of one multi-index.

    Vertices/edges use the 1D Gauss-Lobatto positions directly; faces and
    interiors blend them so that every sub-simplex inherits the same rule.
    """
    m = tuple(m)
    nz = [a for a, ma in enumerate(m) if ma > 0]
    lam = np.zeros(len(m))
    if len(nz) == 1:
        lam[nz[0]] = 1.0
        return lam
    if len(nz) == 2:
        a, b = nz
        lam[a] = zeta[m[a]]
        lam[b] = zeta[m[b]]
        return lam
    if len(nz) == 3:
        a, b, c = nz
        za, zb, zc = zeta[m[a]], zeta[m[b]], zeta[m[c]]
        lam[a] = (1.0 + 2.0 * za - zb - zc) / 3.0
        lam[b] = (1.0 + 2.0 * zb - za - zc) / 3.0
        lam[c] = (1.0 + 2.0 * zc - za - zb) / 3.0
        return lam
    zs = np.array([zeta[ma] for ma in m])
    tot = zs.sum()
    for a in range(len(m)):
        lam[a] = (1.0 + 4.0 * zs[a] - tot) / 4.0
    return lam


@lru_cache(maxsize=None)
def simplex_nodes(order: int, dim: int) -> np.ndarray:
    """Warped interpolation nodes on the unit simplex, shape (m, dim)."""
    if order == 0:
        return np.full((1, dim), 1.0 / (dim + 1))
    zeta = (gauss_lobatto(order) + 1.0) / 2.0
    nodes = []
    for m in _multi_indices(order, dim):
        lam = _warped_barycentric(m, zeta)
        nodes.append(lam[1:])
    return np.array(nodes)


# ---------------------------------------------------------------------------
# Quadrature


@lru_cache(maxsize=None)
def simplex_quadrature(degree: int, dim: int):
    """Points and weights exact for total degree `degree` on the unit simplex.

    Weights are positive and sum to the reference measure (1, 1/2, 1/6).
    """
    n = max(1, (degree + 2) // 2)
    if dim == 1:
        x, w = roots_legendre(n)
        return ((x + 1.0) / 2.0).reshape(-1, 1), w / 2.0
    if dim == 2:
        xa, wa = roots_legendre(n)
        xb, wb = roots_jacobi(n, 1.0, 0.0)
        a, b = np.meshgrid(xa, xb, indexing="ij")
        wgt = np.outer(wa, wb) / 2.0
        r = (1.0 + a) * (1.0 - b) / 2.0 - 1.0
        s = b
        pts = np.stack([(r.ravel() + 1.0) / 2.0, (s.ravel() + 1.0) / 2.0], axis=1)
        return pts, wgt.ravel() / 4.0
    if dim == 3:
        xa, wa = roots_legendre(n)
        xb, wb = roots_jacobi(n, 1.0, 0.0)
        xc, wc = roots_jacobi(n, 2.0, 0.0)
        a, b, c = np.meshgrid(xa, xb, xc, indexing="ij")
        wgt = wa[:, None, None] * wb[None, :, None] * wc[None, None, :] / 8.0
        t = c
        s = (1.0 + b) * (1.0 - c) / 2.0 - 1.0
        r = (1.0 + a) * (1.0 - b) * (1.0 - c) / 4.0 - 1.0
        pts = np.stack(
            [
                (r.ravel() + 1.0) / 2.0,
                (s.ravel() + 1.0) / 2.0,
                (t.ravel() + 1.0) / 2.0,
            ],
            axis=1,
        )
        return pts, wgt.ravel() / 8.0
    raise ConfigError(f"unsupported dimension {dim}")


# ---------------------------------------------------------------------------
# Lagrange bases


class LagrangeSimplex:
    """Nodal Lagrange basis of a given order on the unit simplex."""

    def __init__(self, order: int, dim: int):
        if order < 0:
            raise ConfigError("order must be >= 0")
        self.order = order
        self.dim = dim
        self.num = space_dim(order, dim)
        self.nodes = simplex_nodes(order, dim)
        if order == 0:
            self._vinv = np.array([[1.0]])
        else:
            v, _ = modal_basis(order, dim, self.nodes)
            self._vinv = np.linalg.inv(v)

    def eval(self, pts: np.ndarray) -> np.ndarray:
        """Values of all nodal basis functions, shape (npts, num)."""
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        if self.order == 0:
            return np.ones((len(pts), 1))
        v, _ = modal_basis(self.order, self.dim, pts)
        return v @ self._vinv

    def eval_grad(self, pts: np.ndarray) -> np.ndarray:
        """Gradients w.r.t. reference coordinates, shape (npts, num, dim)."""
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        if self.order == 0:
            return np.zeros((len(pts), 1, self.dim))
        _, g = modal_basis(self.order, self.dim, pts)
        return np.einsum("pmd,mn->pnd", g, self._vinv)


class SimplexBasis:
    """Discretization bundle for one polynomial order: volume + face spaces.

    Carries the warped nodal sets, quadrature rules exact for degree
    2*order + material_order + 1, and pre-tabulated basis values/gradients
    at the quadrature points.
    """

    def __init__(self, order: int, dim: int, material_order: int = 0,
                 quad_degree: int | None = None):
        if not 1 <= order <= 10:
            raise ConfigError(f"polynomial order must be in 1..10, got {order}")
        if dim not in (2, 3):
            raise ConfigError(f"dim must be 2 or 3, got {dim}")
        self.order = order
        self.dim = dim
        if quad_degree is None:
            quad_degree = 2 * order + material_order + 1
        self.quad_degree = quad_degree

        self.volume = LagrangeSimplex(order, dim)
        self.face = LagrangeSimplex(order, dim - 1)
        self.num_vol = self.volume.num
        self.num_face = self.face.num

        self.qp, self.qw = simplex_quadrature(quad_degree, dim)
        self.vals_q = self.volume.eval(self.qp)
        self.grads_q = self.volume.eval_grad(self.qp)

        self.fqp, self.fqw = simplex_quadrature(quad_degree, dim - 1)
        self.face_vals_q = self.face.eval(self.fqp)


def make_basis(order: int, dim: int, material_order: int = 0) -> SimplexBasis:
    """Build the nodal basis/quadrature bundle for the given order."""
    return SimplexBasis(order, dim, material_order=material_order)
