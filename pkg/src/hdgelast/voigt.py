"""Voigt identification of symmetric tensors and the associated index algebra.

Symmetric 3x3 (2x2) tensors are stored as vectors of length 6 (3) in the
ordering (xx, yy, zz, yz, xz, xy) for 3D and (xx, zz, xz) for 2D.  Vectors
hold the plain tensor entries; the factor-2 bookkeeping on shear slots is
carried explicitly by the diagonal matrix ``d_dagger`` and is applied at
operation sites, never baked into storage.
"""

from __future__ import annotations

import numpy as np

# Axis labels per dimension.  2D works in the x-z plane.
AXES = {2: ("x", "z"), 3: ("x", "y", "z")}

# Ordered index pairs backing the Voigt slots.
SM_PAIRS = {
    2: (("x", "x"), ("z", "z"), ("x", "z")),
    3: (("x", "x"), ("y", "y"), ("z", "z"), ("y", "z"), ("x", "z"), ("x", "y")),
}

_CODE = {
    3: {
        ("x", "x"): 1, ("y", "y"): 2, ("z", "z"): 3,
        ("y", "z"): 4, ("z", "y"): 4,
        ("x", "z"): 5, ("z", "x"): 5,
        ("x", "y"): 6, ("y", "x"): 6,
    },
    2: {
        ("x", "x"): 1, ("z", "z"): 2,
        ("x", "z"): 3, ("z", "x"): 3,
    },
}

SYM_TOL = 1e-12


def voigt_len(dim: int) -> int:
    """Number of Voigt slots: 6 in 3D, 3 in 2D."""
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    return dim * (dim + 1) // 2


def sm_index(pair, dim: int = 3) -> int:
    """One-based Voigt code of an (axis, axis) pair, e.g. ('x','z') -> 5."""
    try:
        return _CODE[dim][tuple(pair)]
    except KeyError:
        raise ValueError(f"invalid index pair {pair!r} for dim={dim}") from None


def _pair_slots(dim: int):
    """(row, col) zero-based tensor indices of each Voigt slot."""
    axes = AXES[dim]
    ax = {a: i for i, a in enumerate(axes)}
    return [(ax[a], ax[b]) for a, b in SM_PAIRS[dim]]


def sym_to_voigt(m: np.ndarray) -> np.ndarray:
    """Voigt vector of a symmetric matrix (3x3 -> 6, 2x2 -> 3).

    Raises ValueError when the input is asymmetric beyond a relative
    tolerance of 1e-12 in the max norm.
    """
    m = np.asarray(m)
    dim = m.shape[0]
    if m.shape != (dim, dim) or dim not in (2, 3):
        raise ValueError(f"expected square 2x2 or 3x3 matrix, got shape {m.shape}")
    scale = max(np.max(np.abs(m)), 1.0e-300)
    if np.max(np.abs(m - m.T)) > SYM_TOL * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    return np.array([m[i, j] for i, j in _pair_slots(dim)])


def voigt_to_sym(v: np.ndarray) -> np.ndarray:
    """Symmetric matrix from its Voigt vector (inverse of sym_to_voigt)."""
    v = np.asarray(v)
    n = v.shape[0]
    dim = {3: 2, 6: 3}.get(n)
    if dim is None:
        raise ValueError(f"Voigt vector must have length 3 or 6, got {n}")
    m = np.zeros((dim, dim), dtype=v.dtype)
    for k, (i, j) in enumerate(_pair_slots(dim)):
        m[i, j] = v[k]
        m[j, i] = v[k]
    return m


def d_dagger(dim: int = 3) -> np.ndarray:
    """Diagonal scaling matrix with 1 on normal slots and 2 on shear slots."""
    nv = voigt_len(dim)
    d = np.ones(nv)
    d[dim:] = 2.0
    return np.diag(d)


def contract(a: np.ndarray, b: np.ndarray) -> complex:
    """Double contraction a : b of two symmetric matrices.

    Computed in Voigt form as a_vec . D† b_vec; equals the entrywise
    double sum over tensor indices.
    """
    av = sym_to_voigt(a)
    bv = sym_to_voigt(b)
    dim = np.asarray(a).shape[0]
    w = np.ones(len(av))
    w[dim:] = 2.0
    return (av * w * bv).sum()


def apply_stiffness(c_voigt: np.ndarray, chi: np.ndarray, dagger: bool = False) -> np.ndarray:
    """Voigt image of the tensor product C chi for symmetric chi.

    Returns C̄ D† chi_vec; with ``dagger=True`` returns D† C̄ D† chi_vec
    (the traction-ready scaling of the same product).
    """
    c_voigt = np.asarray(c_voigt)
    chi = np.asarray(chi)
    nv = c_voigt.shape[0]
    dim = {3: 2, 6: 3}[nv]
    d = np.ones(nv)
    d[dim:] = 2.0
    out = c_voigt @ (d * chi)
    if dagger:
        out = d * out
    return out


def _elementary_a(dim: int) -> np.ndarray:
    """Stack of elementary matrices A_I, shape (dim, dim, nv)."""
    nv = voigt_len(dim)
    slots = _pair_slots(dim)
    mats = np.zeros((dim, dim, nv))
    for axis in range(dim):
        for k, (i, j) in enumerate(slots):
            if i == j == axis:
                mats[axis, axis, k] = 1.0
            elif i == axis:
                mats[axis, j, k] = 0.5
            elif j == axis:
                mats[axis, i, k] = 0.5
    return mats


_A_ELEM = {2: _elementary_a(2), 3: _elementary_a(3)}


def a_matrix(xi: np.ndarray) -> np.ndarray:
    """A(xi) = sum_I xi_I A_I, mapping Voigt vectors to dim-vectors.

    Shape (3, 6) in 3D and (2, 3) in 2D.
    """
    xi = np.asarray(xi)
    dim = xi.shape[0]
    if dim not in (2, 3):
        raise ValueError(f"direction must have 2 or 3 components, got {dim}")
    return np.tensordot(xi, _A_ELEM[dim], axes=(0, 0))


def a_dagger(xi: np.ndarray) -> np.ndarray:
    """A†(xi) = A(xi) D†; satisfies A†(nu) sigma_vec = sigma . nu."""
    xi = np.asarray(xi)
    dim = xi.shape[0]
    nv = voigt_len(dim)
    d = np.ones(nv)
    d[dim:] = 2.0
    return a_matrix(xi) * d


def a_dagger_elementary(dim: int) -> np.ndarray:
    """Stack of A†_I = A_I D†, shape (dim, dim, nv); constants reused by assembly."""
    nv = voigt_len(dim)
    d = np.ones(nv)
    d[dim:] = 2.0
    return _A_ELEM[dim] * d


def voigt_to_tensor4(c_voigt: np.ndarray) -> np.ndarray:
    """Expand a Voigt stiffness/compliance matrix to the full rank-4 tensor."""
    c_voigt = np.asarray(c_voigt)
    nv = c_voigt.shape[0]
    dim = {3: 2, 6: 3}[nv]
    slots = _pair_slots(dim)
    code = np.zeros((dim, dim), dtype=int)
    for k, (i, j) in enumerate(slots):
        code[i, j] = k
        code[j, i] = k
    t = np.empty((dim,) * 4, dtype=c_voigt.dtype)
    for i in range(dim):
        for j in range(dim):
            for k in range(dim):
                for l in range(dim):
                    t[i, j, k, l] = c_voigt[code[i, j], code[k, l]]
    return t


def tensor4_to_voigt(t: np.ndarray) -> np.ndarray:
    """Collapse a rank-4 tensor with elastic symmetries to Voigt form."""
    t = np.asarray(t)
    dim = t.shape[0]
    slots = _pair_slots(dim)
    nv = len(slots)
    c = np.empty((nv, nv), dtype=t.dtype)
    for a, (i, j) in enumerate(slots):
        for b, (k, l) in enumerate(slots):
            c[a, b] = t[i, j, k, l]
    return c
