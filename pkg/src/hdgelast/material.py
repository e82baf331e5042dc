"""Stiffness/compliance construction, Kelvin-Christoffel algebra and
heterogeneous material fields.

Stiffness and compliance matrices are stored in plain (tensor) Voigt form;
the dagger scaling is applied explicitly where operations need it.  Units
are SI throughout: Pa for moduli, kg/m^3 for density, m/s for speeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .basis import LagrangeSimplex
from .exceptions import InputError, ParameterError
from .voigt import a_matrix, d_dagger, tensor4_to_voigt, voigt_len, voigt_to_tensor4

UNIT_TOL = 1e-12


def _dagger_sandwich(c: np.ndarray) -> np.ndarray:
    dim = {3: 2, 6: 3}[c.shape[0]]
    d = np.ones(c.shape[0])
    d[dim:] = 2.0
    return c * d[:, None] * d[None, :]


def assert_spd(c_voigt: np.ndarray, what: str = "stiffness") -> None:
    """Require the dagger-scaled quadratic form of a Voigt matrix to be SPD."""
    w = np.linalg.eigvalsh(_dagger_sandwich(np.asarray(c_voigt, dtype=float)))
    if w.min() <= 0.0:
        raise ParameterError(f"{what} matrix is not positive definite "
                             f"(min eigenvalue {w.min():.3e})")


def iso_stiffness(lam: float, mu: float, dim: int = 3) -> np.ndarray:
    """Isotropic stiffness in Voigt form from the Lame parameters."""
    if mu <= 0.0:
        raise ParameterError(f"shear modulus must be positive, got {mu}")
    if dim == 3 and lam + 2.0 * mu / 3.0 <= 0.0:
        raise ParameterError("bulk modulus lambda + 2mu/3 must be positive")
    if dim == 2 and lam + mu <= 0.0:
        raise ParameterError("2D bulk modulus lambda + mu must be positive")
    nv = voigt_len(dim)
    c = np.zeros((nv, nv))
    c[:dim, :dim] = lam
    c[np.arange(dim), np.arange(dim)] = lam + 2.0 * mu
    c[np.arange(dim, nv), np.arange(dim, nv)] = mu
    return c


def iso_compliance(lam: float, mu: float, dim: int = 3) -> np.ndarray:
    """Isotropic compliance S̄ = (D† C̄ D†)^-1 in Voigt form.

    In 3D this is the closed form with Young modulus
    E = (3 lam + 2 mu) mu / (lam + mu), Poisson ratio lam / (2 (lam + mu))
    and 1/(4 mu) on the shear slots.
    """
    if dim == 2:
        return compliance_from_stiffness(iso_stiffness(lam, mu, dim=2))
    e_mod = (3.0 * lam + 2.0 * mu) * mu / (lam + mu)
    nu_p = lam / (2.0 * (lam + mu))
    s = np.zeros((6, 6))
    s[:3, :3] = -nu_p / e_mod
    s[np.arange(3), np.arange(3)] = 1.0 / e_mod
    s[np.arange(3, 6), np.arange(3, 6)] = 1.0 / (4.0 * mu)
    return s


def vti_stiffness(c11: float, c33: float, c44: float, c66: float | None,
                  c13: float, dim: int = 3) -> np.ndarray:
    """Transversely isotropic stiffness (symmetry axis z) in Voigt form.

    3D fills the five-coefficient pattern with C12 = C11 - 2 C66, C22 = C11,
    C55 = C44, C23 = C13.  The 2D reduction (x-z plane strain) drops C66.
    """
    if dim == 2:
        c = np.array([[c11, c13, 0.0], [c13, c33, 0.0], [0.0, 0.0, c44]])
    else:
        if c66 is None:
            raise ParameterError("C66 is required in 3D")
        c12 = c11 - 2.0 * c66
        c = np.array(
            [
                [c11, c12, c13, 0.0, 0.0, 0.0],
                [c12, c11, c13, 0.0, 0.0, 0.0],
                [c13, c13, c33, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, c44, 0.0, 0.0],
                [0.0, 0.0, 0.0, 0.0, c44, 0.0],
                [0.0, 0.0, 0.0, 0.0, 0.0, c66],
            ]
        )
    assert_spd(c, "VTI stiffness")
    return c


def thomsen_to_vti(vp0: float, vs0: float, rho: float, epsilon: float,
                   delta: float, gamma_t: float = 0.0, dim: int = 3) -> np.ndarray:
    """VTI stiffness from Thomsen parameters.

    C33 = rho vp0^2, C44 = rho vs0^2, C11 = C33 (1 + 2 eps),
    C66 = C44 (1 + 2 gamma), C13 = sqrt(2 C33 (C33-C44) delta + (C33-C44)^2) - C44.
    """
    if not vp0 > vs0 > 0.0:
        raise ParameterError(f"need vp0 > vs0 > 0, got vp0={vp0}, vs0={vs0}")
    c33 = rho * vp0 ** 2
    c44 = rho * vs0 ** 2
    c11 = c33 * (1.0 + 2.0 * epsilon)
    c66 = c44 * (1.0 + 2.0 * gamma_t)
    radicand = 2.0 * c33 * (c33 - c44) * delta + (c33 - c44) ** 2
    if radicand < 0.0:
        raise ParameterError(f"inadmissible delta={delta}: negative C13 radicand")
    c13 = np.sqrt(radicand) - c44
    return vti_stiffness(c11, c33, c44, c66 if dim == 3 else None, c13, dim=dim)


def rotation_matrix(theta: float, dim: int = 3) -> np.ndarray:
    """Rotation by theta in the x-z plane (about the y axis in 3D)."""
    ct, st = np.cos(theta), np.sin(theta)
    if dim == 2:
        return np.array([[ct, st], [-st, ct]])
    return np.array([[ct, 0.0, st], [0.0, 1.0, 0.0], [-st, 0.0, ct]])


def rotate_stiffness(c_voigt: np.ndarray, theta: float) -> np.ndarray:
    """Bond-rotate a stiffness matrix by theta in the x-z plane.

    Implemented through the full rank-4 tensor transform, which is
    the Bond transformation expressed on tensor components.
    """
    c_voigt = np.asarray(c_voigt, dtype=float)
    dim = {3: 2, 6: 3}[c_voigt.shape[0]]
    r = rotation_matrix(theta, dim)
    t = voigt_to_tensor4(c_voigt)
    t_rot = np.einsum("ia,jb,kc,ld,abcd->ijkl", r, r, r, r, t)
    return tensor4_to_voigt(t_rot)


def compliance_from_stiffness(c_voigt: np.ndarray) -> np.ndarray:
    """S̄ = (D† C̄ D†)^-1 through a symmetric positive definite solve."""
    cd = _dagger_sandwich(np.asarray(c_voigt, dtype=float))
    try:
        ch = np.linalg.cholesky(cd)
    except np.linalg.LinAlgError:
        raise ParameterError("stiffness is not SPD; cannot form compliance") from None
    inv = np.linalg.inv(ch)
    s = inv.T @ inv
    return 0.5 * (s + s.T)


def stiffness_from_compliance(s_voigt: np.ndarray) -> np.ndarray:
    """C̄ = (D† S̄ D†)^-1, inverse companion of compliance_from_stiffness."""
    sd = _dagger_sandwich(np.asarray(s_voigt, dtype=float))
    try:
        ch = np.linalg.cholesky(sd)
    except np.linalg.LinAlgError:
        raise ParameterError("compliance is not SPD; cannot form stiffness") from None
    inv = np.linalg.inv(ch)
    c = inv.T @ inv
    return 0.5 * (c + c.T)


def kc_matrix(c_voigt: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """Kelvin-Christoffel matrix A(nu) D† C̄ D† A(nu)^t for a unit direction."""
    nu = np.asarray(nu, dtype=float)
    if abs(np.linalg.norm(nu) - 1.0) > UNIT_TOL:
        raise InputError(f"direction must be unit, |nu| = {np.linalg.norm(nu)}")
    a = a_matrix(nu)
    return a @ _dagger_sandwich(np.asarray(c_voigt, dtype=float)) @ a.T


@dataclass
class Wavespeeds:
    """Eigenstructure of the Kelvin-Christoffel matrix in one direction.

    speeds are sorted descending: c_qP >= c_qS1 >= c_qS2 (2D: c_qP >= c_qS);
    vectors holds the matching orthonormal eigenvectors as columns.
    """

    rho: float
    speeds: np.ndarray
    vectors: np.ndarray

    @property
    def c_qp(self) -> float:
        return float(self.speeds[0])

    @property
    def c_qs1(self) -> float:
        return float(self.speeds[1])

    @property
    def c_qs2(self) -> float:
        return float(self.speeds[-1])


def wavespeeds(c_voigt: np.ndarray, rho: float, nu: np.ndarray) -> Wavespeeds:
    """Phase speeds and polarizations in direction nu from the KC eigenproblem."""
    gam = kc_matrix(c_voigt, nu)
    w, v = np.linalg.eigh(gam)
    if w.min() <= 0.0:
        raise ParameterError("Kelvin-Christoffel matrix is not positive definite")
    order = np.argsort(w)[::-1]
    return Wavespeeds(rho=float(rho), speeds=np.sqrt(w[order] / rho),
                      vectors=v[:, order])


# ---------------------------------------------------------------------------
# Material fields


class HomogeneousMaterial:
    """Spatially constant material: one stiffness/compliance pair + density."""

    is_homogeneous = True

    def __init__(self, c_voigt: np.ndarray, rho: float, dim: int | None = None):
        self.c_voigt = np.asarray(c_voigt, dtype=float)
        self.dim = {3: 2, 6: 3}[self.c_voigt.shape[0]] if dim is None else dim
        if rho <= 0.0:
            raise ParameterError(f"density must be positive, got {rho}")
        assert_spd(self.c_voigt)
        self.rho0 = float(rho)
        self.s_voigt = compliance_from_stiffness(self.c_voigt)

    def eval(self, cell: int, ref_pts: np.ndarray, phys_pts: np.ndarray):
        n = np.asarray(ref_pts).reshape(-1, self.dim).shape[0]
        rho = np.full(n, self.rho0)
        sbar = np.broadcast_to(self.s_voigt, (n,) + self.s_voigt.shape).copy()
        return rho, sbar


class PolynomialMaterialField:
    """Per-cell nodal polynomial representation of density and compliance.

    Coefficients live on the Lagrange nodes of a declared order q >= 0 on
    each cell; q = 0 stores the cell-centroid constant.  Fields may be
    discontinuous across faces.
    """

    is_homogeneous = False

    def __init__(self, dim: int, order: int, rho_coeff: np.ndarray,
                 s_coeff: np.ndarray):
        self.dim = dim
        self.order = order
        self.interp = LagrangeSimplex(order, dim)
        nv = voigt_len(dim)
        self.rho_coeff = np.asarray(rho_coeff, dtype=float)
        self.s_coeff = np.asarray(s_coeff, dtype=float)
        if self.rho_coeff.shape[1] != self.interp.num:
            raise InputError("rho coefficient array does not match node count")
        if self.s_coeff.shape[1:] != (self.interp.num, nv, nv):
            raise InputError("compliance coefficient array has wrong shape")

    @classmethod
    def from_functions(cls, mesh, order: int, rho_fn, compliance_fn):
        """Sample callables rho_fn(x) and compliance_fn(x) -> S̄ at cell nodes."""
        interp = LagrangeSimplex(order, mesh.dim)
        nv = voigt_len(mesh.dim)
        ncells = len(mesh.elements)
        rho_coeff = np.empty((ncells, interp.num))
        s_coeff = np.empty((ncells, interp.num, nv, nv))
        for e in range(ncells):
            verts = mesh.vertices[mesh.elements[e]]
            lam0 = 1.0 - interp.nodes.sum(axis=1)
            phys = lam0[:, None] * verts[0] + interp.nodes @ verts[1:]
            for i, x in enumerate(phys):
                rho_coeff[e, i] = rho_fn(x)
                s_coeff[e, i] = compliance_fn(x)
        return cls(mesh.dim, order, rho_coeff, s_coeff)

    def eval(self, cell: int, ref_pts: np.ndarray, phys_pts: np.ndarray):
        """Interpolated (rho, S̄) at reference points of one cell."""
        ref_pts = np.asarray(ref_pts, dtype=float).reshape(-1, self.dim)
        if ref_pts.size and (ref_pts.min() < -1e-10
                             or ref_pts.sum(axis=1).max() > 1.0 + 1e-10):
            raise InputError("reference point outside the unit simplex")
        vals = self.interp.eval(ref_pts)
        rho = vals @ self.rho_coeff[cell]
        sbar = np.einsum("pn,nab->pab", vals, self.s_coeff[cell])
        return rho, sbar


# ---------------------------------------------------------------------------
# Material definition files


def _radial_interpolant(table) -> CubicSpline:
    r = np.asarray(table["r"], dtype=float)
    v = np.asarray(table["v"], dtype=float)
    if r.ndim != 1 or r.shape != v.shape or len(r) < 2:
        raise ParameterError("radial profile needs matching 1D r/v arrays")
    if not np.all(np.diff(r) > 0.0):
        raise ParameterError("radial profile radii must be strictly increasing")
    return CubicSpline(r, v)


def _tti_stiffness_pointwise(c_p: float, rho: float, cs_over_cp: float,
                             epsilon: float, delta: float, theta: float,
                             dim: int) -> np.ndarray:
    vs0 = cs_over_cp * c_p
    c = thomsen_to_vti(c_p, vs0, rho, epsilon, delta, 0.0, dim=dim)
    if theta != 0.0:
        c = rotate_stiffness(c, theta)
    return c


def material_from_config(cfg: dict, mesh=None):
    """Build a material from its JSON-style definition.

    Constant kinds (iso, vti, tti) return a HomogeneousMaterial.  Radial
    kinds (iso_radial, tti_radial) interpolate profile tables with cubic
    splines onto per-cell Lagrange nodes of order `field_order` and need a
    mesh.
    """
    kind = cfg.get("kind")
    dim = int(cfg.get("dim", 3))
    if kind == "iso":
        c = iso_stiffness(cfg["lambda"], cfg["mu"], dim=dim)
        return HomogeneousMaterial(c, cfg["rho"], dim=dim)
    if kind in ("vti", "tti"):
        if "thomsen" in cfg:
            t = cfg["thomsen"]
            c = thomsen_to_vti(t["vp0"], t["vs0"], cfg["rho"], t["epsilon"],
                               t["delta"], t.get("gamma", 0.0), dim=dim)
        else:
            c = vti_stiffness(cfg["c11"], cfg["c33"], cfg["c44"],
                              cfg.get("c66"), cfg["c13"], dim=dim)
        if kind == "tti":
            c = rotate_stiffness(c, np.deg2rad(cfg.get("theta_deg", 0.0)))
        return HomogeneousMaterial(c, cfg["rho"], dim=dim)
    if kind in ("iso_radial", "tti_radial"):
        if mesh is None:
            raise ParameterError(f"material kind {kind!r} needs a mesh")
        prof = cfg["profiles"]
        cp_spl = _radial_interpolant(prof["cp"])
        rho_spl = _radial_interpolant(prof["rho"])
        if "cs" in prof:
            cs_spl = _radial_interpolant(prof["cs"])
            cs_fn = lambda r: float(cs_spl(r))
        else:
            ratio = float(prof["cs_over_cp"])
            cs_fn = lambda r: ratio * float(cp_spl(r))
        order = int(cfg.get("field_order", 2))

        def rho_fn(x):
            return float(rho_spl(np.linalg.norm(x)))

        if kind == "iso_radial":
            def compliance_fn(x):
                r = np.linalg.norm(x)
                cp, cs, rho = float(cp_spl(r)), cs_fn(r), float(rho_spl(r))
                mu = rho * cs ** 2
                lam = rho * cp ** 2 - 2.0 * mu
                return compliance_from_stiffness(iso_stiffness(lam, mu, dim=mesh.dim))
        else:
            th = cfg["thomsen_radial"]
            eps, delta = float(th["epsilon"]), float(th["delta"])
            theta = np.deg2rad(cfg.get("theta_deg", 0.0))
            ratio = float(prof.get("cs_over_cp", 0.7))

            def compliance_fn(x):
                r = np.linalg.norm(x)
                cp, rho = float(cp_spl(r)), float(rho_spl(r))
                c = _tti_stiffness_pointwise(cp, rho, ratio, eps, delta, theta,
                                             mesh.dim)
                return compliance_from_stiffness(c)

        return PolynomialMaterialField.from_functions(mesh, order, rho_fn,
                                                      compliance_fn)
    raise ParameterError(f"unknown material kind {kind!r}")
