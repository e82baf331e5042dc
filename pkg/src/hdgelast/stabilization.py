"""Stabilization matrices for the numerical traction.

Three families are supported, each scaled by a complex factor tau and the
angular frequency omega:

    identity_real:  +/- omega tau Id
    identity_imag:  +/- i omega tau Id
    kc:             - i omega tau Gamma(nu)
    godunov:        - i omega tau M_Godunov(nu)

M_Godunov shares the eigenvectors of the Kelvin-Christoffel matrix and has
the impedances rho*c_alpha as eigenvalues.  The canonical runtime path is
the spectral form, which covers 2D and coincident speeds; the closed forms
are kept as fast paths and cross-validation targets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, InputError
from .material import Wavespeeds, kc_matrix
from .voigt import a_matrix

FAMILIES = ("identity_real", "identity_imag", "kc", "godunov")

# speeds closer than this (relative to c_qP) are treated as coincident
DISTINCT_RTOL = 1e-8


@dataclass
class StabilizationSpec:
    """Choice of stabilization family, sign and scaling.

    tau may be a number or the string "auto", which resolves to 1 for
    godunov, rho*c_qS2 for identity_imag and 1/c_qP for kc (evaluated
    pointwise from the face-side material).
    """

    family: str = "godunov"
    sign: str = "-"
    tau: complex | str = "auto"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown stabilization family {self.family!r}")
        if self.sign not in ("+", "-"):
            raise ConfigError(f"sign must be '+' or '-', got {self.sign!r}")
        if self.family in ("kc", "godunov") and self.sign != "-":
            raise ConfigError(f"family {self.family!r} only supports sign '-'")
        if self.tau != "auto":
            if self.tau == 0:
                raise ConfigError("tau must be nonzero")

    def label(self) -> str:
        tau = self.tau if self.tau == "auto" else f"{complex(self.tau):g}"
        return f"{self.family}{self.sign}[{tau}]"


def godunov_iso(rho: float, cp: float, cs: float, nu: np.ndarray) -> np.ndarray:
    """Isotropic hybridized Godunov matrix rho (cs Id + (cp - cs) nu nu^t)."""
    if not cp > cs > 0.0:
        raise InputError(f"need cp > cs > 0, got cp={cp}, cs={cs}")
    nu = np.asarray(nu, dtype=float)
    d = len(nu)
    return rho * (cs * np.eye(d) + (cp - cs) * np.outer(nu, nu))


def speeds_distinct(speeds: np.ndarray, rtol: float = DISTINCT_RTOL) -> bool:
    """True when consecutive sorted speeds are separated beyond the gate."""
    s = np.sort(np.asarray(speeds, dtype=float))[::-1]
    gaps = -np.diff(s)
    return bool(np.all(gaps > rtol * s[0]))


def godunov_spectral(rho: float, gamma: np.ndarray,
                     speeds: Wavespeeds | None = None) -> np.ndarray:
    """Spectral form M = rho sum_a c_a w_a w_a^t from the KC eigenpairs.

    Valid in any dimension and for repeated speeds; provably equal to the
    closed forms on their domains.
    """
    gamma = np.asarray(gamma, dtype=float)
    if speeds is not None:
        c = speeds.speeds
        v = speeds.vectors
    else:
        w, v = np.linalg.eigh(gamma)
        c = np.sqrt(w[::-1] / rho)
        v = v[:, ::-1]
    return rho * np.einsum("k,ik,jk->ij", c, v, v)


def godunov_aniso(rho: float, gamma: np.ndarray, speeds: Wavespeeds) -> np.ndarray:
    """Closed-form anisotropic Godunov matrix for three distinct speeds.

    M = rho (c1 + c2 + cP) (Id + gamma_c (Gamma/rho + p2 Id)^-1) with
    p2 = c1 c2 + c1 cP + c2 cP and gamma_c = c1 c2 cP / (c1+c2+cP) - p2.
    Falls back to the spectral form when the speeds are nearly coincident.
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape[0] != 3:
        return godunov_spectral(rho, gamma, speeds)
    cqp, cs1, cs2 = speeds.c_qp, speeds.c_qs1, speeds.c_qs2
    if not speeds_distinct(speeds.speeds):
        return godunov_spectral(rho, gamma, speeds)
    sigma = cs1 + cs2 + cqp
    p2 = cs1 * cs2 + cs1 * cqp + cs2 * cqp
    gamma_c = cs1 * cs2 * cqp / sigma - p2
    core = np.linalg.inv(gamma / rho + p2 * np.eye(3))
    return rho * sigma * (np.eye(3) + gamma_c * core)


def godunov_matrix(c_voigt: np.ndarray, rho: float, nu: np.ndarray) -> np.ndarray:
    """Godunov matrix of a material in direction nu (spectral runtime path)."""
    gamma = kc_matrix(c_voigt, nu)
    return godunov_spectral(rho, gamma)


# ---------------------------------------------------------------------------
# Batched helpers used by the assembly loops


def kc_matrix_batch(cdag: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """Gamma(nu) for a stack of dagger-scaled stiffness matrices (n,nv,nv)."""
    a = a_matrix(np.asarray(nu, dtype=float))
    return np.einsum("ab,nbc,dc->nad", a, cdag, a)


def godunov_spectral_batch(rho: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Spectral Godunov matrices for stacks of (rho, Gamma)."""
    w, v = np.linalg.eigh(gamma)
    c = np.sqrt(np.maximum(w, 0.0) / rho[:, None])
    return rho[:, None, None] * np.einsum("nk,nik,njk->nij", c, v, v)


def stabilization_matrix_batch(spec: StabilizationSpec, omega: float,
                               rho: np.ndarray, cdag: np.ndarray,
                               nu: np.ndarray) -> np.ndarray:
    """Complex stabilization matrices at a batch of face points.

    rho and cdag are the face-side (owning element) values; nu is the
    outward unit normal shared by the batch.
    """
    rho = np.asarray(rho, dtype=float)
    n = len(rho)
    d = len(nu)
    sgn = 1.0 if spec.sign == "+" else -1.0
    fam = spec.family

    need_speeds = spec.tau == "auto" or fam in ("kc", "godunov")
    gamma = kc_matrix_batch(cdag, nu) if (fam in ("kc", "godunov") or need_speeds) else None
    if need_speeds:
        w = np.linalg.eigvalsh(gamma)
        cqp = np.sqrt(w[:, -1] / rho)
        cqs2 = np.sqrt(np.maximum(w[:, 0], 0.0) / rho)

    if spec.tau == "auto":
        if fam == "godunov":
            tau = np.ones(n)
        elif fam == "identity_imag":
            tau = rho * cqs2
        elif fam == "kc":
            tau = 1.0 / cqp
        else:
            raise ConfigError("tau='auto' is not defined for identity_real")
    else:
        tau = np.full(n, complex(spec.tau))

    eye = np.broadcast_to(np.eye(d), (n, d, d))
    if fam == "identity_real":
        return (sgn * omega * tau)[:, None, None] * eye
    if fam == "identity_imag":
        return (sgn * 1j * omega * tau)[:, None, None] * eye
    if fam == "kc":
        return (-1j * omega * tau)[:, None, None] * gamma
    if fam == "godunov":
        m = godunov_spectral_batch(rho, gamma)
        return (-1j * omega * tau)[:, None, None] * m
    raise ConfigError(f"unknown family {fam!r}")


def stabilization_matrix(spec: StabilizationSpec, rho: float,
                         c_voigt: np.ndarray, nu: np.ndarray,
                         omega: float) -> np.ndarray:
    """Single-point stabilization matrix (see stabilization_matrix_batch)."""
    nu = np.asarray(nu, dtype=float)
    if abs(np.linalg.norm(nu) - 1.0) > 1e-12:
        raise InputError("normal must be a unit vector")
    c_voigt = np.asarray(c_voigt, dtype=float)
    dim = {3: 2, 6: 3}[c_voigt.shape[0]]
    d = np.ones(c_voigt.shape[0])
    d[dim:] = 2.0
    cdag = (c_voigt * d[:, None] * d[None, :])[None]
    return stabilization_matrix_batch(spec, omega, np.array([rho]), cdag, nu)[0]
