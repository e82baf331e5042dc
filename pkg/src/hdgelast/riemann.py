"""First-order flux operator and a brute-force Riemann-problem oracle.

The state vector is q = (strain in Voigt form, rho * velocity), of length
9 in 3D and 5 in 2D.  The interface solve stacks every characteristic jump
relation plus the stationary flux-continuity relation into one linear
least-squares system and checks all residuals, which makes it a trustworthy
independent oracle for the closed-form hybridized Godunov matrices.

This module is test/verification scaffolding: nothing here runs inside the
PDE solve path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import OracleError
from .material import Wavespeeds, wavespeeds
from .stabilization import speeds_distinct
from .voigt import a_matrix, voigt_len

RH_RTOL = 1e-10


def _cdag(c_voigt: np.ndarray) -> np.ndarray:
    c_voigt = np.asarray(c_voigt, dtype=float)
    dim = {3: 2, 6: 3}[c_voigt.shape[0]]
    d = np.ones(c_voigt.shape[0])
    d[dim:] = 2.0
    return c_voigt * d[:, None] * d[None, :]


def flux_operator(c_voigt: np.ndarray, rho: float, nu: np.ndarray) -> np.ndarray:
    """Flux matrix of the first-order system in direction nu.

    Block structure (state (eps_vec, rho v)):

        B(nu) = - [ 0                A^t(nu)/rho ]
                  [ A(nu) D† C̄ D†   0           ]

    Its eigenvalues are {+-c_alpha} plus a zero block of dimension 3 (2D: 1),
    and the last dim rows of B(nu) q equal -sigma.nu.
    """
    nu = np.asarray(nu, dtype=float)
    dim = len(nu)
    nv = voigt_len(dim)
    n = nv + dim
    a = a_matrix(nu)
    b = np.zeros((n, n))
    b[:nv, nv:] = -a.T / rho
    b[nv:, :nv] = -a @ _cdag(c_voigt)
    return b


def state_velocity(q: np.ndarray, rho: float, dim: int) -> np.ndarray:
    nv = voigt_len(dim)
    return np.asarray(q)[nv:] / rho


def state_traction(q: np.ndarray, c_voigt: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """sigma.nu of a state: A(nu) D† C̄ D† eps_vec."""
    nu = np.asarray(nu, dtype=float)
    nv = voigt_len(len(nu))
    return a_matrix(nu) @ _cdag(c_voigt) @ np.asarray(q)[:nv]


@dataclass
class RHStates:
    """All states of the interface Riemann fan, outermost to outermost.

    In 2D the single shear family collapses qa/qb into one intermediate
    state per side and qb_minus / qb_plus are None.
    """

    q_minus: np.ndarray
    qa_minus: np.ndarray
    qb_minus: np.ndarray | None
    qstar_minus: np.ndarray
    qstar_plus: np.ndarray
    qb_plus: np.ndarray | None
    qa_plus: np.ndarray
    q_plus: np.ndarray
    nu: np.ndarray
    mat_minus: tuple
    mat_plus: tuple
    residual: float


def _relations(b_m, b_p, sp_m: Wavespeeds, sp_p: Wavespeeds, dim: int):
    """Jump relations as (speed of the wave, left-state slot, right-state slot).

    Slots index the unknown vector [qa-, (qb-), q*-, q*+, (qb+), qa+]; -1 and
    -2 denote the known data q- and q+.
    """
    if dim == 3:
        # unknown slots: 0 qa-, 1 qb-, 2 q*-, 3 q*+, 4 qb+, 5 qa+
        return [
            (b_m, -sp_m.c_qp, 0, "data_m"),     # qa- - q-
            (b_m, -sp_m.c_qs1, 1, 0),           # qb- - qa-
            (b_m, -sp_m.c_qs2, 2, 1),           # q*- - qb-
            ("contact", None, 3, 2),            # B- q*- = B+ q*+
            (b_p, sp_p.c_qs2, 4, 3),            # qb+ - q*+
            (b_p, sp_p.c_qs1, 5, 4),            # qa+ - qb+
            (b_p, sp_p.c_qp, "data_p", 5),      # q+ - qa+
        ], 6
    # 2D slots: 0 qa-, 1 q*-, 2 q*+, 3 qa+
    return [
        (b_m, -sp_m.c_qp, 0, "data_m"),
        (b_m, -sp_m.c_qs2, 1, 0),
        ("contact", None, 2, 1),
        (b_p, sp_p.c_qs2, 3, 2),
        (b_p, sp_p.c_qp, "data_p", 3),
    ], 4


def solve_rh(q_minus: np.ndarray, q_plus: np.ndarray, mat_minus: tuple,
             mat_plus: tuple, nu: np.ndarray) -> RHStates:
    """Solve the interface Riemann problem for the intermediate states.

    mat_minus / mat_plus are (rho, stiffness_voigt) pairs; nu points from
    the minus side to the plus side.  Every characteristic relation is
    checked to a relative residual of 1e-10; failure raises OracleError.
    """
    nu = np.asarray(nu, dtype=float)
    dim = len(nu)
    n = voigt_len(dim) + dim
    q_minus = np.asarray(q_minus, dtype=complex)
    q_plus = np.asarray(q_plus, dtype=complex)

    rho_m, c_m = mat_minus
    rho_p, c_p = mat_plus
    sp_m = wavespeeds(c_m, rho_m, nu)
    sp_p = wavespeeds(c_p, rho_p, nu)
    for side, sp in (("minus", sp_m), ("plus", sp_p)):
        if not speeds_distinct(sp.speeds):
            raise OracleError(f"{side}-side speeds are (nearly) coincident; "
                              "the characteristic fan is singular")

    b_m = flux_operator(c_m, rho_m, nu)
    b_p = flux_operator(c_p, rho_p, nu)
    relations, n_unknown = _relations(b_m, b_p, sp_m, sp_p, dim)

    data = {"data_m": q_minus, "data_p": q_plus}
    rows = []
    rhs = []
    eye = np.eye(n)
    for b, s, left, right in relations:
        block = np.zeros((n, n_unknown * n), dtype=complex)
        r = np.zeros(n, dtype=complex)
        if isinstance(b, str):
            block[:, left * n:(left + 1) * n] = b_p
            block[:, right * n:(right + 1) * n] = -b_m
        else:
            op = b - s * eye
            for slot, sign in ((left, 1.0), (right, -1.0)):
                if isinstance(slot, str):
                    r -= sign * (op @ data[slot])
                else:
                    block[:, slot * n:(slot + 1) * n] += sign * op
        rows.append(block)
        rhs.append(r)
    a_sys = np.vstack(rows)
    b_sys = np.concatenate(rhs)
    sol, *_ = np.linalg.lstsq(a_sys, b_sys, rcond=None)

    scale = np.linalg.norm(q_minus) + np.linalg.norm(q_plus)
    scale = max(scale, 1e-300)
    residual = np.linalg.norm(a_sys @ sol - b_sys) / scale
    if residual > RH_RTOL:
        raise OracleError(f"Riemann solve residual {residual:.3e} exceeds "
                          f"{RH_RTOL:.0e}")

    states = [sol[i * n:(i + 1) * n] for i in range(n_unknown)]
    if dim == 3:
        qa_m, qb_m, qs_m, qs_p, qb_p, qa_p = states
    else:
        qa_m, qs_m, qs_p, qa_p = states
        qb_m = qb_p = None
    return RHStates(q_minus, qa_m, qb_m, qs_m, qs_p, qb_p, qa_p, q_plus,
                    nu, mat_minus, mat_plus, residual)


def oracle_godunov_matrix(mat: tuple, nu: np.ndarray, seed: int = 0) -> np.ndarray:
    """Extract the minus-side Godunov matrix numerically from Riemann solves.

    Perturbs the plus state, collects (v*- - v-, traction*- - traction-)
    pairs, and solves for the matrix relating them.
    """
    nu = np.asarray(nu, dtype=float)
    dim = len(nu)
    n = voigt_len(dim) + dim
    rho, c_voigt = mat
    rng = np.random.default_rng(seed)

    q_minus = np.zeros(n)
    dv = []
    dt = []
    for _ in range(dim + 3):
        q_plus = rng.standard_normal(n)
        st = solve_rh(q_minus, q_plus, mat, mat, nu)
        dv.append(state_velocity(st.qstar_minus, rho, dim)
                  - state_velocity(st.q_minus, rho, dim))
        dt.append(state_traction(st.qstar_minus, c_voigt, nu)
                  - state_traction(st.q_minus, c_voigt, nu))
    v_mat = np.array(dv).T
    t_mat = np.array(dt).T
    m, *_ = np.linalg.lstsq(v_mat.T, t_mat.T, rcond=None)
    m = m.T
    rel = np.linalg.norm(m @ v_mat - t_mat) / max(np.linalg.norm(t_mat), 1e-300)
    if rel > 1e-8:
        raise OracleError(f"traction response is not linear in velocity jump "
                          f"(residual {rel:.3e})")
    return np.real_if_close(m, tol=1e6).real if np.iscomplexobj(m) else m
