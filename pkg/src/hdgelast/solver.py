"""HDG assembly, static condensation, global trace solve and recovery.

Element unknowns are ordered component-major: the displacement components
(dim blocks of m nodal values) followed by the Voigt stress components.
Trace unknowns on a face are ordered the same way (dim blocks of n-hat
values) in the face's canonical frame, so the local-to-global map is a pure
index gather shared by both sides of every interior face.

The problem is solved in two stages: a sparse direct solve for the trace
vector, then embarrassingly parallel element-local back-substitution.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import SimplexBasis
from .exceptions import AssemblyError, SolverError
from .mesh import DIRICHLET, INTERIOR, NEUMANN, ROBIN, FaceMap, Mesh
from .stabilization import (StabilizationSpec, godunov_spectral_batch,
                            kc_matrix_batch, stabilization_matrix_batch)
from .voigt import a_dagger, a_dagger_elementary, voigt_len

GLOBAL_RESIDUAL_TOL = 1e-10
LOCAL_RESIDUAL_TOL = 1e-10
_FACTOR_CACHE_BUDGET = 2_000_000_000  # bytes


@dataclass
class DiracSource:
    """Point force: rhs moments are polarization * basis values at the point."""

    position: np.ndarray
    polarization: np.ndarray


@dataclass
class HDGProblem:
    """Everything needed to assemble one frequency-domain solve."""

    mesh: Mesh
    facemap: FaceMap
    basis: SimplexBasis
    material: object
    stabilization: StabilizationSpec
    omega: float
    dirichlet: object | None = None       # g(x): (npts, dim) complex
    volume_source: object | None = None   # f(x): (npts, dim) complex
    dirac: DiracSource | None = None
    threads: int = 1

    def __post_init__(self):
        self.dim = self.mesh.dim
        self.nv = voigt_len(self.dim)
        self.ncomp = self.dim + self.nv
        self.m = self.basis.num_vol
        self.nh = self.basis.num_face
        self.n_f = self.mesh.n_faces_per_element
        self.n_local = self.ncomp * self.m
        self.n_trace_local = self.dim * self.nh * self.n_f
        self.n_global = self.dim * self.nh * self.facemap.n_faces
        self._adag = a_dagger_elementary(self.dim)
        d = np.ones(self.nv)
        d[self.dim:] = 2.0
        self._dag_outer = np.outer(d, d)
        self._dirac_elem = None
        if self.dirac is not None:
            self._dirac_elem = self._locate_dirac()

    def _locate_dirac(self) -> int:
        y = np.asarray(self.dirac.position, dtype=float)
        for e in range(len(self.mesh)):
            ref = self.mesh.map_to_ref(e, y)[0]
            lam0 = 1.0 - ref.sum()
            if ref.min() >= -1e-12 and lam0 >= -1e-12:
                return e
        raise AssemblyError(f"Dirac source position {y} is outside the mesh")

    def trace_indices(self, e: int) -> np.ndarray:
        """Global trace dofs touched by element e (its n_f faces, in order)."""
        nh, d = self.nh, self.dim
        out = np.empty(self.n_trace_local, dtype=np.int64)
        for l in range(self.n_f):
            k = self.facemap.elem_face[e, l]
            base = d * nh * k
            out[l * d * nh:(l + 1) * d * nh] = np.arange(base, base + d * nh)
        return out

    # -- element-local assembly ---------------------------------------------

    def _face_weights(self, k: int) -> np.ndarray:
        ref_measure = 1.0 if self.dim == 2 else 0.5
        return self.basis.fqw * (self.facemap.face_measure[k] / ref_measure)

    def assemble_local(self, e: int):
        """All local blocks of one element: A, D, B, L, volume and trace sources."""
        mesh, basis, fm = self.mesh, self.basis, self.facemap
        dim, nv, m, nh = self.dim, self.nv, self.m, self.nh
        omega = self.omega

        _, det, inv_jt = mesh.jacobian(e)
        w = basis.qw * abs(det)
        phys = mesh.map_to_phys(e, basis.qp)
        vals = basis.vals_q
        grads = np.einsum("id,pmd->pmi", inv_jt, basis.grads_q)

        rho, sbar = self.material.eval(e, basis.qp, phys)
        if rho.min() <= 0.0:
            p = int(np.argmin(rho))
            raise AssemblyError(f"non-positive density in cell {e} at quadrature "
                                f"point {phys[p]}")
        eigs = np.linalg.eigvalsh(sbar)
        if eigs.min() <= 0.0:
            p = int(np.argmin(eigs.min(axis=1)))
            raise AssemblyError(f"compliance not SPD in cell {e} at quadrature "
                                f"point {phys[p]}")
        sdag = sbar * self._dag_outer

        mu = np.einsum("p,pi,pj->ij", w * rho, vals, vals, optimize=True)
        msig = np.einsum("p,pab,pi,pj->aibj", w, sdag, vals, vals,
                         optimize=True).reshape(nv * m, nv * m)
        sd = np.einsum("p,pi,pjd->dij", w, vals, grads, optimize=True)
        ksig = np.einsum("dIF,dij->IiFj", self._adag, sd).reshape(dim * m, nv * m)
        ku = np.einsum("dJF,dji->FiJj", self._adag, sd).reshape(nv * m, dim * m)

        s_vol = np.zeros((dim, m), dtype=complex)
        if self.volume_source is not None:
            f = np.asarray(self.volume_source(phys), dtype=complex)
            s_vol += np.einsum("p,pI,pi->Ii", w, f, vals)
        if self._dirac_elem == e:
            ref_y = mesh.map_to_ref(e, self.dirac.position)
            phi_y = basis.volume.eval(ref_y)[0]
            pol = np.asarray(self.dirac.polarization, dtype=complex)
            s_vol += pol[:, None] * phi_y[None, :]

        m_partial = np.zeros((dim, m, dim, m), dtype=complex)
        d_cols = []
        b_rows = []
        l_blocks = []
        s_trace = np.zeros((self.n_f, dim, nh), dtype=complex)
        t_face = basis.face_vals_q

        for l in range(self.n_f):
            k = fm.elem_face[e, l]
            tag = fm.face_tag[k]
            nu = fm.normals[e, l]
            wf = self._face_weights(k)
            xf = fm.face_map_to_phys(k, basis.fqp)
            rf = mesh.map_to_ref(e, xf)
            vf = basis.volume.eval(rf)

            rho_f, sbar_f = self.material.eval(e, np.clip(rf, 0.0, 1.0), xf)
            cdag_f = np.linalg.inv(sbar_f)
            tau = stabilization_matrix_batch(self.stabilization, omega,
                                             rho_f, cdag_f, nu)

            m_partial += np.einsum("q,qIJ,qi,qj->IiJj", wf, tau, vf, vf,
                                   optimize=True)
            dm = np.einsum("q,qIJ,qi,qj->IiJj", wf, tau, vf, t_face,
                           optimize=True).reshape(dim * m, dim * nh)
            fmix = np.einsum("q,qi,qj->ij", wf, vf, t_face, optimize=True)
            adnu = a_dagger(nu)
            dc = np.einsum("JF,ij->FiJj", adnu, fmix).reshape(nv * m, dim * nh)
            d_cols.append(np.vstack([-dm, dc.astype(complex)]))

            fmass = np.einsum("q,qi,qj->ij", wf, t_face, t_face)
            if tag == DIRICHLET:
                bu = np.zeros((dim * nh, dim * m), dtype=complex)
                bs = np.zeros((dim * nh, nv * m), dtype=complex)
                lmat = np.einsum("IJ,ij->IiJj", np.eye(dim),
                                 fmass).reshape(dim * nh, dim * nh).astype(complex)
                if self.dirichlet is not None:
                    g = np.asarray(self.dirichlet(xf), dtype=complex)
                    s_trace[l] = np.einsum("q,qI,qj->Ij", wf, g, t_face)
            else:
                bu = np.einsum("q,qIJ,qi,qj->IiJj", wf, tau, t_face, vf,
                               optimize=True).reshape(dim * nh, dim * m)
                bs = np.einsum("IF,ij->IiFj", adnu,
                               fmix.T).reshape(dim * nh, nv * m).astype(complex)
                tau_l = tau
                if tag == ROBIN:
                    gam_f = kc_matrix_batch(cdag_f, nu)
                    z_abc = godunov_spectral_batch(rho_f, gam_f)
                    tau_l = tau + 1j * omega * z_abc
                lmat = np.einsum("q,qIJ,qi,qj->IiJj", wf, tau_l, t_face, t_face,
                                 optimize=True).reshape(dim * nh, dim * nh)
            b_rows.append(np.hstack([-bu, bs]))
            l_blocks.append(lmat)

        a_mat = np.zeros((self.n_local, self.n_local), dtype=complex)
        for i in range(dim):
            a_mat[i * m:(i + 1) * m, i * m:(i + 1) * m] = -omega ** 2 * mu
        a_mat[:dim * m, :dim * m] += m_partial.reshape(dim * m, dim * m)
        a_mat[:dim * m, dim * m:] = -ksig
        a_mat[dim * m:, :dim * m] = -ku
        a_mat[dim * m:, dim * m:] = -msig

        d_mat = np.hstack(d_cols)
        b_mat = np.vstack(b_rows)
        l_mat = sla.block_diag(*l_blocks)
        s_elem = np.concatenate([s_vol.reshape(-1), np.zeros(nv * m)])
        return a_mat, d_mat, b_mat, l_mat, s_elem, s_trace.reshape(-1)

    def condense(self, e: int):
        """K^e = L - B A^-1 D and the condensed rhs, plus the local factors."""
        a_mat, d_mat, b_mat, l_mat, s_elem, s_tr = self.assemble_local(e)
        try:
            lu, piv = sla.lu_factor(a_mat)
        except (ValueError, sla.LinAlgError) as exc:
            raise SolverError(f"local system of element {e} could not be "
                              f"factorized: {exc}") from None
        if not np.all(np.isfinite(lu)) or np.abs(np.diag(lu)).min() == 0.0:
            raise SolverError(f"local system of element {e} is singular")
        aid = sla.lu_solve((lu, piv), d_mat)
        ais = sla.lu_solve((lu, piv), s_elem)
        k_elem = l_mat - b_mat @ aid
        rhs = s_tr - b_mat @ ais
        return k_elem, rhs, (lu, piv, d_mat, s_elem)


@dataclass
class HDGSolution:
    """Solved trace and recovered volume unknowns plus solve diagnostics."""

    problem: HDGProblem
    trace: np.ndarray                 # global trace vector
    u_coeff: np.ndarray               # (n_elements, dim, m) nodal values
    v_coeff: np.ndarray               # (n_elements, nv, m) Voigt stress values
    diagnostics: dict = field(default_factory=dict)

    @property
    def mesh(self) -> Mesh:
        return self.problem.mesh

    def face_trace(self, k: int) -> np.ndarray:
        """Trace coefficients of face k, shape (dim, n_hat)."""
        d, nh = self.problem.dim, self.problem.nh
        return self.trace[d * nh * k:d * nh * (k + 1)].reshape(d, nh)


def assemble_and_condense(problem: HDGProblem, keep_factors: bool):
    """Condense every element; returns global CSR matrix, rhs, local data."""
    n = problem.n_global
    ne = len(problem.mesh)
    results = [None] * ne

    def work(e):
        k_elem, rhs, factors = problem.condense(e)
        return k_elem, rhs, factors if keep_factors else None

    if problem.threads > 1:
        with ThreadPoolExecutor(max_workers=problem.threads) as pool:
            for e, res in enumerate(pool.map(work, range(ne))):
                results[e] = res
    else:
        for e in range(ne):
            results[e] = work(e)

    nt = problem.n_trace_local
    rows = np.empty(ne * nt * nt, dtype=np.int64)
    cols = np.empty_like(rows)
    vals = np.empty(ne * nt * nt, dtype=complex)
    rhs_global = np.zeros(n, dtype=complex)
    factors = [None] * ne
    for e in range(ne):
        k_elem, rhs, fac = results[e]
        idx = problem.trace_indices(e)
        sl = slice(e * nt * nt, (e + 1) * nt * nt)
        rows[sl] = np.repeat(idx, nt)
        cols[sl] = np.tile(idx, nt)
        vals[sl] = k_elem.reshape(-1)
        np.add.at(rhs_global, idx, rhs)
        factors[e] = fac

    # deterministic duplicate reduction: stable sort by (row, col) keeps the
    # element-order of contributions, then segment-sum
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    key_change = np.nonzero(np.diff(rows) | np.diff(cols))[0] + 1
    starts = np.concatenate(([0], key_change))
    summed = np.add.reduceat(vals, starts)
    k_global = sp.csr_matrix((summed, (rows[starts], cols[starts])), shape=(n, n))
    return k_global, rhs_global, factors


def solve_trace(k_global: sp.csr_matrix, rhs: np.ndarray) -> np.ndarray:
    """Sparse LU solve of the condensed global problem with residual check."""
    try:
        lu = spla.splu(k_global.tocsc())
        lam = lu.solve(rhs)
    except (RuntimeError, ValueError) as exc:
        raise SolverError(f"global trace system could not be factorized: {exc}"
                          ) from None
    if not np.all(np.isfinite(lam)):
        raise SolverError("global solve produced non-finite entries "
                          "(ill-conditioned trace system)")
    nrm = np.linalg.norm(rhs)
    residual = np.linalg.norm(k_global @ lam - rhs) / max(nrm, 1e-300)
    if residual > GLOBAL_RESIDUAL_TOL:
        raise SolverError(f"global solve residual {residual:.3e} exceeds "
                          f"{GLOBAL_RESIDUAL_TOL:.0e} (ill-conditioned system)")
    return lam


def solve(problem: HDGProblem, cache_factors: str | bool = "auto") -> HDGSolution:
    """Two-stage HDG solve: global trace problem, then local recovery."""
    if cache_factors == "auto":
        est = len(problem.mesh) * (problem.n_local ** 2) * 16
        cache_factors = est <= _FACTOR_CACHE_BUDGET
    k_global, rhs_global, factors = assemble_and_condense(problem,
                                                          bool(cache_factors))
    lam = solve_trace(k_global, rhs_global)
    nrm = np.linalg.norm(rhs_global)
    residual = np.linalg.norm(k_global @ lam - rhs_global) / max(nrm, 1e-300)

    ne = len(problem.mesh)
    dim, nv, m = problem.dim, problem.nv, problem.m
    u_coeff = np.empty((ne, dim, m), dtype=complex)
    v_coeff = np.empty((ne, nv, m), dtype=complex)
    max_local = 0.0

    for e in range(ne):
        fac = factors[e]
        if fac is None:
            a_mat, d_mat, _, _, s_elem, _ = problem.assemble_local(e)
            lu, piv = sla.lu_factor(a_mat)
        else:
            lu, piv, d_mat, s_elem = fac
            a_mat = None
        lam_e = lam[problem.trace_indices(e)]
        rhs_e = -d_mat @ lam_e + s_elem
        w = sla.lu_solve((lu, piv), rhs_e)
        aw = a_mat @ w if a_mat is not None else _lu_matvec(lu, piv, w)
        res = np.linalg.norm(aw - rhs_e)
        scale = np.linalg.norm(rhs_e)
        max_local = max(max_local, res / max(scale, 1e-300))
        u_coeff[e] = w[:dim * m].reshape(dim, m)
        v_coeff[e] = w[dim * m:].reshape(nv, m)
        factors[e] = None  # release memory as we go

    diag = {
        "global_residual": float(residual),
        "max_local_residual": float(max_local),
        "n_trace_dofs": problem.n_global,
    }
    sol = HDGSolution(problem, lam, u_coeff, v_coeff, diag)
    diag["max_traction_jump"] = traction_jump(sol)
    return sol


def traction_jump(sol: HDGSolution) -> float:
    """Largest projected numerical-traction jump across interior faces,
    relative to the traction magnitude.

    The numerical traction is sigma_h nu - tau (u_h - lambda_h); its moments
    against the trace space vanish by construction, so this measures, from
    the recovered fields directly, how consistently assembly, condensation
    and recovery were carried out.
    """
    pb = sol.problem
    fm, basis, mesh = pb.facemap, pb.basis, pb.mesh
    dim, nh = pb.dim, pb.nh
    t_face = basis.face_vals_q
    worst = 0.0
    scale = 1e-300

    fmass_ref = None
    for k in fm.interior_faces():
        wf = pb._face_weights(k)
        xf = fm.face_map_to_phys(k, basis.fqp)
        lam_f = sol.face_trace(k) @ t_face.T          # (dim, nq)
        jump = np.zeros((dim, len(wf)), dtype=complex)
        for e, l in fm.face_sides[k]:
            nu = fm.normals[e, l]
            rf = mesh.map_to_ref(e, xf)
            vf = basis.volume.eval(rf)                # (nq, m)
            sig = sol.v_coeff[e] @ vf.T               # (nv, nq)
            u = sol.u_coeff[e] @ vf.T                 # (dim, nq)
            rho_f, sbar_f = pb.material.eval(e, np.clip(rf, 0.0, 1.0), xf)
            cdag_f = np.linalg.inv(sbar_f)
            tau = stabilization_matrix_batch(pb.stabilization, pb.omega,
                                             rho_f, cdag_f, nu)
            trac = a_dagger(nu) @ sig
            sighat = trac - np.einsum("qIJ,Jq->Iq", tau, u - lam_f)
            jump += sighat
            scale = max(scale, float(np.abs(sighat).max()))
        # project the jump onto the trace space before measuring it
        moments = np.einsum("q,Iq,qj->Ij", wf, jump, t_face)
        if fmass_ref is None or True:
            fmass = np.einsum("q,qi,qj->ij", wf, t_face, t_face)
        coeff = np.linalg.solve(fmass, moments.T).T   # (dim, nh)
        worst = max(worst, float(np.abs(coeff @ t_face.T).max()))
    return worst / scale
