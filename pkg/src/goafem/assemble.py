"""Assembly of the nonsymmetric form, its symmetric part and the loads.

The bilinear form is b(u, v) = a(u, v) + (b_conv . grad u + c u, v) with
principal part a(u, v) = (A grad u, grad v); the matrix convention is
B[i, j] = b(phi_j, phi_i).  The dual problem is solved with B^T, no
separate assembly.  Quadrature is exact for polynomials of degree
2p + 2, which covers all bilinear terms of the benchmarks.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import problem as prob
from .quadrature import triangle_rule
from .space import DiscreteFunction, grad_lambda

_CHUNK = 32768


def _element_tables(space, chunk):
    mesh = space.mesh
    bary, w = triangle_rule(2 * space.p + 2)
    val = space.basis.eval(bary)            # (nq, nd)
    dbary = space.basis.grad_bary(bary)     # (nq, nd, 3)
    nq, nd = val.shape
    dflat = dbary.reshape(nq * nd, 3)
    glam = grad_lambda(mesh)
    pts = mesh.vertices[mesh.triangles]
    for start in range(0, mesh.n_triangles, chunk):
        sl = slice(start, min(start + chunk, mesh.n_triangles))
        nc = sl.stop - sl.start
        x = np.matmul(bary[None, :, :], pts[sl])                   # (nc, nq, 2)
        grad = np.matmul(dflat[None, :, :], glam[sl]).reshape(nc, nq, nd, 2)
        yield sl, x, val, grad, mesh.areas[sl], w


def _is_identity(A_field):
    return (not callable(A_field)
            and np.array_equal(np.asarray(A_field, dtype=float).reshape(2, 2), np.eye(2)))


def _apply_diffusion(A_field, x, grad):
    """(A grad phi) at quadrature points, with constant-A fast paths."""
    if _is_identity(A_field):
        return grad
    if not callable(A_field):
        A = np.asarray(A_field, dtype=float).reshape(2, 2)
        return grad @ A.T
    Amat = prob.eval_matrix(A_field, x)
    return np.einsum("cqde,cqie->cqid", Amat, grad)


def _weighted_gram(scale, agrad, grad):
    """out[c, i, j] = sum_{q, d} scale[c, q] grad[c, q, i, d] agrad[c, q, j, d]."""
    nc, nq, nd, _ = grad.shape
    L = (scale[:, :, None, None] * grad).transpose(0, 1, 3, 2).reshape(nc, nq * 2, nd)
    R = agrad.transpose(0, 1, 3, 2).reshape(nc, nq * 2, nd)
    return np.matmul(L.transpose(0, 2, 1), R)


def assemble(space, problem, chunk=_CHUNK):
    """Assemble B, A_sym and the load vectors F, G on the free dofs."""
    n = space.n_dofs
    rows, cols, b_data, a_data = [], [], [], []
    F = np.zeros(n)
    G = np.zeros(n)

    checked_spd = False
    for sl, x, val, grad, areas, w in _element_tables(space, chunk):
        if not checked_spd:
            if not problem.spd_spot_check(x[: min(8, x.shape[0])].reshape(-1, 2)):
                raise ValueError("diffusion matrix A is not symmetric positive definite")
            checked_spd = True
        bfield = prob.eval_vector(problem.b_conv, x)
        c = prob.eval_scalar(problem.c, x)
        scale = 2.0 * areas[:, None] * w[None, :]

        agrad = _apply_diffusion(problem.A, x, grad)
        a_loc = _weighted_gram(scale, agrad, grad)
        conv = np.matmul(grad, bfield[:, :, :, None])[:, :, :, 0]
        conv += c[:, :, None] * val[None, :, :]
        b_loc = a_loc + np.matmul(val.T[None, :, :], scale[:, :, None] * conv)

        dofs = space.cell_dofs[sl]
        nd = dofs.shape[1]
        rows.append(np.repeat(dofs, nd, axis=1).ravel())
        cols.append(np.tile(dofs, (1, nd)).ravel())
        a_data.append(a_loc.ravel())
        b_data.append(b_loc.ravel())

        fval = prob.eval_scalar(problem.f, x)
        fvec = prob.eval_vector(problem.f_vec, x)
        gval = prob.eval_scalar(problem.g, x)
        gvec = prob.eval_vector(problem.g_vec, x)
        f_loc = np.einsum("cq,cq,qi->ci", scale, fval, val)
        f_loc += np.einsum("cq,cqd,cqid->ci", scale, fvec, grad)
        g_loc = np.einsum("cq,cq,qi->ci", scale, gval, val)
        g_loc += np.einsum("cq,cqd,cqid->ci", scale, gvec, grad)
        F += np.bincount(dofs.ravel(), weights=f_loc.ravel(), minlength=n)
        G += np.bincount(dofs.ravel(), weights=g_loc.ravel(), minlength=n)

    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    B = sp.coo_matrix((np.concatenate(b_data) if b_data else np.zeros(0), (rows, cols)),
                      shape=(n, n)).tocsr()
    A_sym = sp.coo_matrix((np.concatenate(a_data) if a_data else np.zeros(0), (rows, cols)),
                          shape=(n, n)).tocsr()

    free = space.free_dofs
    B = B[free][:, free].tocsr()
    A_sym = A_sym[free][:, free].tocsr()
    A_sym = (0.5 * (A_sym + A_sym.T)).tocsr()
    return AssembledSystem(space=space, B=B, A_sym=A_sym, F_vec=F[free], G_vec=G[free])


def stiffness_matrix(space, A_field, chunk=_CHUNK):
    """Free-dof matrix of the principal part only (multigrid levels)."""
    n = space.n_dofs
    rows, cols, data = [], [], []
    for sl, x, _, grad, areas, w in _element_tables(space, chunk):
        scale = 2.0 * areas[:, None] * w[None, :]
        agrad = _apply_diffusion(A_field, x, grad)
        a_loc = _weighted_gram(scale, agrad, grad)
        dofs = space.cell_dofs[sl]
        nd = dofs.shape[1]
        rows.append(np.repeat(dofs, nd, axis=1).ravel())
        cols.append(np.tile(dofs, (1, nd)).ravel())
        data.append(a_loc.ravel())
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    M = sp.coo_matrix((np.concatenate(data) if data else np.zeros(0), (rows, cols)),
                      shape=(n, n)).tocsr()
    free = space.free_dofs
    M = M[free][:, free].tocsr()
    return (0.5 * (M + M.T)).tocsr()


@dataclass
class AssembledSystem:
    """Sparse matrices and loads of one discrete level."""

    space: object
    B: sp.csr_matrix
    A_sym: sp.csr_matrix
    F_vec: np.ndarray
    G_vec: np.ndarray
    _lu: dict = field(default_factory=dict, repr=False)

    @property
    def n(self):
        return self.F_vec.shape[0]

    def solve_spd(self, rhs):
        """Direct solve with A_sym (cached factorization); test oracle."""
        if self.n == 0:
            return np.zeros(0)
        if "A" not in self._lu:
            self._lu["A"] = spla.splu(self.A_sym.tocsc())
        return self._lu["A"].solve(rhs)


def _coeffs(v):
    return v.values if isinstance(v, DiscreteFunction) else np.asarray(v, dtype=float)


def energy_norm(system, v):
    """Energy norm sqrt(v^T A_sym v)."""
    x = _coeffs(v)
    if x.shape != (system.n,):
        raise ValueError("coefficient vector does not match system size")
    if system.n == 0:
        return 0.0
    return float(np.sqrt(max(x @ (system.A_sym @ x), 0.0)))


def goal_value(system, u, z):
    """Corrected discrete goal G(u) + [F(z) - b(u, z)]."""
    uu = _coeffs(u)
    zz = _coeffs(z)
    if uu.shape != (system.n,) or zz.shape != (system.n,):
        raise ValueError("coefficient vector does not match system size")
    if system.n == 0:
        return 0.0
    return float(system.G_vec @ uu + system.F_vec @ zz - zz @ (system.B @ uu))


def solve_direct(system, which="primal"):
    """Direct Galerkin solve; diagnostics oracle, never on the cost path."""
    space = system.space
    if system.n == 0:
        return DiscreteFunction(space, np.zeros(0))
    if which == "primal":
        key, mat, rhs = "B", system.B, system.F_vec
    elif which == "dual":
        key, mat, rhs = "BT", system.B.T.tocsr(), system.G_vec
    else:
        raise ValueError("which must be 'primal' or 'dual'")
    if key not in system._lu:
        system._lu[key] = spla.splu(mat.tocsc())
    x = system._lu[key].solve(rhs)
    if not np.all(np.isfinite(x)):
        raise np.linalg.LinAlgError("direct solve produced non-finite values")
    res = np.linalg.norm(mat @ x - rhs)
    if res > 1e-12 * max(np.linalg.norm(rhs), 1e-300):
        raise np.linalg.LinAlgError("direct solve residual too large")
    return DiscreteFunction(space, x)


def export_matrix_market(system, prefix):
    """Debug export of the assembled matrices and loads."""
    from scipy.io import mmwrite

    mmwrite(f"{prefix}_B.mtx", system.B)
    mmwrite(f"{prefix}_Asym.mtx", system.A_sym)
    np.savetxt(f"{prefix}_F.txt", system.F_vec)
    np.savetxt(f"{prefix}_G.txt", system.G_vec)
