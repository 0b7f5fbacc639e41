"""Contractive algebraic solver: local multigrid on the adaptive hierarchy.

One step is a symmetric V-cycle over all adaptive levels T_0 .. T_L:
lowest-order (hat function) damped Jacobi smoothing restricted to the
vertices created on each level (plus the endpoints of their bisected
edges), an exact solve on T_0, and on the finest space full smoothing --
pointwise for p = 1, damped additive vertex-patch blocks containing all
order-p dofs for p >= 2.  The same cycle acts as an SPD preconditioner
for the steepest-descent fallback (``kind='psd'``), whose exact energy
line search guarantees monotone error decay unconditionally.

Each step costs O(#T_L): the level sizes grow geometrically and the
local smoothing sets are proportional to the number of new vertices.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assemble import stiffness_matrix
from .space import DiscreteFunction, FeSpace


def _csr_entries(A, I, J):
    """Vectorized lookup A[I, J] (zeros where no stored entry)."""
    A = A.tocsr()
    if not A.has_sorted_indices:
        A.sort_indices()
    n = A.shape[1]
    rows = np.repeat(np.arange(A.shape[0], dtype=np.int64), np.diff(A.indptr))
    keys = rows * n + A.indices          # ascending: row-major with sorted columns
    q = I.astype(np.int64) * n + J.astype(np.int64)
    pos = np.searchsorted(keys, q)
    out = np.zeros(q.shape)
    if keys.size:
        pos = np.minimum(pos, keys.size - 1)
        match = keys[pos] == q
        out[match] = A.data[pos[match]]
    return out


def _p1_prolongation(coarse_mesh, fine_mesh, coarse_space, fine_space):
    """P1 free-dof prolongation through one refine step."""
    nv_c = coarse_mesh.n_vertices
    nv_f = fine_mesh.n_vertices
    n_new = nv_f - nv_c
    rows = np.concatenate([np.arange(nv_c),
                           np.repeat(np.arange(nv_c, nv_f), 2)])
    cols = np.concatenate([np.arange(nv_c), fine_mesh.new_vertex_edges.ravel()])
    vals = np.concatenate([np.ones(nv_c), np.full(2 * n_new, 0.5)])
    P = sp.coo_matrix((vals, (rows, cols)), shape=(nv_f, nv_c)).tocsr()
    return P[fine_space.free_dofs][:, coarse_space.free_dofs].tocsr()


def _p1_to_p_embedding(p1_space, p_space):
    """Nodal embedding of P1 into the order-p space on the same mesh."""
    mesh = p_space.mesh
    nv = mesh.n_vertices
    p = p_space.p
    rows = [np.arange(nv)]
    cols = [np.arange(nv)]
    vals = [np.ones(nv)]
    edges = mesh.edges
    ne = edges.shape[0]
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    if p == 2:
        r = nv + np.arange(ne)
        rows += [r, r]
        cols += [lo, hi]
        vals += [np.full(ne, 0.5), np.full(ne, 0.5)]
    elif p == 3:
        r0 = nv + 2 * np.arange(ne)
        rows += [r0, r0, r0 + 1, r0 + 1]
        cols += [lo, hi, lo, hi]
        vals += [np.full(ne, 2.0 / 3.0), np.full(ne, 1.0 / 3.0),
                 np.full(ne, 1.0 / 3.0), np.full(ne, 2.0 / 3.0)]
        rc = nv + 2 * ne + np.arange(mesh.n_triangles)
        for k in range(3):
            rows.append(rc)
            cols.append(mesh.triangles[:, k])
            vals.append(np.full(mesh.n_triangles, 1.0 / 3.0))
    E = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(p_space.n_dofs, nv)).tocsr()
    return E[p_space.free_dofs][:, p1_space.free_dofs].tocsr()


def _vertex_patches(space, A):
    """Vertex-patch blocks with all order-p dofs, batched by size."""
    mesh = space.mesh
    free_index = -np.ones(space.n_dofs, dtype=np.int64)
    free_index[space.free_dofs] = np.arange(space.n_free)

    nloc = space.cell_dofs.shape[1]
    fdofs = free_index[space.cell_dofs]                   # (nt, nloc)
    verts = np.repeat(mesh.triangles, nloc, axis=1)       # (nt, 3 * nloc)
    dofs = np.tile(fdofs, (1, 3)).reshape(mesh.n_triangles, 3 * nloc)
    keep = dofs.ravel() >= 0
    keys = verts.ravel()[keep].astype(np.int64) * space.n_free + dofs.ravel()[keep]
    keys = np.unique(keys)                                # sorted by (vertex, dof)
    pairs = np.stack([keys // space.n_free, keys % space.n_free], axis=1)

    sizes = np.bincount(pairs[:, 0], minlength=mesh.n_vertices)
    starts = np.concatenate([[0], np.cumsum(sizes)])
    batched = []
    for size in np.unique(sizes):
        if size == 0:
            continue
        vs = np.nonzero(sizes == size)[0]
        idx = pairs[(starts[vs][:, None] + np.arange(size)[None, :]).ravel(), 1]
        idx = idx.reshape(vs.size, size)
        I = np.repeat(idx, size, axis=1)
        J = np.tile(idx, (1, size))
        mats = _csr_entries(A, I.ravel(), J.ravel()).reshape(-1, size, size)
        inv = np.linalg.inv(mats)
        batched.append((idx, inv))
    return batched


class MultilevelPreconditioner:
    """Assembled multilevel data for one adaptive level.

    Built by :func:`build_preconditioner`; apply one contraction step
    with :func:`psi_step`.
    """

    def __init__(self, hierarchy, space, A_sym, omega=0.5, kind="vcycle"):
        if kind not in ("vcycle", "psd"):
            raise ValueError("solver kind must be 'vcycle' or 'psd'")
        if hierarchy.finest is not space.mesh:
            raise ValueError("hierarchy finest mesh does not match the space")
        if not 0.0 < omega <= 1.0:
            raise ValueError("damping factor omega must be in (0, 1]")
        self.space = space
        self.omega = omega
        self.kind = kind
        self.A_top = A_sym
        self.n = space.n_free
        self.p = space.p
        self.L = len(hierarchy) - 1

    def _reusable(self, other):
        return (other is not None and other.L == self.L - 1 and other.p == self.p
                and other.n > 0 and hasattr(other, "A1"))

    def _finish(self, hierarchy, problem_A, reuse=None):
        L = self.L
        space = self.space
        if self.n == 0:
            return

        # lower levels never change once built; an incremental build
        # only appends the newest one when the previous preconditioner of the
        # same run is supplied
        if self._reusable(reuse):
            self.p1_spaces = list(reuse.p1_spaces)
            self.A1 = list(reuse.A1)
            self.prolong = list(reuse.prolong)
            self.local_sets = list(reuse.local_sets)
            self.local_invdiag = list(reuse.local_invdiag)
            self.lu0 = reuse.lu0
            start = L
        else:
            self.p1_spaces = []
            self.A1 = []
            self.prolong = [None]
            self.local_sets = [None]
            self.local_invdiag = [None]
            self.lu0 = None
            start = 0

        for lvl in range(start, L + 1):
            if self.p == 1 and lvl == L:
                s1 = space
            else:
                s1 = FeSpace(hierarchy.levels[lvl], 1)
            self.p1_spaces.append(s1)
            if self.p == 1 and lvl == L:
                self.A1.append(self.A_top)
            else:
                self.A1.append(stiffness_matrix(s1, problem_A))
            if lvl == 0:
                if s1.n_free:
                    self.lu0 = spla.splu(self.A1[0].tocsc())
                continue
            self.prolong.append(_p1_prolongation(
                hierarchy.levels[lvl - 1], hierarchy.levels[lvl],
                self.p1_spaces[lvl - 1], self.p1_spaces[lvl]))
            # local smoothing set: new vertices plus bisected-edge endpoints
            fi = -np.ones(s1.n_dofs, dtype=np.int64)
            fi[s1.free_dofs] = np.arange(s1.n_free)
            verts = np.concatenate([hierarchy.new_vertices[lvl],
                                    hierarchy.new_vertex_edges[lvl].ravel()])
            loc = np.unique(fi[verts])
            loc = loc[loc >= 0]
            self.local_sets.append(loc)
            if loc.size:
                diag = self.A1[lvl].diagonal()[loc]
                self.local_invdiag.append(np.where(diag > 0.0, 1.0 / diag, 0.0))
            else:
                self.local_invdiag.append(np.zeros(0))

        # finest-space smoother; for p = 1 pointwise Jacobi is safe with
        # omega <= 1 (non-obtuse triangles make A an M-matrix, so the
        # Jacobi-preconditioned spectrum stays below 2), whereas the
        # overlapping patch blocks need a measured spectral rescaling
        if self.p == 1:
            diag = self.A_top.diagonal()
            self.top_invdiag = np.where(diag > 0.0, 1.0 / diag, 0.0)
            self.embed = None
        else:
            self.embed = _p1_to_p_embedding(self.p1_spaces[L], space)
            self.patches = _vertex_patches(space, self.A_top)
            self.patch_scale = 1.0
            self.patch_scale = 1.0 / (1.05 * self._patch_spectral_bound())

        if self.L == 0 and self.p >= 2:
            self.lu_top = spla.splu(self.A_top.tocsc())
        else:
            self.lu_top = None

    def _patch_spectral_bound(self, iters=12):
        """Power-iteration estimate of lambda_max of the additive patch
        operator in the energy inner product."""
        n = self.n
        u = np.cos(np.arange(n, dtype=float))
        lam = 1.0
        for _ in range(iters):
            v = self._smooth_top(self.A_top @ u)
            nrm = np.sqrt(max(v @ (self.A_top @ v), 1e-300))
            lam = max((u @ (self.A_top @ v)) / max(u @ (self.A_top @ u), 1e-300), 1e-12)
            u = v / nrm
        return max(lam, 1.0)

    def _smooth_top(self, r):
        if self.p == 1:
            return self.top_invdiag * r
        out = np.zeros_like(r)
        for idx, inv in self.patches:
            e = np.matmul(inv, r[idx][:, :, None])[:, :, 0]
            out += np.bincount(idx.ravel(), weights=e.ravel(), minlength=r.shape[0])
        return self.patch_scale * out

    def _smooth_local(self, lvl, r):
        loc = self.local_sets[lvl]
        e = np.zeros_like(r)
        if loc.size:
            e[loc] = self.local_invdiag[lvl] * r[loc]
        return e

    def apply(self, rhs, x):
        """One symmetric V-cycle for A_top x = rhs starting from x."""
        if self.n == 0:
            return x.copy()
        if self.L == 0:
            if self.p >= 2:
                return self.lu_top.solve(rhs)
            if self.lu0 is not None:
                return self.lu0.solve(rhs)
            return x.copy()

        om = self.omega
        A = self.A_top
        r = rhs - A @ x
        dx = om * self._smooth_top(r)
        x = x + dx
        r = r - A @ dx

        # down sweep through the P1 chain
        top_chain = self.L - 1 if self.p == 1 else self.L
        r_cur = r if self.p == 1 else self.embed.T @ r
        if self.p == 1:
            r_cur = self.prolong[self.L].T @ r_cur
        stored = {}
        for lvl in range(top_chain, 0, -1):
            e = om * self._smooth_local(lvl, r_cur)
            stored[lvl] = (r_cur, e)
            r_cur = self.prolong[lvl].T @ (r_cur - self.A1[lvl] @ e)
        e = self.lu0.solve(r_cur) if self.lu0 is not None else np.zeros(r_cur.shape[0])

        # up sweep, transposed smoothing order
        for lvl in range(1, top_chain + 1):
            r_lvl, e_pre = stored[lvl]
            e = self.prolong[lvl] @ e + e_pre
            e = e + om * self._smooth_local(lvl, r_lvl - self.A1[lvl] @ e)
        if self.p == 1:
            e = self.prolong[self.L] @ e
        else:
            e = self.embed @ e
        x = x + e

        r = rhs - A @ x
        x = x + om * self._smooth_top(r)
        return x

    def precondition(self, r):
        """SPD preconditioner action (V-cycle from a zero start)."""
        return self.apply(r, np.zeros_like(r))


def build_preconditioner(hierarchy, space, A_sym, problem_A=None, omega=0.5,
                         kind="vcycle", reuse=None):
    """Assemble the multilevel preconditioner for the current level.

    ``problem_A`` is the diffusion coefficient used to assemble the P1
    level matrices; identity by default, matching both benchmarks.
    Passing the previous level's preconditioner as ``reuse`` makes the
    build incremental (lower levels are immutable and shared).
    """
    if problem_A is None:
        problem_A = np.eye(2)
    pc = MultilevelPreconditioner(hierarchy, space, A_sym, omega=omega, kind=kind)
    pc._finish(hierarchy, problem_A, reuse=reuse)
    return pc


def psi_step(precond, A_sym, rhs, w):
    """One contraction step of the algebraic solver.

    Accepts and returns either plain coefficient arrays or
    :class:`DiscreteFunction`; the energy error decreases in every step
    and contracts strictly on nonzero error.
    """
    wrap = isinstance(w, DiscreteFunction)
    x = w.values if wrap else np.asarray(w, dtype=float)
    if x.shape[0] != precond.n:
        raise ValueError("iterate does not match preconditioner size")

    if precond.kind == "psd":
        if precond.n == 0:
            out = x.copy()
        else:
            r = rhs - A_sym @ x
            d = precond.precondition(r)
            denom = d @ (A_sym @ d)
            alpha = (r @ d) / denom if denom > 0.0 else 0.0
            out = x + alpha * d
    else:
        out = precond.apply(rhs, x)
    return DiscreteFunction(precond.space, out) if wrap else out
