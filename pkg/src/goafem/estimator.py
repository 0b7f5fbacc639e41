"""Residual refinement indicators for the primal and dual problems.

Element terms use the weight |T|^(2/d) and edge terms |T|^(1/d) with
d = 2.  Interior-edge jump integrals are split half/half between the
two adjacent elements; Neumann edges contribute the full flux residual
to their single element.  Dirichlet edges contribute nothing.

The flux data (f_vec resp. g_vec) enters the edge terms through its
one-sided traces: it is evaluated at the edge quadrature points pulled
slightly into each adjacent element (relative offset 1e-6 toward the
centroid).  For data that is smooth across the edge the two traces
cancel in the jump; for characteristic-function data whose support
boundary lies on the edge they do not, so a flux kink that the discrete
solution has already resolved stops being counted as error.  The
divergence of the flux data enters through the user-supplied
``div_f_vec``/``div_g_vec`` fields and is zero by default, which is
exact for piecewise-constant data away from its discontinuity lines.

The indicators are affine in the coefficient vector; everything that
does not depend on the iterate is precomputed once per level in
:class:`EstimatorGeometry` and shared between the primal and the dual
workspace, so that the re-evaluation after every algebraic solver step
reduces to a few batched matrix products.
"""

from dataclasses import dataclass

import numpy as np

from . import problem as prob
from .assemble import _apply_diffusion
from .mesh import NEUMANN
from .quadrature import interval_rule, triangle_rule
from .space import DiscreteFunction, grad_lambda

_CHUNK = 32768


@dataclass
class IndicatorField:
    """Per-element squared indicators."""

    eta_sq: np.ndarray

    @property
    def total_sq(self):
        return float(self.eta_sq.sum())

    @property
    def total(self):
        return float(np.sqrt(self.eta_sq.sum()))

    def __len__(self):
        return self.eta_sq.shape[0]


def subset_total(field, subset):
    """sqrt of the squared indicators summed over an element subset."""
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size and (subset.min() < 0 or subset.max() >= len(field)):
        raise ValueError("subset contains invalid element ids")
    return float(np.sqrt(field.eta_sq[subset].sum()))


class EstimatorGeometry:
    """Iterate-independent tensors shared by primal and dual indicators."""

    def __init__(self, space, problem, chunk=_CHUNK):
        self.space = space
        self.problem = problem
        mesh = space.mesh
        p = space.p

        bary, w = triangle_rule(2 * p + 2)
        val = space.basis.eval(bary)
        dbary = space.basis.grad_bary(bary)
        d2bary = space.basis.hess_bary(bary) if p >= 2 else None
        glam = grad_lambda(mesh)
        pts = mesh.vertices[mesh.triangles]
        areas = mesh.areas
        self.sqrt_area = np.sqrt(areas)

        # per chunk: quadrature points, (b.grad phi), c*phi, A:Hess phi,
        # and the integration weights |T| * 2|T| w_q
        nq, nd = val.shape
        dflat = dbary.reshape(nq * nd, 3)
        if p >= 2:
            # A:Hess phi = sum_{b,e} d2 phi/dl_b dl_e (glam_b . A glam_e);
            # contracting the barycentric metric first avoids the full
            # Hessian tensor
            d2flat = d2bary.reshape(nq * nd, 9)
        self.elem_chunks = []
        for start in range(0, mesh.n_triangles, chunk):
            sl = slice(start, min(start + chunk, mesh.n_triangles))
            nc = sl.stop - sl.start
            x = np.matmul(bary[None, :, :], pts[sl])
            bfield = prob.eval_vector(problem.b_conv, x)
            cval = prob.eval_scalar(problem.c, x)
            grad = np.matmul(dflat[None, :, :], glam[sl]).reshape(nc, nq, nd, 2)
            conv = np.matmul(grad, bfield[:, :, :, None])[:, :, :, 0]
            if p >= 2:
                if callable(problem.A):
                    raise NotImplementedError(
                        "second-order residual terms need a constant diffusion matrix")
                A = np.asarray(problem.A, dtype=float).reshape(2, 2)
                metric = np.matmul(glam[sl] @ A, glam[sl].transpose(0, 2, 1))
                ahess = np.matmul(d2flat[None, :, :], metric.reshape(nc, 9)[:, :, None])
                ahess = ahess.reshape(nc, nq, nd)
            else:
                ahess = None
            qw = 2.0 * areas[sl][:, None] ** 2 * w[None, :]
            self.elem_chunks.append((sl, x, conv, cval, ahess, qw, val))

        # ---- edges ----
        edges, _, edge_tri, _ = mesh._edge_data
        labels = mesh.edge_labels
        t_pts, w_e = interval_rule(2 * p + 2)
        self.w_e = w_e

        tabs = np.zeros((9, t_pts.shape[0], space.basis.n, 3))
        for la in range(3):
            for lb in range(3):
                if la == lb:
                    continue
                bpts = np.zeros((t_pts.shape[0], 3))
                bpts[:, la] = 1.0 - t_pts
                bpts[:, lb] = t_pts
                tabs[la * 3 + lb] = space.basis.grad_bary(bpts)

        nq_e = t_pts.shape[0]
        nb = space.basis.n

        def side_tensor(eids, tris):
            a = edges[eids, 0]
            b = edges[eids, 1]
            tv = mesh.triangles[tris]
            la = np.argmax(tv == a[:, None], axis=1)
            lb = np.argmax(tv == b[:, None], axis=1)
            t6 = tabs[la * 3 + lb].reshape(-1, nq_e * nb, 3)
            grad = np.matmul(t6, glam[tris]).reshape(-1, nq_e, nb, 2)
            pa = mesh.vertices[a]
            pb = mesh.vertices[b]
            x = pa[:, None, :] + t_pts[None, :, None] * (pb - pa)[:, None, :]
            dvec = pb - pa
            n = np.stack([dvec[:, 1], -dvec[:, 0]], axis=1)
            n /= np.linalg.norm(n, axis=1, keepdims=True)
            cent = mesh.vertices[mesh.triangles[tris]].mean(axis=1)
            flip = ((cent - 0.5 * (pa + pb)) * n).sum(axis=1) > 0.0
            n[flip] *= -1.0
            agrad = _apply_diffusion(problem.A, x, grad)
            S = np.matmul(agrad.reshape(-1, nq_e * nb, 2), n[:, :, None])
            S = S.reshape(-1, nq_e, nb)
            # one-sided trace points for the flux data
            x_in = x + 1e-6 * (cent[:, None, :] - x)
            return S, n, x_in

        int_ids = np.nonzero(labels < 0)[0]
        if int_ids.size:
            left = edge_tri[int_ids, 0]
            right = edge_tri[int_ids, 1]
            S_l, n_l, x_l = side_tensor(int_ids, left)
            S_r, n_r, x_r = side_tensor(int_ids, right)
            elen = np.linalg.norm(mesh.vertices[edges[int_ids, 1]]
                                  - mesh.vertices[edges[int_ids, 0]], axis=1)
            # each side carries its own outward normal, so the jump is the
            # sum of the two one-sided fluxes
            self.int_data = (left, right, S_l, S_r, elen)
            self.int_sides = (n_l, x_l, n_r, x_r)
        else:
            self.int_data = None
            self.int_sides = None

        neu_ids = np.nonzero(labels == NEUMANN)[0]
        if neu_ids.size:
            tris = edge_tri[neu_ids, 0]
            S, n, x_in = side_tensor(neu_ids, tris)
            elen = np.linalg.norm(mesh.vertices[edges[neu_ids, 1]]
                                  - mesh.vertices[edges[neu_ids, 0]], axis=1)
            self.neu_data = (tris, S, n, x_in, elen)
        else:
            self.neu_data = None


class EstimatorWorkspace:
    """Residual tensors of one side (primal or dual) on one level."""

    def __init__(self, space, problem, which, geometry=None):
        if which not in ("primal", "dual"):
            raise ValueError("which must be 'primal' or 'dual'")
        if geometry is None:
            geometry = EstimatorGeometry(space, problem)
        if geometry.space is not space:
            raise ValueError("geometry was built for a different space")
        self.space = space
        self.which = which
        self.geo = geometry
        sign = 1.0 if which == "primal" else -1.0

        # element residual: r = R . coeffs + r0 with
        # R_i = -A:Hess phi_i + sign b.grad phi_i + c_eff phi_i
        self._elem = []
        for sl, x, conv, cval, ahess, qw, val in geometry.elem_chunks:
            if which == "dual":
                c_eff = cval - prob.eval_scalar(problem.div_b, x)
                load = prob.eval_scalar(problem.g, x)
                divd = prob.eval_scalar(problem.div_g_vec, x)
            else:
                c_eff = cval
                load = prob.eval_scalar(problem.f, x)
                divd = prob.eval_scalar(problem.div_f_vec, x)
            R = sign * conv + c_eff[:, :, None] * val[None, :, :]
            if ahess is not None:
                R = R - ahess
            self._elem.append((sl, np.ascontiguousarray(R), divd - load, qw))

        d_vec = problem.f_vec if which == "primal" else problem.g_vec
        if geometry.int_data is not None and not prob.is_zero(d_vec):
            n_l, x_l, n_r, x_r = geometry.int_sides
            self._int_flux0 = (np.einsum("xqd,xd->xq", prob.eval_vector(d_vec, x_l), n_l)
                               + np.einsum("xqd,xd->xq", prob.eval_vector(d_vec, x_r), n_r))
        else:
            self._int_flux0 = None

        if geometry.neu_data is not None:
            tris, S, n, x_in, elen = geometry.neu_data
            dvals = prob.eval_vector(d_vec, x_in)
            self._neu_flux0 = np.einsum("xqd,xd->xq", dvals, n)
        else:
            self._neu_flux0 = None

    def indicators(self, v):
        """Squared indicators of the iterate ``v``."""
        space = self.space
        geo = self.geo
        if isinstance(v, DiscreteFunction):
            full = v.full()
        else:
            full = space.full(np.asarray(v, dtype=float))
        coeffs = full[space.cell_dofs]

        eta_sq = np.zeros(space.mesh.n_triangles)
        for sl, R, r0, qw in self._elem:
            r = np.matmul(R, coeffs[sl][:, :, None])[:, :, 0] + r0
            eta_sq[sl] = (qw * r * r).sum(axis=1)

        w_e = geo.w_e
        if geo.int_data is not None:
            left, right, S_l, S_r, elen = geo.int_data
            jump = np.matmul(S_l, coeffs[left][:, :, None])[:, :, 0]
            jump += np.matmul(S_r, coeffs[right][:, :, None])[:, :, 0]
            if self._int_flux0 is not None:
                jump -= self._int_flux0
            contrib = elen * ((w_e[None, :] * jump) * jump).sum(axis=1)
            np.add.at(eta_sq, left, 0.5 * geo.sqrt_area[left] * contrib)
            np.add.at(eta_sq, right, 0.5 * geo.sqrt_area[right] * contrib)

        if geo.neu_data is not None:
            tris, S, _, _, elen = geo.neu_data
            res = np.matmul(S, coeffs[tris][:, :, None])[:, :, 0] - self._neu_flux0
            contrib = elen * ((w_e[None, :] * res) * res).sum(axis=1)
            np.add.at(eta_sq, tris, geo.sqrt_area[tris] * contrib)

        return IndicatorField(eta_sq=eta_sq)


def indicators(space, problem, v, which="primal"):
    """One-shot indicator computation (builds a workspace internally)."""
    return EstimatorWorkspace(space, problem, which).indicators(v)
