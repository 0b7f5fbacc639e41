"""Lagrange finite element spaces on triangulations.

Global dof layout: vertex dofs first, then (p-1) dofs per edge ordered
along the edge from the smaller vertex id, then one interior dof per
triangle for p = 3.  Functions vanish on the Dirichlet boundary; the
coefficient vector of a :class:`DiscreteFunction` holds free dofs only.
"""

from dataclasses import dataclass

import numpy as np

from .basis import lagrange_basis
from .mesh import DIRICHLET

_LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])


class FeSpace:
    """Lagrange space of degree p with homogeneous Dirichlet constraints."""

    def __init__(self, mesh, p):
        if not 1 <= p <= 3:
            raise ValueError("polynomial degree must be between 1 and 3")
        self.mesh = mesh
        self.p = p
        self.basis = lagrange_basis(p)

        nv = mesh.n_vertices
        nt = mesh.n_triangles
        edges, tri_edges, _, _ = mesh._edge_data
        ne = edges.shape[0]
        per_edge = p - 1

        self.n_dofs = nv + per_edge * ne + (1 if p == 3 else 0) * nt

        cell_dofs = np.empty((nt, self.basis.n), dtype=np.int64)
        cell_dofs[:, :3] = mesh.triangles
        if p >= 2:
            for le in range(3):
                eids = tri_edges[:, le]
                if p == 2:
                    cell_dofs[:, 3 + le] = nv + eids
                else:
                    # local edge nodes are ordered from the first vertex of
                    # the local pair; global ones from the smaller vertex id
                    a = mesh.triangles[:, _LOCAL_EDGES[le, 0]]
                    b = mesh.triangles[:, _LOCAL_EDGES[le, 1]]
                    fwd = a < b
                    g0 = nv + 2 * eids
                    cell_dofs[:, 3 + 2 * le] = np.where(fwd, g0, g0 + 1)
                    cell_dofs[:, 3 + 2 * le + 1] = np.where(fwd, g0 + 1, g0)
        if p == 3:
            cell_dofs[:, 9] = nv + 2 * ne + np.arange(nt)
        self.cell_dofs = cell_dofs

        coords = np.empty((self.n_dofs, 2))
        coords[:nv] = mesh.vertices
        if p == 2:
            coords[nv:nv + ne] = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
        elif p == 3:
            lo = np.minimum(edges[:, 0], edges[:, 1])
            hi = np.maximum(edges[:, 0], edges[:, 1])
            plo, phi = mesh.vertices[lo], mesh.vertices[hi]
            coords[nv:nv + 2 * ne:2] = (2.0 * plo + phi) / 3.0
            coords[nv + 1:nv + 2 * ne:2] = (plo + 2.0 * phi) / 3.0
            cent = mesh.vertices[mesh.triangles].mean(axis=1)
            coords[nv + 2 * ne:] = cent
        self.dof_coords = coords

        free = np.ones(self.n_dofs, dtype=bool)
        if mesh.boundary_edges.shape[0]:
            dmask = mesh.boundary_labels == DIRICHLET
            dedges = mesh.boundary_edges[dmask]
            free[dedges.ravel()] = False
            if p >= 2:
                keys = edges[:, 0] * nv + edges[:, 1]
                dlo = dedges.min(axis=1).astype(np.int64)
                dhi = dedges.max(axis=1).astype(np.int64)
                pos = np.searchsorted(keys, dlo * nv + dhi)
                if p == 2:
                    free[nv + pos] = False
                else:
                    free[nv + 2 * pos] = False
                    free[nv + 2 * pos + 1] = False
        self.free_mask = free
        self.free_dofs = np.nonzero(free)[0]
        self.n_free = int(free.sum())

    @property
    def dim(self):
        return self.n_free

    def element_values(self, full_coeffs):
        """Per-element dof coefficients, shape (nt, n_local)."""
        return full_coeffs[self.cell_dofs]

    def full(self, free_coeffs):
        """Expand free-dof coefficients with zeros on Dirichlet dofs."""
        out = np.zeros(self.n_dofs)
        out[self.free_dofs] = free_coeffs
        return out


def build_space(mesh, p):
    """Spec entry point for space construction."""
    return FeSpace(mesh, p)


@dataclass
class DiscreteFunction:
    """Finite element function given by its free-dof coefficients."""

    space: FeSpace
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.space.n_free,):
            raise ValueError("coefficient vector does not match space dimension")

    def full(self):
        return self.space.full(self.values)

    def copy(self):
        return DiscreteFunction(self.space, self.values.copy())


def zero_function(space):
    return DiscreteFunction(space, np.zeros(space.n_free))


def grad_lambda(mesh):
    """Physical gradients of the barycentric coordinates, (nt, 3, 2)."""
    p = mesh.vertices[mesh.triangles]
    out = np.empty((mesh.n_triangles, 3, 2))
    two_area = 2.0 * mesh.areas
    for i in range(3):
        d = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
        out[:, i, 0] = -d[:, 1] / two_area
        out[:, i, 1] = d[:, 0] / two_area
    return out


def prolong(u, fine_space):
    """Embed ``u`` into the same-degree space on a one-step refinement.

    Exact because the spaces are nested: each fine Lagrange node is
    located inside (the closure of) a coarse element, found through the
    parent links, and the coarse polynomial is evaluated there.
    """
    coarse = u.space
    fine = fine_space
    if fine.p != coarse.p:
        raise ValueError("prolongation requires matching polynomial degrees")
    if fine.mesh.parent.min() < 0:
        raise ValueError("fine mesh has no parent links into the coarse mesh")

    # one adjacent fine element per dof
    owner = np.empty(fine.n_dofs, dtype=np.int64)
    nloc = fine.cell_dofs.shape[1]
    elem_ids = np.repeat(np.arange(fine.mesh.n_triangles), nloc)
    owner[fine.cell_dofs.ravel()] = elem_ids

    coarse_elem = fine.mesh.parent[owner]
    tri = coarse.mesh.triangles[coarse_elem]
    p0 = coarse.mesh.vertices[tri[:, 0]]
    p1 = coarse.mesh.vertices[tri[:, 1]]
    p2 = coarse.mesh.vertices[tri[:, 2]]
    x = fine.dof_coords

    d1 = p1 - p0
    d2 = p2 - p0
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    r = x - p0
    lam1 = (r[:, 0] * d2[:, 1] - r[:, 1] * d2[:, 0]) / det
    lam2 = (d1[:, 0] * r[:, 1] - d1[:, 1] * r[:, 0]) / det
    bary = np.stack([1.0 - lam1 - lam2, lam1, lam2], axis=1)

    vals = coarse.basis.eval(bary)                      # (n_dofs, nloc)
    coeffs = coarse.full(u.values)[coarse.cell_dofs[coarse_elem]]
    fine_full = (vals * coeffs).sum(axis=1)
    return DiscreteFunction(fine, fine_full[fine.free_dofs])
