"""Conforming 2D triangle meshes with newest-vertex bisection.

The local vertex convention is fixed throughout: for a triangle
``(v0, v1, v2)`` the refinement edge is ``(v0, v1)``, i.e. the edge
opposite the newest vertex ``v2``.  Bisection inserts the midpoint of
the refinement edge as the new local vertex 2 of both children, so the
convention is preserved under refinement.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

DIRICHLET = 1
NEUMANN = 2

_LABEL_NAMES = {DIRICHLET: "dirichlet", NEUMANN: "neumann"}
_LABEL_CODES = {v: k for k, v in _LABEL_NAMES.items()}

# local edge i is opposite local vertex i; edge 2 is the refinement edge
_LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])


@dataclass(frozen=True, eq=False)
class Triangulation:
    """Immutable conforming triangle mesh.

    Attributes
    ----------
    vertices : (nv, 2) float array of vertex coordinates.
    triangles : (nt, 3) int array; refinement edge is (t[0], t[1]).
    boundary_edges : (nb, 2) int array of boundary vertex pairs.
    boundary_labels : (nb,) int array with DIRICHLET/NEUMANN codes.
    generation : (nt,) int array, bisection depth from the initial mesh.
    parent : (nt,) int array, containing element id in the previous mesh
        (-1 for an initial mesh).
    new_vertex_edges : (k, 2) int array; endpoints of the bisected edge
        for each vertex appended by the refine step that produced this
        mesh (empty for an initial mesh).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_labels: np.ndarray
    generation: np.ndarray
    parent: np.ndarray
    new_vertex_edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))

    def __post_init__(self):
        if np.any(self.signed_areas() <= 0.0):
            raise ValueError("triangulation contains a non-positively oriented triangle")

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    def signed_areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def areas(self):
        return self.signed_areas()

    @cached_property
    def _edge_data(self):
        """Unique undirected edges and their incidences.

        Returns (edges, tri_edges, edge_tri, edge_count) where
        ``edges`` is (ne, 2) with sorted vertex pairs, ``tri_edges`` maps
        each triangle to its three edge ids (local edge i opposite local
        vertex i), ``edge_tri`` lists up to two adjacent triangles per
        edge (-1 when absent) and ``edge_count`` the adjacency count.
        """
        nt = self.n_triangles
        raw = self.triangles[:, _LOCAL_EDGES].reshape(-1, 2)
        lo = raw.min(axis=1).astype(np.int64)
        hi = raw.max(axis=1).astype(np.int64)
        keys = lo * self.n_vertices + hi
        unique_keys, tri_edges_flat = np.unique(keys, return_inverse=True)
        ne = unique_keys.shape[0]
        edges = np.stack([unique_keys // self.n_vertices, unique_keys % self.n_vertices], axis=1)
        tri_edges = tri_edges_flat.reshape(nt, 3)

        order = np.argsort(tri_edges_flat, kind="stable")
        owner = order // 3
        edge_count = np.bincount(tri_edges_flat, minlength=ne)
        starts = np.concatenate([[0], np.cumsum(edge_count)])
        edge_tri = -np.ones((ne, 2), dtype=np.int64)
        has_one = edge_count >= 1
        edge_tri[has_one, 0] = owner[starts[:-1][has_one]]
        has_two = edge_count >= 2
        edge_tri[has_two, 1] = owner[starts[:-1][has_two] + 1]
        return edges, tri_edges, edge_tri, edge_count

    @property
    def edges(self):
        return self._edge_data[0]

    @property
    def tri_edges(self):
        return self._edge_data[1]

    @property
    def edge_tri(self):
        return self._edge_data[2]

    @cached_property
    def edge_labels(self):
        """Per-edge boundary label, -1 on interior edges."""
        edges = self.edges
        labels = -np.ones(edges.shape[0], dtype=np.int64)
        if self.boundary_edges.shape[0]:
            keys = edges[:, 0] * self.n_vertices + edges[:, 1]
            blo = self.boundary_edges.min(axis=1).astype(np.int64)
            bhi = self.boundary_edges.max(axis=1).astype(np.int64)
            bkeys = blo * self.n_vertices + bhi
            pos = np.searchsorted(keys, bkeys)
            ok = (pos < keys.shape[0]) & (keys[np.minimum(pos, keys.shape[0] - 1)] == bkeys)
            labels[pos[ok]] = self.boundary_labels[ok]
        return labels


def initial_mesh(domain):
    """Build the coarse mesh of one of the two benchmark domains.

    ``domain`` is ``"unit-square"`` (two triangles whose refinement
    edges meet on the diagonal; all boundary Dirichlet) or ``"zshape"``
    (the square (-1,1)^2 with the triangle conv{(0,0),(-1,0),(-1,-1)}
    removed; Dirichlet on the two cut segments, Neumann elsewhere).
    Refinement edges are the triangle hypotenuses, which makes the mesh
    admissible for newest-vertex bisection and keeps every descendant
    right isosceles.
    """
    name = str(domain).strip().lower().replace("_", "-")
    if name in ("unit-square", "unitsquare", "square"):
        vertices = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        triangles = np.array([[2, 0, 1], [0, 2, 3]])
        bnd = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])
        labels = np.full(4, DIRICHLET, dtype=np.int64)
    elif name in ("zshape", "z-shape"):
        vertices = np.array([
            [0.0, 0.0],    # reentrant corner
            [-1.0, -1.0],
            [0.0, -1.0],
            [1.0, -1.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
            [-1.0, 1.0],
            [-1.0, 0.0],
        ])
        triangles = np.array([
            [0, 1, 2],
            [3, 0, 2],
            [0, 3, 4],
            [5, 0, 4],
            [0, 5, 6],
            [7, 0, 6],
            [0, 7, 8],
        ])
        bnd = np.array([[8, 0], [0, 1], [1, 2], [2, 3], [3, 4], [4, 5], [5, 6], [6, 7], [7, 8]])
        labels = np.array([DIRICHLET, DIRICHLET] + [NEUMANN] * 7, dtype=np.int64)
    else:
        raise ValueError(f"unknown domain {domain!r}")
    nt = triangles.shape[0]
    return Triangulation(
        vertices=vertices,
        triangles=triangles.astype(np.int64),
        boundary_edges=bnd.astype(np.int64),
        boundary_labels=labels,
        generation=np.zeros(nt, dtype=np.int64),
        parent=-np.ones(nt, dtype=np.int64),
    )


def refine(mesh, marked, max_closure_sweeps=1000):
    """Newest-vertex bisection with conforming closure.

    Every element in ``marked`` is bisected at least once; the closure
    marks the refinement edge of any triangle that has a marked edge
    until a fixpoint is reached, which yields the coarsest conforming
    refinement.  Untouched elements are carried over unchanged (same
    parent id, same generation).
    """
    marked = np.unique(np.asarray(marked, dtype=np.int64))
    if marked.size and (marked.min() < 0 or marked.max() >= mesh.n_triangles):
        raise ValueError("marked set contains invalid element ids")
    if marked.size == 0:
        return Triangulation(
            vertices=mesh.vertices,
            triangles=mesh.triangles,
            boundary_edges=mesh.boundary_edges,
            boundary_labels=mesh.boundary_labels,
            generation=mesh.generation,
            parent=np.arange(mesh.n_triangles, dtype=np.int64),
        )

    edges, tri_edges, _, _ = mesh._edge_data
    ne = edges.shape[0]
    ref_edge = tri_edges[:, 2]

    edge_marked = np.zeros(ne, dtype=bool)
    edge_marked[ref_edge[marked]] = True
    for _ in range(max_closure_sweeps):
        tri_touched = edge_marked[tri_edges].any(axis=1)
        need = tri_touched & ~edge_marked[ref_edge]
        if not need.any():
            break
        edge_marked[ref_edge[need]] = True
    else:
        raise RuntimeError("conforming closure did not terminate; initial mesh not admissible")

    split = np.nonzero(edge_marked)[0]
    new_id = -np.ones(ne, dtype=np.int64)
    new_id[split] = mesh.n_vertices + np.arange(split.size)
    mid = 0.5 * (mesh.vertices[edges[split, 0]] + mesh.vertices[edges[split, 1]])
    vertices = np.vstack([mesh.vertices, mid])

    t = mesh.triangles
    m0 = new_id[tri_edges[:, 0]]
    m1 = new_id[tri_edges[:, 1]]
    m2 = new_id[tri_edges[:, 2]]
    split_t = m2 >= 0
    split_a = split_t & (m1 >= 0)
    split_b = split_t & (m0 >= 0)

    # child layout per parent: [A children..., B children...]
    n_children = np.where(split_t, 2 + split_a + split_b, 1)
    offsets = np.concatenate([[0], np.cumsum(n_children)])
    total = offsets[-1]

    new_tri = np.empty((total, 3), dtype=np.int64)
    new_gen = np.empty(total, dtype=np.int64)
    new_par = np.empty(total, dtype=np.int64)

    ids = np.arange(mesh.n_triangles)

    keep = ~split_t
    pos = offsets[:-1][keep]
    new_tri[pos] = t[keep]
    new_gen[pos] = mesh.generation[keep]
    new_par[pos] = ids[keep]

    # bisection of (a, b, c) at the midpoint m of (a, b) gives the
    # children (c, a, m) and (b, c, m); applied once more when a child's
    # refinement edge is also marked
    def _place(rows, tri_rows, gen, par):
        new_tri[rows] = tri_rows
        new_gen[rows] = gen
        new_par[rows] = par

    sa = split_t & ~split_a
    pos = offsets[:-1][sa]
    _place(pos, np.stack([t[sa, 2], t[sa, 0], m2[sa]], axis=1),
           mesh.generation[sa] + 1, ids[sa])

    da = split_a
    pos = offsets[:-1][da]
    _place(pos, np.stack([m2[da], t[da, 2], m1[da]], axis=1),
           mesh.generation[da] + 2, ids[da])
    _place(pos + 1, np.stack([t[da, 0], m2[da], m1[da]], axis=1),
           mesh.generation[da] + 2, ids[da])

    b_start = offsets[:-1] + 1 + split_a
    sb = split_t & ~split_b
    pos = b_start[sb]
    _place(pos, np.stack([t[sb, 1], t[sb, 2], m2[sb]], axis=1),
           mesh.generation[sb] + 1, ids[sb])

    db = split_b
    pos = b_start[db]
    _place(pos, np.stack([m2[db], t[db, 1], m0[db]], axis=1),
           mesh.generation[db] + 2, ids[db])
    _place(pos + 1, np.stack([t[db, 2], m2[db], m0[db]], axis=1),
           mesh.generation[db] + 2, ids[db])

    # rebuild boundary edges, splitting the marked ones
    blo = mesh.boundary_edges.min(axis=1).astype(np.int64)
    bhi = mesh.boundary_edges.max(axis=1).astype(np.int64)
    ekeys = edges[:, 0] * mesh.n_vertices + edges[:, 1]
    bpos = np.searchsorted(ekeys, blo * mesh.n_vertices + bhi)
    bmid = new_id[bpos]
    bsplit = bmid >= 0
    parts = []
    lparts = []
    if np.any(~bsplit):
        parts.append(mesh.boundary_edges[~bsplit])
        lparts.append(mesh.boundary_labels[~bsplit])
    if np.any(bsplit):
        a = mesh.boundary_edges[bsplit, 0]
        b = mesh.boundary_edges[bsplit, 1]
        m = bmid[bsplit]
        parts.append(np.concatenate([np.stack([a, m], axis=1), np.stack([m, b], axis=1)]))
        lab = mesh.boundary_labels[bsplit]
        lparts.append(np.concatenate([lab, lab]))
    boundary_edges = np.concatenate(parts) if parts else np.zeros((0, 2), dtype=np.int64)
    boundary_labels = np.concatenate(lparts) if lparts else np.zeros(0, dtype=np.int64)

    return Triangulation(
        vertices=vertices,
        triangles=new_tri,
        boundary_edges=boundary_edges,
        boundary_labels=boundary_labels,
        generation=new_gen,
        parent=new_par,
        new_vertex_edges=edges[split].copy(),
    )


def uniform_refine(mesh, n=1):
    """Refine every element ``n`` times."""
    for _ in range(n):
        mesh = refine(mesh, np.arange(mesh.n_triangles))
    return mesh


def is_conforming(mesh):
    """Exact combinatorial and geometric conformity check.

    True iff all triangles are positively oriented, every edge belongs
    to one or two triangles, the single-triangle edges coincide with the
    declared boundary, and no mesh vertex sits at the midpoint of an
    unsplit edge (hanging node).
    """
    if np.any(mesh.signed_areas() <= 0.0):
        return False
    edges, _, _, edge_count = mesh._edge_data
    if edge_count.max(initial=0) > 2:
        return False
    single = edges[edge_count == 1]
    skeys = set(map(tuple, np.sort(single, axis=1).tolist()))
    bkeys_list = list(map(tuple, np.sort(mesh.boundary_edges, axis=1).tolist()))
    bkeys = set(bkeys_list)
    if len(bkeys) != len(bkeys_list) or skeys != bkeys:
        return False
    # hanging vertices sit exactly at an edge midpoint (bisection arithmetic
    # reproduces the coordinates bitwise)
    vert_bytes = {v.tobytes() for v in mesh.vertices}
    mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    for row in mids:
        if row.tobytes() in vert_bytes:
            return False
    return True


def min_angle(mesh):
    """Smallest interior angle over all triangles, in radians."""
    p = mesh.vertices[mesh.triangles]
    angles = []
    for i in range(3):
        u = p[:, (i + 1) % 3] - p[:, i]
        v = p[:, (i + 2) % 3] - p[:, i]
        cosang = (u * v).sum(axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        angles.append(np.arccos(np.clip(cosang, -1.0, 1.0)))
    return float(np.min(angles))


class MeshHierarchy:
    """Nested sequence of triangulations produced by successive refines.

    Tracks, per level, the vertices created at that level together with
    the endpoints of their bisected parent edges; the local multigrid
    smoother works on exactly these patches.
    """

    def __init__(self, mesh):
        self.levels = [mesh]
        # level 0 owns all of its vertices
        self.new_vertices = [np.arange(mesh.n_vertices, dtype=np.int64)]
        self.new_vertex_edges = [np.zeros((0, 2), dtype=np.int64)]

    def append(self, mesh):
        prev = self.levels[-1]
        if mesh.n_vertices < prev.n_vertices:
            raise ValueError("appended mesh is not a refinement of the previous level")
        self.levels.append(mesh)
        self.new_vertices.append(np.arange(prev.n_vertices, mesh.n_vertices, dtype=np.int64))
        self.new_vertex_edges.append(mesh.new_vertex_edges)

    def __len__(self):
        return len(self.levels)

    @property
    def finest(self):
        return self.levels[-1]


def export_mesh(mesh, path):
    """Write the plain-text mesh format (header plus one record per line)."""
    with open(path, "w") as fh:
        fh.write(f"vertices {mesh.n_vertices}\n")
        fh.write(f"triangles {mesh.n_triangles}\n")
        fh.write(f"boundary {mesh.boundary_edges.shape[0]}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a} {b} {c}\n")
        for (a, b), lab in zip(mesh.boundary_edges, mesh.boundary_labels):
            fh.write(f"{a} {b} {_LABEL_NAMES[int(lab)]}\n")


def load_mesh(path):
    """Read a mesh written by :func:`export_mesh`."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    nv = int(lines[0].split()[1])
    nt = int(lines[1].split()[1])
    nb = int(lines[2].split()[1])
    body = lines[3:]
    vertices = np.array([[float(t) for t in body[i].split()] for i in range(nv)])
    triangles = np.array([[int(t) for t in body[nv + i].split()] for i in range(nt)], dtype=np.int64)
    bnd = np.zeros((nb, 2), dtype=np.int64)
    labels = np.zeros(nb, dtype=np.int64)
    for i in range(nb):
        a, b, name = body[nv + nt + i].split()
        bnd[i] = (int(a), int(b))
        labels[i] = _LABEL_CODES[name]
    return Triangulation(
        vertices=vertices,
        triangles=triangles,
        boundary_edges=bnd,
        boundary_labels=labels,
        generation=np.zeros(nt, dtype=np.int64),
        parent=-np.ones(nt, dtype=np.int64),
    )
