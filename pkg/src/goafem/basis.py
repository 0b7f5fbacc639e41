"""Lagrange basis functions on the reference triangle in barycentric form.

Each basis function is a short sum of monomials in the barycentric
coordinates (l0, l1, l2), so values and derivatives with respect to the
barycentric coordinates follow from exponent manipulation alone.  The
chain rule with the (constant) physical gradients of the barycentric
coordinates then gives physical gradients and Hessians.
"""

from functools import lru_cache

import numpy as np


class LagrangeBasis:
    """Nodal basis of total degree p on the reference triangle.

    Local node order: the three vertices, then per local edge
    (1,2), (2,0), (0,1) its p-1 interior nodes ordered from the first
    vertex of the pair, then the interior node (p = 3).
    """

    def __init__(self, p):
        if p not in (1, 2, 3):
            raise ValueError("polynomial degree must be 1, 2 or 3")
        self.p = p
        self.nodes, self._monomials = _build(p)
        self.n = len(self._monomials)

    def eval(self, bary):
        """Values at barycentric points; shape (..., n)."""
        bary = np.asarray(bary)
        out = np.zeros(bary.shape[:-1] + (self.n,))
        for k, mono in enumerate(self._monomials):
            for c, e in mono:
                out[..., k] += c * _power(bary, e)
        return out

    def grad_bary(self, bary):
        """Derivatives w.r.t. (l0, l1, l2); shape (..., n, 3)."""
        bary = np.asarray(bary)
        out = np.zeros(bary.shape[:-1] + (self.n, 3))
        for k, mono in enumerate(self._monomials):
            for c, e in mono:
                for d in range(3):
                    if e[d]:
                        ed = list(e)
                        ed[d] -= 1
                        out[..., k, d] += c * e[d] * _power(bary, tuple(ed))
        return out

    def hess_bary(self, bary):
        """Second derivatives w.r.t. barycentric pairs; shape (..., n, 3, 3)."""
        bary = np.asarray(bary)
        out = np.zeros(bary.shape[:-1] + (self.n, 3, 3))
        for k, mono in enumerate(self._monomials):
            for c, e in mono:
                for d1 in range(3):
                    if not e[d1]:
                        continue
                    for d2 in range(3):
                        e1 = list(e)
                        e1[d1] -= 1
                        if not e1[d2]:
                            continue
                        fac = c * e[d1] * e1[d2]
                        e1[d2] -= 1
                        out[..., k, d1, d2] += fac * _power(bary, tuple(e1))
        return out


def _power(bary, e):
    res = np.ones(bary.shape[:-1])
    for d in range(3):
        if e[d]:
            res = res * bary[..., d] ** e[d]
    return res


def _build(p):
    l0 = (1.0, (1, 0, 0))
    l1 = (1.0, (0, 1, 0))
    l2 = (1.0, (0, 0, 1))

    def vertex_node(i):
        n = [0.0, 0.0, 0.0]
        n[i] = 1.0
        return n

    if p == 1:
        nodes = [vertex_node(i) for i in range(3)]
        monos = [[l0], [l1], [l2]]
        return np.array(nodes), monos

    edges = [(1, 2), (2, 0), (0, 1)]
    if p == 2:
        nodes = [vertex_node(i) for i in range(3)]
        monos = []
        for i in range(3):
            e = [0, 0, 0]
            e[i] = 2
            # l_i (2 l_i - 1)
            monos.append([(2.0, tuple(e)), (-1.0, _unit(i))])
        for a, b in edges:
            n = [0.0, 0.0, 0.0]
            n[a] = 0.5
            n[b] = 0.5
            nodes.append(n)
            monos.append([(4.0, _pair(a, b))])
        return np.array(nodes), monos

    # p == 3
    nodes = [vertex_node(i) for i in range(3)]
    monos = []
    for i in range(3):
        # l_i (3 l_i - 1)(3 l_i - 2) / 2 = (9 l_i^3 - 9 l_i^2 + 2 l_i) / 2
        e3, e2, e1 = [0, 0, 0], [0, 0, 0], [0, 0, 0]
        e3[i], e2[i], e1[i] = 3, 2, 1
        monos.append([(4.5, tuple(e3)), (-4.5, tuple(e2)), (1.0, tuple(e1))])
    for a, b in edges:
        for first, second in ((a, b), (b, a)):
            n = [0.0, 0.0, 0.0]
            n[first] = 2.0 / 3.0
            n[second] = 1.0 / 3.0
            nodes.append(n)
            # (9/2) l_a l_b (3 l_first - 1)
            e = [0, 0, 0]
            e[a] += 1
            e[b] += 1
            elin = list(e)
            elin[first] += 1
            monos.append([(13.5, tuple(elin)), (-4.5, tuple(e))])
    nodes.append([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])
    monos.append([(27.0, (1, 1, 1))])
    return np.array(nodes), monos


def _unit(i):
    e = [0, 0, 0]
    e[i] = 1
    return tuple(e)


def _pair(a, b):
    e = [0, 0, 0]
    e[a] += 1
    e[b] += 1
    return tuple(e)


@lru_cache(maxsize=None)
def lagrange_basis(p):
    return LagrangeBasis(p)
