import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import goafem as gf
from goafem.estimator import IndicatorField


def field(values):
    return IndicatorField(eta_sq=np.asarray(values, dtype=float))


def brute_force_min_cardinality(eta_sq, theta):
    """Smallest subset cardinality satisfying the Doerfler inequality."""
    n = eta_sq.shape[0]
    total = eta_sq.sum()
    masks = np.arange(2 ** n, dtype=np.uint32)
    bits = (masks[:, None] >> np.arange(n)[None, :]) & 1
    sums = bits @ eta_sq
    ok = sums >= theta * total - 1e-13 * total
    return int(bits[ok].sum(axis=1).min())


def test_hand_case():
    m = gf.doerfler_mark(field([9.0, 4.0, 1.0, 1.0]), 0.5)
    assert list(m) == [0]


def test_theta_one_marks_all_nonzero():
    m = gf.doerfler_mark(field([1.0, 0.0, 2.0, 0.0]), 1.0)
    assert sorted(m) == [0, 2]


def test_ties_broken_by_id():
    m = gf.doerfler_mark(field([1.0, 1.0, 1.0, 1.0]), 0.5)
    assert sorted(m) == [0, 1]


def test_zero_field():
    assert gf.doerfler_mark(field([0.0, 0.0]), 0.7).size == 0


def test_theta_range():
    with pytest.raises(ValueError):
        gf.doerfler_mark(field([1.0]), 0.0)
    with pytest.raises(ValueError):
        gf.doerfler_mark(field([1.0]), 1.5)


def test_doerfler_postcondition_and_minimality_randomized():
    rng = np.random.default_rng(42)
    for _ in range(100):
        n = int(rng.integers(1, 15))
        eta_sq = rng.random(n) ** 2
        if rng.random() < 0.2:
            eta_sq[rng.integers(0, n)] = 0.0
        theta = float(rng.uniform(0.05, 1.0))
        f = field(eta_sq)
        marked = gf.doerfler_mark(f, theta)
        assert gf.subset_total(f, marked) ** 2 >= theta * f.total_sq - 1e-12 * f.total_sq
        assert marked.size == brute_force_min_cardinality(eta_sq, theta)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(min_value=0.0, max_value=1e3), min_size=1, max_size=40),
       st.floats(min_value=0.01, max_value=1.0))
def test_doerfler_postcondition_property(values, theta):
    f = field(values)
    marked = gf.doerfler_mark(f, theta)
    if f.total_sq == 0.0:
        assert marked.size == 0
    else:
        assert gf.subset_total(f, marked) ** 2 >= theta * f.total_sq * (1.0 - 1e-12)


def test_combine_marks_sizes():
    fu = field([5.0, 4.0, 3.0, 2.0, 1.0, 0.5])
    fz = field([0.5, 1.0, 2.0, 3.0, 4.0, 5.0])
    mu = np.array([0, 1, 2])
    mz = np.array([5, 4, 3, 2, 1])
    m = gf.combine_marks(mu, mz, fu, fz)
    # all of the smaller set, top-3 of the larger one
    assert set(m) == {0, 1, 2} | {5, 4, 3}
    assert m.size <= 6


def test_combine_marks_equal_sets():
    fu = field([3.0, 2.0, 1.0])
    m = gf.combine_marks(np.array([0, 1]), np.array([0, 1]), fu, fu)
    assert sorted(m) == [0, 1]


def test_combine_marks_disjoint():
    fu = field([3.0, 2.0, 1.0, 1.0])
    m = gf.combine_marks(np.array([0, 1]), np.array([2, 3]), fu, fu)
    assert sorted(m) == [0, 1, 2, 3]


def test_combine_marks_empty_side():
    fu = field([1.0, 1.0])
    assert gf.combine_marks(np.array([0]), np.array([], dtype=np.int64), fu, fu).size == 0


def test_marking_on_mesh_fields(bench1):
    # end-to-end: Doerfler sets on true indicator fields keep their
    # defining inequality after recomputation
    mesh = gf.uniform_refine(gf.initial_mesh("unit-square"), 3)
    space = gf.build_space(mesh, 1)
    system = gf.assemble(space, bench1.problem)
    u = gf.solve_direct(system, "primal")
    z = gf.solve_direct(system, "dual")
    fu = gf.indicators(space, bench1.problem, u, "primal")
    fz = gf.indicators(space, bench1.problem, z, "dual")
    for theta in (0.2, 0.5, 0.9):
        mu = gf.doerfler_mark(fu, theta)
        mz = gf.doerfler_mark(fz, theta)
        assert gf.subset_total(fu, mu) ** 2 >= theta * fu.total_sq * (1 - 1e-12)
        assert gf.subset_total(fz, mz) ** 2 >= theta * fz.total_sq * (1 - 1e-12)
        m = gf.combine_marks(mu, mz, fu, fz)
        s = min(mu.size, mz.size)
        assert s <= m.size <= 2 * s
